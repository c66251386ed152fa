use super::{DpiLevel, GrayImage};
use crate::error::{Error, Result};

/// A region degraded to a candidate dpi, both at its native size and
/// replicated back onto the base-resolution grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmulatedPair {
    pub native_lowres: GrayImage,
    pub at_base: GrayImage,
}

/// Integer coverage weights of source cells for each output cell along one
/// axis. Lengths are measured in units of `1/out` source pixels so that every
/// overlap is an exact integer.
fn axis_weights(src: usize, out: usize) -> Vec<Vec<(usize, u64)>> {
    (0..out)
        .map(|i| {
            let lo = i * src;
            let hi = (i + 1) * src;
            let first = lo / out;
            let last = (hi - 1) / out;
            (first..=last)
                .filter_map(|j| {
                    let overlap = hi.min((j + 1) * out).saturating_sub(lo.max(j * out));
                    (overlap > 0).then_some((j, overlap as u64))
                })
                .collect()
        })
        .collect()
}

fn scaled_dim(dim: usize, base: DpiLevel, target: DpiLevel) -> usize {
    (dim * target.value() as usize / base.value() as usize).max(1)
}

/// Exact area-average decimation from `base_dpi` to `target_dpi`.
///
/// Each output pixel averages the source rectangle it covers, with
/// fractional coverage at cell boundaries, so non-integer factors such as
/// 300 to 200 dpi are handled and every source pixel contributes.
pub fn downsample_box(img: &GrayImage, base_dpi: DpiLevel, target_dpi: DpiLevel) -> Result<GrayImage> {
    if target_dpi > base_dpi {
        return Err(Error::UpsampleNotAllowed {
            base: base_dpi.value(),
            target: target_dpi.value(),
        });
    }
    if img.dpi() != base_dpi {
        return Err(Error::DpiMismatch {
            expected: base_dpi.value(),
            actual: img.dpi().value(),
        });
    }
    let (src_w, src_h) = (img.width(), img.height());
    let out_w = scaled_dim(src_w, base_dpi, target_dpi);
    let out_h = scaled_dim(src_h, base_dpi, target_dpi);
    let wx = axis_weights(src_w, out_w);
    let wy = axis_weights(src_h, out_h);
    let total = (src_w * src_h) as u64;

    let mut pixels = Vec::with_capacity(out_w * out_h);
    for row in &wy {
        for col in &wx {
            let mut acc = 0u64;
            for &(sy, ky) in row {
                let line = &img.pixels()[sy * src_w..(sy + 1) * src_w];
                for &(sx, kx) in col {
                    acc += ky * kx * u64::from(line[sx]);
                }
            }
            // round half up
            pixels.push(((2 * acc + total) / (2 * total)) as u8);
        }
    }
    GrayImage::new(out_w, out_h, target_dpi, pixels)
}

/// Nearest-neighbour enlargement; destination index `d` samples source index
/// `floor(d * src / out)`.
pub fn upsample_nearest(img: &GrayImage, base_dpi: DpiLevel, out_width: usize, out_height: usize) -> Result<GrayImage> {
    if out_width == 0 || out_height == 0 {
        return Err(Error::InvalidDimensions(format!(
            "zero output size {out_width}x{out_height}"
        )));
    }
    if out_width < img.width() || out_height < img.height() {
        return Err(Error::InvalidDimensions(format!(
            "output {out_width}x{out_height} smaller than source {}x{}",
            img.width(),
            img.height()
        )));
    }
    let cols: Vec<usize> = (0..out_width).map(|d| d * img.width() / out_width).collect();
    GrayImage::from_fn(out_width, out_height, base_dpi, |x, y| {
        img.get(cols[x], y * img.height() / out_height)
    })
}

/// Simulates scanning a base-resolution region at `target_dpi`.
pub fn emulate_dpi(region: &GrayImage, target_dpi: DpiLevel) -> Result<EmulatedPair> {
    if region.dpi() != DpiLevel::BASE {
        return Err(Error::DpiMismatch {
            expected: DpiLevel::BASE.value(),
            actual: region.dpi().value(),
        });
    }
    let native_lowres = downsample_box(region, DpiLevel::BASE, target_dpi)?;
    let at_base = upsample_nearest(&native_lowres, DpiLevel::BASE, region.width(), region.height())?;
    Ok(EmulatedPair {
        native_lowres,
        at_base,
    })
}
