use super::{tile_partition, tile_stats, Field};
use crate::error::{Error, Result};
use crate::raster::GrayImage;

const DYNAMIC_RANGE: f64 = 255.0;
pub const SSIM_C1: f64 = (0.01 * DYNAMIC_RANGE) * (0.01 * DYNAMIC_RANGE);
pub const SSIM_C2: f64 = (0.03 * DYNAMIC_RANGE) * (0.03 * DYNAMIC_RANGE);
const WINDOW: usize = 11;
const WINDOW_SIGMA: f64 = 1.5;

#[inline]
fn ssim_index(mx: f64, my: f64, vx: f64, vy: f64, cxy: f64) -> f64 {
    ((2.0 * mx * my + SSIM_C1) * (2.0 * cxy + SSIM_C2)) / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
}

fn window_weights() -> Vec<f64> {
    let r = (WINDOW / 2) as f64;
    let w: Vec<f64> = (0..WINDOW)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * WINDOW_SIGMA * WINDOW_SIGMA)).exp()
        })
        .collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable filtering over positions where the window fits entirely.
fn filter_valid(data: &[f64], width: usize, height: usize, k: &[f64]) -> Field {
    let n = k.len();
    let ow = width - n + 1;
    let oh = height - n + 1;
    let mut rows = vec![0.0; ow * height];
    for y in 0..height {
        let line = &data[y * width..(y + 1) * width];
        for x in 0..ow {
            rows[y * ow + x] = k.iter().zip(&line[x..x + n]).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = Field::zeros(ow, oh);
    for y in 0..oh {
        for x in 0..ow {
            out.data[y * ow + x] = k.iter().enumerate().map(|(i, w)| w * rows[(y + i) * ow + x]).sum();
        }
    }
    out
}

/// Single-scale SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, L = 255, averaged over all valid window positions.
pub fn ssim(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    reference.same_dims(test)?;
    let (w, h) = (reference.width(), reference.height());
    if w < WINDOW || h < WINDOW {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: WINDOW,
        });
    }
    let x: Vec<f64> = reference.pixels().iter().map(|&p| f64::from(p)).collect();
    let y: Vec<f64> = test.pixels().iter().map(|&p| f64::from(p)).collect();
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a * b).collect();
    let k = window_weights();
    let mx = filter_valid(&x, w, h, &k);
    let my = filter_valid(&y, w, h, &k);
    let exx = filter_valid(&xx, w, h, &k);
    let eyy = filter_valid(&yy, w, h, &k);
    let exy = filter_valid(&xy, w, h, &k);
    let n = mx.data.len();
    let total: f64 = (0..n)
        .map(|i| {
            let (a, b) = (mx.data[i], my.data[i]);
            ssim_index(a, b, exx.data[i] - a * a, eyy.data[i] - b * b, exy.data[i] - a * b)
        })
        .sum();
    Ok(total / n as f64)
}

/// Tile-SSIM: one SSIM value per tile using a uniform window spanning the
/// tile, summarised as (mean, stddev) over tiles.
pub fn tile_ssim(reference: &GrayImage, test: &GrayImage, tile: usize) -> Result<(f64, f64)> {
    reference.same_dims(test)?;
    if tile < 4 {
        return Err(Error::MapTooSmall {
            width: reference.width(),
            height: reference.height(),
            tile,
        });
    }
    let per_tile: Vec<f64> = tile_partition(reference, tile)?
        .iter()
        .map(|t| {
            let n = t.area() as f64;
            let (mut sx, mut sy) = (0.0, 0.0);
            for (x, y) in t.cells() {
                sx += f64::from(reference.get(x, y));
                sy += f64::from(test.get(x, y));
            }
            let (mx, my) = (sx / n, sy / n);
            let (mut vx, mut vy, mut cxy) = (0.0, 0.0, 0.0);
            for (x, y) in t.cells() {
                let dx = f64::from(reference.get(x, y)) - mx;
                let dy = f64::from(test.get(x, y)) - my;
                vx += dx * dx;
                vy += dy * dy;
                cxy += dx * dy;
            }
            ssim_index(mx, my, vx / n, vy / n, cxy / n)
        })
        .collect();
    tile_stats(&per_tile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::DpiLevel;

    fn img(w: usize, h: usize, f: impl FnMut(usize, usize) -> u8) -> GrayImage {
        GrayImage::from_fn(w, h, DpiLevel::D300, f).unwrap()
    }

    #[test]
    fn constants() {
        assert!((SSIM_C1 - 6.5025).abs() < 1e-12);
        assert!((SSIM_C2 - 58.5225).abs() < 1e-12);
    }

    #[test]
    fn identity_is_exactly_one() {
        let a = img(23, 17, |x, y| ((x * 37 + y * 11 + x * y) % 256) as u8);
        assert_eq!(ssim(&a, &a).unwrap(), 1.0);
        assert_eq!(tile_ssim(&a, &a, 4).unwrap(), (1.0, 0.0));
    }

    #[test]
    fn symmetric() {
        let a = img(20, 20, |x, y| ((x * 37 + y * 11) % 256) as u8);
        let b = img(20, 20, |x, y| ((x * 7 + y * 101) % 256) as u8);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
        assert_eq!(tile_ssim(&a, &b, 5).unwrap(), tile_ssim(&b, &a, 5).unwrap());
    }

    #[test]
    fn black_vs_white() {
        let a = img(16, 16, |_, _| 0);
        let b = img(16, 16, |_, _| 255);
        let expected = SSIM_C1 / (255.0 * 255.0 + SSIM_C1);
        assert!((ssim(&a, &b).unwrap() - expected).abs() < 1e-9);
        assert!((expected - 1.0e-4).abs() < 1e-6);
    }

    #[test]
    fn errors() {
        let a = img(10, 20, |_, _| 0);
        assert!(matches!(ssim(&a, &a), Err(Error::ImageTooSmall { .. })));
        let b = img(12, 20, |_, _| 0);
        assert!(matches!(ssim(&a, &b), Err(Error::DimMismatch(..))));
        assert!(matches!(tile_ssim(&b, &b, 3), Err(Error::MapTooSmall { .. })));
        assert!(matches!(tile_ssim(&b, &b, 13), Err(Error::MapTooSmall { .. })));
    }
}
