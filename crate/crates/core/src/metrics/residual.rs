use super::{sobel_magnitude, tile_partition, tile_stats};
use crate::error::Result;
use crate::raster::GrayImage;

/// Differential spatial activity: RMS difference of the two Sobel magnitude
/// maps.
pub fn dsa(reference: &GrayImage, test: &GrayImage) -> Result<f64> {
    reference.same_dims(test)?;
    let a = sobel_magnitude(reference)?;
    let b = sobel_magnitude(test)?;
    let sum: f64 = a.data.iter().zip(&b.data).map(|(p, q)| (p - q) * (p - q)).sum();
    Ok((sum / a.data.len() as f64).sqrt())
}

/// Per-tile mean squared error summarised as (mean, stddev) over tiles.
pub fn mse_tiles(reference: &GrayImage, test: &GrayImage, tile: usize) -> Result<(f64, f64)> {
    reference.same_dims(test)?;
    let per_tile: Vec<f64> = tile_partition(reference, tile)?
        .iter()
        .map(|t| {
            let sum: f64 = t
                .cells()
                .map(|(x, y)| {
                    let d = f64::from(reference.get(x, y)) - f64::from(test.get(x, y));
                    d * d
                })
                .sum();
            sum / t.area() as f64
        })
        .collect();
    tile_stats(&per_tile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::raster::DpiLevel;

    fn img(w: usize, h: usize, f: impl FnMut(usize, usize) -> u8) -> GrayImage {
        GrayImage::from_fn(w, h, DpiLevel::D300, f).unwrap()
    }

    #[test]
    fn dsa_identity_and_symmetry() {
        let a = img(10, 9, |x, y| ((x * 31 + y * 7) % 256) as u8);
        let b = img(10, 9, |x, y| ((x * 11 + y * 41) % 256) as u8);
        assert_eq!(dsa(&a, &a).unwrap(), 0.0);
        assert_eq!(dsa(&a, &b).unwrap(), dsa(&b, &a).unwrap());
        assert!(dsa(&a, &b).unwrap() > 0.0);
        assert!(matches!(dsa(&a, &img(9, 9, |_, _| 0)), Err(Error::DimMismatch(..))));
    }

    #[test]
    fn mse_examples() {
        let a = img(24, 24, |x, y| ((x * 5 + y * 3) % 200) as u8);
        assert_eq!(mse_tiles(&a, &a, 12).unwrap(), (0.0, 0.0));
        let b = img(24, 24, |x, y| a.get(x, y) + 10);
        assert_eq!(mse_tiles(&a, &b, 12).unwrap(), (100.0, 0.0));
        assert!(matches!(mse_tiles(&a, &b, 25), Err(Error::MapTooSmall { .. })));
    }

    #[test]
    fn mse_per_tile_oracle() {
        let a = img(24, 24, |x, y| ((x * 17 + y * 23) % 256) as u8);
        let b = img(24, 24, |x, y| ((x * 13 + y * 5 + 40) % 256) as u8);
        let mut per = Vec::new();
        for ty in 0..2 {
            for tx in 0..2 {
                let mut s = 0.0;
                for y in 0..12 {
                    for x in 0..12 {
                        let d = a.get(tx * 12 + x, ty * 12 + y) as f64 - b.get(tx * 12 + x, ty * 12 + y) as f64;
                        s += d * d;
                    }
                }
                per.push(s / 144.0);
            }
        }
        let mean = per.iter().sum::<f64>() / 4.0;
        let std = (per.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 4.0).sqrt();
        let (m, s) = mse_tiles(&a, &b, 12).unwrap();
        assert!((m - mean).abs() < 1e-9);
        assert!((s - std).abs() < 1e-9);
    }
}
