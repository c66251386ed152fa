use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use super::{tile_partition, tile_stats, TileView};
use crate::error::Result;
use crate::raster::GrayImage;

/// Power spectrum `|F|^2 / n^2` of one `n`x`n` tile, bins in transposed order.
fn tile_power(img: &GrayImage, tile: &TileView, fft: &Arc<dyn Fft<f64>>, buf: &mut Vec<Complex<f64>>) -> Vec<f64> {
    let n = tile.size;
    buf.clear();
    buf.extend(tile.cells().map(|(x, y)| Complex::new(f64::from(img.get(x, y)), 0.0)));
    fft.process(buf);
    let mut cols = vec![Complex::new(0.0, 0.0); n * n];
    for r in 0..n {
        for c in 0..n {
            cols[c * n + r] = buf[r * n + c];
        }
    }
    fft.process(&mut cols);
    let norm = (n * n) as f64;
    cols.iter().map(|z| z.norm_sqr() / norm).collect()
}

/// Per-tile power spectrum difference: for aligned tiles, the mean over
/// frequency bins of `|P_ref - P_test|`, summarised as (mean, stddev).
pub fn psd_tiles(reference: &GrayImage, test: &GrayImage, tile: usize) -> Result<(f64, f64)> {
    reference.same_dims(test)?;
    let tiles = tile_partition(reference, tile)?;
    let fft = FftPlanner::new().plan_fft_forward(tile);
    let mut buf = Vec::with_capacity(tile * tile);
    let per_tile: Vec<f64> = tiles
        .iter()
        .map(|t| {
            let a = tile_power(reference, t, &fft, &mut buf);
            let b = tile_power(test, t, &fft, &mut buf);
            a.iter().zip(&b).map(|(p, q)| (p - q).abs()).sum::<f64>() / a.len() as f64
        })
        .collect();
    tile_stats(&per_tile)
}
