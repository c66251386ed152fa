use super::{EdgeMap, Field};
use crate::error::{Error, Result};
use crate::raster::GrayImage;

/// Anything laid out on a rectangular pixel grid.
pub trait Grid {
    fn dims(&self) -> (usize, usize);
}

impl Grid for Field {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

impl Grid for GrayImage {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }
}

impl Grid for EdgeMap {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }
}

/// A `size`x`size` block with top-left corner `(x, y)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileView {
    pub x: usize,
    pub y: usize,
    pub size: usize,
}

impl TileView {
    /// Pixel coordinates covered by the tile, row-major.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (self.y..self.y + self.size).flat_map(move |y| (self.x..self.x + self.size).map(move |x| (x, y)))
    }

    pub fn area(&self) -> usize {
        self.size * self.size
    }
}

/// Non-overlapping tiles in row-major order; partial tiles at the right and
/// bottom edges are dropped.
pub fn tile_partition<G: Grid + ?Sized>(map: &G, tile: usize) -> Result<Vec<TileView>> {
    let (width, height) = map.dims();
    if tile == 0 || width < tile || height < tile {
        return Err(Error::MapTooSmall { width, height, tile });
    }
    let mut tiles = Vec::with_capacity((width / tile) * (height / tile));
    for ty in 0..height / tile {
        for tx in 0..width / tile {
            tiles.push(TileView {
                x: tx * tile,
                y: ty * tile,
                size: tile,
            });
        }
    }
    Ok(tiles)
}

/// Mean and population standard deviation of per-tile values.
pub fn tile_stats(values: &[f64]) -> Result<(f64, f64)> {
    if values.is_empty() {
        return Err(Error::MapTooSmall {
            width: 0,
            height: 0,
            tile: 0,
        });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn partition_counts() {
        assert_eq!(tile_partition(&Field::zeros(24, 24), 12).unwrap().len(), 4);
        let t = tile_partition(&Field::zeros(25, 25), 12).unwrap();
        assert_eq!(t.len(), 4);
        assert_eq!(t[1], TileView { x: 12, y: 0, size: 12 });
        assert_eq!(t[2], TileView { x: 0, y: 12, size: 12 });
        assert!(matches!(
            tile_partition(&Field::zeros(30, 11), 12),
            Err(Error::MapTooSmall { .. })
        ));
    }

    #[test]
    fn tile_cells_row_major() {
        let t = TileView { x: 2, y: 1, size: 2 };
        let cells: Vec<_> = t.cells().collect();
        assert_eq!(cells, vec![(2, 1), (3, 1), (2, 2), (3, 2)]);
    }

    #[test]
    fn stats_examples() {
        assert_eq!(tile_stats(&[5.0, 5.0, 5.0]).unwrap(), (5.0, 0.0));
        assert_eq!(tile_stats(&[0.0, 2.0]).unwrap(), (1.0, 1.0));
        assert!(tile_stats(&[]).is_err());
    }

    proptest! {
        #[test]
        fn stats_match_naive(values in proptest::collection::vec(-1e3f64..1e3, 1..50)) {
            let (mean, std) = tile_stats(&values).unwrap();
            // one-pass sums as an independent route
            let n = values.len() as f64;
            let s: f64 = values.iter().sum();
            let s2: f64 = values.iter().map(|v| v * v).sum();
            let m = s / n;
            let var = (s2 / n - m * m).max(0.0);
            prop_assert!((mean - m).abs() < 1e-9);
            prop_assert!((std * std - var).abs() < 1e-6 * (1.0 + var));
        }
    }
}
