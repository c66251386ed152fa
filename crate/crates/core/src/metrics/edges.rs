use std::collections::VecDeque;

use super::{tile_partition, tile_stats, Field};
use crate::error::{Error, Result};
use crate::raster::GrayImage;

const CANNY_SIGMA: f64 = 1.0;
const CANNY_RADIUS: usize = 2;
const CANNY_LOW: f64 = 0.1;
const CANNY_HIGH: f64 = 0.2;

/// Binary edge map; `1` marks an edge pixel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EdgeMap {
    pub width: usize,
    pub height: usize,
    pub edges: Vec<u8>,
}

impl EdgeMap {
    #[inline]
    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.edges[y * self.width + x]
    }

    pub fn count(&self) -> usize {
        self.edges.iter().map(|&e| usize::from(e)).sum()
    }
}

fn field_from(img: &GrayImage) -> Field {
    Field {
        width: img.width(),
        height: img.height(),
        data: img.pixels().iter().map(|&p| f64::from(p)).collect(),
    }
}

/// 3x3 Sobel responses with replicate padding.
fn sobel_gradients(f: &Field) -> (Field, Field) {
    let mut gx = Field::zeros(f.width, f.height);
    let mut gy = Field::zeros(f.width, f.height);
    for y in 0..f.height as isize {
        for x in 0..f.width as isize {
            let p = |dx: isize, dy: isize| f.get_clamped(x + dx, y + dy);
            let sx = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
            let sy = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            let i = y as usize * f.width + x as usize;
            gx.data[i] = sx;
            gy.data[i] = sy;
        }
    }
    (gx, gy)
}

/// Per-pixel Sobel gradient magnitude, replicate-padded at the borders.
pub fn sobel_magnitude(img: &GrayImage) -> Result<Field> {
    if img.width() < 3 || img.height() < 3 {
        return Err(Error::ImageTooSmall {
            width: img.width(),
            height: img.height(),
            min: 3,
        });
    }
    let (gx, gy) = sobel_gradients(&field_from(img));
    let data = gx.data.iter().zip(&gy.data).map(|(a, b)| a.hypot(*b)).collect();
    Ok(Field {
        width: img.width(),
        height: img.height(),
        data,
    })
}

fn gaussian_kernel(sigma: f64, radius: usize) -> Vec<f64> {
    let k: Vec<f64> = (0..=2 * radius)
        .map(|i| {
            let d = i as f64 - radius as f64;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

fn blur_replicate(f: &Field, kernel: &[f64]) -> Field {
    let r = (kernel.len() / 2) as isize;
    let mut tmp = Field::zeros(f.width, f.height);
    for y in 0..f.height as isize {
        for x in 0..f.width as isize {
            let v: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * f.get_clamped(x + k as isize - r, y))
                .sum();
            tmp.data[y as usize * f.width + x as usize] = v;
        }
    }
    let mut out = Field::zeros(f.width, f.height);
    for y in 0..f.height as isize {
        for x in 0..f.width as isize {
            let v: f64 = kernel
                .iter()
                .enumerate()
                .map(|(k, w)| w * tmp.get_clamped(x, y + k as isize - r))
                .sum();
            out.data[y as usize * f.width + x as usize] = v;
        }
    }
    out
}

/// Canny edge detector: 5x5 Gaussian (sigma 1), Sobel gradients,
/// non-maximum suppression along the quantised gradient direction, and
/// 8-connected hysteresis with thresholds at 0.1 and 0.2 of the largest
/// gradient magnitude.
pub fn canny_edges(img: &GrayImage) -> Result<EdgeMap> {
    let (w, h) = (img.width(), img.height());
    if w < 5 || h < 5 {
        return Err(Error::ImageTooSmall {
            width: w,
            height: h,
            min: 5,
        });
    }
    let smooth = blur_replicate(&field_from(img), &gaussian_kernel(CANNY_SIGMA, CANNY_RADIUS));
    let (gx, gy) = sobel_gradients(&smooth);
    let mag: Vec<f64> = gx.data.iter().zip(&gy.data).map(|(a, b)| a.hypot(*b)).collect();
    let max = mag.iter().cloned().fold(0.0, f64::max);
    let mut out = EdgeMap {
        width: w,
        height: h,
        edges: vec![0; w * h],
    };
    // Relative threshold guards against floating-point dust on flat input.
    if max <= 1e-9 {
        return Ok(out);
    }

    let at = |x: isize, y: isize| -> f64 {
        if x < 0 || y < 0 || x >= w as isize || y >= h as isize {
            0.0
        } else {
            mag[y as usize * w + x as usize]
        }
    };
    let mut thin = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let m = mag[i];
            if m <= 0.0 {
                continue;
            }
            let mut angle = gy.data[i].atan2(gx.data[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (dx, dy) = if !(22.5..157.5).contains(&angle) {
                (1, 0)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (0, 1)
            } else {
                (-1, 1)
            };
            let (xi, yi) = (x as isize, y as isize);
            let ahead = at(xi + dx, yi + dy);
            let behind = at(xi - dx, yi - dy);
            // Ties keep the pixel nearer the origin so plateaus thin to one pixel.
            if m >= ahead && m > behind {
                thin[i] = m;
            }
        }
    }

    let high = CANNY_HIGH * max;
    let low = CANNY_LOW * max;
    let mut queue = VecDeque::new();
    for (i, &m) in thin.iter().enumerate() {
        if m >= high {
            out.edges[i] = 1;
            queue.push_back(i);
        }
    }
    while let Some(i) = queue.pop_front() {
        let (x, y) = ((i % w) as isize, (i / w) as isize);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (nx, ny) = (x + dx, y + dy);
                if nx < 0 || ny < 0 || nx >= w as isize || ny >= h as isize {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if out.edges[j] == 0 && thin[j] >= low {
                    out.edges[j] = 1;
                    queue.push_back(j);
                }
            }
        }
    }
    Ok(out)
}

/// Per-tile fraction of edge pixels, summarised as (mean, stddev).
pub fn tile_fraction(map: &EdgeMap, tile: usize) -> Result<(f64, f64)> {
    let fractions: Vec<f64> = tile_partition(map, tile)?
        .iter()
        .map(|t| t.cells().filter(|&(x, y)| map.get(x, y) == 1).count() as f64 / t.area() as f64)
        .collect();
    tile_stats(&fractions)
}

/// Edge density of the decimated image at its own tile size.
pub fn edge_density(native_lowres: &GrayImage, tile: usize) -> Result<(f64, f64)> {
    if native_lowres.width() < tile || native_lowres.height() < tile {
        return Err(Error::MapTooSmall {
            width: native_lowres.width(),
            height: native_lowres.height(),
            tile,
        });
    }
    tile_fraction(&canny_edges(native_lowres)?, tile)
}
