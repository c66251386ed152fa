//! The nine region-quality features and the SSIM used for calibration.
//!
//! Full-reference features compare a base-resolution region with its
//! emulated low-dpi version replicated back to base resolution. Edge density
//! is measured on the decimated image itself.

mod edges;
mod features;
mod residual;
mod spectral;
mod ssim;
mod tiles;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::raster::DpiLevel;

pub use edges::{canny_edges, edge_density, sobel_magnitude, tile_fraction, EdgeMap};
pub use features::{extract_features, extract_features_augmented, feature_vector};
pub use residual::{dsa, mse_tiles};
pub use spectral::psd_tiles;
pub use ssim::{ssim, tile_ssim, SSIM_C1, SSIM_C2};
pub use tiles::{tile_partition, tile_stats, Grid, TileView};

pub const NUM_FEATURES: usize = 9;

/// Feature indices in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Dsa = 0,
    PsdStd = 1,
    PsdMean = 2,
    EdStd = 3,
    EdMean = 4,
    TssimStd = 5,
    MseStd = 6,
    TssimMean = 7,
    MseMean = 8,
}

impl Feature {
    pub const ALL: [Feature; NUM_FEATURES] = [
        Feature::Dsa,
        Feature::PsdStd,
        Feature::PsdMean,
        Feature::EdStd,
        Feature::EdMean,
        Feature::TssimStd,
        Feature::MseStd,
        Feature::TssimMean,
        Feature::MseMean,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Feature> {
        Feature::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Feature::Dsa => "dsa",
            Feature::PsdStd => "psd_std",
            Feature::PsdMean => "psd_mean",
            Feature::EdStd => "ed_std",
            Feature::EdMean => "ed_mean",
            Feature::TssimStd => "tssim_std",
            Feature::MseStd => "mse_std",
            Feature::TssimMean => "tssim_mean",
            Feature::MseMean => "mse_mean",
        }
    }
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The nine features of one (region, dpi) pair, in canonical order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(pub [f64; NUM_FEATURES]);

impl FeatureVector {
    pub fn get(&self, f: Feature) -> f64 {
        self.0[f.index()]
    }

    pub fn set(&mut self, f: Feature, v: f64) {
        self.0[f.index()] = v;
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Checks finiteness and the per-feature ranges.
    pub fn is_valid(&self) -> bool {
        let nonneg = [
            Feature::Dsa,
            Feature::PsdStd,
            Feature::PsdMean,
            Feature::TssimStd,
            Feature::MseStd,
            Feature::MseMean,
        ];
        let eps = 1e-12;
        self.is_finite()
            && nonneg.iter().all(|&f| self.get(f) >= 0.0)
            && (0.0..=1.0 + eps).contains(&self.get(Feature::EdMean))
            && (0.0..=1.0 + eps).contains(&self.get(Feature::EdStd))
            && (-1.0 - eps..=1.0 + eps).contains(&self.get(Feature::TssimMean))
    }
}

/// Tile edge length used for a map living at `dpi`: 12, 8, 6, 4 pixels for
/// 300, 200, 150, 100 dpi, i.e. a constant 0.04 inch.
pub fn tile_size(dpi: DpiLevel) -> usize {
    match dpi {
        DpiLevel::D300 => 12,
        DpiLevel::D200 => 8,
        DpiLevel::D150 => 6,
        DpiLevel::D100 => 4,
    }
}

/// Dense scalar field, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Field {
    pub fn zeros(width: usize, height: usize) -> Self {
        Field {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    /// Sample with coordinates clamped into the field (replicate padding).
    #[inline]
    pub(crate) fn get_clamped(&self, x: isize, y: isize) -> f64 {
        let cx = x.clamp(0, self.width as isize - 1) as usize;
        let cy = y.clamp(0, self.height as isize - 1) as usize;
        self.data[cy * self.width + cx]
    }
}
