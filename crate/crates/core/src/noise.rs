//! Gaussian and salt-and-pepper degradation, and a search for the noise
//! strength that brings mean SSIM to a target value.
//!
//! Noise parameters live on the [0, 1] intensity scale: a Gaussian variance
//! of 0.0005 is a standard deviation of about 5.7 grey levels.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::ssim;
use crate::raster::GrayImage;
use crate::seed::{derive_seed, rng};

pub const MAX_GAUSSIAN_VARIANCE: f64 = 0.25;
pub const MAX_SALT_PEPPER_DENSITY: f64 = 0.5;
const MAX_BISECTION_STEPS: usize = 40;
const GRID_SCAN_POINTS: usize = 65;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    #[serde(alias = "sp")]
    SaltPepper,
}

impl NoiseKind {
    /// Upper end of the parameter range searched by calibration.
    pub fn max_parameter(self) -> f64 {
        match self {
            NoiseKind::Gaussian => MAX_GAUSSIAN_VARIANCE,
            NoiseKind::SaltPepper => MAX_SALT_PEPPER_DENSITY,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::SaltPepper => "salt_pepper",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub parameter: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, parameter: f64, seed: u64) -> Result<Self> {
        if !parameter.is_finite() || parameter < 0.0 || parameter > kind.max_parameter() {
            return Err(Error::InvalidNoiseParameter(format!(
                "{} parameter {parameter} outside [0, {}]",
                kind.name(),
                kind.max_parameter()
            )));
        }
        Ok(NoiseSpec { kind, parameter, seed })
    }

    pub fn apply(&self, img: &GrayImage) -> Result<GrayImage> {
        match self.kind {
            NoiseKind::Gaussian => add_gaussian(img, self.parameter, self.seed),
            NoiseKind::SaltPepper => add_salt_pepper(img, self.parameter, self.seed),
        }
    }
}

/// Adds zero-mean Gaussian noise of `variance` on the [0, 1] scale, clamps,
/// and requantises to 8 bits.
pub fn add_gaussian(img: &GrayImage, variance: f64, seed: u64) -> Result<GrayImage> {
    if !variance.is_finite() || !(0.0..=MAX_GAUSSIAN_VARIANCE).contains(&variance) {
        return Err(Error::InvalidNoiseParameter(format!("gaussian variance {variance}")));
    }
    if variance == 0.0 {
        return Ok(img.clone());
    }
    let normal = Normal::new(0.0, variance.sqrt()).expect("finite positive stddev");
    let mut rng = rng(seed);
    let pixels = img
        .pixels()
        .iter()
        .map(|&p| {
            let v = f64::from(p) / 255.0 + normal.sample(&mut rng);
            (v.clamp(0.0, 1.0) * 255.0).round() as u8
        })
        .collect();
    GrayImage::new(img.width(), img.height(), img.dpi(), pixels)
}

/// Sets exactly `round(density * w * h)` distinct pixels to 0 or 255.
///
/// Positions come from a seeded shuffle, so for a fixed seed a larger
/// density corrupts a superset of the pixels a smaller one does.
pub fn add_salt_pepper(img: &GrayImage, density: f64, seed: u64) -> Result<GrayImage> {
    let (out, _) = salt_pepper_with_positions(img, density, seed)?;
    Ok(out)
}

/// As [`add_salt_pepper`], also returning the corrupted positions.
pub fn salt_pepper_with_positions(img: &GrayImage, density: f64, seed: u64) -> Result<(GrayImage, Vec<usize>)> {
    if !density.is_finite() || !(0.0..=MAX_SALT_PEPPER_DENSITY).contains(&density) {
        return Err(Error::InvalidNoiseParameter(format!("salt-and-pepper density {density}")));
    }
    let len = img.pixels().len();
    let count = (density * len as f64).round() as usize;
    let mut rng = rng(seed);
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(&mut rng);
    order.truncate(count);
    let mut pixels = img.pixels().to_vec();
    for &pos in &order {
        pixels[pos] = if rng.random_bool(0.5) { 255 } else { 0 };
    }
    let out = GrayImage::new(img.width(), img.height(), img.dpi(), pixels)?;
    Ok((out, order))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTarget {
    pub target_mean_ssim: f64,
    pub tolerance: f64,
    /// Spread of SSIM among human-rejected images; reported, not used.
    pub reference_std: f64,
}

impl Default for CalibrationTarget {
    fn default() -> Self {
        CalibrationTarget {
            target_mean_ssim: 0.63,
            tolerance: 0.01,
            reference_std: 0.06,
        }
    }
}

impl CalibrationTarget {
    pub fn new(target_mean_ssim: f64, tolerance: f64) -> Result<Self> {
        if !(target_mean_ssim > 0.0 && target_mean_ssim <= 1.0) || !(tolerance > 0.0) {
            return Err(Error::InvalidNoiseParameter(format!(
                "calibration target {target_mean_ssim} tolerance {tolerance}"
            )));
        }
        Ok(CalibrationTarget {
            target_mean_ssim,
            tolerance,
            ..Default::default()
        })
    }
}

/// Outcome of a calibration search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub kind: NoiseKind,
    pub parameter: f64,
    pub mean_ssim: f64,
    pub evaluations: usize,
    /// True when the monotonicity check failed and a grid scan was used.
    pub grid_fallback: bool,
}

/// Seed of the noise realisation applied to calibration image `index`.
pub fn calibration_seed(seed: u64, kind: NoiseKind, index: usize) -> u64 {
    derive_seed(seed, &[kind as u64, index as u64])
}

/// Mean SSIM between each image and its noisy copy at `parameter`.
pub fn mean_noisy_ssim(kind: NoiseKind, images: &[GrayImage], parameter: f64, seed: u64) -> Result<f64> {
    let mut total = 0.0;
    for (i, img) in images.iter().enumerate() {
        let noisy = NoiseSpec::new(kind, parameter, calibration_seed(seed, kind, i))?.apply(img)?;
        total += ssim(img, &noisy)?;
    }
    Ok(total / images.len() as f64)
}

/// Finds a noise parameter whose mean SSIM over `images` is within the
/// target tolerance.
pub fn calibrate_noise(kind: NoiseKind, images: &[GrayImage], target: CalibrationTarget, seed: u64) -> Result<Calibration> {
    if images.is_empty() {
        return Err(Error::EmptyInput);
    }
    for img in images {
        if img.width() < 11 || img.height() < 11 {
            return Err(Error::ImageTooSmall {
                width: img.width(),
                height: img.height(),
                min: 11,
            });
        }
    }
    let mut failure = None;
    let mut response = |p: f64| match mean_noisy_ssim(kind, images, p, seed) {
        Ok(v) => v,
        Err(e) => {
            failure.get_or_insert(e);
            f64::NAN
        }
    };
    let result = calibrate_response(&mut response, kind.max_parameter(), target);
    if let Some(e) = failure {
        return Err(e);
    }
    let (parameter, mean_ssim, evaluations, grid_fallback) = result?;
    Ok(Calibration {
        kind,
        parameter,
        mean_ssim,
        evaluations,
        grid_fallback,
    })
}

/// Calibration core over an arbitrary response curve `f(p)` on
/// `[0, p_max]`, expected to be non-increasing.
///
/// A five-point ladder checks monotonicity; if it holds, bisection runs for
/// at most 40 steps, otherwise a uniform grid scan picks the closest point.
/// Returns `(parameter, response, evaluations, used_grid)`.
pub fn calibrate_response(
    f: &mut dyn FnMut(f64) -> f64,
    p_max: f64,
    target: CalibrationTarget,
) -> Result<(f64, f64, usize, bool)> {
    let goal = target.target_mean_ssim;
    let tol = target.tolerance;
    let mut evals = 0usize;
    let mut eval = |p: f64, evals: &mut usize| {
        *evals += 1;
        f(p)
    };

    let ladder: Vec<f64> = (0..5).map(|i| p_max * i as f64 / 4.0).collect();
    let values: Vec<f64> = ladder.iter().map(|&p| eval(p, &mut evals)).collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidNoiseParameter("non-finite calibration response".into()));
    }
    let mut best = (ladder[0], values[0]);
    for (&p, &v) in ladder.iter().zip(&values) {
        if (v - goal).abs() < (best.1 - goal).abs() {
            best = (p, v);
        }
    }
    if (values[0] - goal).abs() <= tol {
        return Ok((0.0, values[0], evals, false));
    }
    if values[4] > goal + tol {
        return Err(Error::TargetUnreachable {
            target: goal,
            achieved: values[4],
        });
    }
    let monotone = values.windows(2).all(|w| w[1] <= w[0]);
    if !monotone {
        let mut best = (0.0, f64::NAN);
        for i in 0..GRID_SCAN_POINTS {
            let p = p_max * i as f64 / (GRID_SCAN_POINTS - 1) as f64;
            let v = eval(p, &mut evals);
            if best.1.is_nan() || (v - goal).abs() < (best.1 - goal).abs() {
                best = (p, v);
            }
        }
        return Ok((best.0, best.1, evals, true));
    }
    if (best.1 - goal).abs() <= tol {
        return Ok((best.0, best.1, evals, false));
    }

    // bracket: f(lo) > goal >= f(hi)
    let idx = values.iter().position(|&v| v <= goal).unwrap_or(4);
    let (mut lo, mut hi) = (ladder[idx.saturating_sub(1)], ladder[idx]);
    for _ in 0..MAX_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let v = eval(mid, &mut evals);
        if (v - goal).abs() < (best.1 - goal).abs() {
            best = (mid, v);
        }
        if (v - goal).abs() <= tol {
            return Ok((mid, v, evals, false));
        }
        if v > goal {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((best.0, best.1, evals, false))
}
