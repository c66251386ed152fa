use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::manifest::{CorpusManifest, RegionImage};
use super::ratings::{aggregate_ratings, BinarizeMode, RatingKey, RatingRecord};
use crate::error::{Error, Result};
use crate::eval::{Origin, Sample};
use crate::learn::Label;
use crate::metrics::{extract_features, extract_features_augmented, ssim};
use crate::noise::{calibrate_noise, Calibration, CalibrationTarget, NoiseKind, NoiseSpec};
use crate::raster::{emulate_dpi, DpiLevel};
use crate::seed::{derive_seed, hash_str};

/// Noisy copies added to the training data as extra unacceptable samples.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub gaussian_copies: usize,
    pub salt_pepper_copies: usize,
    /// Fixed variance; `None` calibrates it against `target`.
    pub gaussian_variance: Option<f64>,
    /// Fixed density; `None` calibrates it against `target`.
    pub salt_pepper_density: Option<f64>,
    pub target: CalibrationTarget,
    pub seed: u64,
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        AugmentationPlan {
            gaussian_copies: 0,
            salt_pepper_copies: 0,
            gaussian_variance: None,
            salt_pepper_density: None,
            target: CalibrationTarget::default(),
            seed: 0,
        }
    }
}

impl AugmentationPlan {
    pub fn copies(gaussian: usize, salt_pepper: usize, seed: u64) -> Self {
        AugmentationPlan {
            gaussian_copies: gaussian,
            salt_pepper_copies: salt_pepper,
            seed,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.gaussian_copies == 0 && self.salt_pepper_copies == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionFailure {
    pub region_id: String,
    pub dpi: Option<DpiLevel>,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<Sample>,
    pub failures: Vec<RegionFailure>,
    pub calibrations: Vec<Calibration>,
}

/// Seed of augmented copy `copy` of `region_id`.
pub fn augmentation_seed(seed: u64, kind: NoiseKind, region_id: &str, copy: usize) -> u64 {
    derive_seed(seed, &[0x0061_7567, kind as u64, hash_str(region_id), copy as u64])
}

pub fn build_dataset(
    manifest: &CorpusManifest,
    ratings: &[RatingRecord],
    plan: &AugmentationPlan,
    mode: BinarizeMode,
) -> Result<Dataset> {
    let regions = manifest.raster_regions()?;
    let labels = aggregate_ratings(ratings, mode);
    build_samples(&regions, &labels, plan)
}

/// Rated samples for every labelled (region, dpi) present in `regions`,
/// followed by the augmented copies of every rated region.
pub fn build_samples(
    regions: &[RegionImage],
    labels: &BTreeMap<RatingKey, Label>,
    plan: &AugmentationPlan,
) -> Result<Dataset> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let rated: Vec<(&RegionImage, Vec<(DpiLevel, Label)>)> = regions
        .iter()
        .map(|r| {
            let dpis = DpiLevel::ASCENDING
                .into_iter()
                .filter_map(|d| labels.get(&(r.id.clone(), d)).map(|l| (d, *l)))
                .collect::<Vec<_>>();
            (r, dpis)
        })
        .filter(|(_, d)| !d.is_empty())
        .collect();
    if rated.is_empty() {
        return Err(Error::ParseError("no rating refers to a region in the manifest".into()));
    }

    let mut samples = Vec::new();
    let mut failures = Vec::new();
    let rows: Vec<Vec<std::result::Result<Sample, RegionFailure>>> = rated
        .par_iter()
        .map(|(r, dpis)| {
            dpis.iter()
                .map(|&(dpi, label)| {
                    emulate_dpi(&r.image, dpi)
                        .and_then(|pair| extract_features(&r.image, &pair, dpi))
                        .map(|features| Sample {
                            region_id: r.id.clone(),
                            dpi,
                            origin: Origin::Rated,
                            label,
                            features,
                        })
                        .map_err(|e| RegionFailure {
                            region_id: r.id.clone(),
                            dpi: Some(dpi),
                            error: e.to_string(),
                        })
                })
                .collect()
        })
        .collect();
    for row in rows.into_iter().flatten() {
        match row {
            Ok(s) => samples.push(s),
            Err(f) => {
                log::warn!("skipping {}@{:?}: {}", f.region_id, f.dpi, f.error);
                failures.push(f)
            }
        }
    }

    let mut calibrations = Vec::new();
    if !plan.is_empty() {
        let images: Vec<_> = rated.iter().map(|(r, _)| r.image.clone()).collect();
        let mut param = |kind: NoiseKind, copies: usize, fixed: Option<f64>| -> Result<f64> {
            match fixed {
                Some(p) => Ok(p),
                None if copies == 0 => Ok(0.0),
                None => {
                    let c = calibrate_noise(kind, &images, plan.target, plan.seed)?;
                    let p = c.parameter;
                    calibrations.push(c);
                    Ok(p)
                }
            }
        };
        let gv = param(NoiseKind::Gaussian, plan.gaussian_copies, plan.gaussian_variance)?;
        let sd = param(NoiseKind::SaltPepper, plan.salt_pepper_copies, plan.salt_pepper_density)?;
        let jobs: Vec<(usize, NoiseKind, f64, usize)> = (0..rated.len())
            .flat_map(|i| {
                (0..plan.gaussian_copies)
                    .map(move |j| (i, NoiseKind::Gaussian, gv, j))
                    .chain((0..plan.salt_pepper_copies).map(move |j| (i, NoiseKind::SaltPepper, sd, j)))
            })
            .collect();
        let made: Vec<std::result::Result<Sample, RegionFailure>> = jobs
            .par_iter()
            .map(|&(i, kind, p, j)| {
                let r = rated[i].0;
                let id = format!("{}+{}{}", r.id, kind.name(), j);
                NoiseSpec::new(kind, p, augmentation_seed(plan.seed, kind, &r.id, j))
                    .and_then(|spec| spec.apply(&r.image))
                    .and_then(|noisy| extract_features_augmented(&r.image, &noisy))
                    .map(|features| Sample {
                        region_id: id.clone(),
                        dpi: DpiLevel::BASE,
                        origin: Origin::Augmented,
                        label: Label::Unacceptable,
                        features,
                    })
                    .map_err(|e| RegionFailure {
                        region_id: id,
                        dpi: None,
                        error: e.to_string(),
                    })
            })
            .collect();
        for m in made {
            match m {
                Ok(s) => samples.push(s),
                Err(f) => {
                    log::warn!("skipping augmented {}: {}", f.region_id, f.error);
                    failures.push(f)
                }
            }
        }
    }
    Ok(Dataset {
        samples,
        failures,
        calibrations,
    })
}

/// Mean SSIM between each region and its emulation at the dpi it was rated
/// unacceptable at. Used to derive a calibration target from ratings.
pub fn unacceptable_mean_ssim(regions: &[RegionImage], labels: &BTreeMap<RatingKey, Label>) -> Result<(f64, f64)> {
    let mut values = Vec::new();
    for r in regions {
        for d in DpiLevel::ASCENDING {
            if labels.get(&(r.id.clone(), d)) == Some(&Label::Unacceptable) {
                let pair = emulate_dpi(&r.image, d)?;
                values.push(ssim(&r.image, &pair.at_base)?);
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (mean, var) = crate::eval::mean_variance(&values);
    Ok((mean, var.sqrt()))
}
