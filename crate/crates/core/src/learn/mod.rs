//! Feature normalisation and the SVM that turns a feature vector into an
//! acceptable / unacceptable decision.

mod grid;
mod normalize;
mod svm;

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{extract_features, FeatureVector, NUM_FEATURES};
use crate::raster::{crop_region, emulate_dpi, DpiLevel, GrayImage, RegionSpec};

pub use grid::{grid_search, GridPoint};
pub use normalize::{normalize_apply, normalize_fit, NormMethod, NormStats};
pub use svm::{train_svm, Kernel, KernelChoice, KernelMachine, SvmParams};

pub const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Acceptable,
    Unacceptable,
}

impl Label {
    /// +1 for acceptable, -1 for unacceptable.
    pub fn sign(self) -> f64 {
        match self {
            Label::Acceptable => 1.0,
            Label::Unacceptable => -1.0,
        }
    }

    /// Decision values of exactly zero count as acceptable.
    pub fn from_decision(value: f64) -> Label {
        if value >= 0.0 {
            Label::Acceptable
        } else {
            Label::Unacceptable
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Label::Acceptable => "acceptable",
            Label::Unacceptable => "unacceptable",
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Label {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "acceptable" => Ok(Label::Acceptable),
            "unacceptable" => Ok(Label::Unacceptable),
            other => Err(Error::ParseError(format!("unknown label {other:?}"))),
        }
    }
}

/// Which feature columns take part in training.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureMask(Vec<bool>);

impl FeatureMask {
    pub fn all(width: usize) -> Self {
        FeatureMask(vec![true; width])
    }

    pub fn from_indices(width: usize, indices: &[usize]) -> Self {
        let mut m = vec![false; width];
        for &i in indices {
            m[i] = true;
        }
        FeatureMask(m)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn selected(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.0.get(i).copied().unwrap_or(false)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }
}

/// Everything needed to fit a model from raw feature rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct TrainConfig {
    pub svm: SvmParams,
    pub norm: NormMethod,
    /// `None` uses every column.
    pub mask: Option<FeatureMask>,
}

impl TrainConfig {
    pub fn with_mask(mut self, mask: FeatureMask) -> Self {
        self.mask = Some(mask);
        self
    }

    pub fn mask_for(&self, width: usize) -> FeatureMask {
        self.mask.clone().unwrap_or_else(|| FeatureMask::all(width))
    }
}

/// A trained classifier together with its normalisation and feature mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub version: u32,
    pub kernel: String,
    pub gamma: Option<f64>,
    #[serde(rename = "C")]
    pub c: f64,
    pub feature_mask: FeatureMask,
    pub norm_stats: NormStats,
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub training_digest: String,
}

fn digest(rows: &[Vec<f64>], labels: &[Label], config: &TrainConfig) -> String {
    let mut h = Sha256::new();
    for (r, l) in rows.iter().zip(labels) {
        for v in r {
            h.update(v.to_le_bytes());
        }
        h.update([*l as u8]);
    }
    h.update(serde_json::to_vec(config).expect("config serializes"));
    hex::encode(h.finalize())
}

/// Normalises `rows` on the configured mask, then trains the SVM.
pub fn fit_model<R: AsRef<[f64]>>(rows: &[R], labels: &[Label], config: &TrainConfig) -> Result<SvmModel> {
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let width = rows[0].as_ref().len();
    let mask = config.mask_for(width);
    if mask.len() != width || mask.selected() == 0 {
        return Err(Error::InvalidDimension {
            requested: mask.selected(),
            available: width,
        });
    }
    let stats = normalize_fit(rows, &mask, config.norm)?;
    let z: Vec<Vec<f64>> = rows.iter().map(|r| normalize_apply(r.as_ref(), &stats, &mask)).collect();
    let machine = train_svm(&z, labels, &config.svm)?;
    let raw: Vec<Vec<f64>> = rows.iter().map(|r| r.as_ref().to_vec()).collect();
    Ok(SvmModel::from_machine(machine, mask, stats, digest(&raw, labels, config)))
}

impl SvmModel {
    pub fn from_machine(m: KernelMachine, feature_mask: FeatureMask, norm_stats: NormStats, training_digest: String) -> Self {
        let (kernel, gamma) = match m.kernel {
            Kernel::Linear => ("linear".to_string(), None),
            Kernel::Rbf { gamma } => ("rbf".to_string(), Some(gamma)),
        };
        SvmModel {
            version: MODEL_VERSION,
            kernel,
            gamma,
            c: m.c,
            feature_mask,
            norm_stats,
            support_vectors: m.support_vectors,
            dual_coefficients: m.dual_coefficients,
            bias: m.bias,
            training_digest,
        }
    }

    fn kernel_fn(&self) -> Result<Kernel> {
        match (self.kernel.as_str(), self.gamma) {
            ("linear", _) => Ok(Kernel::Linear),
            ("rbf", Some(gamma)) if gamma > 0.0 => Ok(Kernel::Rbf { gamma }),
            (k, g) => Err(Error::ParseError(format!("kernel {k:?} with gamma {g:?}"))),
        }
    }

    /// Decision value and label for one raw feature row.
    pub fn predict_row(&self, x: &[f64]) -> Result<(Label, f64)> {
        if x.len() != self.feature_mask.len() {
            return Err(Error::InvalidFeature(format!(
                "row of width {} for a model over {} features",
                x.len(),
                self.feature_mask.len()
            )));
        }
        if self.feature_mask.indices().any(|f| !x[f].is_finite()) {
            return Err(Error::InvalidFeature(format!("{x:?}")));
        }
        let kernel = self.kernel_fn()?;
        let z = normalize_apply(x, &self.norm_stats, &self.feature_mask);
        let value = self
            .support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .map(|(sv, c)| c * kernel.eval(sv, &z))
            .sum::<f64>()
            + self.bias;
        Ok((Label::from_decision(value), value))
    }

    pub fn predict(&self, x: &FeatureVector) -> Result<(Label, f64)> {
        self.predict_row(x.as_slice())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MODEL_VERSION {
            return Err(Error::VersionError {
                found: self.version.to_string(),
                expected: MODEL_VERSION.to_string(),
            });
        }
        self.kernel_fn()?;
        let width = self.feature_mask.len();
        let dim = self.feature_mask.selected();
        if self.norm_stats.center.len() != width || self.norm_stats.scale.len() != width {
            return Err(Error::ParseError("normalisation width differs from feature mask".into()));
        }
        if self.support_vectors.is_empty()
            || self.support_vectors.len() != self.dual_coefficients.len()
            || self.support_vectors.iter().any(|sv| sv.len() != dim)
        {
            return Err(Error::ParseError("inconsistent support vectors".into()));
        }
        if self.feature_mask.indices().any(|f| !(self.norm_stats.scale[f] > 0.0)) {
            return Err(Error::ParseError("non-positive normalisation scale".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::ParseError(format!("model: {e}")))?;
        match value.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(MODEL_VERSION) => {}
            other => {
                return Err(Error::VersionError {
                    found: format!("{other:?}"),
                    expected: MODEL_VERSION.to_string(),
                })
            }
        }
        let model: SvmModel = serde_json::from_value(value).map_err(|e| Error::ParseError(format!("model: {e}")))?;
        model.validate()?;
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        SvmModel::from_json(&text)
    }
}

/// Anything that can judge a feature vector.
pub trait AcceptabilityModel {
    fn classify(&self, features: &FeatureVector) -> Result<(Label, f64)>;
}

impl AcceptabilityModel for SvmModel {
    fn classify(&self, features: &FeatureVector) -> Result<(Label, f64)> {
        if self.feature_mask.len() != NUM_FEATURES {
            return Err(Error::InvalidFeature(format!(
                "model expects {} features",
                self.feature_mask.len()
            )));
        }
        self.predict(features)
    }
}

/// Lowest dpi at which `model` accepts the region. 300 dpi is accepted
/// without consulting the model.
pub fn min_acceptable_dpi(model: &dyn AcceptabilityModel, page: &GrayImage, region: &RegionSpec) -> Result<DpiLevel> {
    let reference = crop_region(page, region, true)?;
    for dpi in DpiLevel::ASCENDING {
        if dpi == DpiLevel::BASE {
            break;
        }
        let pair = emulate_dpi(&reference, dpi)?;
        let features = extract_features(&reference, &pair, dpi)?;
        if model.classify(&features)?.0 == Label::Acceptable {
            return Ok(dpi);
        }
    }
    Ok(DpiLevel::BASE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Feature;
    use crate::raster::RegionClass;

    struct Always(Label);
    impl AcceptabilityModel for Always {
        fn classify(&self, _: &FeatureVector) -> Result<(Label, f64)> {
            Ok((self.0, self.0.sign()))
        }
    }

    struct TssimThreshold(f64);
    impl AcceptabilityModel for TssimThreshold {
        fn classify(&self, f: &FeatureVector) -> Result<(Label, f64)> {
            let v = f.get(Feature::TssimMean) - self.0;
            Ok((Label::from_decision(v), v))
        }
    }

    fn page() -> GrayImage {
        GrayImage::from_fn(80, 60, DpiLevel::D300, |x, y| {
            if (10..58).contains(&x) && (6..54).contains(&y) {
                (128.0 + 100.0 * ((x as f64) * 0.8).sin() * ((y as f64) * 0.45).cos()) as u8
            } else {
                255
            }
        })
        .unwrap()
    }

    fn region() -> RegionSpec {
        RegionSpec::rect("r1", RegionClass::RasterImage, 10, 6, 48, 48)
    }

    #[test]
    fn stub_models() {
        let p = page();
        assert_eq!(min_acceptable_dpi(&Always(Label::Acceptable), &p, &region()).unwrap(), DpiLevel::D100);
        assert_eq!(min_acceptable_dpi(&Always(Label::Unacceptable), &p, &region()).unwrap(), DpiLevel::D300);
        let text = RegionSpec::rect("t", RegionClass::Text, 0, 0, 20, 20);
        assert!(min_acceptable_dpi(&Always(Label::Acceptable), &p, &text).is_err());
    }

    #[test]
    fn threshold_model_follows_feature_table() {
        let p = page();
        let reference = crop_region(&p, &region(), true).unwrap();
        // feature table computed independently of the search loop
        let table: Vec<(DpiLevel, f64)> = [DpiLevel::D100, DpiLevel::D150, DpiLevel::D200]
            .into_iter()
            .map(|d| {
                let pair = emulate_dpi(&reference, d).unwrap();
                (d, extract_features(&reference, &pair, d).unwrap().get(Feature::TssimMean))
            })
            .collect();
        let expected = table.iter().find(|(_, t)| *t >= 0.9).map(|(d, _)| *d).unwrap_or(DpiLevel::D300);
        assert_eq!(min_acceptable_dpi(&TssimThreshold(0.9), &p, &region()).unwrap(), expected);
        for &(d, t) in &table {
            let thr = t - 1e-9;
            let got = min_acceptable_dpi(&TssimThreshold(thr), &p, &region()).unwrap();
            assert!(got <= d);
        }
        assert_eq!(min_acceptable_dpi(&TssimThreshold(1.5), &p, &region()).unwrap(), DpiLevel::D300);
    }

    #[test]
    fn label_tie_is_acceptable() {
        assert_eq!(Label::from_decision(0.0), Label::Acceptable);
        assert_eq!(Label::from_decision(-1e-300), Label::Unacceptable);
        assert_eq!("unacceptable".parse::<Label>().unwrap(), Label::Unacceptable);
    }

    fn toy_rows() -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64;
            rows.push(vec![t, 100.0 + (t * 1.7).sin(), (t * 0.3).cos()]);
            labels.push(if i < 10 { Label::Unacceptable } else { Label::Acceptable });
        }
        (rows, labels)
    }

    #[test]
    fn model_round_trip_and_prediction() {
        let (rows, labels) = toy_rows();
        let config = TrainConfig::default();
        let m = fit_model(&rows, &labels, &config).unwrap();
        for (r, l) in rows.iter().zip(&labels) {
            assert_eq!(m.predict_row(r).unwrap().0, *l);
        }
        let again = SvmModel::from_json(&m.to_json()).unwrap();
        assert_eq!(again, m);
        assert_eq!(again.training_digest.len(), 64);
        assert!(m.predict_row(&[1.0, f64::NAN, 0.0]).is_err());
        assert!(m.predict_row(&[1.0]).is_err());
    }

    #[test]
    fn model_version_is_checked() {
        let (rows, labels) = toy_rows();
        let m = fit_model(&rows, &labels, &TrainConfig::default()).unwrap();
        let text = m.to_json().replace("\"version\": 1", "\"version\": 7");
        assert!(matches!(SvmModel::from_json(&text), Err(Error::VersionError { .. })));
        assert!(matches!(SvmModel::from_json("{}"), Err(Error::VersionError { .. })));
    }

    #[test]
    fn masked_model_ignores_other_columns() {
        let (rows, labels) = toy_rows();
        let config = TrainConfig::default().with_mask(FeatureMask::from_indices(3, &[0]));
        let m = fit_model(&rows, &labels, &config).unwrap();
        assert!(m.support_vectors.iter().all(|sv| sv.len() == 1));
        let a = m.predict_row(&[3.0, 0.0, 0.0]).unwrap();
        let b = m.predict_row(&[3.0, 1e6, -5.0]).unwrap();
        assert_eq!(a, b);
    }
}
