//! Repeated stratified k-fold cross-validation with augmented samples kept
//! out of every test fold, plus the usual classification metrics.

use std::collections::BTreeMap;

use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learn::{fit_model, Label, TrainConfig};
use crate::metrics::FeatureVector;
use crate::raster::DpiLevel;
use crate::seed::{derive_seed, rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Rated,
    Augmented,
}

impl Origin {
    pub fn name(self) -> &'static str {
        match self {
            Origin::Rated => "rated",
            Origin::Augmented => "augmented",
        }
    }
}

impl std::str::FromStr for Origin {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rated" => Ok(Origin::Rated),
            "augmented" => Ok(Origin::Augmented),
            other => Err(Error::ParseError(format!("unknown origin {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub region_id: String,
    pub dpi: DpiLevel,
    pub origin: Origin,
    pub label: Label,
    pub features: FeatureVector,
}

/// Splits `0..n` into `k` folds, each sorted ascending.
///
/// With `strata`, every class is shuffled separately and dealt round-robin,
/// the dealing position carrying over from one class to the next, so fold
/// sizes differ by at most one both overall and per class. A class with
/// fewer than `k` members falls back to a plain shuffle.
pub fn kfold_split(n: usize, k: usize, seed: u64, strata: Option<&[Label]>) -> Result<Vec<Vec<usize>>> {
    if k < 2 {
        return Err(Error::InvalidDimension { requested: k, available: n });
    }
    if n < k {
        return Err(Error::TooFewSamples { n, k });
    }
    let mut r = rng(seed);
    let mut groups: Vec<Vec<usize>> = match strata {
        Some(labels) => {
            if labels.len() != n {
                return Err(Error::LengthMismatch { left: n, right: labels.len() });
            }
            let mut by: BTreeMap<Label, Vec<usize>> = BTreeMap::new();
            for (i, l) in labels.iter().enumerate() {
                by.entry(*l).or_default().push(i);
            }
            if by.values().any(|g| g.len() < k) {
                warn!("a stratum has fewer than {k} members; splitting without stratification");
                vec![(0..n).collect()]
            } else {
                by.into_values().collect()
            }
        }
        None => vec![(0..n).collect()],
    };
    let mut folds = vec![Vec::new(); k];
    let mut pos = 0usize;
    for g in &mut groups {
        g.shuffle(&mut r);
        for &i in g.iter() {
            folds[pos % k].push(i);
            pos += 1;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

/// Raw 2x2 counts; `[true][predicted]`, index 0 = acceptable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts(pub [[u64; 2]; 2]);

fn idx(l: Label) -> usize {
    match l {
        Label::Acceptable => 0,
        Label::Unacceptable => 1,
    }
}

impl ConfusionCounts {
    pub fn add(&mut self, truth: Label, predicted: Label) {
        self.0[idx(truth)][idx(predicted)] += 1;
    }

    pub fn merge(&mut self, other: &ConfusionCounts) {
        for t in 0..2 {
            for p in 0..2 {
                self.0[t][p] += other.0[t][p];
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        (self.0[0][0] + self.0[1][1]) as f64 / self.total().max(1) as f64
    }

    pub fn class(&self, l: Label) -> ClassMetrics {
        let i = idx(l);
        let tp = self.0[i][i] as f64;
        let predicted = (self.0[0][i] + self.0[1][i]) as f64;
        let actual = (self.0[i][0] + self.0[i][1]) as f64;
        let precision = if predicted > 0.0 { tp / predicted } else { 0.0 };
        let recall = if actual > 0.0 { tp / actual } else { 0.0 };
        ClassMetrics {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }

    pub fn recall(&self, l: Label) -> f64 {
        self.class(l).recall
    }

    /// Rows divided by their true-class count; an empty row stays zero.
    pub fn normalized(&self) -> [[f64; 2]; 2] {
        let mut m = [[0.0; 2]; 2];
        for t in 0..2 {
            let row = (self.0[t][0] + self.0[t][1]) as f64;
            if row > 0.0 {
                m[t][0] = self.0[t][0] as f64 / row;
                m[t][1] = self.0[t][1] as f64 / row;
            }
        }
        m
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub acceptable: ClassMetrics,
    pub unacceptable: ClassMetrics,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    pub per_class: PerClass,
    /// Row-normalised, rows = true class (acceptable, unacceptable).
    pub confusion: [[f64; 2]; 2],
    pub counts: ConfusionCounts,
}

impl From<ConfusionCounts> for ClassificationMetrics {
    fn from(counts: ConfusionCounts) -> Self {
        ClassificationMetrics {
            accuracy: counts.accuracy(),
            per_class: PerClass {
                acceptable: counts.class(Label::Acceptable),
                unacceptable: counts.class(Label::Unacceptable),
            },
            confusion: counts.normalized(),
            counts,
        }
    }
}

pub fn classification_metrics(y_true: &[Label], y_pred: &[Label]) -> Result<ClassificationMetrics> {
    if y_true.len() != y_pred.len() {
        return Err(Error::LengthMismatch { left: y_true.len(), right: y_pred.len() });
    }
    if y_true.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut c = ConfusionCounts::default();
    for (t, p) in y_true.iter().zip(y_pred) {
        c.add(*t, *p);
    }
    Ok(c.into())
}

/// Sample indices for one train/test round.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub accuracy: f64,
    pub counts: ConfusionCounts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub runs: usize,
    pub folds: usize,
    pub mean_accuracy: f64,
    /// Population variance of the per-run accuracies.
    pub variance_accuracy: f64,
    pub per_run_accuracies: Vec<f64>,
    pub per_class: PerClass,
    pub confusion: [[f64; 2]; 2],
    pub counts: ConfusionCounts,
    pub per_run: Vec<RunResult>,
}

impl EvalReport {
    pub fn table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "runs {}  folds {}  accuracy mean {:.4}  variance {:.6}\n",
            self.runs, self.folds, self.mean_accuracy, self.variance_accuracy
        ));
        s.push_str("class          precision  recall  f1\n");
        for (name, m) in [("acceptable", self.per_class.acceptable), ("unacceptable", self.per_class.unacceptable)] {
            s.push_str(&format!("{name:<14} {:>9.3}  {:>6.3}  {:>5.3}\n", m.precision, m.recall, m.f1));
        }
        s.push_str("confusion (rows true, cols predicted: acceptable, unacceptable)\n");
        for (name, row) in [("acceptable", self.confusion[0]), ("unacceptable", self.confusion[1])] {
            s.push_str(&format!("{name:<14} {:>6.3} {:>6.3}\n", row[0], row[1]));
        }
        s
    }
}

/// Mean and population variance, two passes.
pub fn mean_variance(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var)
}

/// Fresh normalisation and SVM per fold; returns counts over the test folds.
/// Any augmented sample in a test fold is a protocol violation.
pub fn run_fold_plans(samples: &[Sample], plans: &[FoldPlan], config: &TrainConfig) -> Result<ConfusionCounts> {
    let mut counts = ConfusionCounts::default();
    for (f, plan) in plans.iter().enumerate() {
        if let Some(&i) = plan.test.iter().find(|&&i| samples[i].origin == Origin::Augmented) {
            return Err(Error::ProtocolViolation(format!(
                "augmented sample {} (index {i}) in test fold {f}",
                samples[i].region_id
            )));
        }
        let rows: Vec<&[f64]> = plan.train.iter().map(|&i| samples[i].features.as_slice()).collect();
        let labels: Vec<Label> = plan.train.iter().map(|&i| samples[i].label).collect();
        let model = fit_model(&rows, &labels, config)?;
        for &i in &plan.test {
            let (p, _) = model.predict(&samples[i].features)?;
            counts.add(samples[i].label, p);
        }
    }
    Ok(counts)
}

/// Fold plans for one run: stratified folds over the rated samples, every
/// augmented sample added to each training side.
pub fn fold_plans(samples: &[Sample], k: usize, seed: u64) -> Result<Vec<FoldPlan>> {
    let rated: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].origin == Origin::Rated).collect();
    let augmented: Vec<usize> = (0..samples.len()).filter(|&i| samples[i].origin == Origin::Augmented).collect();
    let labels: Vec<Label> = rated.iter().map(|&i| samples[i].label).collect();
    let folds = kfold_split(rated.len(), k, seed, Some(&labels))?;
    Ok(folds
        .iter()
        .map(|fold| {
            let mut train: Vec<usize> = (0..rated.len())
                .filter(|j| fold.binary_search(j).is_err())
                .map(|j| rated[j])
                .collect();
            train.extend_from_slice(&augmented);
            FoldPlan {
                train,
                test: fold.iter().map(|&j| rated[j]).collect(),
            }
        })
        .collect())
}

/// Aggregates per-run plans into a report. Runs are evaluated in parallel
/// and combined in run order.
pub fn evaluate_plans(
    samples: &[Sample],
    runs: &[(u64, Vec<FoldPlan>)],
    config: &TrainConfig,
) -> Result<EvalReport> {
    if runs.is_empty() {
        return Err(Error::EmptyInput);
    }
    let per_run: Vec<RunResult> = runs
        .par_iter()
        .map(|(seed, plans)| {
            let counts = run_fold_plans(samples, plans, config)?;
            Ok(RunResult {
                seed: *seed,
                accuracy: counts.accuracy(),
                counts,
            })
        })
        .collect::<Result<_>>()?;
    let mut pooled = ConfusionCounts::default();
    for r in &per_run {
        pooled.merge(&r.counts);
    }
    let accs: Vec<f64> = per_run.iter().map(|r| r.accuracy).collect();
    let (mean, var) = mean_variance(&accs);
    let m = ClassificationMetrics::from(pooled);
    Ok(EvalReport {
        runs: runs.len(),
        folds: runs[0].1.len(),
        mean_accuracy: mean,
        variance_accuracy: var,
        per_run_accuracies: accs,
        per_class: m.per_class,
        confusion: m.confusion,
        counts: pooled,
        per_run,
    })
}

/// Seed of run `r` under `base_seed`.
pub fn run_seed(base_seed: u64, r: usize) -> u64 {
    derive_seed(base_seed, &[0x6576_616c, r as u64])
}

pub fn cross_validate(
    samples: &[Sample],
    runs: usize,
    k: usize,
    base_seed: u64,
    config: &TrainConfig,
) -> Result<EvalReport> {
    for s in samples {
        if s.origin == Origin::Augmented && s.label != Label::Unacceptable {
            return Err(Error::ProtocolViolation(format!(
                "augmented sample {} labelled acceptable",
                s.region_id
            )));
        }
    }
    let rated: Vec<&Sample> = samples.iter().filter(|s| s.origin == Origin::Rated).collect();
    if !rated.iter().any(|s| s.label == Label::Acceptable) || !rated.iter().any(|s| s.label == Label::Unacceptable) {
        return Err(Error::SingleClassError);
    }
    let plans = (0..runs)
        .map(|r| {
            let seed = run_seed(base_seed, r);
            Ok((seed, fold_plans(samples, k, seed)?))
        })
        .collect::<Result<Vec<_>>>()?;
    evaluate_plans(samples, &plans, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::NUM_FEATURES;
    use proptest::prelude::*;

    fn labels(pattern: &[u8]) -> Vec<Label> {
        pattern
            .iter()
            .map(|&b| if b == 1 { Label::Acceptable } else { Label::Unacceptable })
            .collect()
    }

    #[test]
    fn balanced_ten_into_five() {
        let y = labels(&[1, 0, 1, 0, 1, 0, 1, 0, 1, 0]);
        let folds = kfold_split(10, 5, 3, Some(&y)).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_ne!(y[f[0]], y[f[1]]);
        }
    }

    #[test]
    fn seeds_change_the_shuffle() {
        let first = kfold_split(30, 5, 0, None).unwrap();
        assert_eq!(first, kfold_split(30, 5, 0, None).unwrap());
        assert!((1..100).any(|s| kfold_split(30, 5, s, None).unwrap() != first));
    }

    #[test]
    fn split_errors_and_fallback() {
        assert!(matches!(kfold_split(3, 5, 0, None), Err(Error::TooFewSamples { n: 3, k: 5 })));
        assert!(kfold_split(3, 1, 0, None).is_err());
        // only two acceptable: unstratified but still a partition
        let y = labels(&[1, 1, 0, 0, 0, 0, 0, 0, 0, 0]);
        let folds = kfold_split(10, 5, 1, Some(&y)).unwrap();
        let mut all: Vec<usize> = folds.concat();
        all.sort();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    proptest! {
        #[test]
        fn folds_partition(n in 2usize..60, k in 2usize..7, seed in any::<u64>(), bits in proptest::collection::vec(0u8..2, 60)) {
            prop_assume!(n >= k);
            let y = labels(&bits[..n]);
            let folds = kfold_split(n, k, seed, Some(&y)).unwrap();
            prop_assert_eq!(folds.len(), k);
            let mut all: Vec<usize> = folds.concat();
            all.sort();
            prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
            let sizes: Vec<usize> = folds.iter().map(|f| f.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
            let stratified = [Label::Acceptable, Label::Unacceptable]
                .iter()
                .all(|l| y.iter().filter(|x| *x == l).count() >= k);
            if stratified {
                for l in [Label::Acceptable, Label::Unacceptable] {
                    let per: Vec<usize> = folds.iter().map(|f| f.iter().filter(|&&i| y[i] == l).count()).collect();
                    prop_assert!(per.iter().max().unwrap() - per.iter().min().unwrap() <= 1);
                }
            }
        }
    }

    #[test]
    fn f1_anchors() {
        assert!((f1_score(0.82, 0.593) - 0.688).abs() <= 0.001);
        assert!((f1_score(0.92, 0.973) - 0.944).abs() <= 0.003);
        assert_eq!(f1_score(0.0, 0.0), 0.0);
    }

    #[test]
    fn metrics_edge_cases() {
        let y = labels(&[1, 0, 1, 0]);
        let m = classification_metrics(&y, &y).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.confusion, [[1.0, 0.0], [0.0, 1.0]]);
        let all_acc = vec![Label::Acceptable; 4];
        let m = classification_metrics(&y, &all_acc).unwrap();
        assert_eq!(m.per_class.unacceptable.recall, 0.0);
        assert_eq!(m.per_class.unacceptable.f1, 0.0);
        assert_eq!(m.per_class.acceptable.precision, 0.5);
        assert!(matches!(classification_metrics(&[], &[]), Err(Error::EmptyInput)));
        assert!(classification_metrics(&y, &all_acc[..3]).is_err());
    }

    #[test]
    fn counts_oracle() {
        // TP/FP/FN counted by hand
        let t = labels(&[1, 1, 1, 0, 0, 0, 0, 1]);
        let p = labels(&[1, 0, 1, 0, 1, 0, 0, 1]);
        let m = classification_metrics(&t, &p).unwrap();
        assert_eq!(m.counts.0, [[3, 1], [1, 3]]);
        assert_eq!(m.per_class.acceptable.precision, 0.75);
        assert_eq!(m.per_class.unacceptable.recall, 0.75);
        assert_eq!(m.accuracy, 0.75);
        for row in m.confusion {
            assert!((row[0] + row[1] - 1.0).abs() < 1e-9);
        }
    }

    fn sample(id: usize, label: Label, origin: Origin, v: f64) -> Sample {
        let mut f = [0.0; NUM_FEATURES];
        for (j, x) in f.iter_mut().enumerate() {
            *x = v + 0.01 * ((id * 7 + j * 3) % 11) as f64;
        }
        Sample {
            region_id: format!("r{id}"),
            dpi: DpiLevel::D100,
            origin,
            label,
            features: FeatureVector(f),
        }
    }

    fn separable(n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                if i % 2 == 0 {
                    sample(i, Label::Acceptable, Origin::Rated, 5.0)
                } else {
                    sample(i, Label::Unacceptable, Origin::Rated, -5.0)
                }
            })
            .collect()
    }

    #[test]
    fn separable_data_is_perfect() {
        let r = cross_validate(&separable(20), 1, 5, 9, &TrainConfig::default()).unwrap();
        assert_eq!(r.mean_accuracy, 1.0);
        assert_eq!(r.variance_accuracy, 0.0);
        assert_eq!(r.counts.total(), 20);
    }

    #[test]
    fn without_augmentation_matches_direct_cv() {
        let mut s = separable(30);
        for (i, x) in s.iter_mut().enumerate() {
            x.features.0[0] += if i % 5 == 0 { -8.0 } else { 0.0 };
        }
        let config = TrainConfig::default();
        let report = cross_validate(&s, 2, 5, 4, &config).unwrap();
        for (r, run) in report.per_run.iter().enumerate() {
            let seed = run_seed(4, r);
            let y: Vec<Label> = s.iter().map(|x| x.label).collect();
            let folds = kfold_split(s.len(), 5, seed, Some(&y)).unwrap();
            let mut c = ConfusionCounts::default();
            for test in &folds {
                let train: Vec<usize> = (0..s.len()).filter(|i| !test.contains(i)).collect();
                let rows: Vec<&[f64]> = train.iter().map(|&i| s[i].features.as_slice()).collect();
                let ys: Vec<Label> = train.iter().map(|&i| s[i].label).collect();
                let m = fit_model(&rows, &ys, &config).unwrap();
                for &i in test {
                    c.add(s[i].label, m.predict(&s[i].features).unwrap().0);
                }
            }
            assert_eq!(run.counts, c);
        }
        let (m, v) = mean_variance(&report.per_run_accuracies);
        assert_eq!((m, v), (report.mean_accuracy, report.variance_accuracy));
    }

    #[test]
    fn augmented_only_in_training() {
        let mut s = separable(20);
        for i in 0..6 {
            s.push(sample(100 + i, Label::Unacceptable, Origin::Augmented, -4.0));
        }
        let plans = fold_plans(&s, 5, 11).unwrap();
        let mut tested = vec![0; s.len()];
        for p in &plans {
            for &i in &p.test {
                tested[i] += 1;
                assert_eq!(s[i].origin, Origin::Rated);
            }
            for i in 20..26 {
                assert!(p.train.contains(&i));
            }
        }
        assert!(tested[..20].iter().all(|&t| t == 1));
        assert!(tested[20..].iter().all(|&t| t == 0));
        cross_validate(&s, 3, 5, 1, &TrainConfig::default()).unwrap();
    }

    #[test]
    fn injected_augmented_test_sample_aborts() {
        let mut s = separable(20);
        s.push(sample(99, Label::Unacceptable, Origin::Augmented, -4.0));
        let mut plans = fold_plans(&s, 5, 2).unwrap();
        plans[1].test.push(20);
        let err = evaluate_plans(&s, &[(2, plans)], &TrainConfig::default()).unwrap_err();
        assert!(matches!(err, Error::ProtocolViolation(_)));
    }

    #[test]
    fn report_is_deterministic() {
        let s = separable(24);
        let a = cross_validate(&s, 4, 4, 8, &TrainConfig::default()).unwrap();
        let b = cross_validate(&s, 4, 4, 8, &TrainConfig::default()).unwrap();
        assert_eq!(a, b);
        assert!(a.table().contains("unacceptable"));
    }
}
