//! Sequential floating forward selection over feature columns, scored by
//! stratified k-fold SVM accuracy.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::kfold_split;
use crate::learn::{fit_model, FeatureMask, Label, TrainConfig};

pub const CRITERION_FOLDS: usize = 5;
const IMPROVEMENT: f64 = 1e-12;
const MAX_STEPS: usize = 200;

/// Mean fold accuracy of the SVM restricted to `subset`.
pub fn criterion<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    labels: &[Label],
    subset: &[usize],
    eval_seed: u64,
    config: &TrainConfig,
) -> Result<f64> {
    let width = rows.first().map(|r| r.as_ref().len()).ok_or(Error::EmptyInput)?;
    if subset.is_empty() || subset.iter().any(|&f| f >= width) {
        return Err(Error::InvalidDimension {
            requested: subset.len(),
            available: width,
        });
    }
    let folds = kfold_split(rows.len(), CRITERION_FOLDS, eval_seed, Some(labels))?;
    let config = config.clone().with_mask(FeatureMask::from_indices(width, subset));
    let mut total = 0.0;
    for test in &folds {
        let train: Vec<usize> = (0..rows.len()).filter(|i| test.binary_search(i).is_err()).collect();
        let tr: Vec<&[f64]> = train.iter().map(|&i| rows[i].as_ref()).collect();
        let ty: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
        let model = fit_model(&tr, &ty, &config)?;
        let mut correct = 0usize;
        for &i in test {
            if model.predict_row(rows[i].as_ref())?.0 == labels[i] {
                correct += 1;
            }
        }
        total += correct as f64 / test.len() as f64;
    }
    Ok(total / folds.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub step: StepKind,
    pub size: usize,
    pub subset: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizeBest {
    pub size: usize,
    pub subset: Vec<usize>,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub selected: Vec<usize>,
    pub ranking: Vec<usize>,
    pub trace: Vec<TraceEntry>,
    /// Best subset seen at each size `1..=d_target`.
    pub best_by_size: Vec<SizeBest>,
}

fn indices(mask: u64) -> Vec<usize> {
    (0..64).filter(|b| mask >> b & 1 == 1).collect()
}

struct Search<'a, R> {
    rows: &'a [R],
    labels: &'a [Label],
    seed: u64,
    config: &'a TrainConfig,
    memo: HashMap<u64, f64>,
    best: Vec<Option<(u64, f64)>>,
}

impl<R: AsRef<[f64]> + Sync> Search<'_, R> {
    /// Scores every candidate (in parallel, memoised) and returns the best,
    /// earliest candidate winning ties. Every score feeds the per-size record.
    fn best_of(&mut self, candidates: &[u64]) -> Result<(u64, f64)> {
        let missing: Vec<u64> = candidates.iter().copied().filter(|m| !self.memo.contains_key(m)).collect();
        let scored: Vec<(u64, f64)> = missing
            .par_iter()
            .map(|&m| Ok((m, criterion(self.rows, self.labels, &indices(m), self.seed, self.config)?)))
            .collect::<Result<_>>()?;
        self.memo.extend(scored);
        let mut winner: Option<(u64, f64)> = None;
        for &m in candidates {
            let s = self.memo[&m];
            if winner.is_none_or(|(_, w)| s > w) {
                winner = Some((m, s));
            }
        }
        Ok(winner.expect("at least one candidate"))
    }

    fn record(&mut self, mask: u64, score: f64) {
        let k = mask.count_ones() as usize;
        if self.best[k].is_none_or(|(_, b)| score > b) {
            self.best[k] = Some((mask, score));
        }
    }
}

pub fn sffs_select<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    labels: &[Label],
    d_target: usize,
    eval_seed: u64,
    config: &TrainConfig,
) -> Result<SelectionResult> {
    let width = rows.first().map(|r| r.as_ref().len()).ok_or(Error::EmptyInput)?;
    if d_target == 0 || d_target > width || width > 63 {
        return Err(Error::InvalidDimension {
            requested: d_target,
            available: width,
        });
    }
    let mut s = Search {
        rows,
        labels,
        seed: eval_seed,
        config,
        memo: HashMap::new(),
        best: vec![None; width + 1],
    };
    let mut current = 0u64;
    let mut trace = Vec::new();
    let mut steps = 0;
    while (current.count_ones() as usize) < d_target && steps < MAX_STEPS {
        let adds: Vec<u64> = (0..width).filter(|f| current >> f & 1 == 0).map(|f| current | 1 << f).collect();
        let (m, score) = s.best_of(&adds)?;
        for &a in &adds {
            let v = s.memo[&a];
            s.record(a, v);
        }
        current = m;
        steps += 1;
        trace.push(TraceEntry {
            step: StepKind::Forward,
            size: current.count_ones() as usize,
            subset: indices(current),
            score,
        });

        while current.count_ones() > 2 && steps < MAX_STEPS {
            let removals: Vec<u64> = indices(current).into_iter().map(|f| current & !(1 << f)).collect();
            let k = current.count_ones() as usize - 1;
            let known = s.best[k].map(|(_, b)| b).unwrap_or(f64::NEG_INFINITY);
            let (m, score) = s.best_of(&removals)?;
            for &r in &removals {
                let v = s.memo[&r];
                s.record(r, v);
            }
            if score > known + IMPROVEMENT {
                current = m;
                steps += 1;
                trace.push(TraceEntry {
                    step: StepKind::Backward,
                    size: k,
                    subset: indices(current),
                    score,
                });
            } else {
                break;
            }
        }
    }
    if steps >= MAX_STEPS {
        log::warn!("feature selection hit the {MAX_STEPS}-step guard");
    }

    let best_by_size: Vec<SizeBest> = (1..=d_target)
        .filter_map(|k| {
            s.best[k].map(|(m, score)| SizeBest {
                size: k,
                subset: indices(m),
                score,
            })
        })
        .collect();
    let mut ranking: Vec<usize> = Vec::with_capacity(width);
    for b in &best_by_size {
        for &f in &b.subset {
            if !ranking.contains(&f) {
                ranking.push(f);
            }
        }
    }
    for f in 0..width {
        if !ranking.contains(&f) {
            ranking.push(f);
        }
    }
    Ok(SelectionResult {
        selected: indices(current),
        ranking,
        trace,
        best_by_size,
    })
}

/// Features ordered by first inclusion into the best subset of each size.
pub fn rank_features<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    labels: &[Label],
    eval_seed: u64,
    config: &TrainConfig,
) -> Result<Vec<usize>> {
    let width = rows.first().map(|r| r.as_ref().len()).ok_or(Error::EmptyInput)?;
    Ok(sffs_select(rows, labels, width, eval_seed, config)?.ranking)
}

/// Best score and all subsets attaining it, for every size, by brute force.
pub fn exhaustive_best<R: AsRef<[f64]> + Sync>(
    rows: &[R],
    labels: &[Label],
    eval_seed: u64,
    config: &TrainConfig,
) -> Result<Vec<(f64, Vec<Vec<usize>>)>> {
    let width = rows.first().map(|r| r.as_ref().len()).ok_or(Error::EmptyInput)?;
    let masks: Vec<u64> = (1..1u64 << width).collect();
    let scores: Vec<f64> = masks
        .par_iter()
        .map(|&m| criterion(rows, labels, &indices(m), eval_seed, config))
        .collect::<Result<_>>()?;
    let mut out = vec![(f64::NEG_INFINITY, Vec::new()); width];
    for (&m, &v) in masks.iter().zip(&scores) {
        let slot = &mut out[m.count_ones() as usize - 1];
        if v > slot.0 {
            *slot = (v, vec![indices(m)]);
        } else if v == slot.0 {
            slot.1.push(indices(m));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn dataset(seed: u64, n: usize, width: usize, informative: &[usize]) -> (Vec<Vec<f64>>, Vec<Label>) {
        let mut r = crate::seed::rng(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..n {
            let l = if i % 2 == 0 { Label::Acceptable } else { Label::Unacceptable };
            let row: Vec<f64> = (0..width)
                .map(|f| {
                    let noise: f64 = r.random_range(-1.0..1.0);
                    if informative.contains(&f) { l.sign() * 1.5 + noise } else { noise }
                })
                .collect();
            rows.push(row);
            labels.push(l);
        }
        (rows, labels)
    }

    #[test]
    fn informative_feature_scores_one() {
        let (mut rows, labels) = dataset(1, 40, 2, &[]);
        for (r, l) in rows.iter_mut().zip(&labels) {
            r[0] = l.sign() * (1.0 + r[1].abs());
        }
        let c = TrainConfig::default();
        assert_eq!(criterion(&rows, &labels, &[0], 3, &c).unwrap(), 1.0);
        assert_eq!(
            criterion(&rows, &labels, &[0, 1], 3, &c).unwrap(),
            criterion(&rows, &labels, &[0, 1], 3, &c).unwrap()
        );
    }

    #[test]
    fn noise_feature_is_near_chance() {
        let c = TrainConfig::default();
        let mean: f64 = (0..10)
            .map(|s| {
                let (rows, labels) = dataset(100 + s, 40, 1, &[]);
                criterion(&rows, &labels, &[0], s, &c).unwrap()
            })
            .sum::<f64>()
            / 10.0;
        assert!((mean - 0.5).abs() <= 0.1, "mean {mean}");
    }

    #[test]
    fn full_size_selects_everything() {
        let (rows, labels) = dataset(2, 30, 4, &[1]);
        let r = sffs_select(&rows, &labels, 4, 0, &TrainConfig::default()).unwrap();
        assert_eq!(r.selected, vec![0, 1, 2, 3]);
        let mut sorted = r.ranking.clone();
        sorted.sort();
        assert_eq!(sorted, vec![0, 1, 2, 3]);
        assert_eq!(r.ranking[0], 1);
        assert!(sffs_select(&rows, &labels, 5, 0, &TrainConfig::default()).is_err());
        assert!(sffs_select(&rows, &labels, 0, 0, &TrainConfig::default()).is_err());
    }

    #[test]
    fn matches_exhaustive_on_small_problems() {
        let c = TrainConfig::default();
        for seed in 0..3 {
            let (rows, labels) = dataset(seed, 30, 4, &[0, 2]);
            let r = sffs_select(&rows, &labels, 4, seed, &c).unwrap();
            let ex = exhaustive_best(&rows, &labels, seed, &c).unwrap();
            for b in &r.best_by_size {
                let (score, subsets) = &ex[b.size - 1];
                assert_eq!(b.score, *score, "size {}", b.size);
                assert!(subsets.contains(&b.subset));
            }
        }
    }

    #[test]
    fn duplicate_is_not_paired_with_its_original() {
        // 0 informative, 1 a copy of 0, 2 a complementary weak signal
        let mut r = crate::seed::rng(9);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for i in 0..60 {
            let l = if i % 2 == 0 { Label::Acceptable } else { Label::Unacceptable };
            let a = l.sign() * 0.6 + r.random_range(-1.0..1.0);
            let b = l.sign() * 0.6 + r.random_range(-1.0..1.0);
            rows.push(vec![a, a * 1.0000001, b]);
            labels.push(l);
        }
        let c = TrainConfig::default();
        let sel = sffs_select(&rows, &labels, 2, 4, &c).unwrap();
        assert_ne!(sel.selected, vec![0, 1]);
        let ex = exhaustive_best(&rows, &labels, 4, &c).unwrap();
        assert!(!ex[1].1.contains(&vec![0, 1]));
    }

    #[test]
    fn best_by_size_is_max_observed() {
        let (rows, labels) = dataset(5, 30, 5, &[3]);
        let c = TrainConfig::default();
        let r = sffs_select(&rows, &labels, 3, 7, &c).unwrap();
        for t in &r.trace {
            let b = &r.best_by_size[t.size - 1];
            assert!(b.score >= t.score);
            assert!((0.0..=1.0).contains(&t.score));
        }
        assert_eq!(r, sffs_select(&rows, &labels, 3, 7, &c).unwrap());
    }
}
