use serde::{Deserialize, Serialize};

use super::{fit_model, KernelChoice, Label, TrainConfig};
use crate::error::Result;
use crate::eval::kfold_split;

/// One evaluated hyper-parameter pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub c: f64,
    pub gamma: f64,
    pub accuracy: f64,
}

/// 3x3 search over `C in {0.1, 1, 10}` and `gamma in {0.1, 1, 10} / d` by
/// stratified k-fold accuracy. Returns the best configuration (first in
/// grid order on ties) and every evaluated point.
pub fn grid_search<R: AsRef<[f64]>>(
    rows: &[R],
    labels: &[Label],
    base: &TrainConfig,
    folds: usize,
    seed: u64,
) -> Result<(TrainConfig, Vec<GridPoint>)> {
    let width = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
    let d = base.mask_for(width).selected().max(1) as f64;
    let split = kfold_split(rows.len(), folds, seed, Some(labels))?;
    let mut points = Vec::new();
    let mut best: Option<(TrainConfig, f64)> = None;
    for c in [0.1, 1.0, 10.0] {
        for g in [0.1, 1.0, 10.0] {
            let gamma = g / d;
            let mut config = base.clone();
            config.svm.c = c;
            config.svm.kernel = KernelChoice::Rbf { gamma: Some(gamma) };
            let mut correct = 0usize;
            for test in &split {
                let train: Vec<usize> = (0..rows.len()).filter(|i| test.binary_search(i).is_err()).collect();
                let tr_rows: Vec<&[f64]> = train.iter().map(|&i| rows[i].as_ref()).collect();
                let tr_labels: Vec<Label> = train.iter().map(|&i| labels[i]).collect();
                let model = fit_model(&tr_rows, &tr_labels, &config)?;
                for &i in test {
                    if model.predict_row(rows[i].as_ref())?.0 == labels[i] {
                        correct += 1;
                    }
                }
            }
            let accuracy = correct as f64 / rows.len() as f64;
            points.push(GridPoint { c, gamma, accuracy });
            if best.as_ref().is_none_or(|(_, a)| accuracy > *a) {
                best = Some((config, accuracy));
            }
        }
    }
    Ok((best.expect("grid is non-empty").0, points))
}
