//! Soft-margin kernel SVM trained by sequential minimal optimisation.
//!
//! The dual is solved in its minimisation form
//! `min 1/2 a'Qa - e'a, 0 <= a_i <= C_i, y'a = 0` with `Q_ij = y_i y_j K_ij`,
//! picking the maximal violating pair at every step.

use serde::{Deserialize, Serialize};

use super::Label;
use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
}

impl Kernel {
    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
        }
    }
}

/// Kernel selection; an RBF without `gamma` uses `1 / (d * mean variance)`
/// of the training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum KernelChoice {
    Linear,
    Rbf { gamma: Option<f64> },
}

impl Default for KernelChoice {
    fn default() -> Self {
        KernelChoice::Rbf { gamma: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub c: f64,
    pub kernel: KernelChoice,
    /// Stop when the maximal KKT violation drops below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Optional multipliers on `c` for (acceptable, unacceptable) samples.
    pub class_weight: Option<(f64, f64)>,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: 1.0,
            kernel: KernelChoice::default(),
            tol: 1e-3,
            max_iter: 1_000_000,
            class_weight: None,
        }
    }
}

/// Trained decision function `f(z) = sum_i coef_i K(sv_i, z) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMachine {
    pub kernel: Kernel,
    pub c: f64,
    pub support_vectors: Vec<Vec<f64>>,
    /// `y_i * alpha_i` per support vector.
    pub dual_coefficients: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    /// Final value of the dual objective `e'a - 1/2 a'Qa`.
    pub dual_objective: f64,
}

impl KernelMachine {
    pub fn decision(&self, z: &[f64]) -> f64 {
        self.support_vectors
            .iter()
            .zip(&self.dual_coefficients)
            .map(|(sv, c)| c * self.kernel.eval(sv, z))
            .sum::<f64>()
            + self.bias
    }
}

fn resolve_kernel(choice: KernelChoice, x: &[Vec<f64>]) -> Result<Kernel> {
    match choice {
        KernelChoice::Linear => Ok(Kernel::Linear),
        KernelChoice::Rbf { gamma: Some(g) } if g > 0.0 && g.is_finite() => Ok(Kernel::Rbf { gamma: g }),
        KernelChoice::Rbf { gamma: Some(g) } => Err(Error::InvalidFeature(format!("rbf gamma {g}"))),
        KernelChoice::Rbf { gamma: None } => {
            let d = x[0].len().max(1);
            let n = x.len() as f64;
            let mean_var = (0..x[0].len())
                .map(|f| {
                    let m = x.iter().map(|r| r[f]).sum::<f64>() / n;
                    x.iter().map(|r| (r[f] - m).powi(2)).sum::<f64>() / n
                })
                .sum::<f64>()
                / d as f64;
            let gamma = if mean_var > 0.0 { 1.0 / (d as f64 * mean_var) } else { 1.0 / d as f64 };
            Ok(Kernel::Rbf { gamma })
        }
    }
}

/// Trains on already-normalised rows.
pub fn train_svm(x: &[Vec<f64>], y: &[Label], params: &SvmParams) -> Result<KernelMachine> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::InvalidFeature(format!("{n} rows but {} labels", y.len())));
    }
    if n < 2 || !y.contains(&Label::Acceptable) || !y.contains(&Label::Unacceptable) {
        return Err(Error::SingleClassError);
    }
    let width = x[0].len();
    for (i, row) in x.iter().enumerate() {
        if row.len() != width || row.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeature(format!("row {i}")));
        }
    }
    if !(params.c > 0.0 && params.c.is_finite()) {
        return Err(Error::InvalidFeature(format!("C = {}", params.c)));
    }
    // Solve in a canonical sample order so the result does not depend on
    // how the caller happened to order the rows.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        y[a].cmp(&y[b]).then_with(|| {
            x[a].iter()
                .zip(&x[b])
                .map(|(p, q)| p.total_cmp(q))
                .find(|o| o.is_ne())
                .unwrap_or(std::cmp::Ordering::Equal)
        })
    });
    let x: Vec<Vec<f64>> = order.iter().map(|&i| x[i].clone()).collect();
    let y: Vec<Label> = order.iter().map(|&i| y[i]).collect();
    let (x, y) = (&x[..], &y[..]);
    let kernel = resolve_kernel(params.kernel, x)?;
    let ys: Vec<f64> = y.iter().map(|l| l.sign()).collect();
    let bound: Vec<f64> = y
        .iter()
        .map(|l| match (params.class_weight, l) {
            (Some((wa, _)), Label::Acceptable) => params.c * wa,
            (Some((_, wu)), Label::Unacceptable) => params.c * wu,
            (None, _) => params.c,
        })
        .collect();

    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = ys[i] * ys[j] * kernel.eval(&x[i], &x[j]);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let solution = smo(&q, &ys, &bound, params.tol, params.max_iter);

    let mut support_vectors = Vec::new();
    let mut dual_coefficients = Vec::new();
    for i in 0..n {
        if solution.alpha[i] > 0.0 {
            support_vectors.push(x[i].clone());
            dual_coefficients.push(ys[i] * solution.alpha[i]);
        }
    }
    Ok(KernelMachine {
        kernel,
        c: params.c,
        support_vectors,
        dual_coefficients,
        bias: -solution.rho,
        iterations: solution.iterations,
        dual_objective: -solution.objective,
    })
}

pub(crate) struct SmoSolution {
    pub alpha: Vec<f64>,
    pub rho: f64,
    pub iterations: usize,
    /// Primal-form objective `1/2 a'Qa - e'a` at termination.
    pub objective: f64,
}

fn objective(alpha: &[f64], grad: &[f64]) -> f64 {
    // with G = Qa - e:  1/2 a'Qa - e'a = 1/2 sum a_i (G_i - 1)
    0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (g - 1.0)).sum::<f64>()
}

/// SMO over a dense `Q`; `ys` are +-1 and `bound` the per-sample box.
pub(crate) fn smo(q: &[f64], ys: &[f64], bound: &[f64], tol: f64, max_iter: usize) -> SmoSolution {
    let n = ys.len();
    let mut alpha = vec![0.0; n];
    let mut grad = vec![-1.0; n];
    let in_up = |t: usize, a: &[f64]| (ys[t] > 0.0 && a[t] < bound[t]) || (ys[t] < 0.0 && a[t] > 0.0);
    let in_low = |t: usize, a: &[f64]| (ys[t] > 0.0 && a[t] > 0.0) || (ys[t] < 0.0 && a[t] < bound[t]);

    let mut iterations = 0;
    #[cfg(debug_assertions)]
    let mut last_obj = 0.0_f64;
    while iterations < max_iter {
        // strict comparisons keep the lowest index on ties
        let (mut i, mut gmax) = (usize::MAX, f64::NEG_INFINITY);
        let (mut j, mut gmin) = (usize::MAX, f64::INFINITY);
        for t in 0..n {
            let v = -ys[t] * grad[t];
            if in_up(t, &alpha) && v > gmax {
                gmax = v;
                i = t;
            }
            if in_low(t, &alpha) && v < gmin {
                gmin = v;
                j = t;
            }
        }
        if i == usize::MAX || j == usize::MAX || gmax - gmin < tol {
            break;
        }
        iterations += 1;

        let (ci, cj) = (bound[i], bound[j]);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let qii = q[i * n + i];
        let qjj = q[j * n + j];
        let qij = q[i * n + j];
        if ys[i] != ys[j] {
            let quad = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > ci - cj {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = ci - diff;
                }
            } else if alpha[j] > cj {
                alpha[j] = cj;
                alpha[i] = cj + diff;
            }
        } else {
            let quad = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > ci {
                if alpha[i] > ci {
                    alpha[i] = ci;
                    alpha[j] = sum - ci;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > cj {
                if alpha[j] > cj {
                    alpha[j] = cj;
                    alpha[i] = sum - cj;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (row_i, row_j) = (&q[i * n..(i + 1) * n], &q[j * n..(j + 1) * n]);
        for t in 0..n {
            grad[t] += row_i[t] * di + row_j[t] * dj;
        }

        #[cfg(debug_assertions)]
        {
            let obj = objective(&alpha, &grad);
            debug_assert!(
                obj <= last_obj + 1e-9 * (1.0 + last_obj.abs()),
                "SMO objective increased: {last_obj} -> {obj}"
            );
            last_obj = obj;
        }
    }
    if iterations >= max_iter {
        log::warn!("SMO stopped at the iteration cap ({max_iter}) before reaching tolerance {tol}");
    }

    // offset from free vectors, or the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut sum_free, mut n_free) = (0.0, 0usize);
    for t in 0..n {
        let yg = ys[t] * grad[t];
        if alpha[t] >= bound[t] {
            if ys[t] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if alpha[t] <= 0.0 {
            if ys[t] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 { sum_free / n_free as f64 } else { 0.5 * (ub + lb) };
    let objective = objective(&alpha, &grad);
    SmoSolution {
        alpha,
        rho,
        iterations,
        objective,
    }
}
