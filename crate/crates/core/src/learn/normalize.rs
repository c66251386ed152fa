use serde::{Deserialize, Serialize};

use super::FeatureMask;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMethod {
    /// `(x - mean) / stddev`
    #[default]
    ZScore,
    /// `(x - min) / (max - min)`
    MinMax,
}

/// Per-feature affine normalisation fitted on training rows. Masked-out
/// features keep centre 0 and scale 1 and are dropped on application.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub method: NormMethod,
    pub center: Vec<f64>,
    pub scale: Vec<f64>,
}

pub fn normalize_fit<R: AsRef<[f64]>>(rows: &[R], mask: &FeatureMask, method: NormMethod) -> Result<NormStats> {
    if rows.len() < 2 {
        return Err(Error::TooFewSamples { n: rows.len(), k: 2 });
    }
    let width = mask.len();
    let mut center = vec![0.0; width];
    let mut scale = vec![1.0; width];
    for f in mask.indices() {
        let column = || rows.iter().map(move |r| r.as_ref()[f]);
        if column().any(|v| !v.is_finite()) {
            return Err(Error::InvalidFeature(format!("feature {f}")));
        }
        let (c, s) = match method {
            NormMethod::ZScore => {
                let n = rows.len() as f64;
                let mean = column().sum::<f64>() / n;
                let var = column().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
                (mean, var.sqrt())
            }
            NormMethod::MinMax => {
                let lo = column().fold(f64::INFINITY, f64::min);
                let hi = column().fold(f64::NEG_INFINITY, f64::max);
                (lo, hi - lo)
            }
        };
        // relative test so features on large scales (PSD ~ 1e5) behave like small ones
        if !(s > 1e-12 * (1.0 + c.abs())) {
            return Err(Error::DegenerateFeature(f));
        }
        center[f] = c;
        scale[f] = s;
    }
    Ok(NormStats { method, center, scale })
}

/// Normalises the unmasked features of `x`, in index order.
pub fn normalize_apply(x: &[f64], stats: &NormStats, mask: &FeatureMask) -> Vec<f64> {
    mask.indices().map(|f| (x[f] - stats.center[f]) / stats.scale[f]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_row_example() {
        let rows = vec![vec![0.0], vec![2.0]];
        let s = normalize_fit(&rows, &FeatureMask::all(1), NormMethod::ZScore).unwrap();
        assert_eq!(s.center, vec![1.0]);
        assert_eq!(s.scale, vec![1.0]);
    }

    #[test]
    fn constant_column_is_degenerate() {
        let rows = vec![vec![1.0, 3.0], vec![2.0, 3.0], vec![5.0, 3.0]];
        let r = normalize_fit(&rows, &FeatureMask::all(2), NormMethod::ZScore);
        assert!(matches!(r, Err(Error::DegenerateFeature(1))));
        // masking the constant column avoids the error
        let mask = FeatureMask::from_indices(2, &[0]);
        assert!(normalize_fit(&rows, &mask, NormMethod::ZScore).is_ok());
        assert!(matches!(
            normalize_fit(&rows[..1], &mask, NormMethod::ZScore),
            Err(Error::TooFewSamples { .. })
        ));
    }

    #[test]
    fn apply_drops_masked_and_centres() {
        let rows = vec![vec![1.0, 10.0, 5.0], vec![3.0, 30.0, 9.0]];
        let mask = FeatureMask::from_indices(3, &[0, 2]);
        let s = normalize_fit(&rows, &mask, NormMethod::ZScore).unwrap();
        assert_eq!(normalize_apply(&[2.0, 99.0, 7.0], &s, &mask), vec![0.0, 0.0]);
        // held-out row by hand: (4 - 2) / 1, (1 - 7) / 2
        assert_eq!(normalize_apply(&[4.0, 0.0, 1.0], &s, &mask), vec![2.0, -3.0]);
    }

    #[test]
    fn min_max_maps_to_unit_interval() {
        let rows = vec![vec![2.0], vec![4.0], vec![6.0]];
        let mask = FeatureMask::all(1);
        let s = normalize_fit(&rows, &mask, NormMethod::MinMax).unwrap();
        let z: Vec<f64> = rows.iter().map(|r| normalize_apply(r, &s, &mask)[0]).collect();
        assert_eq!(z, vec![0.0, 0.5, 1.0]);
    }

    proptest! {
        #[test]
        fn fitted_rows_are_standardised(rows in proptest::collection::vec(proptest::collection::vec(-50.0f64..50.0, 4), 3..40)) {
            let mask = FeatureMask::all(4);
            let Ok(s) = normalize_fit(&rows, &mask, NormMethod::ZScore) else { return Ok(()) };
            let z: Vec<Vec<f64>> = rows.iter().map(|r| normalize_apply(r, &s, &mask)).collect();
            let n = z.len() as f64;
            for f in 0..4 {
                // two-pass oracle over the transformed column
                let mean = z.iter().map(|r| r[f]).sum::<f64>() / n;
                let var = z.iter().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / n;
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((var - 1.0).abs() < 1e-9);
            }
        }
    }
}
