//! Per-feature standardization fitted on training data only.

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, FEATURE_COUNT};
use crate::error::{Error, Result};

/// Per-feature mean/std statistics with a constant-feature mask.
///
/// The std uses the population convention (divide by N), matching the
/// sampling statistics used elsewhere in the toolkit. Constant features map
/// to exactly 0 and are flagged in `zero_variance_mask`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
    pub zero_variance_mask: Vec<bool>,
}

impl Scaler {
    /// Identity scaler: transform is a no-op. Stored when scaling is
    /// disabled so model artifacts always carry an invertible transform.
    pub fn identity(arity: usize) -> Self {
        Scaler {
            mean: vec![0.0; arity],
            std: vec![1.0; arity],
            zero_variance_mask: vec![false; arity],
        }
    }

    pub fn arity(&self) -> usize {
        self.mean.len()
    }

    /// z = (x - mean) / std per feature; constant features map to 0.
    pub fn transform_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if self.zero_variance_mask[j] {
                0.0
            } else {
                (*v - self.mean[j]) / self.std[j]
            };
        }
    }

    /// Inverse of [`Scaler::transform_row`]; constant features recover their
    /// training mean.
    pub fn inverse_row(&self, row: &mut [f64]) {
        for (j, v) in row.iter_mut().enumerate() {
            *v = if self.zero_variance_mask[j] {
                self.mean[j]
            } else {
                *v * self.std[j] + self.mean[j]
            };
        }
    }

    pub fn transform_matrix(&self, m: ArrayView2<f64>) -> Result<Array2<f64>> {
        if m.ncols() != self.arity() {
            return Err(Error::ArityMismatch {
                expected: self.arity(),
                actual: m.ncols(),
            });
        }
        let mut out = m.to_owned();
        for mut row in out.rows_mut() {
            self.transform_row(row.as_slice_mut().expect("row-major layout"));
        }
        Ok(out)
    }
}

// Constant detection is relative: summing N copies of a non-representable
// constant leaves an O(ulp) residual variance, never an exact zero.
fn is_zero_variance(std: f64, mean: f64) -> bool {
    std <= 1e-9 * mean.abs().max(1.0)
}

/// Fit per-feature statistics over the training set (population std).
pub fn fit_scaler(train: &Dataset) -> Result<Scaler> {
    if train.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "fitting a scaler needs at least 2 records, got {}",
            train.len()
        )));
    }
    let m = train.features_matrix();
    let n = m.nrows() as f64;
    let mut mean = vec![0.0; FEATURE_COUNT];
    let mut std = vec![0.0; FEATURE_COUNT];
    let mut mask = vec![false; FEATURE_COUNT];
    for j in 0..FEATURE_COUNT {
        let col = m.column(j);
        let mu = col.sum() / n;
        let var = col.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
        let sd = var.sqrt();
        mean[j] = mu;
        if is_zero_variance(sd, mu) {
            mask[j] = true;
            std[j] = 0.0;
        } else {
            std[j] = sd;
        }
    }
    Ok(Scaler {
        mean,
        std,
        zero_variance_mask: mask,
    })
}

/// Apply a fitted scaler to a dataset's features; labels are untouched.
pub fn apply_scaler(s: &Scaler, ds: &Dataset) -> Result<Dataset> {
    if s.arity() != FEATURE_COUNT {
        return Err(Error::ArityMismatch {
            expected: FEATURE_COUNT,
            actual: s.arity(),
        });
    }
    let mut out = ds.clone();
    let mut records = out.records().to_vec();
    for r in &mut records {
        let mut f = r.features();
        s.transform_row(&mut f);
        r.set_features(&f);
    }
    out = Dataset::new(records, format!("{}#scaled", ds.provenance()));
    Ok(out)
}
