//! Linear support vector regression: epsilon-insensitive loss with an L2
//! penalty, minimized by seeded stochastic subgradient descent.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Predictor, SvrParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    weights: Vec<f64>,
    intercept: f64,
}

impl SvrModel {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn intercept(&self) -> f64 {
        self.intercept
    }
}

impl Predictor for SvrModel {
    fn n_features(&self) -> usize {
        self.weights.len()
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Full objective ½‖w‖² + c·Σ max(0, |y − w·x − b| − ε).
pub fn svr_objective(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    model: &SvrModel,
    epsilon: f64,
    c: f64,
) -> f64 {
    let reg: f64 = 0.5 * model.weights.iter().map(|w| w * w).sum::<f64>();
    let hinge: f64 = (0..x.nrows())
        .map(|i| {
            let row = x.row(i);
            let pred = match row.as_slice() {
                Some(s) => model.predict_row(s),
                None => model.predict_row(&row.to_vec()),
            };
            ((y[i] - pred).abs() - epsilon).max(0.0)
        })
        .sum();
    reg + c * hinge
}

pub fn fit_svr(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &SvrParams) -> Result<SvrModel> {
    params.validate()?;
    let n = x.nrows();
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    if n != y.len() {
        return Err(Error::InvalidArgument(format!(
            "feature matrix has {} rows but targets have {}",
            n,
            y.len()
        )));
    }
    let d = x.ncols();
    let n_f = n as f64;

    // Weights start at zero; the intercept starts at the target mean so the
    // subgradient path only has to learn the slope.
    let mut w = vec![0.0; d];
    let mut b = y.sum() / n_f;

    // Subgradient iterates are not monotone, so keep the best epoch-end
    // iterate by full objective and return that.
    let mut best = SvrModel { weights: w.clone(), intercept: b };
    let mut best_obj = svr_objective(x, y, &best, params.epsilon, params.c);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut t: u64 = 0;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            // Per-sample estimate of (1/n)·objective: regularizer weighted
            // 1/n, hinge term weighted c.
            let step = params.step_size / (1.0 + t as f64).sqrt();
            t += 1;
            let row = x.row(i);
            let pred = b + w.iter().zip(row.iter()).map(|(wj, v)| wj * v).sum::<f64>();
            let r = y[i] - pred;
            let sign = if r.abs() <= params.epsilon {
                0.0
            } else if r > 0.0 {
                1.0
            } else {
                -1.0
            };
            for (wj, v) in w.iter_mut().zip(row.iter()) {
                *wj -= step * (*wj / n_f - params.c * sign * v);
            }
            b += step * params.c * sign;
        }
        let candidate = SvrModel { weights: w.clone(), intercept: b };
        let obj = svr_objective(x, y, &candidate, params.epsilon, params.c);
        if obj < best_obj {
            best_obj = obj;
            best = candidate;
        }
    }
    Ok(best)
}
