//! Gradient boosting with squared-error loss: trees fit to residuals of the
//! running ensemble, starting from the target mean.

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{fit_tree, GbmParams, Predictor, RegressionTree};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbmModel {
    base: f64,
    learning_rate: f64,
    trees: Vec<RegressionTree>,
    n_features: usize,
}

impl GbmModel {
    pub fn n_stages(&self) -> usize {
        self.trees.len()
    }

    /// Prediction truncated to the first `stages` trees; `stages = 0` gives
    /// the base model.
    pub fn predict_staged(&self, x: &[f64], stages: usize) -> f64 {
        let mut acc = self.base;
        for tree in self.trees.iter().take(stages) {
            acc += self.learning_rate * tree.predict_row(x);
        }
        acc
    }
}

impl Predictor for GbmModel {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        self.predict_staged(x, self.trees.len())
    }
}

pub fn fit_gbm(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &GbmParams) -> Result<GbmModel> {
    params.validate()?;
    if x.nrows() == 0 {
        return Err(Error::EmptyDataset);
    }
    if x.nrows() != y.len() {
        return Err(Error::InvalidArgument(format!(
            "feature matrix has {} rows but targets have {}",
            x.nrows(),
            y.len()
        )));
    }

    let base = y.sum() / y.len() as f64;
    let mut residuals: Array1<f64> = y.mapv(|v| v - base);
    let mut trees = Vec::with_capacity(params.n_stages);
    for stage in 0..params.n_stages {
        let seed = derive_seed(params.seed, &format!("stage/{stage}"));
        let tree = fit_tree(x, residuals.view(), &params.tree, seed)
            .map_err(|e| e.in_stage(&format!("gbm stage {stage}")))?;
        for (i, r) in residuals.iter_mut().enumerate() {
            let row = x.row(i);
            let p = match row.as_slice() {
                Some(s) => tree.predict_row(s),
                None => tree.predict_row(&row.to_vec()),
            };
            *r -= params.learning_rate * p;
        }
        trees.push(tree);
    }
    Ok(GbmModel { base, learning_rate: params.learning_rate, trees, n_features: x.ncols() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{MaxFeatures, TreeParams};
    use ndarray::Array2;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn wavy_data(seed: u64, n: usize) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Array2<f64> = Array2::from_shape_fn((n, 2), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |i| {
            (x[[i, 0]] * 2.0).sin() * 5.0 + x[[i, 1]].powi(2) + rng.random_range(-0.05..0.05)
        });
        (x, y)
    }

    fn training_mse(model: &GbmModel, x: &Array2<f64>, y: &Array1<f64>, stages: usize) -> f64 {
        let mut sum = 0.0;
        for i in 0..x.nrows() {
            let p = model.predict_staged(x.row(i).as_slice().unwrap(), stages);
            sum += (p - y[i]).powi(2);
        }
        sum / x.nrows() as f64
    }

    #[test]
    fn zero_stages_is_the_mean() {
        let (x, y) = wavy_data(1, 50);
        let params = GbmParams { n_stages: 0, ..GbmParams::default() };
        let model = fit_gbm(x.view(), y.view(), &params).unwrap();
        let mean = y.sum() / y.len() as f64;
        assert_eq!(model.predict_row(&[0.3, -0.7]), mean);
    }

    #[test]
    fn one_full_strength_deep_stage_shrinks_residuals() {
        let (x, y) = wavy_data(2, 40);
        let params = GbmParams {
            n_stages: 1,
            learning_rate: 1.0,
            tree: TreeParams {
                max_depth: 16,
                min_samples_leaf: 1,
                min_samples_split: 2,
                max_features: MaxFeatures::All,
            },
            seed: 0,
        };
        let model = fit_gbm(x.view(), y.view(), &params).unwrap();
        let base_mse = training_mse(&model, &x, &y, 0);
        let one_stage = training_mse(&model, &x, &y, 1);
        assert!(one_stage < base_mse);
        // Depth large enough to isolate every point: near-exact interpolation.
        assert!(one_stage < 1e-18, "one-stage training MSE {one_stage}");
    }

    #[test]
    fn training_mse_is_monotone_in_stage_count() {
        let (x, y) = wavy_data(3, 120);
        let params = GbmParams { n_stages: 60, ..GbmParams::default() };
        let model = fit_gbm(x.view(), y.view(), &params).unwrap();
        let mut prev = training_mse(&model, &x, &y, 0);
        for m in 1..=model.n_stages() {
            let cur = training_mse(&model, &x, &y, m);
            assert!(cur <= prev + 1e-9, "stage {m}: {cur} > {prev}");
            prev = cur;
        }
    }

    #[test]
    fn a_hundred_stages_beat_ten() {
        let (x, y) = wavy_data(4, 150);
        let ten = fit_gbm(x.view(), y.view(), &GbmParams { n_stages: 10, ..GbmParams::default() })
            .unwrap();
        let hundred =
            fit_gbm(x.view(), y.view(), &GbmParams { n_stages: 100, ..GbmParams::default() })
                .unwrap();
        assert!(
            training_mse(&hundred, &x, &y, 100) <= training_mse(&ten, &x, &y, 10),
            "boosting longer must not hurt the training fit"
        );
    }

    #[test]
    fn fixed_seed_reruns_identically() {
        let (x, y) = wavy_data(5, 80);
        let params = GbmParams { n_stages: 20, seed: 13, ..GbmParams::default() };
        let a = fit_gbm(x.view(), y.view(), &params).unwrap();
        let b = fit_gbm(x.view(), y.view(), &params).unwrap();
        assert_eq!(a, b);
    }
}
