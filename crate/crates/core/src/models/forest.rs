//! Random forest: bagged regression trees with deterministically derived
//! per-tree seeds, plus mean-decrease-in-impurity feature ranking.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{fit_tree, ForestParams, Predictor, RegressionTree};
use crate::seeds::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<RegressionTree>,
    n_features: usize,
}

impl Forest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }
}

impl Predictor for Forest {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.predict_row(x)).sum();
        sum / self.trees.len() as f64
    }
}

pub fn fit_forest(x: ArrayView2<f64>, y: ArrayView1<f64>, params: &ForestParams) -> Result<Forest> {
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

    // Seeds are derived up front from the tree index, so the result does not
    // depend on how rayon schedules the builds.
    let tree_seeds: Vec<u64> = (0..params.n_estimators)
        .map(|i| derive_seed(params.seed, &format!("tree/{i}")))
        .collect();

    let n = x.nrows();
    let trees: Vec<Result<RegressionTree>> = tree_seeds
        .par_iter()
        .map(|&tree_seed| {
            if params.bootstrap {
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
                let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                let bx = Array2::from_shape_fn((n, x.ncols()), |(i, j)| x[[rows[i], j]]);
                let by = Array1::from_shape_fn(n, |i| y[rows[i]]);
                // The remainder of the per-tree stream seeds the subset draws.
                let subset_seed = rng.random::<u64>();
                fit_tree(bx.view(), by.view(), &params.tree, subset_seed)
            } else {
                fit_tree(x, y, &params.tree, tree_seed)
            }
        })
        .collect();

    let trees = trees.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(Forest { trees, n_features: x.ncols() })
}

/// Per-feature importance scores from a trained forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    /// One score per feature; non-negative, summing to 1 unless degenerate.
    pub values: Vec<f64>,
    /// True when no tree contains a split, leaving all scores zero.
    pub degenerate: bool,
}

impl FeatureImportance {
    /// Feature indices sorted by descending importance; ties resolve toward
    /// the lower index so rankings are reproducible.
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.values.len()).collect();
        order.sort_by(|&a, &b| {
            self.values[b].partial_cmp(&self.values[a]).unwrap().then(a.cmp(&b))
        });
        order
    }
}

/// Mean decrease in impurity: per feature, split gains weighted by node
/// sample fraction, summed per tree, averaged over trees, normalized to 1.
pub fn feature_importance(forest: &Forest) -> FeatureImportance {
    let mut acc = vec![0.0; forest.n_features];
    for tree in &forest.trees {
        tree.importance_into(&mut acc);
    }
    for v in acc.iter_mut() {
        *v /= forest.trees.len() as f64;
    }
    let total: f64 = acc.iter().sum();
    if total <= 0.0 {
        return FeatureImportance { values: vec![0.0; forest.n_features], degenerate: true };
    }
    for v in acc.iter_mut() {
        *v /= total;
    }
    FeatureImportance { values: acc, degenerate: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{MaxFeatures, TreeParams};
    use ndarray::Array2;

    fn small_regression_data(seed: u64, n: usize, d: usize) -> (Array2<f64>, Array1<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-2.0..2.0));
        let y = Array1::from_shape_fn(n, |i| {
            3.0 * x[[i, 0]] - 2.0 * x[[i, d - 1]] + rng.random_range(-0.1..0.1)
        });
        (x, y)
    }

    #[test]
    fn single_tree_without_bootstrap_equals_fit_tree() {
        let (x, y) = small_regression_data(1, 60, 3);
        let params = ForestParams {
            n_estimators: 1,
            bootstrap: false,
            seed: 5,
            tree: TreeParams { max_depth: 4, min_samples_leaf: 2, ..TreeParams::default() },
        };
        let forest = fit_forest(x.view(), y.view(), &params).unwrap();
        let lone = fit_tree(x.view(), y.view(), &params.tree, 0).unwrap();
        for i in 0..x.nrows() {
            let row = x.row(i);
            let row = row.as_slice().unwrap();
            assert_eq!(forest.predict_row(row), lone.predict_row(row));
        }
    }

    #[test]
    fn constant_targets_predict_the_constant() {
        let (x, _) = small_regression_data(2, 40, 3);
        let y = Array1::from_elem(40, 42.0);
        let forest = fit_forest(x.view(), y.view(), &ForestParams::default()).unwrap();
        assert_eq!(forest.predict_row(&[0.0, 0.0, 0.0]), 42.0);
    }

    #[test]
    fn fixed_seed_is_identical_across_runs_and_thread_counts() {
        let (x, y) = small_regression_data(3, 120, 4);
        let params = ForestParams { seed: 99, ..ForestParams::default() };

        let run = |threads: usize| {
            let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
            pool.install(|| fit_forest(x.view(), y.view(), &params).unwrap())
        };
        let a = run(1);
        let b = run(4);
        let c = run(4);
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert_eq!(serde_json::to_string(&b).unwrap(), serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn prediction_lies_within_tree_range() {
        let (x, y) = small_regression_data(4, 80, 3);
        let forest = fit_forest(x.view(), y.view(), &ForestParams::default()).unwrap();
        for i in 0..x.nrows() {
            let row = x.row(i);
            let row = row.as_slice().unwrap();
            let preds: Vec<f64> = forest.trees().iter().map(|t| t.predict_row(row)).collect();
            let lo = preds.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = preds.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let p = forest.predict_row(row);
            assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
        }
    }

    #[test]
    fn unused_feature_has_zero_importance() {
        // Feature 1 is pure noise with no effect on y; feature 0 determines y.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 50;
        let x = Array2::from_shape_fn((n, 2), |_| rng.random_range(0.0..1.0));
        let y = Array1::from_shape_fn(n, |i| if x[[i, 0]] > 0.5 { 10.0 } else { 0.0 });
        let params = ForestParams {
            bootstrap: false,
            n_estimators: 1,
            tree: TreeParams { max_depth: 1, min_samples_leaf: 1, ..TreeParams::default() },
            ..ForestParams::default()
        };
        let forest = fit_forest(x.view(), y.view(), &params).unwrap();
        let imp = feature_importance(&forest);
        assert!(!imp.degenerate);
        // Single split on feature 0: all the mass, normalized to exactly 1.
        assert!((imp.values[0] - 1.0).abs() < 1e-12);
        assert_eq!(imp.values[1], 0.0);
    }

    #[test]
    fn pure_leaf_forest_is_degenerate_not_normalized() {
        let (x, _) = small_regression_data(6, 30, 2);
        let y = Array1::from_elem(30, 1.0);
        let forest = fit_forest(x.view(), y.view(), &ForestParams::default()).unwrap();
        let imp = feature_importance(&forest);
        assert!(imp.degenerate);
        assert!(imp.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn drift_sensors_dominate_the_ranking() {
        // Synthetic telemetry where only sensors 4 and 11 carry signal; their
        // feature indices are 3 + (sensor − 1).
        let cfg = crate::data::SimulationConfig {
            drift_sensors: vec![4, 11],
            ..crate::data::SimulationConfig::new(6, 17, 0.5)
        };
        let ds = cfg.generate().unwrap();
        let x = ds.features_matrix();
        let y = ds.targets().unwrap();
        let params = ForestParams {
            tree: TreeParams { max_depth: 6, min_samples_leaf: 5, ..TreeParams::default() },
            ..ForestParams::default()
        };
        let forest = fit_forest(x.view(), y.view(), &params).unwrap();
        let imp = feature_importance(&forest);
        let ranking = imp.ranking();
        let top2: Vec<usize> = ranking[..2].to_vec();
        assert!(top2.contains(&(3 + 4 - 1)), "ranking {ranking:?}");
        assert!(top2.contains(&(3 + 11 - 1)), "ranking {ranking:?}");
        let total: f64 = imp.values.iter().sum();
        assert!((total - 1.0).abs() < 1e-9);
        assert!(imp.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn subset_policy_is_available_and_deterministic() {
        let (x, y) = small_regression_data(8, 100, 6);
        let params = ForestParams {
            tree: TreeParams { max_features: MaxFeatures::Subset(2), ..TreeParams::default() },
            seed: 31,
            ..ForestParams::default()
        };
        let a = fit_forest(x.view(), y.view(), &params).unwrap();
        let b = fit_forest(x.view(), y.view(), &params).unwrap();
        assert_eq!(a, b);
    }
}
