//! CART regression tree: greedy best-split search by weighted variance
//! reduction, midpoint thresholds, leaves predicting target means.

use ndarray::{ArrayView1, ArrayView2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{MaxFeatures, Predictor, TreeParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        value: f64,
        samples: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        /// Variance reduction achieved by this split, in target units squared.
        gain: f64,
        samples: usize,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    root: TreeNode,
    n_features: usize,
    n_samples: usize,
}

impl RegressionTree {
    pub fn root(&self) -> &TreeNode {
        &self.root
    }

    pub fn depth(&self) -> usize {
        fn depth_of(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + depth_of(left).max(depth_of(right)),
            }
        }
        depth_of(&self.root)
    }

    pub fn n_leaves(&self) -> usize {
        fn count(node: &TreeNode) -> usize {
            match node {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Split { left, right, .. } => count(left) + count(right),
            }
        }
        count(&self.root)
    }

    /// Adds this tree's mean-decrease-in-impurity mass per feature into `acc`:
    /// for every split, gain times the fraction of training rows at that node.
    pub fn importance_into(&self, acc: &mut [f64]) {
        fn walk(node: &TreeNode, total: f64, acc: &mut [f64]) {
            if let TreeNode::Split { feature, gain, samples, left, right, .. } = node {
                acc[*feature] += gain * (*samples as f64) / total;
                walk(left, total, acc);
                walk(right, total, acc);
            }
        }
        walk(&self.root, self.n_samples as f64, acc);
    }
}

impl Predictor for RegressionTree {
    fn n_features(&self) -> usize {
        self.n_features
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        let mut node = &self.root;
        loop {
            match node {
                TreeNode::Leaf { value, .. } => return *value,
                TreeNode::Split { feature, threshold, left, right, .. } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }
}

struct Builder<'a> {
    x: ArrayView2<'a, f64>,
    y: ArrayView1<'a, f64>,
    params: &'a TreeParams,
    rng: ChaCha8Rng,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    gain: f64,
    // position in the sorted-by-feature order where the left block ends
    left_len: usize,
}

impl Builder<'_> {
    fn build(&mut self, indices: &mut [usize], depth: usize) -> TreeNode {
        let n = indices.len();
        let sum: f64 = indices.iter().map(|&i| self.y[i]).sum();
        let mean = sum / n as f64;
        let variance = indices.iter().map(|&i| (self.y[i] - mean).powi(2)).sum::<f64>() / n as f64;

        let leaf = |mean: f64| TreeNode::Leaf { value: mean, samples: n };
        if depth >= self.params.max_depth
            || n < self.params.min_samples_split
            || n < 2 * self.params.min_samples_leaf
            || variance <= 1e-20 * (1.0 + mean * mean)
        {
            return leaf(mean);
        }

        let best = match self.search(indices, sum, variance) {
            Some(b) => b,
            None => return leaf(mean),
        };

        // Partition on the chosen threshold; sort_unstable on pre-sorted runs
        // would also work, but an explicit partition keeps intent clear.
        indices.sort_unstable_by(|&a, &b| {
            self.x[[a, best.feature]]
                .partial_cmp(&self.x[[b, best.feature]])
                .unwrap()
        });
        let (left_idx, right_idx) = indices.split_at_mut(best.left_len);
        let left = self.build(left_idx, depth + 1);
        let right = self.build(right_idx, depth + 1);
        TreeNode::Split {
            feature: best.feature,
            threshold: best.threshold,
            gain: best.gain,
            samples: n,
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    fn search(&mut self, indices: &[usize], sum: f64, variance: f64) -> Option<BestSplit> {
        let n = indices.len();
        let n_f = n as f64;
        let candidates: Vec<usize> = match self.params.max_features {
            MaxFeatures::All => (0..self.x.ncols()).collect(),
            MaxFeatures::Subset(k) => {
                let k = k.min(self.x.ncols());
                let mut drawn: Vec<usize> =
                    rand::seq::index::sample(&mut self.rng, self.x.ncols(), k).into_vec();
                // Sorted so that the tie-break over feature index is unaffected
                // by draw order.
                drawn.sort_unstable();
                drawn
            }
        };

        let mut best: Option<BestSplit> = None;
        let mut sorted = indices.to_vec();
        for &f in &candidates {
            sorted.sort_unstable_by(|&a, &b| self.x[[a, f]].partial_cmp(&self.x[[b, f]]).unwrap());
            let mut left_sum = 0.0;
            for pos in 1..n {
                left_sum += self.y[sorted[pos - 1]];
                let lo = self.x[[sorted[pos - 1], f]];
                let hi = self.x[[sorted[pos], f]];
                if lo == hi {
                    continue;
                }
                if pos < self.params.min_samples_leaf || n - pos < self.params.min_samples_leaf {
                    continue;
                }
                let n_l = pos as f64;
                let n_r = (n - pos) as f64;
                let right_sum = sum - left_sum;
                // variance − weighted child variance; the squared-sum form is
                // exact because the sum-of-squares terms cancel.
                let gain =
                    (left_sum * left_sum / n_l + right_sum * right_sum / n_r - sum * sum / n_f)
                        / n_f;
                let threshold = lo + (hi - lo) / 2.0;
                let better = match &best {
                    None => true,
                    Some(b) => gain > b.gain,
                };
                if better {
                    best = Some(BestSplit { feature: f, threshold, gain, left_len: pos });
                }
            }
        }
        match best {
            Some(b) if b.gain > 1e-12 * variance => Some(b),
            _ => None,
        }
    }
}

pub fn fit_tree(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    params: &TreeParams,
    feature_subset_seed: u64,
) -> Result<RegressionTree> {
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
    let mut builder = Builder {
        x,
        y,
        params,
        rng: ChaCha8Rng::seed_from_u64(feature_subset_seed),
    };
    let mut indices: Vec<usize> = (0..x.nrows()).collect();
    let root = builder.build(&mut indices, 0);
    Ok(RegressionTree { root, n_features: x.ncols(), n_samples: x.nrows() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{Array1, Array2};
    use rand::{Rng, SeedableRng};

    fn loose() -> TreeParams {
        TreeParams {
            max_depth: 10,
            min_samples_leaf: 1,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
        }
    }

    /// Independent split search: enumerate every (feature, midpoint) pair and
    /// compute the gain from scratch with direct two-pass variances.
    fn brute_force_best_split(
        x: &Array2<f64>,
        y: &Array1<f64>,
        min_samples_leaf: usize,
    ) -> Option<(usize, f64, f64)> {
        let n = x.nrows();
        let var = |rows: &[usize]| -> f64 {
            let m = rows.iter().map(|&i| y[i]).sum::<f64>() / rows.len() as f64;
            rows.iter().map(|&i| (y[i] - m).powi(2)).sum::<f64>() / rows.len() as f64
        };
        let all: Vec<usize> = (0..n).collect();
        let parent = var(&all);
        let mut best: Option<(usize, f64, f64)> = None;
        for f in 0..x.ncols() {
            let mut values: Vec<f64> = (0..n).map(|i| x[[i, f]]).collect();
            values.sort_by(|a, b| a.partial_cmp(b).unwrap());
            values.dedup();
            for w in values.windows(2) {
                let t = w[0] + (w[1] - w[0]) / 2.0;
                let left: Vec<usize> = (0..n).filter(|&i| x[[i, f]] <= t).collect();
                let right: Vec<usize> = (0..n).filter(|&i| x[[i, f]] > t).collect();
                if left.len() < min_samples_leaf || right.len() < min_samples_leaf {
                    continue;
                }
                let gain = parent
                    - (left.len() as f64 * var(&left) + right.len() as f64 * var(&right))
                        / n as f64;
                let better = match best {
                    None => true,
                    Some((_, _, g)) => gain > g + 1e-12,
                };
                if better {
                    best = Some((f, t, gain));
                }
            }
        }
        best
    }

    #[test]
    fn constant_targets_give_single_leaf() {
        let x = ndarray::array![[0.0], [1.0], [2.0], [3.0]];
        let y = Array1::from_elem(4, 5.5);
        let tree = fit_tree(x.view(), y.view(), &loose(), 0).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.predict_row(&[17.0]), 5.5);
    }

    #[test]
    fn step_function_splits_at_midpoint() {
        let x = ndarray::array![[0.0], [1.0], [2.0], [3.0]];
        let y = ndarray::array![0.0, 0.0, 10.0, 10.0];
        let tree = fit_tree(x.view(), y.view(), &loose(), 0).unwrap();
        match tree.root() {
            TreeNode::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert!(*threshold > 1.0 && *threshold < 2.0, "threshold {threshold}");
                let oracle = brute_force_best_split(&x, &y, 1).unwrap();
                assert_eq!(oracle.0, *feature);
                assert!((oracle.1 - threshold).abs() < 1e-12);
            }
            other => panic!("expected a split at the root, got {other:?}"),
        }
        assert_eq!(tree.predict_row(&[0.5]), 0.0);
        assert_eq!(tree.predict_row(&[2.5]), 10.0);
    }

    #[test]
    fn depth_zero_is_the_mean() {
        let x = ndarray::array![[0.0], [1.0], [2.0]];
        let y = ndarray::array![1.0, 2.0, 6.0];
        let params = TreeParams { max_depth: 0, ..loose() };
        let tree = fit_tree(x.view(), y.view(), &params, 0).unwrap();
        assert_eq!(tree.n_leaves(), 1);
        assert_eq!(tree.predict_row(&[9.0]), 3.0);
    }

    #[test]
    fn stump_agrees_with_brute_force_on_random_data() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        for trial in 0..20 {
            let n = 25;
            let d = 4;
            let x = Array2::from_shape_fn((n, d), |_| rng.random_range(-3.0..3.0));
            let y = Array1::from_shape_fn(n, |_| rng.random_range(-10.0..10.0));
            let params = TreeParams { max_depth: 1, ..loose() };
            let tree = fit_tree(x.view(), y.view(), &params, 0).unwrap();
            let (of, ot, og) = brute_force_best_split(&x, &y, 1).unwrap();
            match tree.root() {
                TreeNode::Split { feature, threshold, gain, .. } => {
                    assert_eq!(*feature, of, "trial {trial}");
                    assert!((threshold - ot).abs() < 1e-9, "trial {trial}");
                    assert!((gain - og).abs() < 1e-9 * og.abs().max(1.0), "trial {trial}");
                }
                other => panic!("trial {trial}: expected split, got {other:?}"),
            }
        }
    }

    #[test]
    fn duplicate_columns_break_ties_toward_lower_index() {
        // Columns 0 and 1 are identical, so their best splits tie exactly.
        let x = ndarray::array![[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]];
        let y = ndarray::array![0.0, 0.0, 10.0, 10.0];
        let tree = fit_tree(x.view(), y.view(), &loose(), 0).unwrap();
        match tree.root() {
            TreeNode::Split { feature, .. } => assert_eq!(*feature, 0),
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn constraints_are_respected() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 200;
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.0..1.0));
        let y = Array1::from_shape_fn(n, |i| (i % 17) as f64 + rng.random_range(0.0..0.1));
        let params = TreeParams {
            max_depth: 4,
            min_samples_leaf: 9,
            min_samples_split: 25,
            max_features: MaxFeatures::All,
        };
        let tree = fit_tree(x.view(), y.view(), &params, 0).unwrap();
        assert!(tree.depth() <= 4);

        fn check(node: &TreeNode, params: &TreeParams) {
            match node {
                TreeNode::Leaf { samples, .. } => {
                    assert!(*samples >= params.min_samples_leaf);
                }
                TreeNode::Split { samples, left, right, .. } => {
                    assert!(*samples >= params.min_samples_split);
                    check(left, params);
                    check(right, params);
                }
            }
        }
        check(tree.root(), &params);

        let y_min = y.iter().cloned().fold(f64::INFINITY, f64::min);
        let y_max = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        for i in 0..n {
            let p = tree.predict_row(x.row(i).as_slice().unwrap());
            assert!(p >= y_min - 1e-12 && p <= y_max + 1e-12);
        }
    }

    #[test]
    fn feature_subset_of_one_excludes_other_features() {
        // With a single informative feature and subsets of size 1, some split
        // must still be found when the draw picks it; determinism per seed.
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let x = Array2::from_shape_fn((n, 3), |_| rng.random_range(-1.0..1.0));
        let y = Array1::from_shape_fn(n, |i| x[[i, 2]] * 5.0);
        let params = TreeParams { max_features: MaxFeatures::Subset(1), ..loose() };
        let a = fit_tree(x.view(), y.view(), &params, 11).unwrap();
        let b = fit_tree(x.view(), y.view(), &params, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn empty_input_is_an_error() {
        let x = Array2::<f64>::zeros((0, 3));
        let y = Array1::<f64>::zeros(0);
        assert!(matches!(
            fit_tree(x.view(), y.view(), &loose(), 0),
            Err(Error::EmptyDataset)
        ));
    }
}
