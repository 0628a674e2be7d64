//! Exhaustive hyperparameter search scored by seeded k-fold cross
//! validation. Failed combinations are recorded, not fatal; the winner is
//! refit on the full training set.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{
    ElasticNetParams, FamilyParams, ForestParams, GbmParams, MlpParams, ModelFamily, ModelKind,
    SvrParams,
};
use crate::pipeline::mse;
use crate::seeds::derive_seed;

/// Candidate lists for the tunable knobs of one family; every other
/// hyperparameter stays at the family default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ParamGrid {
    RandomForest {
        n_estimators: Vec<usize>,
        max_depth: Vec<usize>,
        min_samples_leaf: Vec<usize>,
    },
    ElasticNet {
        alpha: Vec<f64>,
        l1_ratio: Vec<f64>,
    },
    Gbm {
        n_stages: Vec<usize>,
        learning_rate: Vec<f64>,
        max_depth: Vec<usize>,
    },
    Svr {
        epsilon: Vec<f64>,
        c: Vec<f64>,
    },
    Mlp {
        hidden_width: Vec<usize>,
        learning_rate_init: Vec<f64>,
    },
}

impl ParamGrid {
    /// A one-point grid pinned at the family defaults.
    pub fn default_for(family: ModelFamily) -> ParamGrid {
        match family {
            ModelFamily::RandomForest => {
                let p = ForestParams::default();
                ParamGrid::RandomForest {
                    n_estimators: vec![p.n_estimators],
                    max_depth: vec![p.tree.max_depth],
                    min_samples_leaf: vec![p.tree.min_samples_leaf],
                }
            }
            ModelFamily::ElasticNet => {
                let p = ElasticNetParams::default();
                ParamGrid::ElasticNet { alpha: vec![p.alpha], l1_ratio: vec![p.l1_ratio] }
            }
            ModelFamily::Gbm => {
                let p = GbmParams::default();
                ParamGrid::Gbm {
                    n_stages: vec![p.n_stages],
                    learning_rate: vec![p.learning_rate],
                    max_depth: vec![p.tree.max_depth],
                }
            }
            ModelFamily::Svr => {
                let p = SvrParams::default();
                ParamGrid::Svr { epsilon: vec![p.epsilon], c: vec![p.c] }
            }
            ModelFamily::Mlp => {
                let p = MlpParams::default();
                ParamGrid::Mlp {
                    hidden_width: vec![p.hidden_width],
                    learning_rate_init: vec![p.learning_rate_init],
                }
            }
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            ParamGrid::RandomForest { .. } => ModelFamily::RandomForest,
            ParamGrid::ElasticNet { .. } => ModelFamily::ElasticNet,
            ParamGrid::Gbm { .. } => ModelFamily::Gbm,
            ParamGrid::Svr { .. } => ModelFamily::Svr,
            ParamGrid::Mlp { .. } => ModelFamily::Mlp,
        }
    }

    /// Cartesian product in declaration order (first list outermost). Every
    /// combination carries `model_seed`.
    pub fn combinations(&self, model_seed: u64) -> Result<Vec<FamilyParams>> {
        let mut out = Vec::new();
        match self {
            ParamGrid::RandomForest { n_estimators, max_depth, min_samples_leaf } => {
                check_lists(&[n_estimators.len(), max_depth.len(), min_samples_leaf.len()])?;
                for &n in n_estimators {
                    for &d in max_depth {
                        for &leaf in min_samples_leaf {
                            let mut p = ForestParams::default();
                            p.n_estimators = n;
                            p.tree.max_depth = d;
                            p.tree.min_samples_leaf = leaf;
                            out.push(FamilyParams::RandomForest(p));
                        }
                    }
                }
            }
            ParamGrid::ElasticNet { alpha, l1_ratio } => {
                check_lists(&[alpha.len(), l1_ratio.len()])?;
                for &a in alpha {
                    for &l in l1_ratio {
                        let mut p = ElasticNetParams::default();
                        p.alpha = a;
                        p.l1_ratio = l;
                        out.push(FamilyParams::ElasticNet(p));
                    }
                }
            }
            ParamGrid::Gbm { n_stages, learning_rate, max_depth } => {
                check_lists(&[n_stages.len(), learning_rate.len(), max_depth.len()])?;
                for &s in n_stages {
                    for &lr in learning_rate {
                        for &d in max_depth {
                            let mut p = GbmParams::default();
                            p.n_stages = s;
                            p.learning_rate = lr;
                            p.tree.max_depth = d;
                            out.push(FamilyParams::Gbm(p));
                        }
                    }
                }
            }
            ParamGrid::Svr { epsilon, c } => {
                check_lists(&[epsilon.len(), c.len()])?;
                for &e in epsilon {
                    for &cv in c {
                        let mut p = SvrParams::default();
                        p.epsilon = e;
                        p.c = cv;
                        out.push(FamilyParams::Svr(p));
                    }
                }
            }
            ParamGrid::Mlp { hidden_width, learning_rate_init } => {
                check_lists(&[hidden_width.len(), learning_rate_init.len()])?;
                for &w in hidden_width {
                    for &lr in learning_rate_init {
                        let mut p = MlpParams::default();
                        p.hidden_width = w;
                        p.learning_rate_init = lr;
                        out.push(FamilyParams::Mlp(p));
                    }
                }
            }
        }
        Ok(out.into_iter().map(|p| p.with_seed(model_seed)).collect())
    }
}

fn check_lists(lengths: &[usize]) -> Result<()> {
    if lengths.contains(&0) {
        return Err(Error::InvalidArgument(
            "every grid dimension needs at least one candidate".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub grid: ParamGrid,
    pub cv_folds: usize,
    pub seed: u64,
}

impl GridSpec {
    pub fn new(grid: ParamGrid) -> Self {
        GridSpec { grid, cv_folds: 3, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub params: FamilyParams,
    /// Mean validation MSE over the folds; `None` marks a combination that
    /// failed to train (its score is treated as infinite).
    pub mean_mse: Option<f64>,
}

impl GridEntry {
    pub fn score(&self) -> f64 {
        self.mean_mse.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub family: ModelFamily,
    /// Every combination in enumeration order, with its CV score.
    pub table: Vec<GridEntry>,
    /// Index into `table` of the winner (ties keep the earliest).
    pub chosen: usize,
    /// The winning combination refit on the full training set.
    pub model: ModelKind,
}

pub fn grid_search(train: &Dataset, spec: &GridSpec) -> Result<GridResult> {
    let x = train.features_matrix();
    let y = train.targets()?;
    grid_search_xy(x.view(), y.view(), spec)
}

/// Grid search over an explicit design matrix, for callers that scale or
/// mask features before the search.
pub fn grid_search_xy(
    x: ArrayView2<f64>,
    y: ArrayView1<f64>,
    spec: &GridSpec,
) -> Result<GridResult> {
    if spec.cv_folds < 2 {
        return Err(Error::InvalidArgument(format!(
            "cv_folds must be at least 2, got {}",
            spec.cv_folds
        )));
    }
    let n = x.nrows();
    if n < spec.cv_folds {
        return Err(Error::InvalidArgument(format!(
            "{n} rows cannot be split into {} folds",
            spec.cv_folds
        )));
    }

    // One fold assignment for the whole search: a seeded shuffle dealt
    // round-robin.
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "folds"));
    order.shuffle(&mut rng);
    let mut fold_of = vec![0usize; n];
    for (position, &row) in order.iter().enumerate() {
        fold_of[row] = position % spec.cv_folds;
    }

    let folds: Vec<(Array2<f64>, Array1<f64>, Array2<f64>, Vec<f64>)> = (0..spec.cv_folds)
        .map(|f| {
            let train_rows: Vec<usize> =
                (0..n).filter(|&i| fold_of[i] != f).collect();
            let val_rows: Vec<usize> = (0..n).filter(|&i| fold_of[i] == f).collect();
            (
                x.select(Axis(0), &train_rows),
                Array1::from_iter(train_rows.iter().map(|&i| y[i])),
                x.select(Axis(0), &val_rows),
                val_rows.iter().map(|&i| y[i]).collect(),
            )
        })
        .collect();

    let combos = spec.grid.combinations(derive_seed(spec.seed, "model"))?;
    let mut table = Vec::with_capacity(combos.len());
    for params in &combos {
        let mut total = 0.0;
        let mut ok = true;
        for (x_tr, y_tr, x_val, y_val) in &folds {
            let outcome = params
                .fit(x_tr.view(), y_tr.view())
                .and_then(|m| m.predictor().predict_batch(x_val.view()))
                .and_then(|preds| mse(y_val, preds.as_slice().expect("owned array")));
            match outcome {
                Ok(v) if v.is_finite() => total += v,
                _ => {
                    ok = false;
                    break;
                }
            }
        }
        table.push(GridEntry {
            params: params.clone(),
            mean_mse: ok.then(|| total / spec.cv_folds as f64),
        });
    }

    let mut chosen: Option<usize> = None;
    for (i, entry) in table.iter().enumerate() {
        let better = match chosen {
            None => entry.mean_mse.is_some(),
            Some(c) => entry.score() < table[c].score(),
        };
        if better {
            chosen = Some(i);
        }
    }
    let chosen = chosen.ok_or(Error::AllCombinationsFailed)?;

    let model = combos[chosen].fit(x, y)?;
    Ok(GridResult { family: spec.grid.family(), table, chosen, model })
}
