//! Five regression families behind one predictor interface, plus
//! impurity-based feature importance and a versioned persistence format.

pub mod artifact;
pub mod elastic_net;
pub mod forest;
pub mod gbm;
pub mod mlp;
pub mod svr;
pub mod tree;

pub use artifact::{TrainedModel, ARTIFACT_VERSION};
pub use elastic_net::{fit_elastic_net, ElasticNetModel};
pub use forest::{feature_importance, fit_forest, FeatureImportance, Forest};
pub use gbm::{fit_gbm, GbmModel};
pub use mlp::{fit_mlp, MlpModel};
pub use svr::{fit_svr, SvrModel};
pub use tree::{fit_tree, RegressionTree, TreeNode};

use ndarray::{Array1, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// A trained model: a pure function from feature vectors to RUL estimates.
/// `predict_row` assumes the arity already matches; `predict` checks it.
pub trait Predictor: Send + Sync {
    fn n_features(&self) -> usize;

    fn predict_row(&self, x: &[f64]) -> f64;

    fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::ArityMismatch {
                expected: self.n_features(),
                actual: x.len(),
            });
        }
        Ok(self.predict_row(x))
    }

    fn predict_batch(&self, m: ArrayView2<f64>) -> Result<Array1<f64>> {
        if m.ncols() != self.n_features() {
            return Err(Error::ArityMismatch {
                expected: self.n_features(),
                actual: m.ncols(),
            });
        }
        let out: Vec<f64> = m
            .rows()
            .into_iter()
            .map(|row| match row.as_slice() {
                Some(s) => self.predict_row(s),
                None => self.predict_row(&row.to_vec()),
            })
            .collect();
        Ok(Array1::from_vec(out))
    }
}

/// Wraps a closure as a predictor; handy for analytic test models.
pub struct FnPredictor<F: Fn(&[f64]) -> f64 + Send + Sync> {
    arity: usize,
    f: F,
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> FnPredictor<F> {
    pub fn new(arity: usize, f: F) -> Self {
        FnPredictor { arity, f }
    }
}

impl<F: Fn(&[f64]) -> f64 + Send + Sync> Predictor for FnPredictor<F> {
    fn n_features(&self) -> usize {
        self.arity
    }

    fn predict_row(&self, x: &[f64]) -> f64 {
        (self.f)(x)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelFamily {
    RandomForest,
    ElasticNet,
    Gbm,
    Svr,
    Mlp,
}

impl ModelFamily {
    pub const ALL: [ModelFamily; 5] = [
        ModelFamily::RandomForest,
        ModelFamily::ElasticNet,
        ModelFamily::Gbm,
        ModelFamily::Svr,
        ModelFamily::Mlp,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelFamily::RandomForest => "random-forest",
            ModelFamily::ElasticNet => "elastic-net",
            ModelFamily::Gbm => "gbm",
            ModelFamily::Svr => "svr",
            ModelFamily::Mlp => "mlp",
        }
    }
}

impl fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random-forest" | "rf" => Ok(ModelFamily::RandomForest),
            "elastic-net" | "enet" => Ok(ModelFamily::ElasticNet),
            "gbm" => Ok(ModelFamily::Gbm),
            "svr" | "svm" => Ok(ModelFamily::Svr),
            "mlp" => Ok(ModelFamily::Mlp),
            other => Err(Error::InvalidArgument(format!(
                "unknown model family '{other}' (expected one of random-forest, elastic-net, gbm, svr, mlp)"
            ))),
        }
    }
}

/// Features considered at each split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MaxFeatures {
    /// Consider every feature (the regression convention for "auto").
    All,
    /// Draw this many features uniformly without replacement per split.
    Subset(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    pub max_features: MaxFeatures,
}

impl Default for TreeParams {
    fn default() -> Self {
        TreeParams {
            max_depth: 9,
            min_samples_leaf: 10,
            min_samples_split: 2,
            max_features: MaxFeatures::All,
        }
    }
}

impl TreeParams {
    pub fn validate(&self) -> Result<()> {
        if self.min_samples_leaf == 0 {
            return Err(Error::InvalidArgument("min_samples_leaf must be positive".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidArgument("min_samples_split must be at least 2".into()));
        }
        if let MaxFeatures::Subset(0) = self.max_features {
            return Err(Error::InvalidArgument("max_features subset must be non-empty".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub tree: TreeParams,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 10,
            tree: TreeParams::default(),
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::InvalidArgument("n_estimators must be positive".into()));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ElasticNetParams {
    pub alpha: f64,
    pub l1_ratio: f64,
    pub fit_intercept: bool,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for ElasticNetParams {
    fn default() -> Self {
        ElasticNetParams {
            alpha: 0.01,
            l1_ratio: 0.01,
            fit_intercept: true,
            tol: 1e-4,
            max_iter: 10_000,
        }
    }
}

impl ElasticNetParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0) {
            return Err(Error::InvalidArgument("alpha must be non-negative".into()));
        }
        if !(0.0..=1.0).contains(&self.l1_ratio) {
            return Err(Error::InvalidArgument("l1_ratio must lie in [0, 1]".into()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidArgument("tol must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbmParams {
    /// 0 is allowed and yields the constant base model mean(y).
    pub n_stages: usize,
    pub learning_rate: f64,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for GbmParams {
    fn default() -> Self {
        GbmParams {
            n_stages: 100,
            learning_rate: 0.1,
            tree: TreeParams {
                max_depth: 3,
                min_samples_leaf: 10,
                min_samples_split: 2,
                max_features: MaxFeatures::All,
            },
            seed: 0,
        }
    }
}

impl GbmParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::InvalidArgument("learning_rate must lie in (0, 1]".into()));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrParams {
    /// Insensitivity tube half-width, in RUL cycles.
    pub epsilon: f64,
    /// Penalty weight on tube violations.
    pub c: f64,
    pub epochs: usize,
    /// Initial step size; decays as step / sqrt(1 + t) over updates.
    pub step_size: f64,
    pub seed: u64,
}

impl Default for SvrParams {
    fn default() -> Self {
        SvrParams {
            epsilon: 0.1,
            c: 1.0,
            epochs: 300,
            step_size: 0.05,
            seed: 0,
        }
    }
}

impl SvrParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidArgument("epsilon must be non-negative".into()));
        }
        if !(self.c > 0.0) {
            return Err(Error::InvalidArgument("c must be positive".into()));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be positive".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidArgument("step_size must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden_width: usize,
    /// Number of hidden layers; one layer of 50 units by default.
    pub hidden_layers: usize,
    /// Epoch cap; 0 returns the freshly initialized network untrained.
    pub max_iter: usize,
    pub learning_rate_init: f64,
    /// Capped at the number of training rows.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden_width: 50,
            hidden_layers: 1,
            max_iter: 1000,
            learning_rate_init: 0.01,
            batch_size: 200,
            seed: 0,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden_width == 0 {
            return Err(Error::InvalidArgument("hidden_width must be at least 1".into()));
        }
        if self.hidden_layers == 0 {
            return Err(Error::InvalidArgument("hidden_layers must be at least 1".into()));
        }
        if !(self.learning_rate_init > 0.0) {
            return Err(Error::InvalidArgument("learning_rate_init must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Hyperparameters for any family behind one dispatch point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum FamilyParams {
    RandomForest(ForestParams),
    ElasticNet(ElasticNetParams),
    Gbm(GbmParams),
    Svr(SvrParams),
    Mlp(MlpParams),
}

impl FamilyParams {
    pub fn default_for(family: ModelFamily) -> FamilyParams {
        match family {
            ModelFamily::RandomForest => FamilyParams::RandomForest(ForestParams::default()),
            ModelFamily::ElasticNet => FamilyParams::ElasticNet(ElasticNetParams::default()),
            ModelFamily::Gbm => FamilyParams::Gbm(GbmParams::default()),
            ModelFamily::Svr => FamilyParams::Svr(SvrParams::default()),
            ModelFamily::Mlp => FamilyParams::Mlp(MlpParams::default()),
        }
    }

    pub fn family(&self) -> ModelFamily {
        match self {
            FamilyParams::RandomForest(_) => ModelFamily::RandomForest,
            FamilyParams::ElasticNet(_) => ModelFamily::ElasticNet,
            FamilyParams::Gbm(_) => ModelFamily::Gbm,
            FamilyParams::Svr(_) => ModelFamily::Svr,
            FamilyParams::Mlp(_) => ModelFamily::Mlp,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            FamilyParams::RandomForest(p) => p.validate(),
            FamilyParams::ElasticNet(p) => p.validate(),
            FamilyParams::Gbm(p) => p.validate(),
            FamilyParams::Svr(p) => p.validate(),
            FamilyParams::Mlp(p) => p.validate(),
        }
    }

    /// Overwrite the family's seed field; a no-op for the deterministic
    /// coordinate-descent solver, which has none.
    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            FamilyParams::RandomForest(p) => p.seed = seed,
            FamilyParams::ElasticNet(_) => {}
            FamilyParams::Gbm(p) => p.seed = seed,
            FamilyParams::Svr(p) => p.seed = seed,
            FamilyParams::Mlp(p) => p.seed = seed,
        }
        self
    }

    pub fn fit(&self, x: ArrayView2<f64>, y: ArrayView1<f64>) -> Result<ModelKind> {
        match self {
            FamilyParams::RandomForest(p) => fit_forest(x, y, p).map(ModelKind::RandomForest),
            FamilyParams::ElasticNet(p) => fit_elastic_net(x, y, p).map(ModelKind::ElasticNet),
            FamilyParams::Gbm(p) => fit_gbm(x, y, p).map(ModelKind::Gbm),
            FamilyParams::Svr(p) => fit_svr(x, y, p).map(ModelKind::Svr),
            FamilyParams::Mlp(p) => fit_mlp(x, y, p).map(ModelKind::Mlp),
        }
    }
}

/// The learned parameters of any family, as stored in a model artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelKind {
    RandomForest(Forest),
    ElasticNet(ElasticNetModel),
    Gbm(GbmModel),
    Svr(SvrModel),
    Mlp(MlpModel),
}

impl ModelKind {
    pub fn family(&self) -> ModelFamily {
        match self {
            ModelKind::RandomForest(_) => ModelFamily::RandomForest,
            ModelKind::ElasticNet(_) => ModelFamily::ElasticNet,
            ModelKind::Gbm(_) => ModelFamily::Gbm,
            ModelKind::Svr(_) => ModelFamily::Svr,
            ModelKind::Mlp(_) => ModelFamily::Mlp,
        }
    }

    pub fn predictor(&self) -> &dyn Predictor {
        match self {
            ModelKind::RandomForest(m) => m,
            ModelKind::ElasticNet(m) => m,
            ModelKind::Gbm(m) => m,
            ModelKind::Svr(m) => m,
            ModelKind::Mlp(m) => m,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family_names_round_trip() {
        for family in ModelFamily::ALL {
            assert_eq!(family.as_str().parse::<ModelFamily>().unwrap(), family);
        }
        assert!("boosted-stumps".parse::<ModelFamily>().is_err());
    }

    #[test]
    fn fn_predictor_checks_arity() {
        let p = FnPredictor::new(2, |x: &[f64]| x[0] + x[1]);
        assert_eq!(p.predict(&[1.0, 2.0]).unwrap(), 3.0);
        assert!(matches!(
            p.predict(&[1.0]),
            Err(Error::ArityMismatch { expected: 2, actual: 1 })
        ));
    }

    #[test]
    fn batch_matches_elementwise() {
        let p = FnPredictor::new(2, |x: &[f64]| 3.0 * x[0] - x[1]);
        let m = ndarray::array![[1.0, 2.0], [0.5, -1.0], [4.0, 0.0]];
        let batch = p.predict_batch(m.view()).unwrap();
        for (row, &b) in m.rows().into_iter().zip(batch.iter()) {
            assert_eq!(p.predict(row.as_slice().unwrap()).unwrap(), b);
        }
    }

    #[test]
    fn family_params_dispatch_covers_every_family() {
        let x = ndarray::Array2::from_shape_fn((30, 2), |(i, j)| (i * (j + 1)) as f64 * 0.1);
        let y = ndarray::Array1::from_shape_fn(30, |i| i as f64);
        for family in ModelFamily::ALL {
            let params = FamilyParams::default_for(family).with_seed(1);
            assert_eq!(params.family(), family);
            params.validate().unwrap();
            let model = params.fit(x.view(), y.view()).unwrap();
            assert_eq!(model.family(), family);
            assert_eq!(model.predictor().n_features(), 2);
        }
    }

    #[test]
    fn param_validation_catches_bad_values() {
        let mut f = ForestParams::default();
        f.n_estimators = 0;
        assert!(f.validate().is_err());

        let mut t = TreeParams::default();
        t.min_samples_split = 1;
        assert!(t.validate().is_err());

        let mut e = ElasticNetParams::default();
        e.l1_ratio = 1.5;
        assert!(e.validate().is_err());

        let mut g = GbmParams::default();
        g.learning_rate = 0.0;
        assert!(g.validate().is_err());

        let mut s = SvrParams::default();
        s.c = -1.0;
        assert!(s.validate().is_err());

        let mut m = MlpParams::default();
        m.hidden_width = 0;
        assert!(m.validate().is_err());
    }
}
