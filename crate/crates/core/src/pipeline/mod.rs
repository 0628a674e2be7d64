//! Experiment orchestration: evaluation metrics, importance-based feature
//! selection, hyperparameter grid search and end-to-end experiment runs.

pub mod experiment;
pub mod grid;

pub use experiment::{
    run_experiment, ExperimentConfig, ExperimentReport, ExperimentRun, FamilySpec, ModelEntry,
};
pub use grid::{grid_search, grid_search_xy, GridEntry, GridResult, GridSpec, ParamGrid};

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::models::{feature_importance, fit_forest, ForestParams};

/// Mean squared error over paired sequences.
pub fn mse(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pairs(y_true, y_pred)?;
    let n = y_true.len() as f64;
    Ok(y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum::<f64>()
        / n)
}

/// Mean absolute error over paired sequences.
pub fn mae(y_true: &[f64], y_pred: &[f64]) -> Result<f64> {
    check_pairs(y_true, y_pred)?;
    let n = y_true.len() as f64;
    Ok(y_true.iter().zip(y_pred).map(|(t, p)| (t - p).abs()).sum::<f64>() / n)
}

fn check_pairs(y_true: &[f64], y_pred: &[f64]) -> Result<()> {
    if y_true.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if y_true.len() != y_pred.len() {
        return Err(Error::InvalidArgument(format!(
            "metric inputs differ in length: {} vs {}",
            y_true.len(),
            y_pred.len()
        )));
    }
    Ok(())
}

/// How the importance ranking is turned into a keep-mask.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Keep the k most important features (constants still dropped).
    TopK(usize),
    /// Keep features whose importance share exceeds the threshold.
    Threshold(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedFeature {
    pub index: usize,
    pub name: String,
    pub importance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSelection {
    /// Every feature, sorted by importance descending (ties by index).
    pub ranking: Vec<RankedFeature>,
    /// Keep-mask in the original feature order.
    pub mask: Vec<bool>,
    pub rule: SelectionRule,
}

impl FeatureSelection {
    pub fn n_kept(&self) -> usize {
        self.mask.iter().filter(|&&k| k).count()
    }

    pub fn kept_names(&self) -> Vec<&str> {
        self.ranking
            .iter()
            .filter(|r| self.mask[r.index])
            .map(|r| r.name.as_str())
            .collect()
    }
}

/// Rank features by shallow-forest importance and apply the rule. Constant
/// features are always dropped regardless of the rule.
pub fn rank_and_select(
    train: &Dataset,
    shallow: &ForestParams,
    rule: SelectionRule,
) -> Result<FeatureSelection> {
    let x = train.features_matrix();
    let y = train.targets()?;
    let forest = fit_forest(x.view(), y.view(), shallow)?;
    let importance = feature_importance(&forest);

    let names = train.feature_names();
    let constant: Vec<bool> = x
        .columns()
        .into_iter()
        .map(|col| {
            let first = col[0];
            col.iter().all(|&v| v == first)
        })
        .collect();

    let mut ranking: Vec<RankedFeature> = importance
        .values
        .iter()
        .enumerate()
        .map(|(index, &importance)| RankedFeature {
            index,
            name: names[index].clone(),
            importance,
        })
        .collect();
    ranking.sort_by(|a, b| {
        b.importance
            .partial_cmp(&a.importance)
            .unwrap()
            .then(a.index.cmp(&b.index))
    });

    let mut mask = vec![false; names.len()];
    match rule {
        SelectionRule::TopK(k) => {
            if k == 0 {
                return Err(Error::EmptySelection);
            }
            for r in ranking.iter().take(k) {
                mask[r.index] = true;
            }
        }
        SelectionRule::Threshold(t) => {
            for r in &ranking {
                if r.importance > t {
                    mask[r.index] = true;
                }
            }
        }
    }
    for (j, &is_const) in constant.iter().enumerate() {
        if is_const {
            mask[j] = false;
        }
    }
    if !mask.iter().any(|&k| k) {
        return Err(Error::EmptySelection);
    }
    Ok(FeatureSelection { ranking, mask, rule })
}
