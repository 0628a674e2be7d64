//! The full experiment: scale on train statistics, select features by
//! shallow-forest importance, train every configured family (fixed
//! parameters or a grid), evaluate on held-out data, and emit a
//! reproducible report plus saveable model artifacts.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::data::{fit_scaler, select_columns, Dataset, Scaler};
use crate::error::{Error, Result};
use crate::models::{FamilyParams, ForestParams, ModelFamily, TrainedModel};
use crate::pipeline::{
    grid_search_xy, mae, mse, rank_and_select, FeatureSelection, GridEntry, GridSpec, ParamGrid,
    SelectionRule,
};
use crate::seeds::derive_seed;

/// One family to train: either pinned hyperparameters or a searched grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FamilySpec {
    Fixed(FamilyParams),
    Grid(ParamGrid),
}

impl FamilySpec {
    pub fn family(&self) -> ModelFamily {
        match self {
            FamilySpec::Fixed(p) => p.family(),
            FamilySpec::Grid(g) => g.family(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Top-level seed; every stage derives its own from it.
    pub seed: u64,
    pub scale: bool,
    pub selection: SelectionRule,
    /// Shallow forest used only to rank features.
    pub ranking_forest: ForestParams,
    /// Fold count for any grid-searched family.
    pub cv_folds: usize,
    pub families: Vec<FamilySpec>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            seed: 0,
            scale: true,
            selection: SelectionRule::Threshold(0.005),
            ranking_forest: ForestParams::default(),
            cv_folds: 3,
            families: ModelFamily::ALL
                .iter()
                .map(|&f| FamilySpec::Fixed(FamilyParams::default_for(f)))
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub family: ModelFamily,
    /// The hyperparameters actually trained (the grid winner if searched).
    pub params: FamilyParams,
    /// Held-out mean squared error, in RUL cycles squared.
    pub mse: f64,
    /// Held-out mean absolute error, in RUL cycles.
    pub mae: f64,
    /// The full search table when the family was grid-searched.
    pub grid: Option<Vec<GridEntry>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub train_provenance: String,
    pub test_provenance: String,
    pub train_rows: usize,
    pub test_rows: usize,
    pub seed: u64,
    /// Derived per-stage seeds, for audit.
    pub stage_seeds: BTreeMap<String, u64>,
    pub scaled: bool,
    pub selection: FeatureSelection,
    pub models: Vec<ModelEntry>,
    pub warnings: Vec<String>,
    /// Wall-clock seconds per stage; the only non-deterministic fields.
    pub timings: BTreeMap<String, f64>,
}

impl ExperimentReport {
    /// Copy with the timing fields cleared, for determinism comparisons.
    pub fn without_timings(&self) -> ExperimentReport {
        let mut copy = self.clone();
        copy.timings.clear();
        copy
    }
}

/// A finished experiment: the report plus one saveable artifact per entry
/// (same order as `report.models`).
#[derive(Debug)]
pub struct ExperimentRun {
    pub report: ExperimentReport,
    pub artifacts: Vec<TrainedModel>,
}

pub fn run_experiment(
    train: &Dataset,
    test: &Dataset,
    config: &ExperimentConfig,
) -> Result<ExperimentRun> {
    let started = Instant::now();
    let mut timings = BTreeMap::new();
    let mut warnings = Vec::new();
    let mut stage_seeds = BTreeMap::new();

    check_data(train, test, &mut warnings).map_err(|e| e.in_stage("data"))?;

    // Scale: statistics come from the training rows alone.
    let scaler = if config.scale {
        fit_scaler(train).map_err(|e| e.in_stage("scale"))?
    } else {
        Scaler::identity(train.feature_names().len())
    };
    let x_train_full = scaler
        .transform_matrix(train.features_matrix().view())
        .map_err(|e| e.in_stage("scale"))?;
    let x_test_full = scaler
        .transform_matrix(test.features_matrix().view())
        .map_err(|e| e.in_stage("scale"))?;
    let y_train = train.targets().map_err(|e| e.in_stage("data"))?;
    let y_test: Vec<f64> = test
        .targets()
        .map_err(|e| e.in_stage("data"))?
        .to_vec();

    // Feature selection: ranked on the training set only.
    let selection_seed = derive_seed(config.seed, "selection");
    stage_seeds.insert("selection".to_string(), selection_seed);
    let selection_started = Instant::now();
    let mut ranking_forest = config.ranking_forest.clone();
    ranking_forest.seed = selection_seed;
    let selection = rank_and_select(train, &ranking_forest, config.selection)
        .map_err(|e| e.in_stage("selection"))?;
    timings.insert(
        "selection".to_string(),
        selection_started.elapsed().as_secs_f64(),
    );

    let x_train = select_columns(&x_train_full, &selection.mask);
    let x_test = select_columns(&x_test_full, &selection.mask);

    let mut models = Vec::new();
    let mut artifacts = Vec::new();
    for spec in &config.families {
        let family = spec.family();
        let stage = format!("train/{family}");
        let model_seed = derive_seed(config.seed, &format!("model/{family}"));
        stage_seeds.insert(format!("model/{family}"), model_seed);

        let family_started = Instant::now();
        let (model, params, grid) = match spec {
            FamilySpec::Fixed(p) => {
                let params = p.clone().with_seed(model_seed);
                let model = params
                    .fit(x_train.view(), y_train.view())
                    .map_err(|e| e.in_stage(&stage))?;
                (model, params, None)
            }
            FamilySpec::Grid(g) => {
                let grid_seed = derive_seed(config.seed, &format!("grid/{family}"));
                stage_seeds.insert(format!("grid/{family}"), grid_seed);
                let spec = GridSpec {
                    grid: g.clone(),
                    cv_folds: config.cv_folds,
                    seed: grid_seed,
                };
                let result = grid_search_xy(x_train.view(), y_train.view(), &spec)
                    .map_err(|e| e.in_stage(&stage))?;
                let params = result.table[result.chosen].params.clone();
                (result.model, params, Some(result.table))
            }
        };
        timings.insert(stage, family_started.elapsed().as_secs_f64());

        let eval_stage = format!("evaluate/{family}");
        let preds = model
            .predictor()
            .predict_batch(x_test.view())
            .map_err(|e| e.in_stage(&eval_stage))?;
        let preds = preds.as_slice().expect("owned array");
        let mse_v = mse(&y_test, preds).map_err(|e| e.in_stage(&eval_stage))?;
        let mae_v = mae(&y_test, preds).map_err(|e| e.in_stage(&eval_stage))?;

        let artifact = TrainedModel::new(
            model,
            scaler.clone(),
            selection.mask.clone(),
            train.feature_names().to_vec(),
        )
        .map_err(|e| e.in_stage(&format!("artifact/{family}")))?;
        artifacts.push(artifact);
        models.push(ModelEntry { family, params, mse: mse_v, mae: mae_v, grid });
    }

    timings.insert("total".to_string(), started.elapsed().as_secs_f64());
    let report = ExperimentReport {
        train_provenance: train.provenance().to_string(),
        test_provenance: test.provenance().to_string(),
        train_rows: train.len(),
        test_rows: test.len(),
        seed: config.seed,
        stage_seeds,
        scaled: config.scale,
        selection,
        models,
        warnings,
        timings,
    };
    Ok(ExperimentRun { report, artifacts })
}

fn check_data(train: &Dataset, test: &Dataset, warnings: &mut Vec<String>) -> Result<()> {
    if train.is_empty() || test.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if !train.is_labeled() || !test.is_labeled() {
        return Err(Error::Unlabeled);
    }
    let train_keys: std::collections::BTreeSet<(u32, u32)> = train
        .records()
        .iter()
        .map(|r| (r.unit_id, r.cycle))
        .collect();
    let shared = test
        .records()
        .iter()
        .filter(|r| train_keys.contains(&(r.unit_id, r.cycle)))
        .count();
    if shared > 0 {
        warnings.push(format!(
            "train and test share {shared} (unit, cycle) rows; held-out metrics are optimistic"
        ));
    }
    Ok(())
}
