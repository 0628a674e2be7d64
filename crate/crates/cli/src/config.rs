//! Layered run configuration. Defaults are built in, a TOML file overrides
//! them, and command-line flags override the file. Unknown keys anywhere in
//! the file are rejected so typos fail loudly instead of silently falling
//! back to a default.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use rul_core::explain::RenderStyle;
use rul_core::models::{FamilyParams, ModelFamily};
use rul_core::pipeline::{ExperimentConfig, FamilySpec, ParamGrid, SelectionRule};

/// Everything a run needs, grouped into sections mirroring the pipeline
/// stages. Every field has a default, so an empty file (or none at all) is a
/// valid configuration.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub data: DataSection,
    pub experiment: ExperimentSection,
    pub explain: ExplainSection,
    pub output: OutputSection,
}

/// Where training data comes from and how it is labeled and split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSection {
    /// Telemetry file in 26-column C-MAPSS text format. When absent, a
    /// synthetic run-to-failure dataset is generated instead.
    pub path: Option<PathBuf>,
    pub synthetic: SyntheticSection,
    /// Piecewise-linear label cap: remaining life above this value is
    /// clamped. Unset keeps the raw linear labels.
    pub rul_cap: Option<f64>,
    /// Fraction of the data held out for evaluation. Default 0.2.
    pub test_fraction: f64,
    /// `rows` shuffles individual cycles; `units` holds out whole engines.
    /// Default `rows`.
    pub split: SplitKind,
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            path: None,
            synthetic: SyntheticSection::default(),
            rul_cap: None,
            test_fraction: 0.2,
            split: SplitKind::Rows,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitKind {
    Rows,
    Units,
}

/// Knobs for the built-in degradation simulator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyntheticSection {
    /// Engines to simulate. Default 20.
    pub n_units: usize,
    /// Multiplier on per-sensor Gaussian noise. Default 1.0.
    pub noise: f64,
}

impl Default for SyntheticSection {
    fn default() -> Self {
        SyntheticSection { n_units: 20, noise: 1.0 }
    }
}

/// Model roster, seeding, scaling, selection and search settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentSection {
    /// Top-level seed; every stage derives its own stream from it. Default 0.
    pub seed: u64,
    /// Standardize features before training. Default true.
    pub scale: bool,
    /// Cross-validation folds for grid search. Default 3.
    pub cv_folds: usize,
    pub selection: SelectionSection,
    /// Model families to train, in order. Default: all five.
    pub families: Vec<String>,
    /// Fixed hyperparameter overrides, keyed by family name. Each table may
    /// set any subset of that family's parameters.
    pub overrides: BTreeMap<String, toml::Value>,
    /// Candidate lists for grid search, keyed by family name. A family with
    /// a grid is searched; `overrides` for it are ignored.
    pub grids: BTreeMap<String, toml::Value>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seed: 0,
            scale: true,
            cv_folds: 3,
            selection: SelectionSection::default(),
            families: ModelFamily::ALL.iter().map(|f| f.as_str().to_string()).collect(),
            overrides: BTreeMap::new(),
            grids: BTreeMap::new(),
        }
    }
}

/// Importance-based feature selection rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SelectionSection {
    /// `threshold` keeps features whose importance exceeds `value`; `top-k`
    /// keeps the `k` highest-ranked. Default `threshold`.
    pub rule: String,
    /// Importance cut for the `threshold` rule. Default 0.005.
    pub value: f64,
    /// Feature count for the `top-k` rule. Default 8.
    pub k: usize,
}

impl Default for SelectionSection {
    fn default() -> Self {
        SelectionSection { rule: "threshold".to_string(), value: 0.005, k: 8 }
    }
}

impl SelectionSection {
    pub fn to_rule(&self) -> Result<SelectionRule, String> {
        match self.rule.as_str() {
            "threshold" => Ok(SelectionRule::Threshold(self.value)),
            "top-k" => Ok(SelectionRule::TopK(self.k)),
            other => Err(format!(
                "unknown selection rule {other:?}; expected \"threshold\" or \"top-k\""
            )),
        }
    }
}

/// Defaults for the `explain` subcommand; flags override per invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExplainSection {
    /// `lime`, `shap`, or `exact`. Default `lime`.
    pub method: String,
    /// `bar`, `force`, or `text`. Default `bar`.
    pub style: String,
    /// Perturbation budget for LIME. Default 5000.
    pub n_samples: usize,
    /// Features kept in the LIME surrogate. Default 8.
    pub k_features: usize,
    /// Background rows subsampled from the dataset. Default 100.
    pub background: usize,
    /// Coalition budget when Kernel SHAP has to sample. Default 2048.
    pub n_coalitions: usize,
}

impl Default for ExplainSection {
    fn default() -> Self {
        ExplainSection {
            method: "lime".to_string(),
            style: "bar".to_string(),
            n_samples: 5000,
            k_features: 8,
            background: 100,
            n_coalitions: 2048,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    /// Directory artifacts, reports and renderings are written to.
    /// Default `out`.
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: PathBuf::from("out") }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let config: RunConfig = toml::from_str(&text)
            .map_err(|e| format!("invalid config {}: {e}", path.display()))?;
        config.validate()?;
        Ok(config)
    }

    /// Cross-field checks that serde cannot express.
    pub fn validate(&self) -> Result<(), String> {
        if !(self.data.test_fraction > 0.0 && self.data.test_fraction < 1.0) {
            return Err(format!(
                "data.test_fraction must lie strictly between 0 and 1, got {}",
                self.data.test_fraction
            ));
        }
        if self.data.synthetic.n_units == 0 {
            return Err("data.synthetic.n_units must be at least 1".to_string());
        }
        if let Some(cap) = self.data.rul_cap {
            if !(cap > 0.0) {
                return Err(format!("data.rul_cap must be positive, got {cap}"));
            }
        }
        if self.experiment.cv_folds < 2 {
            return Err(format!(
                "experiment.cv_folds must be at least 2, got {}",
                self.experiment.cv_folds
            ));
        }
        if self.experiment.families.is_empty() {
            return Err("experiment.families must name at least one model family".to_string());
        }
        let mut roster = Vec::new();
        for name in &self.experiment.families {
            let family = parse_family(name)?;
            if roster.contains(&family) {
                return Err(format!("experiment.families lists {} twice", family.as_str()));
            }
            roster.push(family);
        }
        for key in self.experiment.overrides.keys() {
            let family = parse_family(key)?;
            if !roster.contains(&family) {
                return Err(format!(
                    "experiment.overrides.{key} has no matching entry in experiment.families"
                ));
            }
        }
        for key in self.experiment.grids.keys() {
            let family = parse_family(key)?;
            if !roster.contains(&family) {
                return Err(format!(
                    "experiment.grids.{key} has no matching entry in experiment.families"
                ));
            }
        }
        self.experiment.selection.to_rule()?;
        parse_method(&self.explain.method)?;
        self.explain
            .style
            .parse::<RenderStyle>()
            .map_err(|_| format!("unknown render style {:?}", self.explain.style))?;
        if self.explain.background == 0 {
            return Err("explain.background must be at least 1".to_string());
        }
        Ok(())
    }

    /// Resolves the family roster into fixed parameters or grids, applying
    /// any per-family override tables.
    pub fn family_specs(&self) -> Result<Vec<FamilySpec>, String> {
        let mut specs = Vec::with_capacity(self.experiment.families.len());
        for name in &self.experiment.families {
            let family = parse_family(name)?;
            let key = family.as_str();
            if let Some(table) = lookup(&self.experiment.grids, family) {
                let grid: ParamGrid = deserialize_tagged(family, table)
                    .map_err(|e| format!("experiment.grids.{key}: {e}"))?;
                specs.push(FamilySpec::Grid(grid));
            } else if let Some(table) = lookup(&self.experiment.overrides, family) {
                let params: FamilyParams = deserialize_tagged(family, table)
                    .map_err(|e| format!("experiment.overrides.{key}: {e}"))?;
                specs.push(FamilySpec::Fixed(params));
            } else {
                specs.push(FamilySpec::Fixed(FamilyParams::default_for(family)));
            }
        }
        Ok(specs)
    }

    pub fn experiment_config(&self) -> Result<ExperimentConfig, String> {
        Ok(ExperimentConfig {
            seed: self.experiment.seed,
            scale: self.experiment.scale,
            selection: self.experiment.selection.to_rule()?,
            cv_folds: self.experiment.cv_folds,
            families: self.family_specs()?,
            ..ExperimentConfig::default()
        })
    }
}

/// Finds a map entry whose key names `family`, accepting aliases, so
/// `[experiment.overrides.rf]` pairs with `families = ["random-forest"]`.
fn lookup(map: &BTreeMap<String, toml::Value>, family: ModelFamily) -> Option<&toml::Value> {
    map.iter().find_map(|(key, value)| {
        (key.parse::<ModelFamily>().ok() == Some(family)).then_some(value)
    })
}

pub fn parse_family(name: &str) -> Result<ModelFamily, String> {
    name.parse::<ModelFamily>().map_err(|_| {
        let known: Vec<&str> = ModelFamily::ALL.iter().map(|f| f.as_str()).collect();
        format!("unknown model family {name:?}; expected one of {}", known.join(", "))
    })
}

/// Explanation method named on the command line or in the config.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MethodKind {
    Lime,
    Shap,
    Exact,
}

pub fn parse_method(name: &str) -> Result<MethodKind, String> {
    match name.to_ascii_lowercase().as_str() {
        "lime" => Ok(MethodKind::Lime),
        "shap" => Ok(MethodKind::Shap),
        "exact" => Ok(MethodKind::Exact),
        other => {
            Err(format!("unknown method {other:?}; expected \"lime\", \"shap\", or \"exact\""))
        }
    }
}

/// Injects the `family` tag into a bare TOML table so it deserializes into
/// the internally tagged enums (`FamilyParams`, `ParamGrid`). Users write
/// `[experiment.overrides.gbm]` rather than repeating the family inside.
fn deserialize_tagged<T: serde::de::DeserializeOwned>(
    family: ModelFamily,
    value: &toml::Value,
) -> Result<T, String> {
    let table = value.as_table().ok_or_else(|| "expected a table".to_string())?;
    let mut tagged = table.clone();
    tagged.insert("family".to_string(), toml::Value::String(family.as_str().to_string()));
    toml::Value::Table(tagged).try_into().map_err(|e| e.to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rul_core::models::MlpParams;

    #[test]
    fn empty_file_yields_the_documented_defaults() {
        let config: RunConfig = toml::from_str("").unwrap();
        assert_eq!(config, RunConfig::default());
        assert_eq!(config.data.test_fraction, 0.2);
        assert_eq!(config.experiment.cv_folds, 3);
        assert_eq!(config.experiment.families.len(), 5);
        assert_eq!(config.explain.background, 100);
        config.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_rejected_at_any_depth() {
        assert!(toml::from_str::<RunConfig>("buget = 3").is_err());
        assert!(toml::from_str::<RunConfig>("[data]\nnoise = 1.0").is_err());
        assert!(toml::from_str::<RunConfig>("[experiment.selection]\nkk = 2").is_err());
    }

    #[test]
    fn overrides_patch_only_the_named_fields() {
        let text = r#"
            [experiment]
            families = ["mlp"]

            [experiment.overrides.mlp]
            hidden_width = 7
            max_iter = 40
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        config.validate().unwrap();
        let specs = config.family_specs().unwrap();
        assert_eq!(specs.len(), 1);
        match &specs[0] {
            FamilySpec::Fixed(FamilyParams::Mlp(p)) => {
                let defaults = MlpParams::default();
                assert_eq!(p.hidden_width, 7);
                assert_eq!(p.max_iter, 40);
                assert_eq!(p.batch_size, defaults.batch_size);
            }
            other => panic!("expected fixed MLP params, got {other:?}"),
        }
    }

    #[test]
    fn grids_win_over_overrides_for_the_same_family() {
        let text = r#"
            [experiment]
            families = ["elastic-net"]

            [experiment.overrides.elastic-net]
            alpha = 0.5

            [experiment.grids.elastic-net]
            alpha = [0.01, 0.1]
            l1_ratio = [0.0, 0.5]
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        config.validate().unwrap();
        let specs = config.family_specs().unwrap();
        match &specs[0] {
            FamilySpec::Grid(ParamGrid::ElasticNet { alpha, l1_ratio }) => {
                assert_eq!(alpha, &vec![0.01, 0.1]);
                assert_eq!(l1_ratio, &vec![0.0, 0.5]);
            }
            other => panic!("expected an elastic-net grid, got {other:?}"),
        }
    }

    #[test]
    fn family_aliases_are_accepted() {
        let text = r#"
            [experiment]
            families = ["rf", "svm"]
        "#;
        let config: RunConfig = toml::from_str(text).unwrap();
        config.validate().unwrap();
        let specs = config.family_specs().unwrap();
        assert_eq!(specs[0].family(), ModelFamily::RandomForest);
        assert_eq!(specs[1].family(), ModelFamily::Svr);
    }

    #[test]
    fn cross_field_mistakes_are_reported_precisely() {
        let mut config = RunConfig::default();
        config.data.test_fraction = 1.5;
        assert!(config.validate().unwrap_err().contains("test_fraction"));

        let mut config = RunConfig::default();
        config.experiment.families = vec!["boosted-stump".to_string()];
        assert!(config.validate().unwrap_err().contains("boosted-stump"));

        let mut config = RunConfig::default();
        config.experiment.overrides.insert("gbm".into(), toml::Value::Boolean(true));
        config.experiment.families = vec!["rf".to_string()];
        assert!(config.validate().unwrap_err().contains("overrides"));

        let mut config = RunConfig::default();
        config.explain.method = "anchors".to_string();
        assert!(config.validate().unwrap_err().contains("anchors"));
    }
}
