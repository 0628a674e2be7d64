//! Subcommand implementations. Every function returns `Failure`, which
//! carries the process exit code, so `main` stays a thin wrapper. Commands
//! only ever read their inputs; all writes go to the output directory or an
//! explicitly named destination.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::Serialize;

use rul_core::data::{
    label_rul, parse_cmapss, select_columns, simulate_degradation, split_rows, split_units,
    write_cmapss, Dataset,
};
use rul_core::explain::{
    exact_shapley, format_value, kernel_shap, lime_explain, render_explanation,
    subsample_background, LimeConfig, RenderStyle, ShapConfig,
};
use rul_core::models::{FnPredictor, ForestParams, TrainedModel};
use rul_core::pipeline::{
    grid_search, mae, mse, rank_and_select, run_experiment, FamilySpec, GridResult, GridSpec,
};
use rul_core::seeds::derive_seed;

use crate::config::{parse_method, MethodKind, RunConfig, SplitKind};
use crate::{Failure, EXIT_CONFIG, EXIT_IO, EXIT_MODEL};

/// The dataset named in the config, or a synthetic one when no path is set.
/// Labels are recomputed from each unit's final observed cycle either way;
/// telemetry files do not carry them.
fn load_dataset(config: &RunConfig) -> Result<Dataset, Failure> {
    let ds = match &config.data.path {
        Some(path) => {
            let file = File::open(path).map_err(|e| {
                Failure::new(EXIT_IO, format!("cannot open dataset {}: {e}", path.display()))
            })?;
            parse_cmapss(BufReader::new(file), path.display().to_string())?
        }
        None => simulate_degradation(
            config.data.synthetic.n_units,
            derive_seed(config.experiment.seed, "data"),
            config.data.synthetic.noise,
        )?,
    };
    Ok(label_rul(&ds, config.data.rul_cap)?)
}

fn split(config: &RunConfig, ds: &Dataset) -> Result<(Dataset, Dataset), Failure> {
    let seed = derive_seed(config.experiment.seed, "split");
    let pair = match config.data.split {
        SplitKind::Rows => split_rows(ds, config.data.test_fraction, seed),
        SplitKind::Units => split_units(ds, config.data.test_fraction, seed),
    };
    Ok(pair?)
}

fn ensure_out_dir(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| {
        Failure::new(EXIT_IO, format!("cannot create output directory {}: {e}", dir.display()))
    })
}

fn write_named(path: &Path, bytes: impl AsRef<[u8]>) -> Result<(), Failure> {
    std::fs::write(path, bytes)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::from(rul_core::Error::from(e)))?;
    text.push('\n');
    write_named(path, text)
}

fn load_artifact(path: &Path) -> Result<TrainedModel, Failure> {
    let file = File::open(path)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot open model {}: {e}", path.display())))?;
    TrainedModel::load(BufReader::new(file))
        .map_err(|e| Failure::new(EXIT_MODEL, format!("cannot load model {}: {e}", path.display())))
}

pub fn simulate(
    config: &RunConfig,
    units: Option<usize>,
    noise: Option<f64>,
    output: Option<PathBuf>,
) -> Result<(), Failure> {
    let n_units = units.unwrap_or(config.data.synthetic.n_units);
    let noise = noise.unwrap_or(config.data.synthetic.noise);
    if n_units == 0 {
        return Err(Failure::new(EXIT_CONFIG, "--units must be at least 1"));
    }
    let ds = simulate_degradation(n_units, derive_seed(config.experiment.seed, "data"), noise)?;
    let path = match output {
        Some(p) => p,
        None => {
            ensure_out_dir(&config.output.dir)?;
            config.output.dir.join("synthetic.txt")
        }
    };
    let mut buf = Vec::new();
    write_cmapss(&ds, &mut buf)?;
    write_named(&path, buf)?;
    println!("wrote {} cycles from {} units to {}", ds.len(), n_units, path.display());
    Ok(())
}

pub fn train(config: &RunConfig) -> Result<(), Failure> {
    let experiment = config.experiment_config().map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let ds = load_dataset(config)?;
    let (train_ds, test_ds) = split(config, &ds)?;
    let mut run = run_experiment(&train_ds, &test_ds, &experiment)?;
    // The report should show every seed stream this invocation consumed,
    // including the ones spent before the experiment proper.
    let seed = config.experiment.seed;
    if config.data.path.is_none() {
        run.report.stage_seeds.insert("data".to_string(), derive_seed(seed, "data"));
    }
    run.report.stage_seeds.insert("split".to_string(), derive_seed(seed, "split"));
    for warning in &run.report.warnings {
        eprintln!("warning: {warning}");
    }
    ensure_out_dir(&config.output.dir)?;
    let mut model_paths = Vec::new();
    for (entry, artifact) in run.report.models.iter().zip(&run.artifacts) {
        let path = config.output.dir.join(format!("model-{}.json", entry.family.as_str()));
        let mut buf = Vec::new();
        artifact.save(&mut buf)?;
        write_named(&path, buf)?;
        model_paths.push(path);
    }
    let report_path = config.output.dir.join("report.json");
    write_json(&report_path, &run.report)?;

    println!(
        "train rows = {}, test rows = {}, selection kept {} of {} features",
        run.report.train_rows,
        run.report.test_rows,
        run.report.selection.n_kept(),
        run.report.selection.mask.len()
    );
    for entry in &run.report.models {
        println!(
            "{:<13} mse = {:<12} mae = {}",
            entry.family.as_str(),
            format_value(entry.mse),
            format_value(entry.mae)
        );
    }
    for path in &model_paths {
        println!("model: {}", path.display());
    }
    println!("report: {}", report_path.display());
    Ok(())
}

pub fn evaluate(config: &RunConfig, model_path: &Path) -> Result<(), Failure> {
    let artifact = load_artifact(model_path)?;
    let ds = load_dataset(config)?;
    let x = ds.features_matrix();
    let y = ds.targets()?;
    let preds = artifact.predict_raw_batch(x.view())?;
    let mse_value = mse(y.as_slice().unwrap(), preds.as_slice().unwrap())?;
    let mae_value = mae(y.as_slice().unwrap(), preds.as_slice().unwrap())?;

    println!("family = {}", artifact.family().as_str());
    println!("rows   = {}", ds.len());
    println!("mse    = {}", format_value(mse_value));
    println!("mae    = {}", format_value(mae_value));

    #[derive(Serialize)]
    struct Evaluation {
        model: String,
        family: String,
        data: String,
        rows: usize,
        mse: f64,
        mae: f64,
    }
    ensure_out_dir(&config.output.dir)?;
    let path = config.output.dir.join("evaluation.json");
    write_json(
        &path,
        &Evaluation {
            model: model_path.display().to_string(),
            family: artifact.family().as_str().to_string(),
            data: ds.provenance().to_string(),
            rows: ds.len(),
            mse: mse_value,
            mae: mae_value,
        },
    )?;
    println!("evaluation: {}", path.display());
    Ok(())
}

pub fn grid_search_cmd(config: &RunConfig) -> Result<(), Failure> {
    let specs = config.family_specs().map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let grids: Vec<_> = specs
        .into_iter()
        .filter_map(|spec| match spec {
            FamilySpec::Grid(grid) => Some(grid),
            FamilySpec::Fixed(_) => None,
        })
        .collect();
    if grids.is_empty() {
        return Err(Failure::new(
            EXIT_CONFIG,
            "no grids configured; add an [experiment.grids.<family>] table",
        ));
    }
    let ds = load_dataset(config)?;
    ensure_out_dir(&config.output.dir)?;
    for grid in grids {
        let family = grid.family();
        let spec = GridSpec {
            grid,
            cv_folds: config.experiment.cv_folds,
            seed: derive_seed(config.experiment.seed, &format!("grid/{}", family.as_str())),
        };
        let result = grid_search(&ds, &spec)?;
        let winner = &result.table[result.chosen];
        println!(
            "{}: combination {} of {} wins with mean cv mse {}",
            family.as_str(),
            result.chosen + 1,
            result.table.len(),
            format_value(winner.score())
        );
        let json_path = config.output.dir.join(format!("grid-{}.json", family.as_str()));
        write_json(&json_path, &result)?;
        let csv_path = config.output.dir.join(format!("grid-{}.csv", family.as_str()));
        write_named(&csv_path, grid_table_csv(&result))?;
        println!("grid table: {} and {}", json_path.display(), csv_path.display());
    }
    Ok(())
}

/// One row per combination; params are compact JSON in a quoted cell, and a
/// failed combination leaves its score cell empty.
fn grid_table_csv(result: &GridResult) -> String {
    let mut out = String::from("index,family,params,mean_mse\n");
    for (i, entry) in result.table.iter().enumerate() {
        let params = serde_json::to_string(&entry.params).unwrap_or_default();
        let score = entry.mean_mse.map(|v| v.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{i},{},\"{}\",{score}\n",
            result.family.as_str(),
            params.replace('"', "\"\"")
        ));
    }
    out
}

pub fn rank_features(config: &RunConfig) -> Result<(), Failure> {
    let rule = config.experiment.selection.to_rule().map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let ds = load_dataset(config)?;
    let shallow = ForestParams {
        seed: derive_seed(config.experiment.seed, "selection"),
        ..ForestParams::default()
    };
    let selection = rank_and_select(&ds, &shallow, rule)?;

    println!("{:<5} {:<14} {:>12}  kept", "rank", "feature", "importance");
    for (i, feature) in selection.ranking.iter().enumerate() {
        println!(
            "{:<5} {:<14} {:>12}  {}",
            i + 1,
            feature.name,
            format_value(feature.importance),
            if selection.mask[feature.index] { "yes" } else { "no" }
        );
    }
    ensure_out_dir(&config.output.dir)?;
    let path = config.output.dir.join("ranking.json");
    write_json(&path, &selection)?;
    println!("ranking: {}", path.display());
    Ok(())
}

pub fn explain(
    config: &RunConfig,
    model_path: &Path,
    row: usize,
    method_flag: Option<&str>,
    style_flag: Option<&str>,
) -> Result<(), Failure> {
    let method_name = method_flag.unwrap_or(&config.explain.method);
    let method = parse_method(method_name).map_err(|e| Failure::new(EXIT_CONFIG, e))?;
    let style_name = style_flag.unwrap_or(&config.explain.style);
    let style: RenderStyle = style_name
        .parse()
        .map_err(|_| Failure::new(EXIT_CONFIG, format!("unknown render style {style_name:?}")))?;

    let artifact = load_artifact(model_path)?;
    let ds = load_dataset(config)?;
    if row >= ds.len() {
        return Err(Failure::new(
            EXIT_CONFIG,
            format!("row {row} is out of range: {} has {} rows", ds.provenance(), ds.len()),
        ));
    }
    let matrix = ds.features_matrix();
    if artifact.raw_arity() != matrix.ncols() {
        return Err(Failure::new(
            EXIT_MODEL,
            format!(
                "model {} expects {} raw features but the dataset provides {}",
                model_path.display(),
                artifact.raw_arity(),
                matrix.ncols()
            ),
        ));
    }

    // Explanations run over the model's active features in raw units; the
    // scaler and mask stay folded inside the predictor, so conditions read
    // in original sensor units.
    let active = artifact.active_indices();
    let names = artifact.active_feature_names();
    let active_matrix = select_columns(&matrix, &artifact.feature_mask);
    let seed = config.experiment.seed;
    let background = subsample_background(
        active_matrix.view(),
        config.explain.background,
        derive_seed(seed, "background"),
    );
    let instance: Vec<f64> = active_matrix.row(row).to_vec();
    let template: Vec<f64> = matrix.row(row).to_vec();
    let predictor = FnPredictor::new(active.len(), |assignment: &[f64]| {
        let mut full = template.clone();
        for (slot, &col) in active.iter().enumerate() {
            full[col] = assignment[slot];
        }
        artifact.predict_raw(&full).expect("template row matches the artifact arity")
    });

    let explain_seed = derive_seed(seed, "explain");
    let explanation = match method {
        MethodKind::Lime => {
            let lime_config = LimeConfig {
                n_samples: config.explain.n_samples,
                k_features: config.explain.k_features,
                seed: explain_seed,
                ..LimeConfig::default()
            };
            lime_explain(&predictor, &instance, background.view(), &names, &lime_config)?
        }
        MethodKind::Shap => {
            let shap_config = ShapConfig {
                n_coalitions: config.explain.n_coalitions,
                seed: explain_seed,
                ..ShapConfig::default()
            };
            kernel_shap(&predictor, &instance, background.view(), &names, &shap_config)?
        }
        MethodKind::Exact => {
            let subset: Vec<usize> = (0..active.len()).collect();
            exact_shapley(&predictor, &instance, background.view(), &names, &subset)?
        }
    };

    println!("method    = {}", explanation.method);
    println!("predicted = {}", format_value(explanation.predicted_value));
    println!("base      = {}", format_value(explanation.base_value));

    ensure_out_dir(&config.output.dir)?;
    let token = match method {
        MethodKind::Lime => "lime",
        MethodKind::Shap => "shap",
        MethodKind::Exact => "exact",
    };
    let json_path = config.output.dir.join(format!("explanation-row{row}-{token}.json"));
    write_json(&json_path, &explanation)?;
    let extension = if style == RenderStyle::Text { "txt" } else { "svg" };
    let render_path =
        config.output.dir.join(format!("explanation-row{row}-{token}.{extension}"));
    write_named(&render_path, render_explanation(&explanation, style))?;
    println!("explanation: {}", json_path.display());
    println!("rendering: {}", render_path.display());
    Ok(())
}
