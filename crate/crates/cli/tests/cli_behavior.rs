//! End-to-end behavior of the `rul-explain` binary: every test spawns the
//! real executable, so flag parsing, config layering, exit codes, and file
//! outputs are all checked exactly as a user would hit them.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_rul-explain"))
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    bin().current_dir(dir).args(args).output().expect("binary should spawn")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn code(output: &Output) -> i32 {
    output.status.code().expect("process should exit normally")
}

fn assert_ok(output: &Output) {
    assert!(
        output.status.success(),
        "command failed\nstdout:\n{}\nstderr:\n{}",
        stdout(output),
        stderr(output)
    );
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path
}

fn read_json(path: &Path) -> serde_json::Value {
    let text = std::fs::read_to_string(path)
        .unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()));
    serde_json::from_str(&text).unwrap()
}

/// Small but non-trivial setup: two fast families on a five-unit simulation.
const SMALL: &str = r#"
[data.synthetic]
n_units = 5

[experiment]
seed = 11
families = ["elastic-net", "gbm"]

[experiment.overrides.gbm]
n_stages = 25

[explain]
n_samples = 600
background = 40
"#;

#[test]
fn simulate_writes_flat_26_column_text() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["--seed", "5", "--out", "o", "simulate", "--units", "3"]);
    assert_ok(&out);
    let text = std::fs::read_to_string(dir.path().join("o/synthetic.txt")).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let fields: Vec<&str> = line.split_whitespace().collect();
        assert_eq!(fields.len(), 26, "bad line: {line}");
        for field in &fields {
            field.parse::<f64>().unwrap();
        }
        assert!(fields[0].parse::<u32>().unwrap() >= 1);
        assert!(fields[1].parse::<u32>().unwrap() >= 1);
    }
}

#[test]
fn simulate_is_deterministic_and_reingestible() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), SMALL);
    let config = config.to_str().unwrap();
    let first = run_in(dir.path(), &["--config", config, "simulate", "--output", "a.txt"]);
    assert_ok(&first);
    let second = run_in(dir.path(), &["--config", config, "simulate", "--output", "b.txt"]);
    assert_ok(&second);
    let a = std::fs::read(dir.path().join("a.txt")).unwrap();
    let b = std::fs::read(dir.path().join("b.txt")).unwrap();
    assert_eq!(a, b, "same seed must reproduce the same telemetry");

    let train = run_in(
        dir.path(),
        &["--config", config, "--data", "a.txt", "--out", "o", "train"],
    );
    assert_ok(&train);
    let after = std::fs::read(dir.path().join("a.txt")).unwrap();
    assert_eq!(a, after, "training must not mutate its input file");
}

#[test]
fn missing_dataset_path_fails_with_io_exit() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["--data", "nope.txt", "--out", "o", "train"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("nope.txt"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_config_keys_are_fatal() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "[experiment]\nsede = 4\n");
    let out = run_in(dir.path(), &["--config", config.to_str().unwrap(), "rank-features"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("sede"), "stderr: {}", stderr(&out));
}

#[test]
fn invalid_thread_cap_is_rejected() {
    let dir = TempDir::new().unwrap();
    let out = bin()
        .current_dir(dir.path())
        .env("RUL_EXPLAIN_THREADS", "banana")
        .args(["--out", "o", "simulate", "--units", "2"])
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("RUL_EXPLAIN_THREADS"), "stderr: {}", stderr(&out));
}

#[test]
fn bare_invocation_needs_no_config_file() {
    let dir = TempDir::new().unwrap();
    let out = run_in(dir.path(), &["--out", "o", "simulate", "--units", "2"]);
    assert_ok(&out);
    assert!(dir.path().join("o/synthetic.txt").exists());
}

#[test]
fn train_is_deterministic_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), SMALL);
    let config = config.to_str().unwrap();

    assert_ok(&run_in(dir.path(), &["--config", config, "--out", "r1", "train"]));
    assert_ok(&run_in(dir.path(), &["--config", config, "--out", "r2", "train"]));
    let narrow = bin()
        .current_dir(dir.path())
        .env("RUL_EXPLAIN_THREADS", "1")
        .args(["--config", config, "--out", "r3", "train"])
        .output()
        .unwrap();
    assert_ok(&narrow);

    for model in ["model-elastic-net.json", "model-gbm.json"] {
        let bytes = |run: &str| std::fs::read(dir.path().join(run).join(model)).unwrap();
        assert_eq!(bytes("r1"), bytes("r2"), "{model} differs between identical runs");
        assert_eq!(bytes("r1"), bytes("r3"), "{model} depends on the thread count");
    }

    let report = |run: &str| {
        let mut v = read_json(&dir.path().join(run).join("report.json"));
        let timings = v.as_object_mut().unwrap().remove("timings");
        assert!(timings.is_some(), "report should carry timings");
        v
    };
    assert_eq!(report("r1"), report("r2"));
    assert_eq!(report("r1"), report("r3"));
}

#[test]
fn evaluate_reports_both_metrics() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), SMALL);
    let config = config.to_str().unwrap();
    assert_ok(&run_in(dir.path(), &["--config", config, "--out", "o", "train"]));
    let out = run_in(
        dir.path(),
        &["--config", config, "--out", "o", "evaluate", "--model", "o/model-gbm.json"],
    );
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("mse"), "stdout: {text}");
    assert!(text.contains("mae"), "stdout: {text}");

    let summary = read_json(&dir.path().join("o/evaluation.json"));
    let mse = summary["mse"].as_f64().unwrap();
    let mae = summary["mae"].as_f64().unwrap();
    assert!(mse.is_finite() && mae.is_finite());
    assert!(mae * mae <= mse + 1e-9, "mae^2 = {} must not exceed mse = {mse}", mae * mae);
}

#[test]
fn lime_and_shap_agree_on_the_prediction() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), SMALL);
    let config = config.to_str().unwrap();
    assert_ok(&run_in(dir.path(), &["--config", config, "--out", "o", "train"]));

    for method in ["lime", "shap"] {
        let out = run_in(
            dir.path(),
            &[
                "--config", config, "--out", "o",
                "explain", "--model", "o/model-gbm.json", "--row", "40", "--method", method,
            ],
        );
        assert_ok(&out);
        let text = stdout(&out);
        assert!(text.contains("predicted ="), "stdout: {text}");
        assert!(text.contains("base"), "stdout: {text}");
    }

    let lime = read_json(&dir.path().join("o/explanation-row40-lime.json"));
    let shap = read_json(&dir.path().join("o/explanation-row40-shap.json"));
    let predicted = |v: &serde_json::Value| v["predicted_value"].as_f64().unwrap();
    let base = |v: &serde_json::Value| v["base_value"].as_f64().unwrap();
    assert_eq!(predicted(&lime), predicted(&shap), "both explain the same model output");
    assert!((base(&lime) - base(&shap)).abs() < 1e-9);

    let total: f64 = shap["contributions"]
        .as_array()
        .unwrap()
        .iter()
        .map(|c| c["value"].as_f64().unwrap())
        .sum();
    let gap = (base(&shap) + total - predicted(&shap)).abs();
    assert!(gap < 1e-6, "kernel SHAP must satisfy local accuracy, gap = {gap}");

    let svg = std::fs::read_to_string(dir.path().join("o/explanation-row40-shap.svg")).unwrap();
    assert!(svg.starts_with("<svg"), "default bar style renders svg");
}

#[test]
fn exact_shapley_runs_when_the_model_is_narrow() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[data.synthetic]
n_units = 5

[experiment]
seed = 17
families = ["elastic-net"]

[experiment.selection]
rule = "top-k"
k = 4

[explain]
background = 30
"#,
    );
    let config = config.to_str().unwrap();
    assert_ok(&run_in(dir.path(), &["--config", config, "--out", "o", "train"]));
    let out = run_in(
        dir.path(),
        &[
            "--config", config, "--out", "o",
            "explain", "--model", "o/model-elastic-net.json", "--row", "7",
            "--method", "exact", "--style", "text",
        ],
    );
    assert_ok(&out);
    let explanation = read_json(&dir.path().join("o/explanation-row7-exact.json"));
    let contributions = explanation["contributions"].as_array().unwrap();
    assert_eq!(contributions.len(), 4);
    let total: f64 = contributions.iter().map(|c| c["value"].as_f64().unwrap()).sum();
    let gap = (explanation["base_value"].as_f64().unwrap() + total
        - explanation["predicted_value"].as_f64().unwrap())
    .abs();
    assert!(gap < 1e-6, "exact Shapley must satisfy efficiency, gap = {gap}");
    assert!(dir.path().join("o/explanation-row7-exact.txt").exists());
}

#[test]
fn exact_shapley_refuses_wide_models() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[data.synthetic]
n_units = 5

[experiment]
seed = 17
families = ["elastic-net"]

[experiment.selection]
rule = "threshold"
value = 0.0
"#,
    );
    let config = config.to_str().unwrap();
    assert_ok(&run_in(dir.path(), &["--config", config, "--out", "o", "train"]));

    let artifact = read_json(&dir.path().join("o/model-elastic-net.json"));
    let active = artifact["feature_mask"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|b| b.as_bool().unwrap())
        .count();
    assert!(active > 12, "setup should keep a wide model, kept {active}");

    let out = run_in(
        dir.path(),
        &[
            "--config", config, "--out", "o",
            "explain", "--model", "o/model-elastic-net.json", "--row", "0",
            "--method", "exact",
        ],
    );
    assert_eq!(code(&out), 6);
    assert!(stderr(&out).contains("12"), "stderr should name the bound: {}", stderr(&out));
}

#[test]
fn future_artifact_versions_are_refused() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), SMALL);
    let config = config.to_str().unwrap();
    assert_ok(&run_in(dir.path(), &["--config", config, "--out", "o", "train"]));

    let path = dir.path().join("o/model-gbm.json");
    let mut artifact = read_json(&path);
    artifact["format_version"] = serde_json::json!(99);
    std::fs::write(dir.path().join("future.json"), artifact.to_string()).unwrap();

    let out = run_in(
        dir.path(),
        &["--config", config, "--out", "o", "evaluate", "--model", "future.json"],
    );
    assert_eq!(code(&out), 5);
    let err = stderr(&out);
    assert!(err.contains("99"), "stderr should name the found version: {err}");
    assert!(err.contains('1'), "stderr should name the supported version: {err}");
}

#[test]
fn out_of_range_rows_and_unknown_methods_are_usage_errors() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), SMALL);
    let config = config.to_str().unwrap();
    assert_ok(&run_in(dir.path(), &["--config", config, "--out", "o", "train"]));

    let out = run_in(
        dir.path(),
        &[
            "--config", config, "--out", "o",
            "explain", "--model", "o/model-gbm.json", "--row", "10000000",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("range"), "stderr: {}", stderr(&out));

    let out = run_in(
        dir.path(),
        &[
            "--config", config, "--out", "o",
            "explain", "--model", "o/model-gbm.json", "--row", "0", "--method", "anchors",
        ],
    );
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("anchors"), "stderr: {}", stderr(&out));
}

#[test]
fn grid_search_writes_json_and_csv_tables() {
    let dir = TempDir::new().unwrap();
    let config = write_config(
        dir.path(),
        r#"
[data.synthetic]
n_units = 4

[experiment]
seed = 3
families = ["elastic-net"]

[experiment.grids.elastic-net]
alpha = [0.01, 100.0]
l1_ratio = [0.0, 0.9]
"#,
    );
    let out = run_in(
        dir.path(),
        &["--config", config.to_str().unwrap(), "--out", "o", "grid-search"],
    );
    assert_ok(&out);

    let table = read_json(&dir.path().join("o/grid-elastic-net.json"));
    let rows = table["table"].as_array().unwrap();
    assert_eq!(rows.len(), 4);
    let chosen = table["chosen"].as_u64().unwrap() as usize;
    let score = |row: &serde_json::Value| {
        row["mean_mse"].as_f64().unwrap_or(f64::INFINITY)
    };
    let best = score(&rows[chosen]);
    assert!(rows.iter().all(|row| best <= score(row)), "chosen row must have the best score");

    let csv = std::fs::read_to_string(dir.path().join("o/grid-elastic-net.csv")).unwrap();
    assert_eq!(csv.lines().count(), 5, "header plus one line per combination");
    assert!(csv.lines().next().unwrap().contains("mean_mse"));
}

#[test]
fn rank_features_prints_the_cut() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), SMALL);
    let out = run_in(
        dir.path(),
        &["--config", config.to_str().unwrap(), "--out", "o", "rank-features"],
    );
    assert_ok(&out);
    let text = stdout(&out);
    assert!(text.contains("rank"), "stdout: {text}");
    assert!(text.contains("kept"), "stdout: {text}");

    let ranking = read_json(&dir.path().join("o/ranking.json"));
    assert_eq!(ranking["ranking"].as_array().unwrap().len(), 24);
    assert_eq!(ranking["mask"].as_array().unwrap().len(), 24);
}
