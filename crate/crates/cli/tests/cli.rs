use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn opt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_opt"))
        .args(args)
        .env("KATE_DATA_DIR", std::env::temp_dir().join("kate-cli-test-empty-cache"))
        .output()
        .expect("spawn opt")
}

fn ok(args: &[&str]) -> Value {
    let out = opt(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_string()
}

fn small_synthetic(dir: &Path, extra: &str) -> String {
    write_config(
        dir,
        &format!(r#"{{"problem": {{"synthetic": {{"n": 200, "d": 5, "seed": 3}}}}, "T": 300, "log_every": 50{extra}}}"#),
    )
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn run_writes_traces_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_synthetic(dir.path(), "");
    let out = dir.path().join("out");
    let summary = ok(&["run", "--config", &cfg, "--trials", "3", "--out", out.to_str().unwrap()]);
    assert_eq!(summary["trials"].as_array().unwrap().len(), 3);
    for name in ["trace_trial0.csv", "trace_trial1.csv", "trace_trial2.csv", "trace_mean.csv", "summary.json"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
    let text = fs::read_to_string(out.join("trace_mean.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,fval,accuracy,grad_norm_sq,gnorm_weighted,nu_min,nu_max,diverged");
    let ts: Vec<String> = csv_rows(&out.join("trace_mean.csv")).into_iter().map(|r| r[0].clone()).collect();
    assert_eq!(ts, ["0", "50", "100", "150", "200", "250", "300"]);
}

#[test]
fn mean_csv_is_row_wise_mean() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_synthetic(dir.path(), r#", "optimizer": "adagrad", "beta": 0.5"#);
    let out = dir.path().join("out");
    ok(&["run", "--config", &cfg, "--trials", "3", "--out", out.to_str().unwrap()]);
    let trials: Vec<_> = (0..3).map(|i| csv_rows(&out.join(format!("trace_trial{i}.csv")))).collect();
    let mean = csv_rows(&out.join("trace_mean.csv"));
    for (r, row) in mean.iter().enumerate() {
        let expected = trials.iter().map(|t| t[r][1].parse::<f64>().unwrap()).sum::<f64>() / 3.0;
        let got: f64 = row[1].parse().unwrap();
        assert!((got - expected).abs() <= 1e-15 * expected.abs().max(1.0), "row {r}: {got} vs {expected}");
    }
}

#[test]
fn same_config_gives_identical_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_synthetic(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    ok(&["run", "--config", &cfg, "--trials", "2", "--out", a.to_str().unwrap()]);
    ok(&["run", "--config", &cfg, "--trials", "2", "--out", b.to_str().unwrap()]);
    for name in ["trace_trial0.csv", "trace_trial1.csv", "trace_mean.csv"] {
        assert_eq!(fs::read(a.join(name)).unwrap(), fs::read(b.join(name)).unwrap(), "{name}");
    }
}

#[test]
fn bad_configuration_exits_2() {
    let out = opt(&["run", "--optimizer", "adam", "--T", "10"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"T": 10, "learning_rate": 0.1}"#);
    assert_eq!(opt(&["run", "--config", &cfg]).status.code(), Some(2));
    let sgd = opt(&["run", "--optimizer", "sgd_constant", "--delta", "0", "--T", "10"]);
    assert_eq!(sgd.status.code(), Some(2));
}

#[test]
fn invariance_reports_kate_and_adagrad() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"synthetic": {"n": 300, "d": 6, "seed": 1}}, "T": 100}"#,
    );
    let out = dir.path().join("out");
    let reports = ok(&["invariance", "--config", &cfg, "--out", out.to_str().unwrap()]);
    let reports = reports.as_array().unwrap();
    assert_eq!(reports[0]["optimizer"], "kate");
    assert_eq!(reports[0]["passed"], true);
    assert_eq!(reports[1]["optimizer"], "adagrad");
    assert!(reports[1]["passed"].is_null());
    for name in ["invariance_kate.json", "invariance_kate_unscaled.csv", "invariance_kate_scaled.csv"] {
        assert!(out.join(name).exists(), "{name} missing");
    }
}

#[test]
fn single_cell_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_synthetic(dir.path(), r#", "deltas": [1e-4], "optimizers": ["kate"], "eta": 1.0"#);
    let sweep = ok(&["sweep", "--config", &cfg, "--out", dir.path().join("s").to_str().unwrap()]);
    let run = ok(&["run", "--config", &cfg, "--delta", "1e-4", "--out", dir.path().join("r").to_str().unwrap()]);
    assert_eq!(sweep["final_fval"][0][0].as_f64(), run["mean_final_fval"].as_f64());
    assert!(dir.path().join("s/sweep_final.csv").exists());
}

#[test]
fn tune_with_one_beta_picks_it() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_synthetic(dir.path(), r#", "beta_grid": [0.3], "optimizers": ["kate", "adagrad"]"#);
    let report = ok(&["tune", "--config", &cfg, "--out", dir.path().join("t").to_str().unwrap()]);
    for entry in report["entries"].as_array().unwrap() {
        assert_eq!(entry["best_beta"].as_f64(), Some(0.3));
    }
    assert!(dir.path().join("t/tune_kate_best.csv").exists());
}

#[test]
fn tune_prefers_stable_beta_over_diverging_one() {
    // SGD with step β/Δ on diag(1, 4) is stable only for β/Δ < 2/L = 0.5
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"quadratic": {"a": [[1, 0], [0, 4]], "b": [1, 1]}}, "T": 300, "delta": 1.0,
            "beta_grid": [0.1, 1.0], "optimizers": ["sgd_constant"]}"#,
    );
    let report = ok(&["tune", "--config", &cfg, "--out", dir.path().join("t").to_str().unwrap()]);
    let entry = &report["entries"][0];
    assert_eq!(entry["best_beta"].as_f64(), Some(0.1));
    assert_eq!(entry["scores"][1]["diverged_trials"], 1);
}

#[test]
fn offline_fetch_of_uncached_dataset_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = opt(&["fetch", "heart", "--offline", "--cache-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(opt(&["fetch", "nope", "--offline"]).status.code(), Some(2));
}
