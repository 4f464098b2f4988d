//! CLI contract: subcommand outputs, file schemas, and exit codes
//! (0 success, 2 validation, 3 budget/convergence).

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ghtlab"))
}

fn write(path: &Path, text: &str) {
    fs::write(path, text).unwrap();
}

fn small_config() -> String {
    serde_json::json!({
        "model": {
            "n": 10, "p": 4, "sigma": 0.5,
            "mu0": [1.0, 1.0, 1.0, 1.0],
            "mu_inf": 2.0,
            "signals": {"3": [2.0, 2.0, 2.0, 2.0]}
        },
        "estimators": ["naive", "oracle", {"ght": {"lambda_scale": 1.0}}],
        "reps": 50,
        "seed": 7
    })
    .to_string()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

#[test]
fn simulate_writes_csv_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &small_config());
    let out_path = dir.path().join("out.csv");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&out_path).unwrap();
    assert!(text.starts_with(
        "n,p,s,sigma,mu_inf,estimator,lambda_scale,reps,seed,mse,se,oracle_exact,naive_exact,"
    ));
    assert_eq!(text.lines().count(), 4);
    // this config violates the bound hypothesis: warn on stderr, still exit 0
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
}

#[test]
fn simulate_estimator_override_uses_registry_names() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &small_config());
    let out_path = dir.path().join("out.csv");
    let ok = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .args(["--estimators", "naive,ght"])
        .output()
        .unwrap();
    assert_eq!(code(&ok), 0);
    let text = fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.contains(",naive,"));
    assert!(text.contains(",ght,"));

    let bad = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .args(["--estimators", "soft_threshold"])
        .output()
        .unwrap();
    assert_eq!(code(&bad), 2);
    assert!(String::from_utf8_lossy(&bad.stderr).contains("unknown estimator"));
}

#[test]
fn invalid_model_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // mu_inf below the background sup-norm: empty class
    write(
        &cfg,
        &serde_json::json!({
            "model": {"n": 4, "p": 2, "sigma": 0.5, "mu0": [1.0, 1.0], "mu_inf": 0.5},
            "estimators": ["naive"],
            "reps": 5,
            "seed": 1
        })
        .to_string(),
    );
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty intensity class"));
}

#[test]
fn malformed_json_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, "{ not json");
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("x.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 2);
}

#[test]
fn series_budget_exhaustion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    // mu0/sigma^2 beyond the series term cap
    write(
        &grid,
        &serde_json::json!({"eps": [1.0], "s": [4], "n": [100], "mu0": [5e6]}).to_string(),
    );
    let out = bin()
        .args(["verify-kl", "--grid"])
        .arg(&grid)
        .arg("--out")
        .arg(dir.path().join("kl.csv"))
        .output()
        .unwrap();
    assert_eq!(code(&out), 3);
    assert!(String::from_utf8_lossy(&out.stderr).contains("did not converge"));
}

#[test]
fn verify_kl_writes_expected_schema() {
    let dir = tempfile::tempdir().unwrap();
    let grid = dir.path().join("grid.json");
    write(
        &grid,
        &serde_json::json!({"eps": [0.5, 1.0], "s": [4], "n": [100]}).to_string(),
    );
    let out_path = dir.path().join("kl.csv");
    let out = bin()
        .args(["verify-kl", "--grid"])
        .arg(&grid)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "eps,s,n,sigma,mu0,kl_exact,kl_bound,pass");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].ends_with("true"));
}

#[test]
fn verify_lemma1_writes_expected_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("tail.csv");
    let out = bin()
        .args([
            "verify-lemma1",
            "--p",
            "4",
            "--nu",
            "25",
            "--reps",
            "2000",
            "--seed",
            "3",
            "--u-grid",
            "40,60",
        ])
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let text = fs::read_to_string(&out_path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "u,in_range,emp_freq,ci_low,ci_high,bound,pass");
    assert_eq!(lines.len(), 3);
}

#[test]
fn packing_json_is_certified() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("packing.json");
    let out = bin()
        .args(["packing", "--p", "16", "--seed", "5"])
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(json["p"], 16);
    assert_eq!(json["m"], 8);
    assert_eq!(json["required_min_sym_diff"], 2);
    assert!(json["min_sym_diff"].as_u64().unwrap() >= 2);
    let subsets = json["subsets"].as_array().unwrap();
    assert_eq!(subsets.len(), 8);
    assert!(subsets[0].as_array().unwrap().is_empty());
}

#[test]
fn lower_bound_thm2_reports_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        &serde_json::json!({"n": 32768, "s": 128, "sigma": 1.0, "mu0_max": 1.0}).to_string(),
    );
    let out_path = dir.path().join("thm2.json");
    let out = bin()
        .args(["lower-bound", "--mode", "thm2", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("kl_exact <= 1/8"));
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(json["kl_exact_le_eighth"], true);
    // the nominal class-escape level is known not to hold against the exact tail
    assert_eq!(json["class_escape_ok"], false);
    assert!(json["separation_identity_residual"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn lower_bound_thm3_reports_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(
        &cfg,
        &serde_json::json!({
            "n": 12, "p": 16, "s": 2, "sigma": 1.0,
            "mu0": vec![0.5; 16], "mu_inf": 1.0, "seed": 7
        })
        .to_string(),
    );
    let out_path = dir.path().join("thm3.json");
    let out = bin()
        .args(["lower-bound", "--mode", "thm3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(json["code"]["m"], 8);
    let min_sep = json["min_separation"].as_f64().unwrap();
    let threshold = json["separation_threshold"].as_f64().unwrap();
    assert!(min_sep >= threshold);
    assert_eq!(json["kl_values"].as_array().unwrap().len(), 8);
}

#[test]
fn sweep_runs_from_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &small_config());
    let grid = dir.path().join("grid.json");
    write(
        &grid,
        &serde_json::json!({
            "s": [1, 2],
            "preset": {"kind": "uniform_lift", "delta": 0.5, "mu0_level": 1.0}
        })
        .to_string(),
    );
    let out_path = dir.path().join("sweep.csv");
    let out = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--grid")
        .arg(&grid)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(
        code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = fs::read_to_string(&out_path).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3);
}

#[test]
fn num_threads_env_is_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    write(&cfg, &small_config());
    let out_path = dir.path().join("out.csv");
    let out = bin()
        .env("NUM_THREADS", "1")
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out_path)
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
}
