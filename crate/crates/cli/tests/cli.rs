//! End-to-end tests of the `emweak` binary: exit codes, report output,
//! and byte-level reproducibility of the written artifacts.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emweak() -> Command {
    Command::new(env!("CARGO_BIN_EXE_emweak"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path
}

fn run_with_config(body: &str, extra: &[&str]) -> (Output, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "config.toml", body);
    let out = emweak()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .args(extra)
        .output()
        .unwrap();
    (out, dir)
}

const QUICK_DIAGNOSTIC: &str = r#"
pipeline = "weight_diagnostic"
builtin = "sign_drift"
seed = 90210
paths = 4000
batches = 8
step = 0.0625
"#;

#[test]
fn list_builtins_names_the_catalogue() {
    let out = emweak().arg("list-builtins").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sign_drift"));
    assert!(text.contains("killed_bm_interval"));
    assert!(text.contains("reflected_bm"));
}

#[test]
fn passing_run_exits_zero_and_prints_a_json_report() {
    let (out, _dir) = run_with_config(QUICK_DIAGNOSTIC, &[]);
    assert_eq!(out.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["pipeline"], "weight_diagnostic");
    assert_eq!(report["passed"], true);
    assert_eq!(report["seed"], 90210);
}

#[test]
fn failing_gate_exits_one() {
    // Divergent squared weights: the diagnostic completes but its gate fails.
    let config = r#"
pipeline = "weight_diagnostic"
builtin = "linear_drift"
seed = 3
paths = 16000
batches = 8
"#;
    let (out, _dir) = run_with_config(config, &[]);
    assert_eq!(out.status.code(), Some(1));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["passed"], false);
    assert_eq!(report["stabilized"], false);
}

#[test]
fn non_divisor_step_is_a_config_error_with_a_clear_message() {
    let config = r#"
pipeline = "weak_order"
builtin = "zero_drift"
paths = 2000
batches = 8

[ladder]
steps = [0.3]
h_ref = 0.001
"#;
    let (out, _dir) = run_with_config(config, &[]);
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("T/n"), "stderr: {stderr}");
}

#[test]
fn unknown_builtin_and_missing_config_exit_two() {
    let (out, _dir) = run_with_config(
        "pipeline = \"weak_order\"\nbuiltin = \"warp_drive\"\npaths = 2000\n",
        &[],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("warp_drive"));

    let out = emweak()
        .arg("run")
        .arg("--config")
        .arg("/definitely/not/a/file.toml")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn cli_overrides_replace_config_values() {
    let (out, _dir) = run_with_config(QUICK_DIAGNOSTIC, &["--seed", "777", "--paths", "2000"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["seed"], 777);
    assert_eq!(report["paths"], 2000);
}

#[test]
fn pipeline_override_is_validated() {
    let (out, _dir) = run_with_config(QUICK_DIAGNOSTIC, &["--pipeline", "warp_speed"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("warp_speed"));
}

const QUICK_LADDER: &str = r#"
pipeline = "weak_order"
builtin = "zero_drift"
seed = 411
paths = 2000
batches = 8

[functional]
payoff = "tanh"

[ladder]
k_range = [2, 3]
k_ref = 6
"#;

#[test]
fn repeated_runs_write_byte_identical_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "config.toml", QUICK_LADDER);
    let out_a = dir.path().join("run_a");
    let out_b = dir.path().join("run_b");
    let a = emweak()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_a)
        .output()
        .unwrap();
    let b = emweak()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .arg("--out")
        .arg(&out_b)
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0), "stderr: {}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let csv_a = fs::read(out_a.join("ladder.csv")).unwrap();
    let csv_b = fs::read(out_b.join("ladder.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    assert_eq!(
        fs::read(out_a.join("report.json")).unwrap(),
        fs::read(out_b.join("report.json")).unwrap()
    );
    assert!(String::from_utf8(csv_a).unwrap().starts_with("h,error,stderr,reference\n"));
}

#[test]
fn worker_count_does_not_change_the_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "config.toml", QUICK_LADDER);
    let out_one = dir.path().join("one");
    let out_four = dir.path().join("four");
    let a = emweak()
        .arg("run")
        .args(["--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_one)
        .env("EMWEAK_WORKERS", "1")
        .output()
        .unwrap();
    let b = emweak()
        .arg("run")
        .args(["--config"])
        .arg(&config)
        .arg("--out")
        .arg(&out_four)
        .env("EMWEAK_WORKERS", "4")
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(b.status.code(), Some(0));
    assert_eq!(
        fs::read(out_one.join("ladder.csv")).unwrap(),
        fs::read(out_four.join("ladder.csv")).unwrap()
    );
    assert_eq!(
        fs::read(out_one.join("report.json")).unwrap(),
        fs::read(out_four.join("report.json")).unwrap()
    );
}

#[test]
fn bad_worker_env_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "config.toml", QUICK_DIAGNOSTIC);
    let out = emweak()
        .arg("run")
        .arg("--config")
        .arg(&config)
        .env("EMWEAK_WORKERS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("EMWEAK_WORKERS"));
}
