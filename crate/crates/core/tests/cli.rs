use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use expanding_graph::experiment::Manifest;

fn expgraph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_expgraph")).args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL: &str = r#"{"mode": "synth", "n0": 6, "horizon": 40, "arrivals": [[20, 2]], "avg_degree": 2.0,
    "delta": 0.5, "epsilon": 0.5, "sigma": 9.0, "lambda": 0.05, "gamma": 0.95,
    "estimators": ["offline", "expanding"], "oracle_every": 1, "oracle_tol": 1e-9, "timing": false}"#;

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&expgraph(&["--help"])), 0);
    assert_eq!(code(&expgraph(&[])), 1);
    assert_eq!(code(&expgraph(&["synth", "--no-such-flag"])), 1);
    assert_eq!(code(&expgraph(&["frobnicate"])), 1);
}

#[test]
fn configuration_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = expgraph(&["synth"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));

    let cfg = write_config(dir.path(), r#"{"mode": "synth", "n0": 5, "horizon": 10, "h": 1.5}"#);
    let o = expgraph(&["synth", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("h must lie in (0, 1]"));

    let cfg = write_config(dir.path(), SMALL);
    let o = expgraph(&["run-csv", "--config", &cfg, "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code(&o), 1);
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.csv");
    let cfg = write_config(dir.path(), &format!(r#"{{"mode": "csv", "input": {missing:?}}}"#));
    let out = dir.path().join("out");
    assert_eq!(code(&expgraph(&["run-csv", "--config", &cfg, "--out-dir", out.to_str().unwrap()])), 2);

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "t,node_0,node_1\n1,0.5,\n2,0.1,abc\n").unwrap();
    let cfg = write_config(dir.path(), &format!(r#"{{"mode": "csv", "input": {bad:?}}}"#));
    let o = expgraph(&["run-csv", "--config", &cfg, "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn synth_then_bound() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("run");
    let o = expgraph(&["synth", "--config", &cfg, "--out-dir", out.to_str().unwrap(), "--seed-override", "7"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("expanding") && stdout.contains("nerr_truth"));
    assert_eq!(Manifest::read(&out).unwrap().realizations[0].seed, 7);

    let o = expgraph(&["bound", "--out-dir", out.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let report = String::from_utf8_lossy(&o.stdout).into_owned();
    assert!(report.contains("expanding") && report.contains("within"), "{report}");
}

#[test]
fn bound_needs_dense_oracles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &SMALL.replace(r#""oracle_every": 1"#, r#""oracle_every": 4"#));
    let out = dir.path().join("run");
    assert_eq!(code(&expgraph(&["synth", "--config", &cfg, "--out-dir", out.to_str().unwrap()])), 0);
    assert_eq!(code(&expgraph(&["bound", "--out-dir", out.to_str().unwrap()])), 1);
    assert_eq!(code(&expgraph(&["bound", "--out-dir", dir.path().join("nowhere").to_str().unwrap()])), 2);
}

#[test]
fn output_path_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("from_config");
    let body = SMALL.replacen('{', &format!("{{\"output\": {out:?}, "), 1);
    let cfg = write_config(dir.path(), &body);
    assert_eq!(code(&expgraph(&["synth", "--config", &cfg])), 0);
    assert!(out.join("aggregate.csv").exists());
}
