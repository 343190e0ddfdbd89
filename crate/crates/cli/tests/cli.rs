use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rayleigh(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rayleigh")).args(args).current_dir(dir).output().expect("binary runs")
}

fn json_stdout(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn json_stderr(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

#[test]
fn build_walk_on_uniform_pairs_meets_the_gap_bound() {
    let dir = tempfile::tempdir().unwrap();
    let out = rayleigh(&["build-walk", "--measure", "uniform-2-of-4"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let v = json_stdout(&out);
    assert!(v["gap"].as_f64().unwrap() >= 0.25);
    assert!(v["delta"].as_f64().unwrap() <= 1.0 + 1e-12);
    assert!(v["delta_unnormalized"].as_f64().unwrap() <= 4.0 + 1e-10);
    assert_eq!(v["generator"]["states"].as_array().unwrap().len(), 6);
}

#[test]
fn inequality_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = rayleigh(&["ineq-suite", "--seed", "1", "--trials", "100"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json_stdout(&out);
    assert_eq!(v["passed"], Value::Bool(true));
    for check in v["checks"].as_array().unwrap() {
        assert_eq!(check["violations"], 0, "{check}");
        assert_eq!(check["trials"], 100);
    }
}

#[test]
fn unnormalized_measure_is_a_validation_failure() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("m.json"), r#"{"n": 1, "entries": [{"mask": 0, "p": 0.7}, {"mask": 1, "p": 0.4}]}"#)
        .unwrap();
    let out = rayleigh(&["validate-measure", "--measure", "m.json"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = json_stderr(&out);
    assert_eq!(err["error"], "NotNormalized");
    assert_eq!(err["exit_code"], 2);
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(rayleigh(&["no-such-command"], dir.path()).status.code(), Some(1));
    let out = rayleigh(&["build-walk", "--measure", "not-a-fixture"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(json_stderr(&out)["error"], "InvalidArgument");
    fs::write(dir.path().join("c.json"), r#"{"unknown_field": 1}"#).unwrap();
    assert_eq!(rayleigh(&["scp-check", "--config", "c.json"], dir.path()).status.code(), Some(1));
}

#[test]
fn violated_poincare_claim_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("c.json"), r#"{"measure": {"fixture": "cube-3"}, "lambda": 5.0, "trials": 5}"#).unwrap();
    let out = rayleigh(&["poincare-check", "--config", "c.json", "--out", "r.json"], dir.path());
    assert_eq!(out.status.code(), Some(3));
    let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("r.json")).unwrap()).unwrap();
    assert_eq!(v["passed"], Value::Bool(false));
    assert!(v["witness"]["values"].is_array());
}

#[test]
fn config_files_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"measure": {"uniform_k_subsets": {"n": 5, "k": 2}}, "function": {"random": {"d": 2, "lipschitz": 0.5}},
            "thresholds": [0.1, 0.5, 1.0, 2.0], "seed": 3}"#,
    )
    .unwrap();
    let out = rayleigh(&["tail", "--config", "c.json", "--out", "tail.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("tail.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("t,exact_or_empirical,ci_upper,bound_poincare,bound_sr,bound_ks,dominator"));
    assert_eq!(lines.count(), 4);

    let out = rayleigh(&["sample", "--config", "c.json", "--measure", "trees-K4", "--trials", "50"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let draws: Vec<&str> = std::str::from_utf8(&out.stdout).unwrap().lines().collect();
    assert_eq!(draws.len(), 50);
    for d in draws {
        assert_eq!(u64::from_str_radix(d.trim_start_matches("0x"), 16).unwrap().count_ones(), 3);
    }
}

#[test]
fn compare_ks_reports_crossovers_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = rayleigh(&["compare-ks"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 8);
    assert!(text.lines().skip(1).all(|l| l.ends_with(",true")));
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("c.json"),
        r#"{"measure": {"fixture": "trees-K4"}, "function": {"random": {"d": 3, "lipschitz": 1.0}}, "draws": 500, "seed": 9, "trials": 20}"#,
    )
    .unwrap();
    for cmd in ["build-walk", "poincare-check", "ineq-suite", "mgf", "tail", "sample", "scp-check"] {
        let a = rayleigh(&[cmd, "--config", "c.json"], dir.path());
        let b = rayleigh(&[cmd, "--config", "c.json"], dir.path());
        assert_eq!(a.status.code(), Some(0), "{cmd}: {}", String::from_utf8_lossy(&a.stderr));
        assert_eq!(a.stdout, b.stdout, "{cmd}");
    }
}
