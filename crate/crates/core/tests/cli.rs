use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str], payload: &str) -> (Output, std::path::PathBuf) {
    let config = dir.join("config.json");
    let output = dir.join("out");
    std::fs::write(&config, payload).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_photon-distill"))
        .args(args)
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(&output)
        .output()
        .unwrap();
    (out, output)
}

#[test]
fn evaluate_writes_sorted_json_with_digest() {
    let dir = tempfile::tempdir().unwrap();
    let payload = r#"{"probs": [0.01, 0.01, 0.01, 0.01],
        "unitary": {"kind": "epsilon_scheme", "n_modes": 4, "epsilon": 0.001}, "pattern": [2, 0, 0]}"#;
    let (out, path) = run(dir.path(), &["evaluate"], payload);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(path).unwrap();
    assert!(text.lines().all(|l| l == l.trim_end()));
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["config_digest"].as_str().unwrap().len(), 64);
    let ratio = v["result"]["distribution"]["ratio_10"].as_f64().unwrap();
    assert!((ratio / (0.01 / 0.99) - 4.0 / 3.0).abs() < 0.01);
    assert_eq!(v["result"]["bound"]["satisfied"], Value::Bool(true));
    assert_eq!(v["result"]["verdict"]["ratio_improved"], Value::Bool(true));
}

#[test]
fn perfect_sources_skip_the_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let payload = r#"{"probs": [1.0, 0.5], "unitary": {"kind": "dft", "dim": 2}, "pattern": [1]}"#;
    let (out, path) = run(dir.path(), &["evaluate"], payload);
    assert!(out.status.success());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["result"]["verdict"], Value::Null);
}

#[test]
fn sweep_csv_has_digest_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let payload = r#"{"n_modes": 4, "p": 0.01, "detected": 2, "epsilons": [0.01, 0.001]}"#;
    let (out, path) = run(dir.path(), &["sweep", "--format", "csv"], payload);
    assert!(out.status.success());
    let text = std::fs::read_to_string(path).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("# config_digest: "));
    assert!(lines[1].starts_with("epsilon,ratio_10,"));
    assert_eq!(lines.len(), 4);
}

#[test]
fn search_trace_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let payload = r#"{"n_modes": 3, "ensemble": [0.1, 0.1, 0.1], "objective": "max_ratio10",
        "pattern_policy": {"fixed": [1, 0]}, "budget": 3000, "seed": 5, "restarts": 3}"#;
    let (out, path) = run(dir.path(), &["search", "--format", "csv"], payload);
    assert!(out.status.success());
    let text = std::fs::read_to_string(path).unwrap();
    let values: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert!(!values.is_empty());
    assert!(values.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn verify_reports_no_violations() {
    let dir = tempfile::tempdir().unwrap();
    let (out, path) = run(
        dir.path(),
        &["verify", "--threads", "2"],
        r#"{"trials": 5, "n_modes": 5, "seed": 1}"#,
    );
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("violations: 0"));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["result"]["summary"]["scenarios"], 5);
}

#[test]
fn invalid_payloads_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        (
            "evaluate",
            r#"{"probs": [1.2, 0.1], "unitary": {"kind": "dft", "dim": 2}, "pattern": [0]}"#,
        ),
        (
            "evaluate",
            r#"{"probs": [0.1, 0.1], "unitary": {"kind": "dft", "dim": 3}, "pattern": [0]}"#,
        ),
        (
            "evaluate",
            r#"{"probs": [0.1, 0.1], "unitary": {"kind": "explicit", "dim": 2,
                "re": [[1, 1], [0, 1]], "im": [[0, 0], [0, 0]]}, "pattern": [0]}"#,
        ),
        (
            "sweep",
            r#"{"n_modes": 4, "p": 0.1, "detected": 4, "epsilons": [0.01]}"#,
        ),
        (
            "search",
            r#"{"n_modes": 3, "ensemble": [0.1, 0.1], "objective": "max_c1",
            "pattern_policy": "enumerate_all", "budget": 10, "seed": 0}"#,
        ),
        ("verify", "not json"),
    ];
    for (command, payload) in cases {
        let (out, path) = run(dir.path(), &[command], payload);
        assert_eq!(out.status.code(), Some(1), "{command}: {payload}");
        assert!(!path.exists());
    }
}

#[test]
fn threads_env_is_validated() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("c.json");
    std::fs::write(&config, r#"{"trials": 1, "n_modes": 2}"#).unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_photon-distill"))
        .args(["verify", "--config"])
        .arg(&config)
        .arg("--output")
        .arg(dir.path().join("o"))
        .env("PHOTON_DISTILL_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}
