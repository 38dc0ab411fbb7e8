//! End-to-end runs of the `turnpike` binary.

use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

fn turnpike(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_turnpike")).args(args).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn unknown_scenario_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = turnpike(&["run", "--scenario", "plasma", "--outdir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let v = stdout_json(&out);
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["error"]["kind"], "invalid_scenario");
}

#[test]
fn sweep_needs_two_horizons() {
    let dir = tempfile::tempdir().unwrap();
    let out = turnpike(&[
        "sweep", "--scenario", "scalar_example", "--horizon", "20", "--outdir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stdout_json(&out)["error"]["kind"], "usage");
}

#[test]
fn missing_flags_are_usage_errors() {
    assert_eq!(turnpike(&["run"]).status.code(), Some(2));
    assert_eq!(turnpike(&["launch"]).status.code(), Some(2));
}

#[test]
fn unstabilizable_problem_is_a_solver_error() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("unstable.json");
    std::fs::write(
        &file,
        r#"{"name": "constant_test", "parameters": {"a": 1.0, "b": 0.0, "horizon": 2.0}}"#,
    )
    .unwrap();
    let out = turnpike(&[
        "run", "--scenario", file.to_str().unwrap(), "--outdir", dir.path().join("out").to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stdout_json(&out)["schema_version"], 1);
}

#[test]
fn run_writes_checksummed_outputs_and_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let out = turnpike(&[
        "run", "--scenario", "scalar_example", "--horizon", "5", "--outdir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let manifest = read_json(&dir.path().join("manifest.json"));
    assert_eq!(manifest["schema_version"], 1);
    let files = manifest["files"].as_array().unwrap();
    for name in [
        "p_theta.csv",
        "r_theta.csv",
        "periodic_triple.csv",
        "p_finite.csv",
        "r_finite.csv",
        "finite_triple.csv",
        "deviation.csv",
        "turnpike_fit.json",
        "riccati_gap.json",
        "dissipation.json",
        "monodromy.json",
        "oracle.json",
    ] {
        assert!(files.iter().any(|f| f["path"] == name), "{name} missing from manifest");
    }
    for f in files {
        let bytes = std::fs::read(dir.path().join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["bytes"], bytes.len());
        assert_eq!(f["sha256"], hex::encode(Sha256::digest(&bytes)));
    }
    let oracle = read_json(&dir.path().join("oracle.json"));
    assert_eq!(oracle["passed"], true);
    for key in ["distance_y", "distance_u", "distance_lambda"] {
        assert!(oracle[key].as_f64().unwrap() <= 1e-5);
    }
}

#[test]
fn identical_runs_produce_identical_csv() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    for dir in [&a, &b] {
        let out = turnpike(&[
            "run", "--scenario", "constant_test", "--skip-oracle", "--outdir", dir.path().to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let mut compared = 0;
    for entry in std::fs::read_dir(a.path()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "csv") {
            let other = b.path().join(path.file_name().unwrap());
            assert_eq!(std::fs::read(&path).unwrap(), std::fs::read(other).unwrap());
            compared += 1;
        }
    }
    assert!(compared >= 7);
}

#[test]
fn heat_sweep_mid_deviation_shrinks_with_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out = turnpike(&[
        "sweep", "--scenario", "heat_1d", "--horizon", "5", "--horizon", "10", "--outdir",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let summary = read_json(&dir.path().join("summary.json"));
    let h = summary["horizons"].as_array().unwrap();
    assert_eq!(h.len(), 2);
    assert!(h[1]["e_mid"].as_f64().unwrap() < h[0]["e_mid"].as_f64().unwrap());
    assert!(dir.path().join("summary.csv").exists());
    assert!(dir.path().join("T_5").join("deviation.csv").exists());
}
