//! End-to-end runs of the `kinred` binary on small scenarios.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kinred::ScenarioConfig;
use kinred_cli::files::{
    read_csv, Manifest, SnapshotBlock, AUDIT, ERROR_SUMMARY, ERROR_TABLE, HEADER_LEN, MANIFEST, SNAPSHOTS, TIMINGS,
    TRAJECTORY,
};
use serde_json::{json, Value};
use tempfile::TempDir;

fn kinred(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kinred")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// A scenario small enough to run in well under a second.
fn small() -> Value {
    json!({
        "manifold": { "kind": "conservative_moment", "order": 2 },
        "collision": { "kind": "bgk", "tau": 0.1 },
        "velocity": { "half_width": 8.0, "cells": 40 },
        "mesh": { "cells": 16, "length": 1.0 },
        "initial": { "preset": "sine_density", "rho": 1.0, "amplitude": 0.1, "u": 0.0, "theta": 1.0 },
        "time": { "final_time": 0.05, "outputs": 2 },
    })
}

fn write_config(dir: &Path, name: &str, config: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(config).unwrap()).unwrap();
    path
}

fn run_ok(args: &[&str]) -> Output {
    let out = kinred(args);
    assert_eq!(code(&out), 0, "{args:?} failed: {}", stderr(&out));
    out
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn equilibrium_stays_constant() {
    let tmp = TempDir::new().unwrap();
    let mut config = small();
    config["initial"] = json!({ "preset": "maxwellian", "rho": 1.2, "u": 0.3, "theta": 0.9 });
    let cfg = write_config(tmp.path(), "eq.json", &config);
    let out = tmp.path().join("red");
    run_ok(&["reduce", "--config", s(&cfg), "--out", s(&out)]);
    let (header, rows) = read_csv(&out.join(TRAJECTORY)).unwrap();
    assert_eq!(header[0], "time");
    assert_eq!(rows.len(), 3);
    for col in 1..header.len() {
        let first = rows[0][col];
        for row in &rows {
            assert!((row[col] - first).abs() <= 1e-10 * first.abs().max(1.0), "{} drifts", header[col]);
        }
    }
}

#[test]
fn negative_tau_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let mut config = small();
    config["collision"]["tau"] = json!(-0.1);
    let cfg = write_config(tmp.path(), "bad.json", &config);
    let out = kinred(&["reduce", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("collision.tau"), "{}", stderr(&out));
}

#[test]
fn unknown_manifold_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let mut config = small();
    config["manifold"] = json!({ "kind": "spline", "order": 2 });
    let cfg = write_config(tmp.path(), "bad.json", &config);
    let out = kinred(&["reference", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("spline"), "{}", stderr(&out));
}

#[test]
fn missing_config_is_an_input_error() {
    let tmp = TempDir::new().unwrap();
    let out = kinred(&["audit", "--config", s(&tmp.path().join("none.json")), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(code(&out), 2);
}

#[test]
fn reference_snapshots_have_the_documented_size_and_content() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small());
    let out = tmp.path().join("ref");
    run_ok(&["reference", "--config", s(&cfg), "--out", s(&out)]);
    let bytes = fs::read(out.join(SNAPSHOTS)).unwrap();
    // 16 cells, 40 velocity cells of 4 Gauss nodes, 3 output times.
    assert_eq!(bytes.len(), HEADER_LEN + 8 * 16 * (4 * 40) * 3);

    let block = SnapshotBlock::from_bytes(&bytes).unwrap();
    let config: ScenarioConfig = serde_json::from_value(small()).unwrap();
    let traj = config.run_reference().unwrap();
    for (t, field) in traj.snapshots.iter().enumerate() {
        assert_eq!(block.frame(t), field.values());
    }
    let manifest = Manifest::read(&out).unwrap();
    assert_eq!(manifest.times, traj.times);
    assert_eq!(manifest.command, "reference");
}

fn listed_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.file_name().unwrap() != TIMINGS)
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn reruns_are_byte_identical() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small());
    for cmd in ["reduce", "reference"] {
        let a = tmp.path().join(format!("{cmd}_a"));
        let b = tmp.path().join(format!("{cmd}_b"));
        run_ok(&[cmd, "--config", s(&cfg), "--out", s(&a)]);
        run_ok(&["--threads", "2", cmd, "--config", s(&cfg), "--out", s(&b)]);
        let (fa, fb) = (listed_files(&a), listed_files(&b));
        assert!(fa.iter().any(|(n, _)| n == MANIFEST));
        assert_eq!(fa, fb, "{cmd} output differs between runs");
        assert!(a.join(TIMINGS).exists());
    }
}

#[test]
fn audit_passes_by_default_and_reports_a_false_claim() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small());
    let out = tmp.path().join("audit");
    run_ok(&["audit", "--config", s(&cfg), "--out", s(&out)]);
    let doc: Value = serde_json::from_slice(&fs::read(out.join(AUDIT)).unwrap()).unwrap();
    assert_eq!(doc["hyperbolicity"]["pass"], json!(true));
    assert_eq!(doc["speed"]["pass"], json!(true));
    assert!(doc["gusc"].as_array().unwrap().iter().all(|g| g["pass"] == json!(true)));
    assert_eq!(doc["yong"]["pass"], json!(true));

    let mut config = small();
    config["collision"] = json!({ "kind": "shakhov", "tau": 1.0, "prandtl": 0.7 });
    config["audit"] = json!({ "lambda_claim": 0.71 });
    let cfg = write_config(tmp.path(), "shakhov.json", &config);
    let out = tmp.path().join("audit_shakhov");
    let run = run_ok(&["audit", "--config", s(&cfg), "--out", s(&out)]);
    let doc: Value = serde_json::from_slice(&fs::read(out.join(AUDIT)).unwrap()).unwrap();
    let gusc = doc["gusc"].as_array().unwrap();
    assert!(gusc.iter().any(|g| g["pass"] == json!(false)), "{gusc:?}");
    assert!(String::from_utf8_lossy(&run.stdout).contains("FAIL"));
}

#[test]
fn estimate_against_itself_has_no_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small());
    let red = tmp.path().join("red");
    let est = tmp.path().join("est");
    run_ok(&["reduce", "--config", s(&cfg), "--out", s(&red)]);
    run_ok(&["estimate", "--reduced", s(&red), "--reference", s(&red), "--out", s(&est)]);
    let (header, rows) = read_csv(&est.join(ERROR_TABLE)).unwrap();
    let actual = header.iter().position(|h| h == "actual").unwrap();
    let bound = header.iter().position(|h| h == "bound").unwrap();
    for row in &rows {
        assert!(row[actual] <= 1e-12, "{row:?}");
        assert!(row[bound] >= 0.0);
    }
    let summary: Value = serde_json::from_slice(&fs::read(est.join(ERROR_SUMMARY)).unwrap()).unwrap();
    assert_eq!(summary["bound_holds"], json!(true));
}

#[test]
fn estimate_against_a_reference_run() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small());
    let (red, kin, est) = (tmp.path().join("red"), tmp.path().join("ref"), tmp.path().join("est"));
    run_ok(&["reduce", "--config", s(&cfg), "--out", s(&red)]);
    run_ok(&["reference", "--config", s(&cfg), "--out", s(&kin)]);
    run_ok(&["estimate", "--reduced", s(&red), "--reference", s(&kin), "--out", s(&est)]);
    let (header, rows) = read_csv(&est.join(ERROR_TABLE)).unwrap();
    assert_eq!(header, ["time", "residual_norm", "bound", "actual", "ratio"]);
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.iter().all(|v| v.is_finite())));
    assert_eq!(Manifest::read(&est).unwrap().command, "estimate");
}

#[test]
fn estimate_rejects_missing_and_mismatched_runs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small());
    let red = tmp.path().join("red");
    run_ok(&["reduce", "--config", s(&cfg), "--out", s(&red)]);

    let missing = kinred(&[
        "estimate",
        "--reduced",
        s(&red),
        "--reference",
        s(&tmp.path().join("nowhere")),
        "--out",
        s(&tmp.path().join("e1")),
    ]);
    assert_eq!(code(&missing), 2);

    let mut other = small();
    other["mesh"]["cells"] = json!(20);
    let cfg2 = write_config(tmp.path(), "c2.json", &other);
    let kin = tmp.path().join("ref");
    run_ok(&["reference", "--config", s(&cfg2), "--out", s(&kin)]);
    let mismatch =
        kinred(&["estimate", "--reduced", s(&red), "--reference", s(&kin), "--out", s(&tmp.path().join("e2"))]);
    assert_eq!(code(&mismatch), 2);
    assert!(stderr(&mismatch).contains("mesh"), "{}", stderr(&mismatch));
}

#[test]
fn tampered_manifest_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "c.json", &small());
    let red = tmp.path().join("red");
    run_ok(&["reduce", "--config", s(&cfg), "--out", s(&red)]);
    let path = red.join(MANIFEST);
    let mut doc: Value = serde_json::from_slice(&fs::read(&path).unwrap()).unwrap();
    doc["config"]["collision"]["tau"] = json!(0.2);
    fs::write(&path, serde_json::to_vec(&doc).unwrap()).unwrap();
    let out = kinred(&["estimate", "--reduced", s(&red), "--reference", s(&red), "--out", s(&tmp.path().join("e"))]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("config_hash"), "{}", stderr(&out));
}
