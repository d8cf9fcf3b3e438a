use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_noise-stability"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn only_run(dir: &Path) -> PathBuf {
    let mut runs: Vec<PathBuf> = fs::read_dir(dir.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    runs.sort();
    runs.pop().unwrap()
}

fn report(run: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap()
}

#[test]
fn stability_table_starts_at_one_third() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        dir.path(),
        &[
            "stability",
            "--k",
            "3",
            "--rho",
            "0:0.3:0.05",
            "--method",
            "quadrature2d",
        ],
    );
    assert!(out.status.success());
    let csv = fs::read_to_string(only_run(dir.path()).join("stability.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 8);
    let j0: f64 = rows[1].split(',').nth(1).unwrap().parse().unwrap();
    assert!((j0 - 1.0 / 3.0).abs() < 1e-12);
    assert!(rows[7].starts_with("0.3,"));
}

#[test]
fn sup_psi_zero_prints_the_constant() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["optimize", "--sup-psi0", "--k", "3"]);
    assert!(out.status.success());
    let r = report(&only_run(dir.path()));
    let value = r["results"]["outcome"]["value"].as_f64().unwrap();
    assert!((value - 9.0 / (8.0 * std::f64::consts::PI)).abs() < 1e-3);
    assert!(String::from_utf8_lossy(&out.stdout).contains("0.358"));
}

#[test]
fn witness_at_negative_rho_is_negative() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(dir.path(), &["witness", "--rho", "-0.05"]);
    assert!(out.status.success());
    let w = &report(&only_run(dir.path()))["results"]["witness"];
    assert!(w["value"].as_f64().unwrap() < 0.0);
    assert!(w["value"].as_f64().unwrap().abs() > 5.0 * w["error"].as_f64().unwrap());
}

#[test]
fn failures_have_distinct_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(dir.path(), &["stability", "--bogus"]).status.code(), Some(2));
    fs::write(
        dir.path().join("bad.json"),
        r#"{"experiment": "stability", "rhoo": "0.1"}"#,
    )
    .unwrap();
    assert_eq!(run(dir.path(), &["--manifest", "bad.json"]).status.code(), Some(3));
    assert_eq!(run(dir.path(), &["discrete", "--n", "12"]).status.code(), Some(4));
    assert_eq!(
        run(dir.path(), &["stability", "--rho", "0:2:0.5"]).status.code(),
        Some(3)
    );
    assert_eq!(
        run(dir.path(), &["stability", "--method", "exact"]).status.code(),
        Some(5)
    );
    assert_eq!(run(dir.path(), &["witness", "--rho", "0.05"]).status.code(), Some(1));
}

#[test]
fn manifests_reproduce_reports() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("m.json"),
        r#"{"experiment": "stability", "seed": 4, "rho": "0.1,0.5", "method": "montecarlo", "budget": 20000}"#,
    )
    .unwrap();
    assert!(run(dir.path(), &["--manifest", "m.json"]).status.success());
    assert!(run(dir.path(), &["--manifest", "m.json"]).status.success());
    let runs = dir.path().join("runs");
    let a = fs::read(runs.join("run-0001/report.json")).unwrap();
    let b = fs::read(runs.join("run-0002/report.json")).unwrap();
    assert_eq!(a, b);
    let r: Value = serde_json::from_slice(&a).unwrap();
    let j = &r["results"]["rows"][0]["j"];
    assert_eq!(j["seed"], 4);
    assert_eq!(j["params"]["samples"], 20000);
    assert!(j["error_estimate"].as_f64().unwrap() > 0.0);
    assert!(runs.join("run-0001/metadata.json").exists());
}
