use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn wfuse(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wfuse"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("WFUSE_SEED")
        .output()
        .unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn csv_rows(path: &Path) -> Vec<csv::StringRecord> {
    csv::Reader::from_path(path).unwrap().records().map(|r| r.unwrap()).collect()
}

fn summary(dir: &Path, text: &str) -> String {
    let path = dir.join("summary.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn fuse_ideal_one_port_leaves_a_third_vacuum() {
    let dir = TempDir::new().unwrap();
    let out = wfuse(dir.path(), &["fuse", "--n", "3", "--eta", "1", "--ports", "one"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&dir.path().join("fuse_branches.csv"));
    assert_eq!(rows.len(), 4);
    for row in &rows {
        let v: f64 = row[4].parse().unwrap();
        assert!((v - 1.0 / 3.0).abs() < 1e-12);
    }
    let state = read_json(&dir.path().join("fuse_state.json"));
    assert_eq!(state["schema_version"], 1);
    assert!((state["vacuum_fraction"].as_f64().unwrap() - 1.0 / 3.0).abs() < 1e-12);
    let manifest = read_json(&dir.path().join("fuse_manifest.json"));
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["command"], "fuse");
}

#[test]
fn fuse_two_mode_inputs_fuse_half_the_time() {
    let dir = TempDir::new().unwrap();
    assert!(wfuse(dir.path(), &["fuse", "--n", "2"]).status.success());
    let fused: f64 = csv_rows(&dir.path().join("fuse_branches.csv"))
        .iter()
        .filter(|r| r[1].starts_with("fused"))
        .map(|r| r[2].parse::<f64>().unwrap())
        .sum();
    assert!((fused - 0.5).abs() < 1e-12);
}

#[test]
fn missing_required_argument_is_a_usage_error() {
    let dir = TempDir::new().unwrap();
    assert_eq!(wfuse(dir.path(), &["fuse"]).status.code(), Some(2));
    assert_eq!(wfuse(dir.path(), &["fuse", "--n", "3", "--eta", "1.5"]).status.code(), Some(2));
}

#[test]
fn witness_detects_an_ideal_w3() {
    let dir = TempDir::new().unwrap();
    let s = summary(dir.path(), r#"{"p0": 0.0, "p1": 1.0, "p2": 0.0, "F": 1.0}"#);
    let out = wfuse(dir.path(), &["witness", "--summary", &s, "--n", "3", "--k", "3", "--scan-step", "0.02"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("witness_report.json"));
    assert!(report["expectation"].as_f64().unwrap() < 0.0);
    assert_eq!(report["valid"], true);
    assert!(!dir.path().join("witness_histogram.csv").exists());
}

#[test]
fn witness_certifies_the_fused_state() {
    let dir = TempDir::new().unwrap();
    let s = summary(
        dir.path(),
        r#"{"p0": 0.3333333333333333, "p1": 0.6666666666666666, "p2": 0.0, "F": 0.6666666666666666,
            "err": {"p0": 0.01, "p1": 0.01, "p2": 0.001, "F": 0.01}}"#,
    );
    let out = wfuse(
        dir.path(),
        &["witness", "--summary", &s, "--n", "4", "--k", "4", "--scan-step", "0.01", "--resamples", "2000"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_json(&dir.path().join("witness_report.json"));
    assert!(report["expectation"].as_f64().unwrap() <= -0.11);
    assert!(report["negative_fraction"].as_f64().unwrap() > 0.99);
    let counts: u64 = csv_rows(&dir.path().join("witness_histogram.csv"))
        .iter()
        .map(|r| r[2].parse::<u64>().unwrap())
        .sum();
    assert_eq!(counts, 2000);
}

#[test]
fn witness_rejects_bad_summaries() {
    let dir = TempDir::new().unwrap();
    let s = summary(dir.path(), r#"{"p0": 0.2, "p1": 0.5, "p2": 0.1, "F": 0.4}"#);
    assert_eq!(wfuse(dir.path(), &["witness", "--summary", &s, "--n", "3", "--k", "3"]).status.code(), Some(2));

    let s = summary(dir.path(), r#"{"p0": 0.2, "p1": 0.8, "F": 0.4}"#);
    let out = wfuse(dir.path(), &["witness", "--summary", &s, "--n", "3", "--k", "3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("p2"));

    let s = summary(dir.path(), r#"{"p0": 0.0, "p1": 1.0, "p2": 0.0, "F": 1.0}"#);
    assert_eq!(wfuse(dir.path(), &["witness", "--summary", &s, "--n", "3", "--k", "2"]).status.code(), Some(2));
}

#[test]
fn rates_reports_both_protocols() {
    let dir = TempDir::new().unwrap();
    let out = wfuse(dir.path(), &["rates", "--p", "0.01", "--trials", "20000"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rates = read_json(&dir.path().join("rates.json"));
    assert_eq!(rates["schema_version"], 1);
    assert_eq!(rates["config"]["p"], 0.01);
    for proto in ["enhanced", "memoryless"] {
        let mc = rates[proto]["coincidences_per_hour"].as_f64().unwrap();
        let se = rates[proto]["coincidences_per_hour_stderr"].as_f64().unwrap();
        let exact = rates["analytic"][proto]["coincidences_per_hour"].as_f64().unwrap();
        assert!((mc - exact).abs() < 5.0 * se, "{proto}: {mc} ± {se} vs {exact}");
    }
    assert!(rates["enhancement_factor"].as_f64().unwrap() > 1.0);
}

#[test]
fn rates_rejects_unknown_config_fields() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"p": 0.01, "bogus": 1}"#).unwrap();
    let out = wfuse(dir.path(), &["rates", "--trials", "10", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));
}

fn sweep(dir: &Path, extra: &[&str]) -> (Output, String) {
    let mut args = vec!["sweep", "--p-min", "1e-3", "--p-max", "1e-2", "--points", "2", "--trials", "20000"];
    args.extend_from_slice(extra);
    let out = wfuse(dir, &args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.join("sweep.csv")).unwrap();
    (out, csv)
}

#[test]
fn sweep_is_reproducible_and_reports_slopes() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (out, csv_a) = sweep(a.path(), &["--seed", "7"]);
    let (_, csv_b) = sweep(b.path(), &["--seed", "7"]);
    assert_eq!(csv_a, csv_b);

    let rows = csv_rows(&a.path().join("sweep.csv"));
    assert_eq!(rows.len(), 2);
    let col = |i: usize| -> Vec<f64> { rows.iter().map(|r| r[i].parse().unwrap()).collect() };
    let (p, enh, mem) = (col(0), col(1), col(3));
    let slope = |y: &[f64]| (y[1] / y[0]).ln() / (p[1] / p[0]).ln();

    let stdout = String::from_utf8_lossy(&out.stdout);
    let printed = |label: &str| -> f64 {
        stdout
            .lines()
            .find_map(|l| l.strip_prefix(&format!("slope {label}: ")))
            .unwrap()
            .trim()
            .parse()
            .unwrap()
    };
    assert!((printed("enhanced") - slope(&enh)).abs() < 1e-4);
    assert!((printed("memoryless") - slope(&mem)).abs() < 1e-4);
    assert!((printed("memoryless") - 2.0).abs() < 0.1);

    let manifest = read_json(&a.path().join("sweep_manifest.json"));
    assert_eq!(manifest["schema_version"], 1);
    assert_eq!(manifest["seed"], 7);
}

#[test]
fn seed_environment_variable_wins() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let (_, from_flag) = sweep(a.path(), &["--seed", "11"]);
    let out = Command::new(env!("CARGO_BIN_EXE_wfuse"))
        .args(["sweep", "--p-min", "1e-3", "--p-max", "1e-2", "--points", "2", "--trials", "20000", "--seed", "3"])
        .arg("--out")
        .arg(b.path())
        .env("WFUSE_SEED", "11")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(fs::read_to_string(b.path().join("sweep.csv")).unwrap(), from_flag);
    assert_eq!(read_json(&b.path().join("sweep_manifest.json"))["seed"], 11);
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let dir = TempDir::new().unwrap();
    let file = dir.path().join("not_a_dir");
    fs::write(&file, "").unwrap();
    assert_eq!(wfuse(&file, &["fuse", "--n", "3"]).status.code(), Some(1));
}
