use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_quasiradial"))
}

fn fixture(dir: &TempDir, name: &str, body: &str) -> PathBuf {
    let p = dir.path().join(name);
    fs::write(&p, body).unwrap();
    p
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Columns after the index columns: (re, im, err) per row.
fn csv_rows(text: &str, k: usize) -> Vec<(Vec<usize>, f64, f64)> {
    text.lines()
        .skip(1)
        .map(|line| {
            let f: Vec<&str> = line.split(',').collect();
            let m = f[..k].iter().map(|x| x.parse().unwrap()).collect();
            (m, f[k].parse().unwrap(), f[k + 1].parse().unwrap())
        })
        .collect()
}

/// P(m+1, 1) = e^{-1} sum_{j > m} 1/j!, summed from the leading term in log space.
fn lower_gamma_at_one(m: usize) -> f64 {
    let ln_fact: f64 = (1..=m + 1).map(|j| (j as f64).ln()).sum();
    let mut term = (-1.0 - ln_fact).exp();
    let mut total = 0.0;
    let mut j = m + 1;
    while term > total * 1e-18 {
        total += term;
        j += 1;
        term /= j as f64;
    }
    total
}

#[test]
fn constant_one_table_is_all_ones() {
    let dir = TempDir::new().unwrap();
    let one = fixture(&dir, "one.json", r#"{"kind":"const","value":1.0}"#);
    let out = run(&["spectrum", "--symbol", s(&one), "--partition", "2,1", "--window", "5,5"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("m_1,m_2,gamma_re,gamma_im,err\n"));
    let rows = csv_rows(&text, 2);
    assert_eq!(rows.len(), 36);
    for (m, re, im) in rows {
        assert!((re - 1.0).abs() < 1e-12 && im == 0.0, "{m:?}: {re} {im}");
    }
}

#[test]
fn unit_box_matches_incomplete_gamma() {
    let dir = TempDir::new().unwrap();
    let unit = fixture(&dir, "box.json", r#"{"kind":"box","lower":[0],"upper":[1]}"#);
    let csv = dir.path().join("box.csv");
    let out = run(&["spectrum", "--symbol", s(&unit), "--partition", "1", "--window", "200", "--out", s(&csv)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = csv_rows(&fs::read_to_string(&csv).unwrap(), 1);
    assert_eq!(rows.len(), 201);
    for (m, re, _) in rows {
        let want = lower_gamma_at_one(m[0]);
        assert!((re - want).abs() <= 1e-10, "m = {}: {re} vs {want}", m[0]);
    }
}

#[test]
fn missing_symbol_file_is_a_config_error() {
    let out = run(&["spectrum", "--symbol", "/nonexistent/a.json", "--partition", "1", "--window", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn oversized_window_is_a_resource_error() {
    let dir = TempDir::new().unwrap();
    let one = fixture(&dir, "one.json", r#"{"kind":"const","value":1.0}"#);
    let out = run(&["spectrum", "--symbol", s(&one), "--partition", "1,1", "--window", "4000,4000"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unknown_symbol_kind_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let bad = fixture(&dir, "bad.json", r#"{"kind":"banana"}"#);
    let out = run(&["spectrum", "--symbol", s(&bad), "--partition", "1", "--window", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn obstruction_suite_passes() {
    let out = run(&["verify", "obstruction"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["suite"], "obstruction");
    assert_eq!(report["passed"], true);
}

#[test]
fn schur_suite_with_explicit_partition_and_seed() {
    let out = run(&["verify", "schur", "--partition", "2,1", "--samples", "1000000", "--seed", "7"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["seed"], 7);
}

#[test]
fn lipschitz_suite_on_supplied_symbol() {
    let dir = TempDir::new().unwrap();
    let unit = fixture(&dir, "box.json", r#"{"kind":"box","lower":[0],"upper":[1]}"#);
    let report = dir.path().join("report.json");
    let out = run(&["verify", "lipschitz", "--symbol", s(&unit), "--out", s(&report)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert_eq!(v["passed"], true);
}

#[test]
fn unknown_suite_is_a_config_error() {
    assert_eq!(run(&["verify", "everything"]).status.code(), Some(2));
}

#[test]
fn bad_workers_value_is_a_config_error() {
    let out = bin().args(["verify", "obstruction"]).env("WORKERS", "0").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn synthesizes_a_constant() {
    let dir = TempDir::new().unwrap();
    let target = fixture(&dir, "half.json", r#"{"kind":"sqrt_expr","expr":{"kind":"const","value":0.5}}"#);
    let symbol = dir.path().join("symbol.json");
    let report = dir.path().join("report.json");
    let out = run(&[
        "synthesize", "--target", s(&target), "--epsilon", "1e-6", "--window", "50",
        "--out", s(&symbol), "--report", s(&report),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    // the synthesized symbol's own eigenvalues reproduce the target
    let table = run(&["spectrum", "--symbol", s(&symbol), "--partition", "1", "--window", "50"]);
    assert_eq!(table.status.code(), Some(0));
    for (m, re, im) in csv_rows(&String::from_utf8(table.stdout).unwrap(), 1) {
        assert!((re - 0.5).abs() < 1e-6 && im.abs() < 1e-6, "m = {}: {re} {im}", m[0]);
    }
    let r: serde_json::Value = serde_json::from_str(&fs::read_to_string(report).unwrap()).unwrap();
    assert!(r["sup_residual"].as_f64().unwrap() < 1e-6);
}

#[test]
fn synthesizes_sine_of_root() {
    let dir = TempDir::new().unwrap();
    let target = fixture(&dir, "sine.json", r#"{"kind":"sqrt_expr","expr":{"kind":"sin","coord":0}}"#);
    let out = run(&["synthesize", "--lattice", s(&target), "--epsilon", "0.1", "--window", "400"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(report["sup_residual"].as_f64().unwrap() < 0.1);
    assert!(quasiradial::parse_symbol(&String::from_utf8(out.stdout).unwrap()).is_ok());
}

#[test]
fn arity_three_target_is_rejected() {
    let dir = TempDir::new().unwrap();
    let target = fixture(&dir, "cube.json", r#"{"kind":"table","shape":[2,2,2],"values":[1,2,3,4,5,6,7,8],"tail":0}"#);
    let out = run(&["synthesize", "--target", s(&target)]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unreachable_epsilon_reports_target_missed() {
    let dir = TempDir::new().unwrap();
    let target = fixture(&dir, "sine.json", r#"{"kind":"sqrt_expr","expr":{"kind":"sin","coord":0}}"#);
    let out = run(&["synthesize", "--target", s(&target), "--epsilon", "1e-12", "--window", "400"]);
    assert_eq!(out.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert!(report["flags"].as_array().unwrap().iter().any(|f| f == "target missed"));
}
