use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn emin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_emin"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_string_lossy().into_owned()
}

const SMALL_SWEEP: &str = r#"{
    "problem": {"kind": "rotated_anisotropic", "n": 12, "epsilon": 1.0},
    "weighted_taus": [0.1, 1e-4],
    "constrained": true,
    "emin_iters": [1, 2],
    "pattern_degree": 2,
    "seed": 3
}"#;

#[test]
fn assemble_writes_symmetric_matrix_market() {
    let out = emin(&["assemble", "--problem", "oscillatory", "--n", "4", "--k", "10"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("%%MatrixMarket matrix coordinate real symmetric"));
    let header: Vec<usize> = lines
        .next()
        .unwrap()
        .split_whitespace()
        .map(|t| t.parse().unwrap())
        .collect();
    assert_eq!(&header[..2], &[9, 9]);
}

#[test]
fn sweep_writes_csv_and_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_SWEEP);
    let csv = dir.path().join("rows.csv");
    let out = emin(&["sweep", "--config", &cfg, "--out", csv.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], emin_amg::experiments::CSV_HEADER);
    assert_eq!(lines.len(), 1 + 6);
    assert!(dir.path().join("rows.csv.meta.json").exists());
}

#[test]
fn sweep_overrides_select_one_point() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL_SWEEP);
    let csv = dir.path().join("one.csv");
    let out = emin(&[
        "sweep", "--config", &cfg, "--out", csv.to_str().unwrap(),
        "--mode", "weighted", "--tau", "0.5", "--iters", "3",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = fs::read_to_string(&csv).unwrap();
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[5], "weighted");
    assert_eq!(row[6], "0.5");
    assert_eq!(row[7], "2");
    assert_eq!(row[8], "3");
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn invalid_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"kind": "rotated_anisotropic", "n": 8}, "weighted_taus": [1.5],
            "emin_iters": [1], "pattern_degree": 2}"#,
    );
    let out = emin(&["sweep", "--config", &cfg, "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));

    let cfg = write_config(dir.path(), "{ not json");
    let out = emin(&["sweep", "--config", &cfg, "--out", "/dev/null"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn solve_reports_convergence() {
    let out = emin(&["solve", "--problem", "rotated_anisotropic", "--n", "16", "--epsilon", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let cf = v["report"]["cf"].as_f64().unwrap();
    assert!(cf > 0.0 && cf < 1.0);
    assert_eq!(v["cg_converged"], serde_json::Value::Bool(true));
}

#[test]
fn theory_rejects_large_operator() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("a.mtx");
    let out = emin(&["assemble", "--problem", "rotated_anisotropic", "--n", "24", "--out", m.to_str().unwrap()]);
    assert!(out.status.success());
    let out = emin(&["theory", m.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn theory_prints_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("a.mtx");
    emin(&["assemble", "--problem", "rotated_anisotropic", "--n", "6", "--epsilon", "0.1", "--out", m.to_str().unwrap()]);
    let out = emin(&["theory", m.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let r = &v["report"];
    let etg = r["etg_norm"].as_f64().unwrap();
    let ktg = r["ktg"].as_f64().unwrap();
    assert!(etg < 1.0);
    assert!((etg - (1.0 - 1.0 / ktg)).abs() < 1e-8);
}

#[test]
fn sylvester_solves_small_equation() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.mtx");
    let d = dir.path().join("d.mtx");
    let f = dir.path().join("f.mtx");
    let w = dir.path().join("w.mtx");
    fs::write(&a, "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 4\n1 2 1\n2 1 1\n2 2 3\n").unwrap();
    fs::write(&d, "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2\n").unwrap();
    fs::write(&f, "%%MatrixMarket matrix coordinate real general\n2 1 2\n1 1 7\n2 1 6\n").unwrap();
    let out = emin(&[
        "sylvester", "--a", a.to_str().unwrap(), "--d", d.to_str().unwrap(),
        "--f", f.to_str().unwrap(), "--out", w.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    // (A + 2I) W = F has W = [1, 1].
    let text = fs::read_to_string(&w).unwrap();
    let vals: Vec<f64> = text
        .lines()
        .skip(2)
        .map(|l| l.split_whitespace().nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(vals.len(), 2);
    for v in vals {
        assert!((v - 1.0).abs() < 1e-9);
    }
}

#[test]
fn sylvester_indefinite_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.mtx");
    let d = dir.path().join("d.mtx");
    let f = dir.path().join("f.mtx");
    fs::write(&a, "%%MatrixMarket matrix coordinate real general\n2 2 4\n1 1 1\n1 2 3\n2 1 3\n2 2 1\n").unwrap();
    fs::write(&d, "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 0.5\n").unwrap();
    fs::write(&f, "%%MatrixMarket matrix coordinate real general\n2 1 2\n1 1 1\n2 1 -1\n").unwrap();
    let out = emin(&[
        "sylvester", "--a", a.to_str().unwrap(), "--d", d.to_str().unwrap(), "--f", f.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}
