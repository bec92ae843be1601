use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dnsp_core::dictionary::perturbed_onb_dictionary;
use dnsp_core::DenseMatrix;
use serde_json::Value;
use tempfile::TempDir;

fn dnsp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dnsp")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, rows: &[Vec<f64>]) -> PathBuf {
    let p = dir.join(name);
    DenseMatrix::from_rows(rows).unwrap().write_file(&p).unwrap();
    p
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn stdout_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("stdout is JSON")
}

#[test]
fn spark_of_repeated_column_frame() {
    let dir = TempDir::new().unwrap();
    let d = write(dir.path(), "d.txt", &[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]);
    let o = dnsp(&["check", "--property", "spark", "--d", arg(&d)]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stderr).contains("spark 2, full_spark false"));
    assert_eq!(stdout_json(&o)["full_spark"], Value::Bool(false));
}

#[test]
fn dnsp_fails_on_perturbed_onb() {
    let dir = TempDir::new().unwrap();
    let dict = perturbed_onb_dictionary(3, 0.1, 5).unwrap();
    let d = dir.path().join("d.txt");
    dict.matrix().write_file(&d).unwrap();
    let a = write(dir.path(), "a.txt", &[vec![1.0, 0.3, -0.2], vec![0.1, 1.0, 0.5]]);
    let out = dir.path().join("r.json");
    let o = dnsp(&["check", "--property", "dnsp", "--a", arg(&a), "--d", arg(&d), "--k", "2", "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(1), "{}", String::from_utf8_lossy(&o.stderr));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(report["decision"], "Fails");
}

#[test]
fn nsp_holds_for_invertible_square() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.txt", &[vec![2.0, 1.0], vec![0.0, 1.0]]);
    let o = dnsp(&["check", "--property", "nsp", "--a", arg(&a), "--k", "1"]);
    assert_eq!(o.status.code(), Some(0));
}

#[test]
fn recover_through_identity_returns_measurements() {
    let dir = TempDir::new().unwrap();
    let eye = write(dir.path(), "i.txt", &[vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0], vec![0.0, 0.0, 1.0]]);
    let y = write(dir.path(), "y.txt", &[vec![0.5], vec![-2.0], vec![0.0]]);
    let o = dnsp(&["recover", "--a", arg(&eye), "--d", arg(&eye), "--y", arg(&y)]);
    assert_eq!(o.status.code(), Some(0));
    let z: Vec<f64> = serde_json::from_value(stdout_json(&o)["z_hat"].clone()).unwrap();
    for (zi, yi) in z.iter().zip([0.5, -2.0, 0.0]) {
        assert!((zi - yi).abs() < 1e-12);
    }
}

#[test]
fn recover_from_manifest() {
    let dir = TempDir::new().unwrap();
    write(dir.path(), "a.txt", &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    write(dir.path(), "d.txt", &[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 1.0]]);
    write(dir.path(), "y.txt", &[vec![1.0], vec![1.0]]);
    let man = dir.path().join("m.json");
    std::fs::write(&man, r#"{"a": "a.txt", "d": "d.txt", "y": "y.txt", "eps": 0.0}"#).unwrap();
    let o = dnsp(&["recover", "--manifest", arg(&man)]);
    assert_eq!(o.status.code(), Some(0));
    let r = stdout_json(&o);
    assert!((r["objective"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn infeasible_measurements_are_an_error() {
    let dir = TempDir::new().unwrap();
    let a = write(dir.path(), "a.txt", &[vec![1.0, 0.0], vec![0.0, 0.0]]);
    let d = write(dir.path(), "d.txt", &[vec![1.0, 0.0], vec![0.0, 1.0]]);
    let y = write(dir.path(), "y.txt", &[vec![1.0], vec![1.0]]);
    let o = dnsp(&["recover", "--a", arg(&a), "--d", arg(&d), "--y", arg(&y)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn malformed_matrix_is_an_error() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.txt");
    std::fs::write(&p, "2 2\n1 2\n3\n").unwrap();
    let o = dnsp(&["check", "--property", "spark", "--d", arg(&p)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn empty_experiment_succeeds() {
    let o = dnsp(&["experiment", "equivalence", "--instances", "0"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout_json(&o)["aggregates"]["instances"], 0);
}

#[test]
fn small_experiment_writes_report() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("rep.json");
    let o = dnsp(&["experiment", "repeat-invariance", "--instances", "5", "--seed", "9", "--out", arg(&out)]);
    assert_eq!(o.status.code(), Some(0));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(r["records"].as_array().unwrap().len(), 5);
}

#[test]
fn unknown_experiment_is_an_error() {
    let o = dnsp(&["experiment", "nope"]);
    assert_eq!(o.status.code(), Some(3));
}
