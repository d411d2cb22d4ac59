//! End-to-end checks of the `afrac` binary: exit codes, file outputs, and
//! determinism.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn problems_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../problems")
        .canonicalize()
        .unwrap()
}

fn afrac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afrac"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn read_report(dir: &Path, stem: &str) -> serde_json::Value {
    let text = fs::read_to_string(dir.join(format!("{stem}.report.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

#[test]
fn verify_reference_problem_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let input = problems_dir().join("reference.json");
    let out = afrac(&[
        "verify",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(dir.path(), "reference");
    assert_eq!(report["schema"], 1);
    assert!((report["factor"].as_f64().unwrap() - 0.4).abs() < 1e-12);
    assert_eq!(report["satisfied"], true);
}

#[test]
fn verify_hoelder_override_exits_two_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let input = problems_dir().join("reference.json");
    let out = afrac(&[
        "verify",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
        "--space",
        "hoelder:1,0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let report = read_report(dir.path(), "reference");
    let factor = report["factor"].as_f64().unwrap();
    assert!((factor - 1.1313708498984760).abs() < 1e-9);
    assert_eq!(report["satisfied"], false);
}

#[test]
fn eval_emits_oracle_value_at_quarter() {
    let dir = tempfile::tempdir().unwrap();
    let input = problems_dir().join("reference.json");
    let out = afrac(&[
        "eval",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
        "--tol",
        "1e-12",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("reference.csv")).unwrap();
    let mut found = false;
    for line in csv.lines().skip(1) {
        let mut parts = line.split(',');
        let x: f64 = parts.next().unwrap().parse().unwrap();
        let v: f64 = parts.next().unwrap().parse().unwrap();
        if (x - 0.25).abs() < 1e-15 {
            assert!((v - (-0.0375)).abs() <= 1e-9, "value at 0.25: {v}");
            found = true;
        }
    }
    assert!(found, "no row at x = 0.25");
}

#[test]
fn invert_round_trips_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let input = problems_dir().join("neumann.json");
    let out = afrac(&[
        "invert",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
        "--tol",
        "1e-9",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = read_report(dir.path(), "neumann");
    let residual = report["round_trip_residual_sup"].as_f64().unwrap();
    assert!(residual <= 1e-6, "residual {residual}");
}

#[test]
fn attractor_outputs_are_deterministic() {
    let input = problems_dir().join("reference.json");
    let mut bytes = Vec::new();
    for _ in 0..2 {
        let dir = tempfile::tempdir().unwrap();
        let out = afrac(&[
            "attractor",
            "--input",
            input.to_str().unwrap(),
            "--output",
            dir.path().to_str().unwrap(),
            "--seed",
            "7",
            "--terms",
            "5000",
        ]);
        assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
        bytes.push((
            fs::read(dir.path().join("reference.csv")).unwrap(),
            fs::read(dir.path().join("reference.report.json")).unwrap(),
        ));
    }
    assert_eq!(bytes[0].0, bytes[1].0, "CSV outputs differ between runs");
    assert_eq!(bytes[0].1, bytes[1].1, "reports differ between runs");
}

#[test]
fn basis_emits_elements_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let input = problems_dir().join("neumann.json");
    let out = afrac(&[
        "basis",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
        "--space",
        "sobolev:1,2",
        "--terms",
        "4",
        "--grid-level",
        "10",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for n in 1..=4 {
        assert!(dir.path().join(format!("neumann.element_{n:03}.csv")).exists());
    }
    let report = read_report(dir.path(), "neumann");
    assert_eq!(report["level"], 1);
    assert_eq!(report["count"], 4);
    assert_eq!(report["errors_by_n"].as_array().unwrap().len(), 4);
}

#[test]
fn sampled_scaling_problem_evaluates() {
    let dir = tempfile::tempdir().unwrap();
    let input = problems_dir().join("sampled-scaling.json");
    let out = afrac(&[
        "eval",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("sampled-scaling.csv").exists());
}

#[test]
fn parse_errors_exit_one_with_json_error_object() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{ not json").unwrap();
    let out = afrac(&[
        "eval",
        "--input",
        bad.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let report = read_report(dir.path(), "bad");
    assert_eq!(report["error"]["kind"], "parse");
}

#[test]
fn missing_input_exits_one() {
    let out = afrac(&["eval", "--input", "/nonexistent/nope.json"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn unknown_flag_rejected() {
    let input = problems_dir().join("reference.json");
    let out = afrac(&["eval", "--input", input.to_str().unwrap(), "--bogus"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn non_contractive_override_exits_two() {
    // scale 0.4 against the Hölder(1, 1/2) condition fails; eval must
    // refuse and still leave a machine-readable report
    let dir = tempfile::tempdir().unwrap();
    let input = problems_dir().join("reference.json");
    let out = afrac(&[
        "eval",
        "--input",
        input.to_str().unwrap(),
        "--output",
        dir.path().to_str().unwrap(),
        "--space",
        "hoelder:1,0.5",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let report = read_report(dir.path(), "reference");
    assert_eq!(report["error"]["kind"], "not-contractive");
}
