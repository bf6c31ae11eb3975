use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(config: &str, dir: &Path, extra: &[&str]) -> Output {
    let cfg = dir.join("run.cfg");
    fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_stochsep"))
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .unwrap()
}

const SMALL_WAVE: &str = "problem: wave\nM: 5\nN: 400\nmesh_nodes: 127\nseed: 3\n";

#[test]
fn small_run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(SMALL_WAVE, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    for f in ["convergence.csv", "modes.csv", "lambda_samples.csv", "pdf.csv", "summary.txt"] {
        assert!(o.join(f).exists(), "{f}");
    }
    assert!(!o.join("oracle_pdf.csv").exists());
    let conv = fs::read_to_string(o.join("convergence.csv")).unwrap();
    assert!(conv.starts_with("k,inner_iter,eps_local,eps_global"));
    let summary = fs::read_to_string(o.join("summary.txt")).unwrap();
    let terms = conv.lines().count() - 1;
    assert!(summary.contains(&format!("retained_terms = {terms}")));
    assert!(summary.contains("converged = true"));
    let lambdas = fs::read_to_string(o.join("lambda_samples.csv")).unwrap();
    assert_eq!(lambdas.lines().count(), 401);
}

#[test]
fn identical_runs_are_byte_identical() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = "problem: burgers\nM: 40\nN: 500\nseed: 9\n";
    assert_eq!(run(cfg, a.path(), &["--threads", "1"]).status.code(), Some(0));
    assert_eq!(run(cfg, b.path(), &[]).status.code(), Some(0));
    for f in ["convergence.csv", "pdf.csv", "modes.csv", "lambda_samples.csv"] {
        let x = fs::read(a.path().join("out").join(f)).unwrap();
        let y = fs::read(b.path().join("out").join(f)).unwrap();
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn oracle_comparison_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(SMALL_WAVE, dir.path(), &["--oracle", "--oracle-samples", "400"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let o = dir.path().join("out");
    assert!(o.join("oracle_pdf.csv").exists());
    assert_eq!(fs::read_to_string(o.join("oracle_samples.csv")).unwrap().lines().count(), 401);
    let summary = fs::read_to_string(o.join("summary.txt")).unwrap();
    let d: f64 = summary
        .lines()
        .find_map(|l| l.strip_prefix("pdf_l1_distance = "))
        .unwrap()
        .parse()
        .unwrap();
    assert!((0.0..=0.5).contains(&d), "{d}");
}

#[test]
fn zero_tolerance_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("problem: elliptic\neps1: 0\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("run.cfg:2:"), "{err}");
}

#[test]
fn missing_config_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_stochsep"))
        .arg("--config")
        .arg(dir.path().join("absent.cfg"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn probe_outside_the_domain_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = run("problem: burgers\nM: 5\nN: 200\nprobe: 3, 0.5\n", dir.path(), &[]);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn non_convergence_keeps_partial_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = "problem: wave\nM: 20\nN: 300\nmesh_nodes: 127\neps1: 1e-14\nmax_outer: 2\n";
    let out = run(cfg, dir.path(), &[]);
    assert_eq!(out.status.code(), Some(3));
    let o = dir.path().join("out");
    let conv = fs::read_to_string(o.join("convergence.csv")).unwrap();
    assert_eq!(conv.lines().count(), 3);
    assert!(fs::read_to_string(o.join("summary.txt")).unwrap().contains("converged = false"));
}
