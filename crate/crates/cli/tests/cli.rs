use std::path::Path;
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ab-riesz")).args(args).output().unwrap()
}

fn column(csv: &str, row: usize, name: &str) -> String {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let idx = header.iter().position(|h| *h == name).unwrap();
    lines.nth(row).unwrap().split(',').nth(idx).unwrap().to_string()
}

#[test]
fn eval_closed_and_series_agree() {
    let out = run(&["eval", "--alpha", "0.5", "--delta", "0.5", "--lambda", "3", "--x", "1,0.3", "--y", "0.7,2", "--method", "both"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    let diff: f64 = column(&csv, 0, "abs_difference").parse().unwrap();
    let total: f64 = column(&csv, 0, "total_re").parse().unwrap();
    assert!(diff <= 1e-9, "{diff}");
    assert!(total.abs() > 1e-3);
}

#[test]
fn eval_writes_csv_and_summary_files() {
    let dir = tempfile::tempdir().unwrap();
    let (csv, json) = (dir.path().join("k.csv"), dir.path().join("k.json"));
    let out = run(&[
        "eval",
        "--alpha",
        "-0.7",
        "--lambda",
        "2",
        "--x",
        "0.5,1",
        "--y",
        "1.5,4",
        "--out",
        csv.to_str().unwrap(),
        "--summary",
        json.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_to_string(&csv).unwrap().starts_with("alpha,"));
    let summary: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(summary.is_object());
}

#[test]
fn eval_reads_a_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "[eval]\nalpha = 0.3\nlambda = 2.0\nx = \"1.0,0.0\"\ny = \"0.5,1.0\"\nmethod = \"closed\"\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "eval", "--delta", "1"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = String::from_utf8(out.stdout).unwrap();
    assert_eq!(column(&csv, 0, "alpha").parse::<f64>().unwrap(), 0.3);
    assert_eq!(column(&csv, 0, "delta").parse::<f64>().unwrap(), 1.0);
}

#[test]
fn missing_point_is_a_config_error() {
    let out = run(&["eval", "--alpha", "0.5", "--x", "1,0.3"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("eval.y"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[eval]\nalpha = 0.5\nbeta = 1.0\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap(), "eval"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_config_file_is_rejected() {
    let out = run(&["--config", Path::new("/nonexistent/run.toml").to_str().unwrap(), "eval"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn under_resolved_convergence_grid_exits_with_resolution_code() {
    let out = run(&["converge", "--grid", "256x256", "--radius", "2", "--lambda-list", "8", "--function", "disk"]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("resolution error"));
}

#[test]
fn scaling_of_d_piece_at_integer_flux_passes() {
    let out = run(&["scaling", "--piece", "D1", "--alpha", "1", "--j-range", "1..2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8(out.stdout).unwrap().contains("scaling-D1-summary"));
}

#[test]
fn verify_det_suite_passes() {
    let out = run(&["verify", "--suite", "det"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
