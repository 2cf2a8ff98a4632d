//! The `hha verify` command: output formats, seed override and exit codes.

use std::path::Path;
use std::process::{Command, Output};

use hha_core::verify::SuiteReport;
use tempfile::TempDir;

fn hha(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hha")).args(args).output().expect("run hha")
}

fn write(dir: &TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn path(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_string_lossy().into_owned()
}

fn read_report(p: &str) -> SuiteReport {
    serde_json::from_str(&std::fs::read_to_string(Path::new(p)).unwrap()).unwrap()
}

#[test]
fn passing_suite_exits_zero_with_json_report() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"samples": 2000}"#);
    let out = path(&dir, "report.json");
    let o = hha(&["verify", "--suite", "algebra", "--config", &cfg, "--out", &out, "--format", "json"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let r = read_report(&out);
    assert_eq!(r.suite, "algebra");
    assert!(r.pass && !r.checks.is_empty());
    assert_eq!(r.config.samples, Some(2000));
}

#[test]
fn csv_report_has_one_row_per_check() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"samples": 1000}"#);
    let out = path(&dir, "report.csv");
    let o = hha(&["verify", "--suite", "algebra", "--config", &cfg, "--out", &out, "--format", "csv"]);
    assert_eq!(o.status.code(), Some(0));
    let mut rd = csv::Reader::from_path(&out).unwrap();
    let headers = rd.headers().unwrap().clone();
    assert_eq!(&headers[0], "suite");
    assert!(headers.iter().any(|h| h == "measured"));
    let rows: Vec<_> = rd.records().map(Result::unwrap).collect();
    assert!(rows.len() >= 5);
    assert!(rows.iter().all(|r| &r[0] == "algebra"));
}

#[test]
fn seed_override_replaces_configured_seeds() {
    let dir = TempDir::new().unwrap();
    let cfg = write(&dir, "cfg.json", r#"{"samples": 500, "seeds": [1, 2]}"#);
    let out = path(&dir, "report.json");
    let o = hha(&["verify", "--suite", "algebra", "--config", &cfg, "--out", &out, "--seed-override", "7,8,9"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(read_report(&out).config.seeds, vec![7, 8, 9]);
}

#[test]
fn failed_check_exits_one() {
    let dir = TempDir::new().unwrap();
    // the discrete unit ball is about 0.1% off π²/8, far outside 1e-6
    let cfg = write(&dir, "cfg.json", r#"{"suite": "measure", "tolerances": {"unit_ball_measure": 1e-6}}"#);
    let out = path(&dir, "report.json");
    let o = hha(&["verify", "--config", &cfg, "--out", &out]);
    assert_eq!(o.status.code(), Some(1));
    let r = read_report(&out);
    assert!(!r.pass);
    assert_eq!(r.failed().map(|c| c.name.as_str()).collect::<Vec<_>>(), ["unit_ball_measure"]);
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL unit_ball_measure"));
}

#[test]
fn config_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "report.json");
    let cases = [
        write(&dir, "unknown_suite.json", r#"{"suite": "nope"}"#),
        write(&dir, "unknown_field.json", r#"{"suite": "algebra", "bogus": 1}"#),
        write(&dir, "bad_alpha.json", r#"{"suite": "riesz", "alpha": 4}"#),
        write(&dir, "bad_exponent.json", r#"{"suite": "algebra", "exponents": [{"kind": "constant", "params": {"p0": -1}}]}"#),
        write(&dir, "not_json.json", "{"),
        path(&dir, "missing.json"),
    ];
    for cfg in &cases {
        let o = hha(&["verify", "--config", cfg, "--out", &out]);
        assert_eq!(o.status.code(), Some(2), "{cfg}: {}", String::from_utf8_lossy(&o.stderr));
    }
    assert_eq!(hha(&["verify"]).status.code(), Some(2));
    assert!(!Path::new(&out).exists());
}
