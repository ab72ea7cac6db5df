//! The `gaplab` binary: exit codes, output files and run-to-run determinism.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn gaplab(args: &[&str], cfg: Option<&Path>, out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_gaplab"));
    cmd.args(args).env("GAPLAB_LOG", "error");
    if let Some(c) = cfg {
        cmd.arg("--config").arg(c);
    }
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.output().unwrap()
}

const CONFIG: &str = r#"{
  "schema_version": 1,
  "n": 3,
  "geometry": {"hessian": [1.0, 0.0, 0.0, 4.0]},
  "boundary": {"kind": "coordinate", "j": 2}
}"#;

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("cfg.json");
    fs::write(&p, text).unwrap();
    p
}

#[test]
fn usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(gaplab(&["bogus"], None, None).status.code(), Some(1));
    assert_eq!(gaplab(&["predict"], None, None).status.code(), Some(1));
    let bad = write_config(dir.path(), r#"{"schema_version": 1, "n": 3, "unknown": 1}"#);
    assert_eq!(gaplab(&["predict"], Some(&bad), None).status.code(), Some(1));
}

#[test]
fn sweep_writes_report_and_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), CONFIG);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let first = gaplab(&["sweep-lower", "--workers", "1"], Some(&cfg), Some(&a));
    assert_eq!(first.status.code(), Some(0), "{}", String::from_utf8_lossy(&first.stderr));
    let second = gaplab(&["sweep-lower", "--workers", "3"], Some(&cfg), Some(&b));
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let json = fs::read_to_string(a.join("report.json")).unwrap();
    assert_eq!(json, fs::read_to_string(b.join("report.json")).unwrap());
    assert!(a.join("lower_n3_m1-4.csv").exists() && a.join("lower_n3_m1-4_plot.dat").exists());

    let again = gaplab(&["report"], Some(&a.join("report.json")), None);
    assert_eq!(again.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&again.stdout).ends_with("overall: PASS\n"));
}

#[test]
fn failed_checks_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let strict = CONFIG.replace(
        r#""boundary""#,
        r#""tolerances": {"solver": 1e-10, "exponent": 1e-6}, "boundary""#,
    );
    let cfg = write_config(dir.path(), &strict);
    let out = gaplab(&["sweep-upper"], Some(&cfg), Some(&dir.path().join("out")));
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stdout).contains("FAIL"));
}
