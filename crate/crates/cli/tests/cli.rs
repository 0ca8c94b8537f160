//! End-to-end runs of the `qtherm` binary: outputs, exit codes and fault
//! injection.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn qtherm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qtherm")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small() -> String {
    configs().join("verify_small.toml").display().to_string()
}

fn out_arg(dir: &Path) -> String {
    dir.display().to_string()
}

#[test]
fn run_writes_series_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = qtherm(&["run", &small(), "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let series = std::fs::read_to_string(dir.path().join("series.csv")).unwrap();
    assert!(series.starts_with("t,U,q,S,Sdot,relS,work,G,D_probe\n"));
    assert_eq!(series.lines().count(), 202);
    assert!(dir.path().join("series_quadratic.csv").exists());
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 42);
    assert!(manifest["caveat"].as_str().unwrap().contains("finite"));
    let names: Vec<&str> = manifest["verdicts"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v["name"].as_str().unwrap())
        .collect();
    assert!(names.contains(&"oracle.record_fields"));
    assert!(names.contains(&"exact.entropy_invariance"));
}

#[test]
fn identical_seed_gives_identical_csv() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = qtherm(&["run", &small(), "--path", "quadratic", "--seed", "3", "--out", &out_arg(d.path())]);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("series.csv")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn verify_passes_and_catches_a_broken_propagator() {
    let dir = tempfile::tempdir().unwrap();
    let o = qtherm(&["verify", &small(), "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("pass propagator.unitarity"));

    let o = qtherm(&["verify", &small(), "--out", &out_arg(dir.path()), "--corrupt-propagator"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stdout(&o).contains("FAIL propagator.unitarity"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // too many sites for the exact path
    let big = configs().join("process_i.toml").display().to_string();
    let o = qtherm(&["run", &big, "--path", "exact", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("14"));

    // unknown key
    let text = std::fs::read_to_string(small())
        .unwrap()
        .replace("[gibbs]", "[gibbs]\ntemperature = 2.0");
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, text).unwrap();
    let o = qtherm(&["run", &bad.display().to_string()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("temperature"));

    let o = qtherm(&["run", "/nonexistent/config.toml"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let o = qtherm(&[
        "sweep",
        &small(),
        "--axis",
        "beta",
        "--values",
        "0.5,2.0",
        "--path",
        "quadratic",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let index = std::fs::read_to_string(dir.path().join("index.jsonl")).unwrap();
    assert_eq!(index.lines().count(), 2);
    assert!(dir.path().join("beta-000/series.csv").exists());
    assert!(dir.path().join("beta-001/manifest.json").exists());
}

#[test]
fn norm_reports_the_threshold() {
    let o = qtherm(&["norm", &configs().join("kernel_bond.toml").display().to_string()]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("kernel 0 (degree 1)"));
    assert!(text.contains("not small"));
}
