//! The `evalbench` binary: exit codes, printed summaries, report idempotence and inspection.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use evalbench::Workspace;
use evalbench_core::model::{Status, TransformKind};

const CONFIG: &str = "
name: clitest
catalog:
  - name: tiny
    source: {kind: generated_sine, n: 60, l: 16, d: 2, seed: 1}
    has_labels: false
datasets: ALL
transformations: [gn_moderate, mode_dropping]
embedders: [concat]
measures: [auto_corr, ndb]
seeds: [1]
";

fn evalbench(root: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_evalbench"))
        .arg("--workspace")
        .arg(root)
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn run_config(root: &Path, text: &str) -> Output {
    let path = root.join("config.yaml");
    fs::write(&path, text).unwrap();
    evalbench(root, &["run", path.to_str().unwrap(), "--mode", "sequential"])
}

fn report_bytes(ws: &Workspace) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<(String, Vec<u8>)> = fs::read_dir(ws.reports_dir())
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    out
}

#[test]
fn run_report_and_inspect() {
    let root = tempfile::tempdir().unwrap();
    let out = run_config(root.path(), CONFIG);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = stdout(&out);
    for c in ["fidelity", "generalization", "privacy", "representativeness"] {
        assert!(text.contains(&format!("top {c}:")), "{text}");
    }
    assert!(text.contains("Measure selection guide"));

    let ws = Workspace::new(root.path(), "clitest");
    let records = ws.records().unwrap();
    assert_eq!(records.len(), 4);
    let first = report_bytes(&ws);
    assert_eq!(first.len(), 13);
    let again = evalbench(root.path(), &["report", "clitest"]);
    assert!(again.status.success(), "{}", stderr(&again));
    assert_eq!(report_bytes(&ws), first, "report must be idempotent");

    let ok = records
        .iter()
        .find(|r| r.status == Status::Successful)
        .expect("auto_corr succeeds");
    let shown = stdout(&evalbench(root.path(), &["inspect", "clitest", &ok.id]));
    let score_lines = shown
        .lines()
        .skip_while(|l| !l.trim_start().starts_with("kappa"))
        .skip(1)
        .count();
    assert_eq!(score_lines, 11, "{shown}");

    // 30 training instances give a single NDB cell, which the measure reports as a failure.
    let failed = records
        .iter()
        .find(|r| r.status == Status::Failed)
        .expect("ndb fails on tiny data");
    let shown = stdout(&evalbench(root.path(), &["inspect", "clitest", &failed.id]));
    let category = evalbench_core::evaluation::tables::failure_category(
        failed.failure_reason.as_deref().unwrap(),
    );
    assert!(shown.contains(&format!("category  {category}")), "{shown}");
    let failures = fs::read_to_string(ws.reports_dir().join("failures.csv")).unwrap();
    assert!(failures.contains(&category));

    let skipped = records
        .iter()
        .find(|r| r.status == Status::Skipped)
        .expect("mode_dropping needs labels");
    assert_eq!(skipped.spec.transformation_chain, [TransformKind::ModeDropping]);
    let shown = stdout(&evalbench(root.path(), &["inspect", "clitest", &skipped.id]));
    assert!(shown.contains("skipped") && shown.contains("labeled"), "{shown}");

    let missing = evalbench(root.path(), &["inspect", "clitest", "0000000000000000"]);
    assert!(!missing.status.success());
}

#[test]
fn rerunning_a_finished_experiment_changes_nothing() {
    let root = tempfile::tempdir().unwrap();
    assert!(run_config(root.path(), CONFIG).status.success());
    let ws = Workspace::new(root.path(), "clitest");
    let before = ws.records().unwrap();
    let out = evalbench(root.path(), &["resume", "clitest"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(ws.records().unwrap(), before);
}

#[test]
fn invalid_measures_fail_validation() {
    let root = tempfile::tempdir().unwrap();
    let out = run_config(root.path(), &CONFIG.replace("[auto_corr, ndb]", "[auto_corr, domias]"));
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("domias") && err.contains("out of scope"), "{err}");

    let out = run_config(root.path(), &CONFIG.replace("[auto_corr, ndb]", "[auto_cor]"));
    assert!(!out.status.success());
    let err = stderr(&out);
    assert!(err.contains("auto_cor") && !err.contains("out of scope"), "{err}");
    assert!(!root.path().join("clitest").exists());
}

#[test]
fn report_needs_records() {
    let root = tempfile::tempdir().unwrap();
    fs::create_dir_all(root.path().join("empty/tests")).unwrap();
    let out = evalbench(root.path(), &["report", "empty"]);
    assert!(!out.status.success());
}

#[test]
fn catalog_lists_all_measures() {
    let root = tempfile::tempdir().unwrap();
    let out = evalbench(root.path(), &["catalog", "measures"]);
    assert!(out.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(parsed.as_array().map(Vec::len), Some(34));
}
