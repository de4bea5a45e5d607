use std::path::{Path, PathBuf};

use assert_cmd::Command;
use fisopt_core::dataset::{FieldRecord, InteractionLabels, Split};
use fisopt_core::{Dataset, OptimizeReport};

fn fisopt() -> Command {
    Command::cargo_bin("fisopt").unwrap()
}

fn stdout_of(cmd: &mut Command) -> String {
    let out = cmd.assert().success().get_output().stdout.clone();
    String::from_utf8(out).unwrap()
}

/// Two separated groups of records: short confident calls labelled with
/// class 0 everywhere, long failing calls with class 1 everywhere.
fn write_blobs(dir: &Path) -> PathBuf {
    let mut records = Vec::new();
    let mut splits = Vec::new();
    for i in 0..60 {
        let jitter = (i % 7) as f64 * 0.5;
        let good = i % 2 == 0;
        let record = FieldRecord {
            confidence: if good { 92.0 + jitter } else { 12.0 + jitter },
            no_match_count: if good { 0 } else { 2 },
            no_input_count: 0,
            max_speech_timeout_count: 0,
            barge_in: false,
            caller_disconnect: !good,
            transfer_to_csa: false,
            dtmf_transfer: false,
            duration: if good { 4.0 + jitter } else { 50.0 + jitter },
            system_error: false,
            confirmation_presented: good,
            confirmation_accepted: good,
        };
        let class = if good { 0 } else { 1 };
        let labels = InteractionLabels::from_class_indices(&[class; 7]).unwrap();
        records.push((record, labels));
        splits.push(match i % 5 {
            0..=2 => Split::Train,
            3 => Split::Validation,
            _ => Split::Test,
        });
    }
    let ds = Dataset::from_records("blobs", records, splits).unwrap();
    let path = dir.join("blobs.json");
    ds.save_json(&path).unwrap();
    path
}

fn metric(text: &str, name: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{name}: ")))
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn generate_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = dir.path().join(name);
        fisopt()
            .args(["generate", "--field", "say_account", "--n", "300", "--seed", "7", "--out"])
            .arg(&out)
            .assert()
            .success();
        out
    };
    let a = run("a.json");
    let b = run("b.json");
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(a.with_extension("csv")).unwrap(),
        std::fs::read(b.with_extension("csv")).unwrap()
    );
    let loaded = Dataset::load_json(&a).unwrap();
    assert_eq!(loaded.len(), 300);
    let again = Dataset::from_json(&loaded.to_json().unwrap()).unwrap();
    assert_eq!(again, loaded);
}

#[test]
fn generate_rejects_tiny_n() {
    let dir = tempfile::tempdir().unwrap();
    fisopt()
        .args(["generate", "--field", "say_amount", "--n", "5", "--out"])
        .arg(dir.path().join("x.json"))
        .assert()
        .code(2);
}

#[test]
fn optimize_counts_and_reproduces() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_blobs(dir.path());
    let run = |name: &str| {
        let out = dir.path().join(name);
        fisopt()
            .args(["optimize", "--algorithm", "sa", "--schedule", "boltzmann", "--t0", "1"])
            .args(["--iterations", "10", "--seed", "3", "--data"])
            .arg(&data)
            .arg("--out")
            .arg(&out)
            .assert()
            .success();
        out
    };
    let a = run("a.json");
    let b = run("b.json");
    let text = std::fs::read_to_string(&a).unwrap();
    assert_eq!(text, std::fs::read_to_string(&b).unwrap());
    let report: OptimizeReport = serde_json::from_str(&text).unwrap();
    assert_eq!(report.run.evaluation_executions, 11);
    assert_eq!(report.run.history.len(), 11);
}

#[test]
fn optimize_rejects_unknown_algorithm() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_blobs(dir.path());
    fisopt()
        .args(["optimize", "--algorithm", "hill_climb", "--data"])
        .arg(&data)
        .assert()
        .code(2);
}

#[test]
fn evaluate_matches_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_blobs(dir.path());
    let report_path = dir.path().join("run.json");
    let fis_path = dir.path().join("fis.json");
    fisopt()
        .args(["optimize", "--algorithm", "pso", "--swarm", "4", "--iterations", "3", "--data"])
        .arg(&data)
        .arg("--out")
        .arg(&report_path)
        .arg("--save-fis")
        .arg(&fis_path)
        .assert()
        .success();
    let report: OptimizeReport = serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();

    let out = stdout_of(fisopt().arg("evaluate").arg("--fis").arg(&fis_path).arg("--data").arg(&data));
    assert!((metric(&out, "accuracy") - report.validation.accuracy).abs() < 1e-12);

    let out = stdout_of(
        fisopt()
            .arg("evaluate")
            .arg("--fis")
            .arg(&fis_path)
            .arg("--data")
            .arg(&data)
            .args(["--split", "train"]),
    );
    for name in ["accuracy", "sensitivity", "specificity"] {
        assert!(metric(&out, name) > 0.99, "{name} in {out}");
    }
}

#[test]
fn missing_files_fail() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    fisopt().arg("evaluate").arg("--fis").arg(&missing).arg("--data").arg(&missing).assert().code(3);
    fisopt().args(["optimize", "--algorithm", "sa", "--data"]).arg(&missing).assert().code(3);
}

#[test]
fn compare_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("spec.json");
    std::fs::write(
        &spec,
        r#"{
  "field": "say_confirmation",
  "dataset": {"kind": "generate", "n": 200, "seed": 4},
  "configs": [
    {"algorithm": "ga_binary", "population_size": 4, "generations": 2},
    {"algorithm": "pso", "swarm_size": 4, "iterations": 2},
    {"algorithm": "sa", "iterations": 5}
  ]
}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    fisopt().args(["compare", "--workers", "2", "--spec"]).arg(&spec).arg("--out").arg(&out).assert().success();
    let csv = std::fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    let md = std::fs::read_to_string(out.join("comparison.md")).unwrap();
    assert!(md.contains("| Classifier | Algorithm | Params | Accuracy | Evaluation function executions |"));
    for i in 0..3 {
        assert!(out.join("runs").join(format!("{i}.json")).exists());
    }
}

#[test]
fn spec_template_parses() {
    let out = stdout_of(fisopt().args(["spec-template", "--field", "select_beneficiary", "--grid", "full"]));
    let spec = fisopt_core::ExperimentSpec::from_json(&out).unwrap();
    assert_eq!(spec.configs.len(), 65);
}
