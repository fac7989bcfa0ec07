use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_shaftpower"))
}

fn run(dir: &Path, args: &[&str]) -> Output {
    bin()
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

/// Exit status and stderr of a run expected to fail.
fn fails(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(!out.status.success(), "{args:?} unexpectedly succeeded");
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(
        stderr.trim_end().lines().count(),
        1,
        "diagnostic is not one line: {stderr:?}"
    );
    stderr
}

const TINY_COMPARE: &str = r#"{
    "dataset": "tiny",
    "repeats": 1,
    "ef": { "max_iterations": 300, "multistart_count": 2 },
    "train": {
        "max_epochs": 3,
        "architecture": {
            "copernicus": [4], "sensor": [4], "external": [4], "trunk": [4], "dropout": 0.2
        }
    }
}"#;

/// A small drift-free train/test pair in `dir`.
fn fixture() -> TempDir {
    let dir = TempDir::new().unwrap();
    ok(
        dir.path(),
        &[
            "generate",
            "--scenario",
            "waves",
            "--seed",
            "5",
            "--rows",
            "400",
            "--test-rows",
            "120",
            "--out",
            "train.csv",
            "--test-out",
            "test.csv",
        ],
    );
    fs::write(dir.path().join("tiny.json"), TINY_COMPARE).unwrap();
    dir
}

fn files(dir: &Path) -> Vec<PathBuf> {
    let mut v: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    v.sort();
    v
}

#[test]
fn pipeline_runs_end_to_end_and_writes_manifests() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["fit-ef", "--train", "train.csv", "--out", "ef.json"]);
    ok(d, &["fit-rpm", "--train", "train.csv", "--out", "rpm.json"]);
    fs::write(
        d.join("train.json"),
        r#"{"max_epochs": 2, "architecture": {"copernicus": [4], "sensor": [4], "external": [4], "trunk": [4], "dropout": 0.2}}"#,
    )
    .unwrap();
    ok(
        d,
        &[
            "train",
            "--train",
            "train.csv",
            "--ef",
            "ef.json",
            "--rpm",
            "rpm.json",
            "--lambda",
            "0.5",
            "--config",
            "train.json",
            "--out",
            "model.json",
            "--history",
            "history.csv",
        ],
    );
    ok(
        d,
        &[
            "predict",
            "--model",
            "model.json",
            "--data",
            "test.csv",
            "--out",
            "nn.csv",
        ],
    );
    ok(
        d,
        &[
            "predict", "--model", "ef.json", "--method", "ef", "--data", "test.csv", "--out",
            "ef.csv",
        ],
    );
    let table = ok(
        d,
        &[
            "evaluate",
            "--predictions",
            "ef.csv",
            "--truth",
            "test.csv",
            "--method",
            "ef",
            "--out",
            "eval.json",
        ],
    );
    assert!(table.contains("EF"), "{table}");
    assert!(table.contains("matched 120 of 120"), "{table}");

    for artifact in [
        "train.csv",
        "ef.json",
        "rpm.json",
        "model.json",
        "nn.csv",
        "ef.csv",
        "eval.json",
    ] {
        let manifest = d.join(format!("{artifact}.manifest.json"));
        let text =
            fs::read_to_string(&manifest).unwrap_or_else(|_| panic!("{artifact} has no manifest"));
        let json: serde_json::Value = serde_json::from_str(&text).unwrap();
        for key in [
            "command",
            "config_hash",
            "seeds",
            "inputs",
            "outputs",
            "tool_version",
            "duration_seconds",
        ] {
            assert!(json.get(key).is_some(), "{artifact} manifest lacks {key}");
        }
    }
    let history = fs::read_to_string(d.join("history.csv")).unwrap();
    assert_eq!(history.lines().next(), Some("epoch,train_loss,val_loss"));
    assert_eq!(history.lines().count(), 3);

    let preds = fs::read_to_string(d.join("nn.csv")).unwrap();
    assert_eq!(preds.lines().next(), Some("timestamp,predicted_kw"));
    assert_eq!(preds.lines().count(), 121);
}

#[test]
fn compare_emits_all_methods_and_is_byte_identical_across_runs() {
    let dir = fixture();
    let d = dir.path();
    let args = |out: &'static str| {
        vec![
            "compare",
            "--train",
            "train.csv",
            "--test",
            "test.csv",
            "--config",
            "tiny.json",
            "--out-dir",
            out,
        ]
    };
    let table = ok(d, &args("a"));
    for method in ["EF", "NN", "PGNN"] {
        assert!(
            table
                .lines()
                .any(|l| l.split_whitespace().nth(1) == Some(method)),
            "{table}"
        );
    }
    ok(d, &args("b"));
    for name in [
        "report.json",
        "report.txt",
        "per_seed.csv",
        "series.csv",
        "ef.json",
        "rpm.json",
    ] {
        let a = fs::read(d.join("a").join(name)).unwrap();
        let b = fs::read(d.join("b").join(name)).unwrap();
        assert!(a == b, "{name} differs between identical runs");
    }
    assert!(d.join("a/manifest.json").exists());
    let per_seed = fs::read_to_string(d.join("a/per_seed.csv")).unwrap();
    assert_eq!(per_seed.lines().count(), 4);
}

#[test]
fn lambda_sweep_reports_every_grid_value() {
    let dir = fixture();
    let d = dir.path();
    ok(
        d,
        &[
            "lambda-sweep",
            "--train",
            "train.csv",
            "--test",
            "test.csv",
            "--config",
            "tiny.json",
            "--grid",
            "0.5,0,1",
            "--out-dir",
            "sweep",
        ],
    );
    let csv = fs::read_to_string(d.join("sweep/sweep.csv")).unwrap();
    let lambdas: Vec<f64> = csv
        .lines()
        .skip(1)
        .map(|l| l.split(',').next().unwrap().parse().unwrap())
        .collect();
    assert_eq!(lambdas, vec![0.0, 0.5, 1.0]);
    assert!(d.join("sweep/manifest.json").exists());
}

#[test]
fn missing_input_fails_with_one_line_and_leaves_no_outputs() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    let stderr = fails(
        d,
        &["fit-ef", "--train", "absent.csv", "--out", "out/ef.json"],
    );
    assert!(stderr.contains("absent.csv"), "{stderr}");
    assert!(files(d).is_empty(), "left behind {:?}", files(d));
}

#[test]
fn malformed_config_fails_and_removes_partial_outputs() {
    let dir = fixture();
    let d = dir.path();
    fs::write(d.join("bad.json"), "{ not json").unwrap();
    let before = files(d);
    fails(
        d,
        &[
            "compare",
            "--train",
            "train.csv",
            "--test",
            "test.csv",
            "--config",
            "bad.json",
            "--out-dir",
            "cmp",
        ],
    );
    assert_eq!(files(d), before);

    // Invalid values are rejected before any work is done.
    fs::write(d.join("neg.json"), r#"{"repeats": 0}"#).unwrap();
    fails(
        d,
        &[
            "compare",
            "--train",
            "train.csv",
            "--test",
            "test.csv",
            "--config",
            "neg.json",
            "--out-dir",
            "cmp",
        ],
    );
    assert!(!d.join("cmp").exists());
}

#[test]
fn failing_generate_removes_the_files_it_wrote() {
    let dir = TempDir::new().unwrap();
    let d = dir.path();
    fs::create_dir(d.join("taken")).unwrap();
    // The test path is a directory, so the run fails after writing train.csv.
    fails(
        d,
        &[
            "generate",
            "--scenario",
            "waves",
            "--rows",
            "50",
            "--test-rows",
            "20",
            "--out",
            "train.csv",
            "--test-out",
            "taken",
        ],
    );
    assert_eq!(files(d), vec![d.join("taken")]);
}

#[test]
fn bad_arguments_exit_nonzero_with_one_line() {
    let dir = TempDir::new().unwrap();
    fails(dir.path(), &["frobnicate"]);
    fails(dir.path(), &["train", "--train"]);
    fails(
        dir.path(),
        &[
            "predict", "--model", "m.json", "--data", "d.csv", "--out", "o.csv", "--method", "svm",
        ],
    );
}

#[test]
fn pgnn_training_requires_ef_coefficients() {
    let dir = fixture();
    let d = dir.path();
    ok(d, &["fit-rpm", "--train", "train.csv", "--out", "rpm.json"]);
    let stderr = fails(
        d,
        &[
            "train",
            "--train",
            "train.csv",
            "--rpm",
            "rpm.json",
            "--lambda",
            "0.1",
            "--out",
            "m.json",
        ],
    );
    assert!(stderr.contains("--ef"), "{stderr}");
    assert!(!d.join("m.json").exists());
}
