//! End-to-end runs of the `epee` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use epee::eval::report::grid_csv_row;
use epee::eval::EvalResult;

fn epee(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_epee"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = epee(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const DATA: &str = "synthetic:classes=3,per_class=40,ambiguous=0.2";

/// Trains a small model and runs every downstream command into `dir`.
fn pipeline(dir: &Path) {
    let d = s(dir);
    ok(&[
        "--out-dir",
        d,
        "--seed",
        "3",
        "train",
        "--data",
        DATA,
        "--epochs",
        "2",
        "--num-layers",
        "3",
        "--hidden-dim",
        "16",
    ]);
    let model = dir.join("model.bin");
    let cache = dir.join("dataset.json");
    ok(&["--out-dir", d, "trace", "--model", s(&model), "--data", s(&cache)]);
    let traces = dir.join("traces.jsonl");
    ok(&["--out-dir", d, "grid", "--traces", s(&traces)]);
    ok(&["--out-dir", d, "curve", "--traces", s(&traces)]);
    ok(&[
        "--out-dir",
        d,
        "eval",
        "--traces",
        s(&traces),
        "--strategy",
        "epee",
        "--tau",
        "0.5",
        "--patience",
        "2",
    ]);
}

#[test]
fn reruns_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    pipeline(a.path());
    pipeline(b.path());
    let mut compared = 0;
    for entry in fs::read_dir(a.path()).unwrap() {
        let name = entry.unwrap().file_name();
        let name = name.to_str().unwrap();
        if name.ends_with(".manifest.json") {
            continue;
        }
        let x = fs::read(a.path().join(name)).unwrap();
        let y = fs::read(b.path().join(name)).unwrap();
        assert!(x == y, "{name} differs between runs");
        compared += 1;
    }
    assert_eq!(compared, 8);
    for cmd in ["train", "trace", "grid", "curve", "eval"] {
        let m: serde_json::Value =
            serde_json::from_slice(&fs::read(a.path().join(format!("{cmd}.manifest.json"))).unwrap()).unwrap();
        assert_eq!(m["subcommand"], cmd);
        assert_eq!(m["exit_code"], 0);
        assert!(m["version"].is_string() && m["unix_time"].is_u64());
    }
}

#[test]
fn eval_reproduces_grid_rows() {
    let dir = tempfile::tempdir().unwrap();
    pipeline(dir.path());
    let traces = dir.path().join("traces.jsonl");
    let grid = fs::read_to_string(dir.path().join("grid.csv")).unwrap();
    for (tau, patience) in [("0.5", "2"), ("0", "1"), ("0.95", "3"), ("1", "3")] {
        let json = ok(&[
            "eval",
            "--traces",
            s(&traces),
            "--strategy",
            "epee",
            "--tau",
            tau,
            "--patience",
            patience,
            "--out-dir",
            s(dir.path()),
        ]);
        let result: EvalResult = serde_json::from_str(&json).unwrap();
        let row = grid_csv_row(&result);
        assert!(grid.lines().any(|l| l == row), "{row} not in grid");
    }
    let frontier: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("frontier.json")).unwrap()).unwrap();
    assert!(!frontier.as_array().unwrap().is_empty());
    let hist = fs::read_to_string(dir.path().join("histogram.csv")).unwrap();
    assert!(hist.starts_with("layer,count\n"));
}

fn single_layer_traces(path: &Path, corrupt_line: Option<usize>) {
    let mut text = String::new();
    for i in 0..5 {
        let p = if Some(i + 1) == corrupt_line {
            [0.7, 0.7]
        } else {
            [0.25, 0.75]
        };
        let h = -(p[0] * f64::ln(p[0]) + p[1] * f64::ln(p[1])) / 2f64.ln();
        text.push_str(&format!(
            "{{\"sample_id\":\"s{i}\",\"gold\":1,\"probs\":[[{},{}]],\"entropy\":[{h}],\"argmax\":[1]}}\n",
            p[0], p[1]
        ));
    }
    fs::write(path, text).unwrap();
}

#[test]
fn single_layer_traces_verify_vacuously() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m1.jsonl");
    single_layer_traces(&path, None);
    let stdout = ok(&["--out-dir", s(dir.path()), "verify", "--traces", s(&path)]);
    assert_eq!(stdout.matches("PASS").count(), 5, "{stdout}");
}

#[test]
fn corrupted_trace_names_its_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.jsonl");
    single_layer_traces(&path, Some(4));
    let out = epee(&["--out-dir", s(dir.path()), "verify", "--traces", s(&path)]);
    assert_eq!(code(&out), 2);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bad.jsonl:4"), "{err}");
    assert!(err.contains("sum to"), "{err}");
}

#[test]
fn random_verification_passes() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(&["--out-dir", s(dir.path()), "verify", "--random-traces", "2000"]);
    assert_eq!(stdout.matches("PASS").count(), 5, "{stdout}");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = s(dir.path());
    assert_eq!(code(&epee(&["--out-dir", d, "frobnicate"])), 1);

    let traces = dir.path().join("t.jsonl");
    single_layer_traces(&traces, None);
    let missing_tau = epee(&["--out-dir", d, "eval", "--traces", s(&traces), "--strategy", "entropy"]);
    assert_eq!(code(&missing_tau), 1);
    let bad_patience = epee(&[
        "--out-dir",
        d,
        "eval",
        "--traces",
        s(&traces),
        "--strategy",
        "patience",
        "--patience",
        "2",
    ]);
    assert_eq!(code(&bad_patience), 1);

    let missing = epee(&["--out-dir", d, "curve", "--traces", s(&dir.path().join("nope.jsonl"))]);
    assert_eq!(code(&missing), 2);

    let diverge = epee(&[
        "--out-dir",
        d,
        "train",
        "--data",
        DATA,
        "--epochs",
        "1",
        "--learning-rate",
        "1e300",
    ]);
    assert_eq!(code(&diverge), 4, "{}", String::from_utf8_lossy(&diverge.stderr));
    assert!(String::from_utf8_lossy(&diverge.stderr).contains("diverge"));
}

#[test]
fn config_file_supplies_flags() {
    let dir = tempfile::tempdir().unwrap();
    let traces = dir.path().join("t.jsonl");
    single_layer_traces(&traces, None);
    let cfg = dir.path().join("eval.json");
    fs::write(
        &cfg,
        format!(
            r#"{{"traces": "{}", "strategy": "budgeted", "budget_layer": 1}}"#,
            s(&traces)
        ),
    )
    .unwrap();
    let out = ok(&["eval", "--config", s(&cfg), "--out-dir", s(dir.path())]);
    let result: EvalResult = serde_json::from_str(&out).unwrap();
    assert_eq!(result.exit_histogram, vec![5]);
    let manifest = fs::read_to_string(dir.path().join("eval.manifest.json")).unwrap();
    assert!(manifest.contains("eval.json"), "config file digest missing");
}
