//! End-to-end tests of the `mfstl` binary: exit codes, file outputs,
//! and reproducibility across invocations.

use std::path::Path;
use std::process::{Command, Output};

fn mfstl(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mfstl"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn assert_code(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn path_str(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

/// Synthesizes a short labeled trace and trains a model from it,
/// returning the trace and model paths.
fn prepare_model(dir: &Path) -> (String, String) {
    let trace = path_str(dir, "trace.csv");
    let model = path_str(dir, "model.json");
    let synth = mfstl(
        &[
            "synth",
            "--out",
            &trace,
            "--duration",
            "240",
            "--rate",
            "20",
            "--attack",
            "60:120",
            "--attack-rate",
            "60",
        ],
        dir,
    );
    assert_code(&synth, 0);
    let train = mfstl(&["train", "--input", &trace, "--model", &model, "--dt", "20"], dir);
    assert_code(&train, 0);
    (trace, model)
}

#[test]
fn test_synth_writes_labeled_csv() {
    let dir = tempfile::tempdir().unwrap();
    let trace = path_str(dir.path(), "trace.csv");
    let out = mfstl(&["synth", "--out", &trace], dir.path());
    assert_code(&out, 0);
    let text = std::fs::read_to_string(&trace).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("ts,sa,da,sp,dp,pr,ps,label"));
    assert!(lines.count() > 1000);
}

#[test]
fn test_synth_same_seed_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = path_str(dir.path(), "a.csv");
    let b = path_str(dir.path(), "b.csv");
    assert_code(&mfstl(&["synth", "--out", &a, "--duration", "60"], dir.path()), 0);
    assert_code(&mfstl(&["synth", "--out", &b, "--duration", "60"], dir.path()), 0);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let c = path_str(dir.path(), "c.csv");
    assert_code(
        &mfstl(
            &["synth", "--out", &c, "--duration", "60", "--seed", "43"],
            dir.path(),
        ),
        0,
    );
    assert_ne!(std::fs::read(&a).unwrap(), std::fs::read(&c).unwrap());
}

#[test]
fn test_synth_unwritable_path_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfstl(
        &["synth", "--out", "/nonexistent-dir/trace.csv"],
        dir.path(),
    );
    assert_code(&out, 2);
}

#[test]
fn test_synth_bad_attack_window_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let trace = path_str(dir.path(), "trace.csv");
    let out = mfstl(&["synth", "--out", &trace, "--attack", "oops"], dir.path());
    assert_code(&out, 2);
}

#[test]
fn test_train_then_detect_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, model) = prepare_model(dir.path());

    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(parsed["characteristics"].as_array().unwrap().len(), 14);
    assert!(parsed["ensemble"]["selected"].as_array().is_some());

    let out_dir = path_str(dir.path(), "report");
    let detect = mfstl(
        &[
            "detect", "--input", &trace, "--model", &model, "--out-dir", &out_dir, "--dt", "20",
        ],
        dir.path(),
    );
    assert_code(&detect, 0);
    // 240 s at dt = 20 gives 12 samples; a 0.75 split leaves 3 for test.
    let report = std::fs::read_to_string(dir.path().join("report/report.csv")).unwrap();
    assert_eq!(report.lines().count(), 1 + 3);
    let summary = std::fs::read_to_string(dir.path().join("report/summary.csv")).unwrap();
    assert!(summary.lines().any(|l| l.starts_with("ifse_ad,")));
    assert!(summary.lines().any(|l| l.starts_with("gaussian_dist:")));
}

#[test]
fn test_detect_with_conflicting_flags_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, model) = prepare_model(dir.path());
    let out = mfstl(
        &[
            "detect",
            "--input",
            &trace,
            "--model",
            &model,
            "--node-mode",
            "two-tuple",
        ],
        dir.path(),
    );
    assert_code(&out, 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error:"));
}

#[test]
fn test_train_on_unlabeled_trace_fails_at_runtime() {
    let dir = tempfile::tempdir().unwrap();
    let trace = path_str(dir.path(), "plain.csv");
    std::fs::write(
        &trace,
        "ts,sa,da,sp,dp,pr,ps,label\n\
         0.5,10.0.0.1,10.0.0.2,1024,80,6,100,\n\
         1.5,10.0.0.3,10.0.0.4,1025,80,6,100,\n",
    )
    .unwrap();
    let model = path_str(dir.path(), "model.json");
    let out = mfstl(&["train", "--input", &trace, "--model", &model], dir.path());
    assert_code(&out, 1);
}

#[test]
fn test_train_missing_input_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let model = path_str(dir.path(), "model.json");
    let out = mfstl(
        &["train", "--input", "no-such.csv", "--model", &model],
        dir.path(),
    );
    assert_code(&out, 2);
}

#[test]
fn test_sweep_single_cell_shapes() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, _) = prepare_model(dir.path());
    let out_dir = path_str(dir.path(), "sweep");
    let out = mfstl(
        &[
            "sweep",
            "--input",
            &trace,
            "--out-dir",
            &out_dir,
            "--dt",
            "20",
            "--dw-grid",
            "0.1",
            "--rc-grid",
            "0.65",
            "--m-grid",
            "2,3",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    let sweep = std::fs::read_to_string(dir.path().join("sweep/sweep.csv")).unwrap();
    assert_eq!(sweep.lines().count(), 1 + 14);
    assert!(sweep.starts_with("dw,rc,metric,name,value"));
    let cluster = std::fs::read_to_string(dir.path().join("sweep/cluster.csv")).unwrap();
    assert_eq!(cluster.lines().count(), 1 + 2);
    assert!(cluster.starts_with("m,acc"));
}

#[test]
fn test_unknown_flag_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = mfstl(&["synth", "--out", "x.csv", "--bogus"], dir.path());
    assert_code(&out, 2);
}

#[test]
fn test_config_file_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let (trace, _) = prepare_model(dir.path());
    let config = path_str(dir.path(), "run.json");
    std::fs::write(&config, r#"{"sample_window": 20.0, "intervals": 3}"#).unwrap();
    let model = path_str(dir.path(), "model2.json");
    let out = mfstl(
        &[
            "train", "--input", &trace, "--model", &model, "--config", &config, "--m", "4",
        ],
        dir.path(),
    );
    assert_code(&out, 0);
    let parsed: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&model).unwrap()).unwrap();
    assert_eq!(parsed["config"]["sample_window"], 20.0);
    assert_eq!(parsed["config"]["intervals"], 4);
}
