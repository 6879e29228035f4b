use std::path::Path;
use std::process::{Command, Output};

fn sipred(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sipred"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn setup(dir: &Path, train_trials: usize) {
    let o = sipred(
        dir,
        &["synth", "data", "--train-trials", &train_trials.to_string(), "--test-trials", "4"],
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(
        dir.join("run.json"),
        r#"{
  "track": "closed",
  "signal_kind": "enhanced",
  "binding": "SPEC",
  "paths": {
    "manifest": "data/train.json",
    "test_manifest": "data/test.json",
    "audio_root": "data/audio",
    "cache_dir": "cache",
    "out_dir": "out"
  },
  "train": { "max_epochs": 1 },
  "backends": [{ "type": "mock", "id": "hubert", "fe_dim": 6, "ol_dim": 9 }]
}"#,
    )
    .unwrap();
}

#[test]
fn extract_counts_skips_and_failures() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir, 6);
    // 10 stereo utterances (6 train + 4 test) give 20 spectrogram entries.
    let first = sipred(dir, &["--config", "run.json", "extract"]);
    assert!(first.status.success());
    assert!(stdout(&first).contains("stored 20, skipped 0, failed 0"), "{}", stdout(&first));
    let again = sipred(dir, &["--config", "run.json", "extract"]);
    assert!(stdout(&again).contains("stored 0, skipped 20"));

    std::fs::write(dir.join("data/audio/S00002_L0002_E002.wav"), b"RIFF garbage").unwrap();
    let broken = sipred(dir, &["--config", "run.json", "--binding", "hubert:FE", "extract"]);
    assert_eq!(broken.status.code(), Some(2));
    let out = stdout(&broken);
    assert!(out.contains("stored 18, skipped 0, failed 1"), "{out}");
    assert!(out.contains("failed S00002_L0002_E002"));
}

#[test]
fn train_and_evaluate_with_flag_overrides() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir, 8);
    let flags = ["--config", "run.json", "--binding", "hubert:OL", "--seed", "3", "--jobs", "2"];
    for cmd in ["extract", "train", "evaluate"] {
        let mut args = flags.to_vec();
        args.push(cmd);
        let o = sipred(dir, &args);
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
    }
    let manifest = std::fs::read_to_string(dir.join("out/run_manifest.json")).unwrap();
    assert!(manifest.contains("\"seed\": 3"));
    assert!(manifest.contains("hubert:OL"));
    let metrics = std::fs::read_to_string(dir.join("out/metrics.csv")).unwrap();
    assert!(metrics.lines().nth(1).unwrap().starts_with("hubert:OL-enhanced,"));

    let mismatch = sipred(dir, &["--config", "run.json", "evaluate"]);
    assert_eq!(mismatch.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&mismatch.stderr).contains("bound to hubert:OL"));
}

#[test]
fn train_without_cache_explains() {
    let tmp = tempfile::tempdir().unwrap();
    setup(tmp.path(), 4);
    let o = sipred(tmp.path(), &["--config", "run.json", "train"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sipred extract"));
}

#[test]
fn config_required_and_validated() {
    let tmp = tempfile::tempdir().unwrap();
    let o = sipred(tmp.path(), &["extract"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("--config"));

    std::fs::write(tmp.path().join("bad.json"), r#"{"track": "closed"}"#).unwrap();
    let o = sipred(tmp.path(), &["--config", "bad.json", "report"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("configuration"));

    let o = sipred(tmp.path(), &["--binding", "hubert", "report"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn report_and_distances() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    setup(dir, 6);
    let o = sipred(dir, &["--config", "run.json", "report"]);
    assert!(o.status.success());
    assert!(dir.join("out/correctness_histogram.svg").exists());
    let o = sipred(dir, &["--config", "run.json", "distances"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let corr = std::fs::read_to_string(dir.join("out/correlations.csv")).unwrap();
    // SPEC plus FE and OL of one backend, for both signal kinds.
    assert_eq!(corr.lines().count(), 1 + 6);
}
