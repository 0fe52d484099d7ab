use std::path::Path;
use std::process::Command;

use mcgc_core::cli::{RunManifest, MANIFEST_NAME};
use mcgc_core::train::Metrics;

fn mcgc(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_mcgc"))
        .args(args)
        .env_remove("MCGC_SEED")
        .output()
        .expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    mcgc(args).status.code().expect("exit code")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth(dir: &Path) -> std::path::PathBuf {
    let out = dir.join("corpus");
    let status = code(&[
        "synth",
        "--out",
        s(&out),
        "--phishing",
        "8",
        "--normal",
        "8",
        "--seed",
        "1",
        "--max-nodes",
        "30",
    ]);
    assert_eq!(status, 0);
    out
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&["cv", "--help"]), 0);
}

#[test]
fn unknown_subcommand_and_bad_flags_exit_one() {
    assert_eq!(code(&["foo"]), 1);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["gradcheck", "--graphs", "many"]), 1);
    assert_eq!(code(&["cv", "--out", "/tmp/never"]), 1);
}

#[test]
fn validation_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path());
    let data = corpus.join("dataset");
    let out = dir.path().join("o");
    assert_eq!(code(&["cv", "--data", s(&data), "--lr", "0", "--out", s(&out)]), 1);
    assert_eq!(code(&["cv", "--data", s(&data), "--lr", "-0.5", "--out", s(&out)]), 1);
    assert_eq!(
        code(&[
            "cv",
            "--data",
            s(&data),
            "--clusters",
            "2,4",
            "--layers",
            "2",
            "--out",
            s(&out)
        ]),
        1
    );
    assert_eq!(
        code(&["cv", "--data", s(&data), "--folds", "1000", "--out", s(&out)]),
        1
    );
    assert_eq!(
        code(&[
            "cv",
            "--data",
            s(&data),
            "--jobs",
            "0",
            "--epochs",
            "1",
            "--out",
            s(&out)
        ]),
        1
    );
}

#[test]
fn missing_files_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope");
    let out = dir.path().join("o");
    assert_eq!(code(&["train", "--data", s(&missing), "--out", s(&out)]), 2);
    assert_eq!(
        code(&[
            "ingest",
            "--tx",
            s(&missing.join("a.csv")),
            "--targets",
            s(&missing.join("b.csv")),
            "--out",
            s(&out)
        ]),
        2
    );
    assert_eq!(code(&["eval", "--checkpoint", s(&missing), "--data", s(&missing)]), 2);
}

#[test]
fn gradcheck_passes_and_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gc");
    let run = mcgc(&["gradcheck", "--seed", "7", "--graphs", "5", "--out", s(&out)]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stdout));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("PASS"));
    assert!(out.join("gradcheck.json").exists());
    let m = RunManifest::load(out.join(MANIFEST_NAME)).unwrap();
    assert_eq!(m.command, "gradcheck");
    assert_eq!(m.seed, Some(7));
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("gc");
    let status = Command::new(env!("CARGO_BIN_EXE_mcgc"))
        .args(["gradcheck", "--graphs", "1", "--out", s(&out)])
        .env("MCGC_SEED", "11")
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(RunManifest::load(out.join(MANIFEST_NAME)).unwrap().seed, Some(11));
}

#[test]
fn train_eval_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path());
    let data = corpus.join("dataset");
    let out = dir.path().join("train");
    assert_eq!(
        code(&[
            "train",
            "--data",
            s(&data),
            "--epochs",
            "3",
            "--dim",
            "8",
            "--out",
            s(&out)
        ]),
        0
    );
    for f in [
        "checkpoint.json",
        "metrics.json",
        "metrics.txt",
        "curves.csv",
        "timing.json",
        MANIFEST_NAME,
    ] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let metrics: Metrics = serde_json::from_slice(&std::fs::read(out.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(metrics.curves.len(), 1);
    assert_eq!(metrics.curves[0].len(), 3);

    let eval = mcgc(&[
        "eval",
        "--checkpoint",
        s(&out.join("checkpoint.json")),
        "--data",
        s(&data),
    ]);
    assert_eq!(eval.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&eval.stdout).contains("accuracy"));
    // No --out, so nothing is written next to the checkpoint beyond what train left.
    assert!(!dir.path().join(MANIFEST_NAME).exists());
}

#[test]
fn replay_reproduces_cv() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = synth(dir.path());
    let data = corpus.join("dataset");
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    assert_eq!(
        code(&[
            "cv",
            "--data",
            s(&data),
            "--folds",
            "4",
            "--epochs",
            "2",
            "--dim",
            "8",
            "--seed",
            "5",
            "--out",
            s(&first)
        ]),
        0
    );
    assert_eq!(
        code(&["cv", "--replay", s(&first.join(MANIFEST_NAME)), "--out", s(&second)]),
        0
    );
    let a = std::fs::read(first.join("metrics.json")).unwrap();
    let b = std::fs::read(second.join("metrics.json")).unwrap();
    assert_eq!(a, b);

    let m = RunManifest::load(second.join(MANIFEST_NAME)).unwrap();
    assert_eq!(m.command, "cv");
    assert_eq!(m.seed, Some(5));
    assert_eq!(m.train.unwrap().folds, 4);
    assert!(m.dataset_fingerprint.is_some());

    // A non-cv manifest cannot be replayed.
    let gc = dir.path().join("gc");
    assert_eq!(code(&["gradcheck", "--graphs", "1", "--out", s(&gc)]), 0);
    assert_eq!(
        code(&["cv", "--replay", s(&gc.join(MANIFEST_NAME)), "--out", s(&second)]),
        1
    );
}

#[test]
fn stats_reports_reference() {
    let mutag = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/MUTAG");
    let run = mcgc(&["stats", "--data", s(&mutag)]);
    assert_eq!(run.status.code(), Some(0));
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("188"));
    assert!(stdout.contains("reference"));
}
