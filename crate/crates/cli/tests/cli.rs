//! Exit codes and partial-failure behaviour of the binary.

use std::path::Path;
use std::process::{Command, Output};

use clfq::synthgen::generate_base_pattern;

fn clfq(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clfq")).current_dir(dir).args(args).env("RUST_LOG", "warn").output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

#[test]
fn empty_input_directory_succeeds_with_a_warning() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir(dir.path().join("empty")).unwrap();
    let out = clfq(dir.path(), &["preprocess", "empty", "--out", "pre"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("WARN"));
}

#[test]
fn corrupt_image_fails_the_run_but_not_the_others() {
    let dir = tempfile::tempdir().unwrap();
    let inputs = dir.path().join("in");
    std::fs::create_dir(&inputs).unwrap();
    std::fs::write(inputs.join("good.pgm"), generate_base_pattern(3).image.encode_pgm()).unwrap();
    std::fs::write(inputs.join("broken.png"), b"\x89PNG\r\n\x1a\nnot really").unwrap();
    let out = clfq(dir.path(), &["preprocess", "in", "--out", "pre"]);
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("broken"));
    assert!(dir.path().join("pre/samples/good.pgm").is_file());
    assert!(dir.path().join("pre/masks/good.pgm").is_file());
    assert!(!dir.path().join("pre/samples/broken.pgm").exists());
}

#[test]
fn configuration_and_argument_errors_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[train]\nn_treez = 3\n").unwrap();
    let out = clfq(dir.path(), &["--config", "bad.toml", "synth", "--out", "x"]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("n_treez"));

    assert_eq!(code(&clfq(dir.path(), &["--jobs", "0", "synth", "--out", "x"])), 2);
    assert_eq!(code(&clfq(dir.path(), &["synth"])), 2);
    assert_eq!(code(&clfq(dir.path(), &["--help"])), 0);
}

#[test]
fn unreadable_model_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("model.clfq"), b"not a model").unwrap();
    std::fs::write(dir.path().join("a.pgm"), generate_base_pattern(4).image.encode_pgm()).unwrap();
    let out = clfq(dir.path(), &["score", "--model", "model.clfq", "a.pgm", "--out", "s.csv"]);
    assert_eq!(code(&out), 2);
    assert!(!dir.path().join("s.csv").exists());
}
