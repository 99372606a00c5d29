use std::path::Path;
use std::process::{Command, Output};

fn ancsim(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ancsim"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

const SMALL: &str = r#"
seed = 2
duration_secs = 1.0
eta2_grid = ["inf", 0.5]
max_passes = 3

[step_search]
iterations = 3

[[noises]]
kind = "pink"

[[algorithms]]
type = "wiener"
taps = 256

[[algorithms]]
type = "td_fxlms"
taps = 64
mu = 1e-4
"#;

#[test]
fn rir_writes_both_paths() {
    let dir = tempfile::tempdir().unwrap();
    let out = ancsim(dir.path(), &["rir", "--out", "paths", "--wav"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["primary_path.csv", "secondary_path.csv", "primary_path.wav", "secondary_path.wav"] {
        assert!(dir.path().join("paths").join(f).is_file(), "{f}");
    }
    let s = line_count(&dir.path().join("paths/secondary_path.csv"));
    assert_eq!(s, 512);
}

fn line_count(p: &Path) -> usize {
    std::fs::read_to_string(p).unwrap().lines().count()
}

#[test]
fn run_emits_csv_and_table() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("grid.toml"), SMALL).unwrap();
    let out = ancsim(dir.path(), &["run", "--config", "grid.toml", "--out", "res"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("res/results.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("algorithm,noise,eta2,nmse_db,dba_db,status"));
    assert_eq!(lines.count(), 4);
    assert!(dir.path().join("res/results.txt").is_file());
    assert!(String::from_utf8_lossy(&out.stdout).contains("Wiener(256)"));
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let missing = ancsim(dir.path(), &["run", "--config", "nope.toml"]);
    assert_eq!(missing.status.code(), Some(2));
    std::fs::write(dir.path().join("empty.toml"), "seed = 1\n").unwrap();
    assert_eq!(ancsim(dir.path(), &["run", "--config", "empty.toml"]).status.code(), Some(2));
    assert_eq!(ancsim(dir.path(), &["frobnicate"]).status.code(), Some(2));
    // A numerically impossible design: a single zero-energy noise file.
    let silent = ancsim::Signal::zeros(16000, 16000.0);
    ancsim::data_io::write_wav(&silent, &dir.path().join("silence.wav"), ancsim::data_io::WavEncoding::Float32).unwrap();
    std::fs::write(
        dir.path().join("silent.toml"),
        "[[noises]]\npath = \"silence.wav\"\n\n[[algorithms]]\ntype = \"wiener\"\ntaps = 16\n",
    )
    .unwrap();
    let out = ancsim(dir.path(), &["wiener", "--config", "silent.toml", "--taps", "16"]);
    assert_ne!(out.status.code(), Some(0));
}

#[test]
fn wiener_reports_and_saves_taps() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("grid.toml"), SMALL).unwrap();
    let out = ancsim(dir.path(), &["wiener", "--config", "grid.toml", "--taps", "128", "--eta2", "0.5", "--out", "w.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("NMSE"));
    assert_eq!(line_count(&dir.path().join("w.csv")), 128);
}

#[test]
fn train_eval_and_spectrogram_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let out = ancsim(
        dir.path(),
        &["train", "--model", "tiny", "--noise", "pink", "--seconds", "3", "--epochs", "1", "--window", "2000", "--out", "m.wnv"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("m.wnv").is_file());
    std::fs::write(dir.path().join("grid.toml"), SMALL).unwrap();
    let out = ancsim(dir.path(), &["eval", "--config", "grid.toml", "--checkpoint", "m.wnv", "--out", "ev"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("ev/results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.contains("WaveNet-VNN(m)"));
    let out = ancsim(
        dir.path(),
        &["spectrogram", "--config", "grid.toml", "--algorithm", "Wiener(256)", "--noise", "pink", "--eta2", "0.5", "--out", "spec"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let files: Vec<_> = std::fs::read_dir(dir.path().join("spec")).unwrap().collect();
    assert_eq!(files.len(), 2);
}
