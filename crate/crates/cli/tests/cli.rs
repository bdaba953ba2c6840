use std::fs;
use std::path::Path;
use std::process::Command;

fn motifscope(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_motifscope"))
        .args(args)
        .output()
        .unwrap();
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const HEADER: &str = "id,path,rate_hz,group,label,baseline_score,followup_score\n";

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    fs::write(&cfg, "[classify]\nfolds = 1\n").unwrap();
    let (code, err) = motifscope(&["discover", "--config", p(&cfg), "--out-dir", p(dir.path())]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("folds"), "{err}");
    let (code, _) = motifscope(&["discover", "--band", "gamma", "--out-dir", p(dir.path())]);
    assert_eq!(code, 2);
}

#[test]
fn bad_manifest_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("m.csv");
    fs::write(&m, format!("{HEADER}a,missing.csv,250,,1,,\n")).unwrap();
    let (code, err) = motifscope(&["preprocess", "--manifest", p(&m), "--out-dir", p(&dir.path().join("o"))]);
    assert_eq!(code, 2, "{err}");
}

#[test]
fn malformed_recording_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("a.csv"), "O1,O2\n1.0,2.0\n3.0,abc\n").unwrap();
    let m = dir.path().join("m.csv");
    fs::write(&m, format!("{HEADER}a,a.csv,250,,1,,\n")).unwrap();
    let (code, err) = motifscope(&["preprocess", "--manifest", p(&m), "--out-dir", p(&dir.path().join("o"))]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("preprocess"), "{err}");
}

#[test]
fn missing_stage_input_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = motifscope(&["select", "--out-dir", p(dir.path())]);
    assert_eq!(code, 3, "{err}");
    assert!(err.contains("scored_motifs.jsonl"), "{err}");
}

#[test]
fn synth_writes_a_loadable_dataset() {
    let dir = tempfile::tempdir().unwrap();
    let (code, err) = motifscope(&["synth", "--dir", p(dir.path()), "--n-per-class", "2", "--duration-s", "30"]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(fs::read_dir(dir.path().join("recordings")).unwrap().count(), 4);
    for f in ["manifest.csv", "ground_truth.csv", "config.toml"] {
        assert!(dir.path().join(f).is_file(), "{f}");
    }
}
