use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = "experiment = charge\nschemes = midpoint, euler_maruyama\nM = 7\nK = 10\ntau = 2^-6\nT = 0.125\nn_paths = 6\nseed = 3\n";

fn stochnls(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stochnls"))
        .args(args)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn lists_every_experiment() {
    let out = stochnls(&["list-experiments"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "charge",
        "ergodic",
        "weak_order",
        "longtime_weak",
        "hormander",
        "symplectic",
    ] {
        assert!(
            text.lines().any(|l| l.starts_with(name)),
            "{name} missing from\n{text}"
        );
    }
}

#[test]
fn verify_accepts_shipped_configs() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let out = stochnls(&["verify", path.to_str().unwrap()]);
        assert!(
            out.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&out.stderr)
        );
        seen += 1;
    }
    assert!(seen >= 6);
}

#[test]
fn verify_rejects_bad_config_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write(
        dir.path(),
        "bad.conf",
        "experiment = charge\nM = 7\ntau = 2^-6\nT = 0.1\n",
    );
    let out = stochnls(&["verify", &bad]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("T/tau"));
    let missing = stochnls(&["verify", "/nonexistent/x.conf"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn run_writes_csv_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.conf", SMALL);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let c = dir.path().join("c.csv");
    assert!(
        stochnls(&["run", &cfg, "--out", a.to_str().unwrap(), "--threads", "1"])
            .status
            .success()
    );
    assert!(
        stochnls(&["run", &cfg, "--out", b.to_str().unwrap(), "--threads", "4"])
            .status
            .success()
    );
    assert!(
        stochnls(&["run", &cfg, "--out", c.to_str().unwrap(), "--seed", "4"])
            .status
            .success()
    );
    let (a, b, c) = (
        std::fs::read(a).unwrap(),
        std::fs::read(b).unwrap(),
        std::fs::read(c).unwrap(),
    );
    assert_eq!(a, b);
    assert_ne!(a, c);
    let text = String::from_utf8(a).unwrap();
    assert!(text.contains("\nseries,x,value,stderr\n"));
    assert!(text.contains("midpoint:tau=2^-6,"));
    assert!(String::from_utf8(c).unwrap().contains("# seed = 4\n"));
}

#[test]
fn run_without_out_prints_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "small.conf", SMALL);
    let out = stochnls(&["run", &cfg]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("series,x,value,stderr"));
}

#[test]
fn numerical_failure_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "fail.conf",
        &format!("{SMALL}fp_max_iters = 1\n"),
    );
    let csv = dir.path().join("fail.csv");
    let out = stochnls(&["run", &cfg, "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(std::fs::read_to_string(csv)
        .unwrap()
        .contains("# failure: "));
}
