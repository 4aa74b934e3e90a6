//! End-to-end checks of the `simcli` binary: exit codes, CSV contract,
//! determinism across reruns and worker counts.

use std::path::Path;
use std::process::Command;

fn simcli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_simcli"))
}

const TINY: &str = "\
q = 8
m = 2
n = 2
l = 2
k = 3
snr_grid = 10.0
b = 2
g_grid = 2,4
b_grid = 1,2
k_grid = 1,3
trials = 4
frames = 2
";

fn write_cfg(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("sim.cfg");
    std::fs::write(&p, text).unwrap();
    p
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let status = simcli()
        .args(["case1", "--config", "/nonexistent/sim.cfg", "--seed", "1"])
        .args(["--out"])
        .arg(dir.path().join("out.csv"))
        .status()
        .unwrap();
    // A missing config is an input problem, reported as IoFailure.
    assert_eq!(status.code(), Some(3));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bogus_key = 1\n");
    let status = simcli()
        .args(["case1", "--seed", "1"])
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("out.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn unwritable_output_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), TINY);
    let status = simcli()
        .args(["selftest", "--seed", "1"])
        .args(["--config"])
        .arg(&cfg)
        .args(["--out", "/nonexistent/dir/out.csv"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn selftest_passes_and_emits_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), TINY);
    let out = dir.path().join("out.csv");
    let output = simcli()
        .args(["selftest", "--seed", "7"])
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    assert!(stdout.lines().any(|l| l.starts_with("selftest") && l.ends_with("PASS")));
    assert!(!stdout.contains("FAIL"));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.starts_with("case,scheme,snr_db,K,B,G,metric,value,ci95,trials\n"));
    assert!(csv.lines().count() > 1);
}

#[test]
fn reruns_and_worker_counts_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), TINY);
    let mut outputs = Vec::new();
    for (name, workers) in [("a.csv", "1"), ("b.csv", "3"), ("c.csv", "1")] {
        let out = dir.path().join(name);
        let status = simcli()
            .args(["case3", "--seed", "42", "--workers", workers])
            .args(["--config"])
            .arg(&cfg)
            .args(["--out"])
            .arg(&out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
    assert_eq!(outputs[0], outputs[2]);
}

#[test]
fn trials_override_applies() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), TINY);
    let out = dir.path().join("out.csv");
    let status = simcli()
        .args(["case1", "--seed", "1", "--trials", "6"])
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    for line in csv.lines().skip(1) {
        assert!(line.ends_with(",6"));
    }
}

#[test]
fn case2_emits_inf_and_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), TINY);
    let out = dir.path().join("out.csv");
    let status = simcli()
        .args(["case2", "--seed", "5"])
        .args(["--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let csv = std::fs::read_to_string(&out).unwrap();
    assert!(csv.lines().any(|l| l.contains(",inf,")));
    assert_eq!(csv.lines().skip(1).count(), 5);
}
