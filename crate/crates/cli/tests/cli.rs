use std::fs;
use std::process::{Command, Output};

fn mdpql(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdpql"))
        .args(args)
        .output()
        .expect("binary runs")
}

#[test]
fn print_config_round_trips_flags() {
    let out = mdpql(&[
        "--print-config",
        "--ues",
        "5,7",
        "--scheduler",
        "pf,mdp-ql",
        "--seed",
        "3",
        "--duration",
        "2.5",
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let spec = mdpql::config::parse_config(&text).unwrap();
    assert_eq!(spec.ues, vec![5, 7]);
    assert_eq!(spec.seeds, vec![3]);
    assert_eq!(spec.base.duration_ms, 2500);
    assert_eq!(spec.schedulers.len(), 2);
}

#[test]
fn short_sweep_writes_summary_and_cdfs() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = mdpql(&[
        "--out",
        out_dir.to_str().unwrap(),
        "--ues",
        "4",
        "--scheduler",
        "rr,mdp-ql",
        "--duration",
        "1",
        "-q",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stderr.is_empty());
    let summary = fs::read_to_string(out_dir.join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 2 * 3);
    let cell = out_dir.join("runs").join("mdp-ql_ues4_seed1");
    assert!(cell.join("qtable_qci1.csv").exists());
    assert!(cell.join("cdf_video_4.csv").exists());
    assert!(!out_dir.join("FAILED").exists());
}

#[test]
fn config_file_is_read() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("exp.cfg");
    fs::write(&path, "# tiny\nues = 3\nsigma = 10\n").unwrap();
    let out = mdpql(&["--config", path.to_str().unwrap(), "--print-config"]);
    assert!(out.status.success());
    let spec = mdpql::config::parse_config(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(spec.ues, vec![3]);
    assert_eq!(spec.base.sigma, 10);
}

#[test]
fn bad_input_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.cfg");
    fs::write(&path, "ues = 10\nalpha = 3\n").unwrap();
    let out = mdpql(&["--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("line 2"), "{err}");

    let out = mdpql(&["--scheduler", "edf", "--print-config"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mdpql(&["--duration", "0.0005", "--print-config"]);
    assert_eq!(out.status.code(), Some(2));
    let out = mdpql(&["--config", dir.path().join("missing.cfg").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}
