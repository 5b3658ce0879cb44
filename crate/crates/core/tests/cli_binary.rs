use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn roughwave(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_roughwave"));
    cmd.args(args).env_remove("ROUGHWAVE_BUDGET");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn run_config(dir: &Path, name: &str, text: &str, extra: &[&str], envs: &[(&str, &str)]) -> Output {
    let conf = dir.join(format!("{name}.cfg"));
    std::fs::write(&conf, text).unwrap();
    let out = dir.join(name);
    let mut args = vec!["--config", conf.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    roughwave(&args, envs)
}

#[test]
fn listing_has_ten_anchored_entries() {
    let out = roughwave(&[], &[]);
    assert!(out.status.success());
    let list: Value = serde_json::from_slice(&out.stdout).unwrap();
    let list = list.as_array().unwrap();
    assert_eq!(list.len(), 10);
    assert!(list.iter().all(|e| !e["anchor"].as_str().unwrap().is_empty()));
}

#[test]
fn exit_codes_follow_error_class() {
    let dir = tempfile::tempdir().unwrap();
    let bad = run_config(dir.path(), "bad", "experiment = sim\nT = 16\nM = 256\nwhat = 1\n", &[], &[]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(!dir.path().join("bad").exists());
    let err: Value = serde_json::from_slice(&bad.stderr).unwrap();
    assert_eq!(err["error"], "invalid_config");

    let guard = run_config(dir.path(), "guard", "experiment = sim\nT = 16\nM = 256\ndt = 5\n", &[], &[]);
    assert_eq!(guard.status.code(), Some(3));

    let budget = run_config(dir.path(), "budget", "experiment = census\nkappa = 16\n", &[], &[("ROUGHWAVE_BUDGET", "10")]);
    assert_eq!(budget.status.code(), Some(4));
    assert!(!dir.path().join("budget").join("census.csv").exists());

    let missing = roughwave(&["--config", dir.path().join("nope.cfg").to_str().unwrap()], &[]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn csv_bytes_do_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let text = "experiment = frame_check\nT = 16\nM = 256\nk = 2.5\ntrials = 3\n";
    let a = run_config(dir.path(), "a", text, &["--jobs", "1"], &[]);
    let b = run_config(dir.path(), "b", text, &["--jobs", "4"], &[]);
    assert!(a.status.success() && b.status.success());
    let read = |d: &str| std::fs::read(dir.path().join(d).join("frame_check.csv")).unwrap();
    assert_eq!(read("a"), read("b"));

    let record: Value = serde_json::from_slice(&a.stdout).unwrap();
    assert_eq!(record["jobs"], 1);
    assert_eq!(record["artifacts"].as_array().unwrap().len(), 1);

    let c = run_config(dir.path(), "c", text, &["--seed", "11"], &[]);
    assert!(c.status.success());
    assert_ne!(read("a"), read("c"));
    let record: Value = serde_json::from_slice(&std::fs::read(dir.path().join("c").join("run.json")).unwrap()).unwrap();
    assert_eq!(record["seed"], 11);
}
