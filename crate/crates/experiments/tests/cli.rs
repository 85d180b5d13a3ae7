use std::path::Path;
use std::process::Command;

const SMALL: &str = r#"{
    "experiment": "bv_decay",
    "problem": {
        "flux": {"kind": "burgers"},
        "noise": {"kind": "linear", "lambda": 0.3},
        "epsilon": 0.005,
        "initial": {"kind": "step", "left": 1.0, "right": 0.0, "position": 3.14159},
        "T": 0.25
    },
    "grid": {"dim": 1, "cells": [64], "length": [6.283185307179586]},
    "mc": {"paths": 8, "seed": 7},
    "scales": [],
    "options": {"path_steps": 32, "snapshots": 4}
}"#;

fn sbl(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_sbl")).args(args).output().expect("binary runs")
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn run_writes_tables_and_report_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = SMALL.replace("\"scales\": []", &format!("\"scales\": [], \"output\": {:?}", out.to_str().unwrap()));
    let path = write(dir.path(), "bv.json", &cfg);
    let run = sbl(&["run", &path]);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stdout));
    for f in ["bv_decay.json", "bv_decay.csv", "bv_decay_fit.csv", "bv_decay_summary.csv"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let rep = sbl(&["report", out.to_str().unwrap()]);
    assert_eq!(rep.status.code(), Some(0));
    let text = String::from_utf8_lossy(&rep.stdout);
    assert!(text.contains("PASS") && !text.contains("differs"));
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write(dir.path(), "a.json", &SMALL.replace("\"scales\"", "\"scalez\""));
    assert_eq!(sbl(&["run", &unknown]).status.code(), Some(2));
    let bad_steps = write(dir.path(), "b.json", &SMALL.replace("\"path_steps\": 32", "\"path_steps\": 30"));
    assert_eq!(sbl(&["validate", &bad_steps]).status.code(), Some(2));
    assert_eq!(sbl(&["run", "/nonexistent/config.json"]).status.code(), Some(2));
}

#[test]
fn validate_accepts_good_config() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "c.json", SMALL);
    let v = sbl(&["validate", &good]);
    assert_eq!(v.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&v.stdout).contains("digest"));
}

#[test]
fn report_on_empty_directory_fails() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(sbl(&["report", dir.path().to_str().unwrap()]).status.code(), Some(1));
}
