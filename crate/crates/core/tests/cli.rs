// SPDX-License-Identifier: Apache-2.0

//! Command-line behaviour and exit codes.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures/falcon27.json")
}

fn synbench(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_synbench"));
    cmd.args(args).env_remove("SYNBENCH_WORKERS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn plan_lists_lines() {
    let o = synbench(&["plan", "--cal", s(&fixture())], &[]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(
        text.lines().any(|l| l.trim_start().starts_with("7  [1, 4, 7, 10, 12]")),
        "{text}"
    );

    let o = synbench(&["plan", "--cal", s(&fixture()), "--json"], &[]);
    let plan: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(plan["7"]["qubits"], serde_json::json!([1, 4, 7, 10, 12]));
    assert!(plan["0"].is_null());
}

#[test]
fn input_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.json");
    assert_eq!(code(&synbench(&["plan", "--cal", s(&missing)], &[])), 1);
    assert_eq!(code(&synbench(&["run"], &[])), 1);
    assert_eq!(code(&synbench(&["bogus"], &[])), 1);

    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"shots": 10, "no_such_field": 1}"#).unwrap();
    assert_eq!(
        code(&synbench(&["run", "--config", s(&bad), "--cal", s(&fixture())], &[])),
        1
    );

    fs::write(&bad, r#"{"noise": {"crosstalk_eta": 2.0}}"#).unwrap();
    assert_eq!(
        code(&synbench(&["run", "--config", s(&bad), "--cal", s(&fixture())], &[])),
        1
    );

    let out = dir.path().join("out");
    assert_eq!(
        code(&synbench(
            &["run", "--cal", s(&fixture()), "--shots", "0", "--out", s(&out)],
            &[]
        )),
        1
    );
    assert_eq!(
        code(&synbench(&["render", "--report", s(&missing), "--mode", "rates"], &[])),
        1
    );
    assert_eq!(
        code(&synbench(&["render", "--report", s(&missing), "--mode", "other"], &[])),
        1
    );
    assert_eq!(code(&synbench(&["--help"], &[])), 0);
}

#[test]
fn unwritable_output_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("taken");
    fs::write(&file, "").unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(&cfg, r#"{"qubits": [7], "bootstrap_resamples": 10}"#).unwrap();
    let o = synbench(
        &[
            "run",
            "--config",
            s(&cfg),
            "--cal",
            s(&fixture()),
            "--shots",
            "1000",
            "--out",
            s(&file),
        ],
        &[],
    );
    assert_eq!(code(&o), 2, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_then_render() {
    let dir = tempfile::tempdir().unwrap();
    fs::copy(fixture(), dir.path().join("device.json")).unwrap();
    let cfg = dir.path().join("cfg.json");
    fs::write(
        &cfg,
        r#"{"calibration": "device.json", "shots": 3000, "qubits": [7, 12], "bootstrap_resamples": 20,
            "dump_shots": true, "dump_circuits": true, "noise": {"crosstalk_eta": 0.5}}"#,
    )
    .unwrap();
    let run = |out: &Path, workers: &str| {
        let o = synbench(
            &["run", "--config", s(&cfg), "--seed", "11", "--out", s(out)],
            &[("SYNBENCH_WORKERS", workers)],
        );
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        fs::read_to_string(out.join("report.json")).unwrap()
    };
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let report = run(&a, "1");
    assert_eq!(report, run(&b, "3"));
    let json: serde_json::Value = serde_json::from_str(&report).unwrap();
    assert_eq!(json["meta"]["seed"], 11);
    assert_eq!(json["meta"]["shots"], 3000);
    for name in [
        "rates.csv",
        "rates.svg",
        "calibration.svg",
        "shots/q7_bit_flip_l0.txt",
        "circuits/q12_phase_flip_l1.txt",
    ] {
        assert!(a.join(name).is_file(), "{name}");
    }

    let svg_path = dir.path().join("map.svg");
    let o = synbench(
        &[
            "render",
            "--report",
            s(&a.join("report.json")),
            "--mode",
            "calibration",
            "--output",
            s(&svg_path),
        ],
        &[],
    );
    assert_eq!(code(&o), 0);
    assert!(fs::read_to_string(&svg_path).unwrap().starts_with("<svg"));
    let o = synbench(
        &["render", "--report", s(&a.join("report.json")), "--mode", "rates"],
        &[],
    );
    assert_eq!(code(&o), 0);
    assert_eq!(o.stdout, fs::read(a.join("rates.svg")).unwrap());
}
