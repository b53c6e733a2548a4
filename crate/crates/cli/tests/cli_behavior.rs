//! Binary-level behavior: exit codes, config/flag/env precedence, file-based
//! ensemble specs, CSV output shape, and report plumbing.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_stochwalk"));
    c.env_remove("STOCHWALK_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn stochwalk")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn tmp(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("stochwalk_cli_{name}"));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn usage_errors_exit_2() {
    let cases: Vec<Vec<&str>> = vec![
        // no ensemble anywhere
        vec!["limit", "--replicates", "10"],
        // unknown ensemble kind
        vec!["limit", "--ensemble", "spiral", "--d", "3"],
        // missing companion flag
        vec!["limit", "--ensemble", "cyclic"],
        // check without a candidate t
        vec!["check", "--ensemble", "cyclic", "--d", "3"],
        // polling without a residue
        vec!["apps", "polling", "--ensemble", "cyclic", "--d", "3"],
        // sample with nothing to draw from
        vec!["sample", "--n", "5"],
        // mismatched pushforward totals
        vec![
            "pushforward",
            "--a",
            "[[1,2],[3,1]]",
            "--t",
            "3,4",
            "--s",
            "3,3",
            "--n",
            "500",
        ],
        // csv on a command that has no row-level data
        vec![
            "check",
            "--ensemble",
            "cyclic",
            "--d",
            "3",
            "--t",
            "2,2,2",
            "--csv",
            "/tmp/never.csv",
        ],
        // nonsense level
        vec![
            "limit",
            "--ensemble",
            "cyclic",
            "--d",
            "3",
            "--level",
            "1.5",
            "--replicates",
            "10",
        ],
        // bad value for the seed environment variable
        vec!["sample", "--t", "1,2", "--n", "2"],
    ];
    for (i, args) in cases.iter().enumerate() {
        let out = if i == cases.len() - 1 {
            bin().args(args).env("STOCHWALK_SEED", "not-a-number").output().unwrap()
        } else {
            run(args)
        };
        assert_eq!(
            code(&out),
            2,
            "case {i} {:?}: stderr {}",
            args,
            String::from_utf8_lossy(&out.stderr)
        );
        assert!(!out.stderr.is_empty(), "case {i} printed no error");
    }
}

#[test]
fn config_file_with_unknown_field_is_rejected() {
    let dir = tmp("badcfg");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"replcates": 10}"#).unwrap();
    let out = run(&[
        "limit",
        "--ensemble",
        "cyclic",
        "--d",
        "3",
        "--config",
        cfg.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 2);
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("replcates"), "got: {msg}");
}

#[test]
fn file_ensemble_identity_reports_nonconvergence() {
    let dir = tmp("identity");
    let spec = dir.join("identity.json");
    std::fs::write(
        &spec,
        r#"{"kind":"explicit_mixture","weights":[1.0],"matrices":[[[1,0,0],[0,1,0],[0,0,1]]]}"#,
    )
    .unwrap();
    let report_path = dir.join("report.json");
    let out = run(&[
        "limit",
        "--ensemble",
        &format!("file:{}", spec.display()),
        "--replicates",
        "1200",
        "--max-n",
        "50",
        "--seed",
        "4",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 1, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&report_path);
    assert_eq!(rep["pass"], Value::Bool(false));
    assert_eq!(rep["results"]["converged_fraction"], 0.0);
    assert!(rep["results"]["t_hat"].is_null());
}

#[test]
fn seed_precedence_flag_config_env_default() {
    let dir = tmp("seeds");
    let cfg = dir.join("cfg.json");
    std::fs::write(&cfg, r#"{"seed": 31, "t": [1.0, 2.0], "n": 4}"#).unwrap();
    let cfg_arg = cfg.to_str().unwrap();

    let report_seed = |out: &Output| -> u64 {
        assert_eq!(code(out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
        let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
        rep["seed"].as_u64().unwrap()
    };

    // flag beats config beats env beats the 0 default
    let flag = bin()
        .args(["sample", "--config", cfg_arg, "--seed", "5"])
        .env("STOCHWALK_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(report_seed(&flag), 5);

    let from_cfg = bin()
        .args(["sample", "--config", cfg_arg])
        .env("STOCHWALK_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(report_seed(&from_cfg), 31);

    let from_env = bin()
        .args(["sample", "--t", "1,2", "--n", "4"])
        .env("STOCHWALK_SEED", "77")
        .output()
        .unwrap();
    assert_eq!(report_seed(&from_env), 77);

    let fallback = run(&["sample", "--t", "1,2", "--n", "4"]);
    assert_eq!(report_seed(&fallback), 0);

    // same seed, same draws; different seed, different draws
    let a = run(&["sample", "--t", "1,2", "--n", "4", "--seed", "9"]);
    let b = run(&["sample", "--t", "1,2", "--n", "4", "--seed", "9"]);
    let c = run(&["sample", "--t", "1,2", "--n", "4", "--seed", "10"]);
    let draws = |o: &Output| -> Value {
        serde_json::from_slice::<Value>(&o.stdout).unwrap()["results"]["draws"].clone()
    };
    assert_eq!(draws(&a), draws(&b));
    assert_ne!(draws(&a), draws(&c));
}

#[test]
fn flags_override_config_fields() {
    let dir = tmp("override");
    let cfg = dir.join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"seed": 8, "ensemble": {"kind": "cyclic", "d": 3}, "replicates": 1500, "max_n": 400}"#,
    )
    .unwrap();
    let report_path = dir.join("report.json");
    let out = run(&[
        "limit",
        "--config",
        cfg.to_str().unwrap(),
        "--replicates",
        "1100",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&report_path);
    assert_eq!(rep["seed"], 8);
    assert_eq!(rep["config"]["replicates"], 1100);
    assert_eq!(rep["config"]["max_n"], 400);
    assert_eq!(rep["results"]["converged"], 1100);
}

#[test]
fn limit_csv_is_rfc4180() {
    let dir = tmp("csv");
    let csv_path = dir.join("rows.csv");
    let out = run(&[
        "limit",
        "--ensemble",
        "cyclic",
        "--d",
        "3",
        "--replicates",
        "1050",
        "--seed",
        "6",
        "--out",
        dir.join("r.json").to_str().unwrap(),
        "--csv",
        csv_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let raw = std::fs::read_to_string(&csv_path).unwrap();
    assert!(raw.ends_with("\r\n"));
    assert!(!raw.contains("\n\r"));
    let lines: Vec<&str> = raw.trim_end_matches("\r\n").split("\r\n").collect();
    assert_eq!(lines.len(), 1 + 1050);
    assert_eq!(lines[0], "replicate,converged,steps,x_1,x_2,x_3");
    for line in &lines[1..] {
        assert_eq!(line.split(',').count(), 6);
        assert!(!line.contains('\n'));
    }
    // data rows carry probabilities: sanity check one
    let fields: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(fields[0], "0");
    assert_eq!(fields[1], "1");
    let total: f64 = fields[3..].iter().map(|f| f.parse::<f64>().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-9);
}

#[test]
fn report_goes_to_stdout_without_out_flag() {
    let out = run(&["sample", "--t", "2,3", "--n", "3", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["command"], "sample");
    assert_eq!(rep["config"]["what"], "dirichlet");
    assert_eq!(rep["results"]["draws"].as_array().unwrap().len(), 3);
}

#[test]
fn sample_matrices_and_gamma_modes() {
    let out = run(&[
        "sample",
        "--ensemble",
        "leader",
        "--d",
        "3",
        "--n",
        "2",
        "--seed",
        "12",
    ]);
    assert_eq!(code(&out), 0);
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    let draws = rep["results"]["draws"].as_array().unwrap();
    assert_eq!(draws.len(), 2);
    assert_eq!(draws[0].as_array().unwrap().len(), 3);

    let out = run(&["sample", "--t", "1,1", "--what", "gamma", "--n", "5", "--seed", "2"]);
    assert_eq!(code(&out), 0);
    let rep: Value = serde_json::from_slice(&out.stdout).unwrap();
    for row in rep["results"]["draws"].as_array().unwrap() {
        let total: f64 = row.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).sum();
        // gamma vectors are unnormalized
        assert!(total > 0.0);
    }

    let out = run(&["sample", "--t", "1,2", "--what", "nonsense", "--n", "2"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn rectangular_pushforward_defaults_pass() {
    let dir = tmp("rect");
    let report_path = dir.join("report.json");
    let out = run(&[
        "pushforward",
        "--a",
        "ones2x3",
        "--n",
        "4000",
        "--seed",
        "21",
        "--out",
        report_path.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let rep = read_json(&report_path);
    assert_eq!(rep["config"]["t"], serde_json::json!([3.0, 3.0]));
    assert_eq!(rep["config"]["s"], serde_json::json!([2.0, 2.0, 2.0]));
    assert_eq!(rep["results"]["agree"], Value::Bool(true));
}
