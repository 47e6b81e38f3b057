//! Binary-level behavior: exit codes, deterministic output, and agreement
//! between the CLI and the in-process API.

use std::path::PathBuf;
use std::process::Command;

use dulac_core::period::orbit_period;
use dulac_core::{IntegratorConfig, LoudParams};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dulac"))
}

fn tmp(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("dulac-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn period_scan_minimal_run() {
    let out = tmp("p1.csv");
    let status = bin()
        .args(["period-scan", "--D", "-0.5", "--F", "0.05", "--u0-min", "0.2"])
        .args(["--u0-max", "0.8", "--n", "4", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# config="));
    assert_eq!(text.lines().count(), 2 + 4);
    assert!(text.lines().nth(1).unwrap().starts_with("D,F,u0,period"));
    std::fs::remove_file(&out).ok();
}

#[test]
fn period_scan_matches_api() {
    let out = tmp("p2.csv");
    let status = bin()
        .args(["period-scan", "--D", "-0.5", "--F", "0.05", "--u0-min", "0.3"])
        .args(["--u0-max", "0.3", "--n", "1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&out).unwrap();
    let row = text.lines().nth(2).unwrap();
    let fields: Vec<&str> = row.split(',').collect();
    let a = LoudParams::new(-0.5, 0.05).unwrap();
    let sample = orbit_period(a, 0.3, &IntegratorConfig::default()).unwrap();
    assert_eq!(fields[3], format!("{:e}", sample.period));
    assert_eq!(fields[4], format!("{:e}", sample.dperiod_du0));
    assert_eq!(fields[6], "ok");
    std::fs::remove_file(&out).ok();
}

#[test]
fn reruns_are_byte_identical_across_worker_counts() {
    let out1 = tmp("d1.csv");
    let out2 = tmp("d2.csv");
    for (out, threads) in [(&out1, "1"), (&out2, "3")] {
        let status = bin()
            .env("RAYON_NUM_THREADS", threads)
            .args(["dulac-scan", "--D-grid", "-0.5,-0.2", "--F-grid", "0,0.05"])
            .args(["--s-grid", "0.2,0.1,0.05", "--out"])
            .arg(out)
            .status()
            .unwrap();
        assert_eq!(status.code(), Some(0));
    }
    let b1 = std::fs::read(&out1).unwrap();
    let b2 = std::fs::read(&out2).unwrap();
    assert_eq!(b1, b2);
    std::fs::remove_file(&out1).ok();
    std::fs::remove_file(&out2).ok();
}

#[test]
fn config_error_exits_one() {
    // D outside the admissible box.
    let status = bin()
        .args(["period-scan", "--D", "0.5", "--F", "0.0", "--out", "/tmp/never.csv"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(1));
    // Unknown flag is also a configuration error.
    let status = bin().args(["period-scan", "--bogus"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
    // Unknown check name.
    let status = bin().args(["verify", "--checks", "nonsense"]).status().unwrap();
    assert_eq!(status.code(), Some(1));
}

#[test]
fn partial_cell_failures_exit_two() {
    // eps = -0.6 violates the default scan bound |eps| <= 0.1.
    let out = tmp("d3.csv");
    let status = bin()
        .args(["dulac-scan", "--D-grid", "-0.5", "--F-grid", "0.3"])
        .args(["--s-grid", "0.1", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.contains("INVALID_CONFIG"));
    std::fs::remove_file(&out).ok();
}

#[test]
fn verify_smoke_and_seed_reproducibility() {
    let run = |seed: &str| {
        let output = bin()
            .args(["verify", "--points", "1", "--seed", seed])
            .output()
            .unwrap();
        assert_eq!(output.status.code(), Some(0));
        String::from_utf8(output.stdout).unwrap()
    };
    let first = run("123");
    let second = run("123");
    assert_eq!(first, second);
    assert!(first.contains("pullback"));
    assert!(first.contains("pass"));
}

#[test]
fn fit_json_is_emitted() {
    let out = tmp("d4.csv");
    let fit_out = tmp("d4.fit.json");
    let status = bin()
        .args(["dulac-scan", "--D-grid", "-0.5", "--F-grid", "0"])
        .args(["--s-grid", "0.1,0.05,0.025,0.0125,0.00625", "--fit", "--out"])
        .arg(&out)
        .arg("--fit-out")
        .arg(&fit_out)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(0));
    let text = std::fs::read_to_string(&fit_out).unwrap();
    let json_part = text.lines().skip(1).collect::<Vec<_>>().join("\n");
    let value: serde_json::Value = serde_json::from_str(&json_part).unwrap();
    let cell = &value["cells"][0];
    assert!(cell["stable"].as_bool().unwrap());
    assert!(cell["c0"].is_number());
    assert_eq!(cell["remainder_profile"].as_array().unwrap().len(), 5);
    std::fs::remove_file(&out).ok();
    std::fs::remove_file(&fit_out).ok();
}

#[test]
fn critical_periods_report_schema() {
    let output = bin()
        .args(["critical-periods", "--D0", "-0.5", "--n-d", "1", "--n-f", "1"])
        .args(["--n-u0", "2", "--window", "0.96,0.97"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(0));
    let stdout = String::from_utf8(output.stdout).unwrap();
    let json_part = stdout.lines().skip(1).collect::<Vec<_>>().join("\n");
    let value: serde_json::Value = serde_json::from_str(&json_part).unwrap();
    assert!(value["monotonicity"]["total_violations"].as_u64() == Some(0));
    assert_eq!(value["critical_periods"][0]["criticals"].as_array().unwrap().len(), 0);
}
