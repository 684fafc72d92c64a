//! End-to-end tests against the built binary.

#![allow(clippy::excessive_precision)] // frozen oracle values

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lrfhss-rep"))
}

fn run(args: &[&str]) -> Output {
    binary().args(args).output().expect("binary runs")
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn field(text: &str, label: &str) -> f64 {
    text.lines()
        .find(|line| line.starts_with(label))
        .unwrap_or_else(|| panic!("no '{label}' line in:\n{text}"))
        .split('=')
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap()
}

#[test]
fn analytic_prints_the_delivery_report() {
    let output = run(&[
        "analytic",
        "--dr",
        "8",
        "--scheme",
        "none",
        "--r",
        "1",
        "--nodes",
        "1000",
        "--lambda-per-hour",
        "4",
        "--payload-bytes",
        "15",
    ]);
    assert!(output.status.success());
    let text = stdout_of(&output);
    assert!((field(&text, "S_H") - 0.9999974463915308).abs() < 1e-9);
    assert!((field(&text, "xi_P") - 0.99278335785899358).abs() < 1e-9);
    assert!((field(&text, "S ") - 0.99999744639149457).abs() < 1e-9);
    assert!((field(&text, "MDP") - 0.99999744639149457).abs() < 1e-9);
    assert!((field(&text, "ToA_M") - 1.617).abs() < 1e-9);
    // EE = MDP / (p_t * ToA_M) = 0.999997446 * 24.6201095.
    assert!((field(&text, "EE") - 24.6200466274).abs() < 1e-5);
}

#[test]
fn analytic_scheme_flags_change_the_answer() {
    let base = stdout_of(&run(&["analytic", "--nodes", "20000"]));
    let frame = stdout_of(&run(&[
        "analytic", "--nodes", "20000", "--scheme", "frame", "--r", "3",
    ]));
    assert!(field(&frame, "MDP") > field(&base, "MDP"));
}

#[test]
fn simulate_lone_node_is_certain() {
    let output = run(&["simulate", "--nodes", "1", "--runs", "200", "--seed", "5"]);
    assert!(output.status.success());
    let text = stdout_of(&output);
    assert_eq!(field(&text, "simulated"), 1.0);
}

#[test]
fn identical_invocations_print_identical_output() {
    let args = [
        "simulate",
        "--nodes",
        "5000",
        "--scheme",
        "fragment",
        "--r",
        "2",
        "--runs",
        "500",
        "--seed",
        "11",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn config_file_supplies_defaults_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.json");
    fs::write(
        &config,
        r#"{"dr": 9, "nodes": 2500, "scheme": "frame", "r": 2}"#,
    )
    .unwrap();
    let from_config = stdout_of(&run(&["analytic", "--config", config.to_str().unwrap()]));
    assert!(from_config.contains("DR9 frame r=2"));
    let overridden = stdout_of(&run(&[
        "analytic",
        "--config",
        config.to_str().unwrap(),
        "--r",
        "3",
    ]));
    assert!(overridden.contains("DR9 frame r=3"));
}

#[test]
fn usage_errors_exit_2() {
    // Unknown flag (clap).
    assert_eq!(run(&["analytic", "--bogus"]).status.code(), Some(2));
    // Unsupported data rate.
    assert_eq!(run(&["analytic", "--dr", "7"]).status.code(), Some(2));
    // Unknown scheme name.
    assert_eq!(
        run(&["analytic", "--scheme", "mirror"]).status.code(),
        Some(2)
    );
    // r = 2 with scheme none.
    assert_eq!(run(&["analytic", "--r", "2"]).status.code(), Some(2));
    // Missing config file.
    assert_eq!(
        run(&["sweep", "--config", "/nonexistent/spec.json"])
            .status
            .code(),
        Some(2)
    );
    // Unknown figure id.
    assert_eq!(
        run(&["reproduce", "--figure", "fig9", "--out", "/tmp/x"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sweep_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.json");
    fs::write(
        &config,
        r#"{"node_counts": [500, 5000], "dr_list": [8],
            "scheme_r_list": [{"scheme": "none", "r": 1}, {"scheme": "frame", "r": 2}]}"#,
    )
    .unwrap();
    let out = dir.path().join("records.csv");
    let output = run(&[
        "sweep",
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let text = fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1 + 4);
    assert!(text.starts_with("dr,scheme,r,"));

    // Without --out the CSV goes to stdout.
    let piped = run(&["sweep", "--config", config.to_str().unwrap()]);
    assert!(piped.status.success());
    assert_eq!(stdout_of(&piped), text);
}

#[test]
fn reproduce_fig3_emits_ten_series() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("fig3");
    let output = run(&[
        "reproduce",
        "--figure",
        "fig3",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(output.status.success());
    let listed = stdout_of(&output);
    assert_eq!(listed.lines().count(), 11); // records CSV + 10 series

    let series: Vec<_> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|ext| ext == "dat"))
        .collect();
    assert_eq!(series.len(), 10);
    assert!(out.join("fig3_records.csv").exists());
    for path in &series {
        assert_well_formed_series(path);
    }
}

fn assert_well_formed_series(path: &Path) {
    let text = fs::read_to_string(path).unwrap();
    assert!(!text.is_empty());
    for line in text.lines() {
        let mut columns = line.split_whitespace();
        columns.next().unwrap().parse::<u64>().unwrap();
        columns.next().unwrap().parse::<f64>().unwrap();
        assert!(columns.next().is_none());
    }
}

#[test]
fn thread_cap_does_not_change_results() {
    let args = [
        "simulate",
        "--nodes",
        "2000",
        "--runs",
        "400",
        "--seed",
        "3",
    ];
    let capped = binary()
        .env("LRFHSS_REP_THREADS", "1")
        .args(args)
        .output()
        .unwrap();
    let free = run(&args);
    assert!(capped.status.success());
    assert_eq!(capped.stdout, free.stdout);
}
