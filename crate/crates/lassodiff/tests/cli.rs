use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lassodiff"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

/// Body of a CSV output without the `#` header line.
fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(p).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# {"));
    lines.map(|l| l.split(',').map(str::to_string).collect()).collect()
}

const CANONICAL: &str = r#"{"A": [[1.0]], "y": [0.0], "mu": 1.0}"#;

#[test]
fn lasso_scalar_soft_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"problem": {"A": [[1.0]], "y": [2.0], "mu": 1.0}}"#);
    let o = run(&["lasso", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("x* = [1]"), "{}", stdout(&o));
    let j = read_json(&dir.path().join("lasso.json"));
    assert_eq!(j["x"][0].as_f64().unwrap(), 1.0);
    assert!(j["kkt_residual"].as_f64().unwrap() <= 1e-8);
    assert_eq!(j["run"]["command"], "lasso");
}

#[test]
fn malformed_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"problem": {"A": [[1.0]], "y": [2.0]"#);
    let o = run(&["lasso", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(&["lasso", "--config", dir.path().join("absent.json").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_subcommand_and_flags_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["lasso", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));
}

#[test]
fn unknown_param_in_config_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(r#"{{"problem": {CANONICAL}, "params": {{"tolerance": 1}}}}"#);
    let cfg = write_config(dir.path(), "c.json", &body);
    let o = run(&["lasso", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn lasso_iteration_cap_exits_two_with_iterate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"problem": {"A": [[1.0, 0.99], [0.99, 1.0], [0.5, -0.3]], "y": [1.0, -2.0, 0.7], "mu": 0.05}}"#,
    );
    let o =
        run(&["lasso", "--max-iter", "1", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("last iterate = ["));
    let j = read_json(&dir.path().join("lasso.json"));
    assert_eq!(j["converged"], false);
    assert_eq!(j["x"].as_array().unwrap().len(), 2);
}

#[test]
fn every_subcommand_help_lists_defaults() {
    let expected: &[(&str, &[&str])] = &[
        ("lasso", &["--tol", "--max-iter"]),
        ("flow", &["--horizon", "--dt", "--tol-zero"]),
        ("simulate", &["--eps", "--dt", "--horizon", "--scheme", "--replicas"]),
        ("rate", &["--refine"]),
        ("mollify", &["--delta", "--grid"]),
        ("ldp", &["--eps", "--dt", "--replicas", "--scheme", "--m", "--multistarts"]),
        ("gibbs", &["--eps", "--dt", "--horizon", "--burn-in", "--decay-times", "--test-fn", "--outer", "--inner"]),
    ];
    for (cmd, flags) in expected {
        assert_eq!(run(&[cmd, "--help"]).status.code(), Some(0));
        // The short form keeps each flag and its default on one line.
        let o = run(&[cmd, "-h"]);
        assert_eq!(o.status.code(), Some(0));
        let text = stdout(&o);
        for flag in *flags {
            let line = text.lines().find(|l| l.contains(flag)).unwrap_or_else(|| panic!("{cmd}: no {flag}"));
            assert!(line.contains("[default:"), "{cmd} {flag}: {line}");
        }
        for global in ["--config", "--seed", "--out", "--threads"] {
            assert!(text.contains(global), "{cmd} lacks {global}");
        }
    }
}

#[test]
fn rate_of_constant_path_is_two() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"problem": {CANONICAL}, "path": {{"breakpoints": [0.0, 1.0], "values": [[1.0], [1.0]], "zero_flags": [[false]]}}}}"#
    );
    let cfg = write_config(dir.path(), "c.json", &body);
    let o = run(&["rate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("rate.csv"));
    assert_eq!(rows[0], ["interval", "coord", "branch", "contribution"]);
    assert_eq!(rows[1][2], "L2");
    let total = rows.last().unwrap();
    assert_eq!(total[0], "total");
    assert_eq!(total[3].parse::<f64>().unwrap(), 2.0);
}

#[test]
fn forced_flow_writes_trajectory_and_exact_path() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "c.json",
        r#"{"forcing": {"breakpoints": [0.0, 1.0], "values": [[-3.0]]}, "mu": 1.0, "x0": [1.0]}"#,
    );
    let o = run(&["flow", "--dt", "0.01", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(rows[0], ["t", "x_1", "frozen_mask"]);
    let last = rows.last().unwrap();
    assert_eq!(last[0].parse::<f64>().unwrap(), 1.0);
    assert!((last[1].parse::<f64>().unwrap() + 1.5).abs() < 1e-12);
    let exact = read_json(&dir.path().join("exact_flow.json"));
    assert_eq!(exact["breakpoints"], serde_json::json!([0.0, 0.25, 1.0]));
}

#[test]
fn flow_tracks_zero_with_frozen_mask() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(r#"{{"problem": {CANONICAL}, "x0": [0.5]}}"#);
    let cfg = write_config(dir.path(), "c.json", &body);
    let o = run(&["flow", "--dt", "0.1", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(rows[1][2], "0");
    assert_eq!(rows.last().unwrap()[2], "1");
    assert_eq!(rows.last().unwrap()[1].parse::<f64>().unwrap(), 0.0);
}

#[test]
fn simulate_writes_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let body =
        format!(r#"{{"problem": {CANONICAL}, "x0": [0.0], "seed": 11, "params": {{"replicas": 8, "dt": 0.01}}}}"#);
    let cfg = write_config(dir.path(), "c.json", &body);
    let o = run(&["simulate", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("ensemble.csv"));
    assert_eq!(rows[0], ["replica", "seed", "terminal_1", "occupation_pos_1"]);
    assert_eq!(rows.len(), 9);
    // Replica 0 of the ensemble is the recorded trajectory.
    let traj = csv_rows(&dir.path().join("trajectory.csv"));
    assert_eq!(traj.len(), 102);
    assert_eq!(traj.last().unwrap()[1], rows[1][2]);
    let header = fs::read_to_string(dir.path().join("ensemble.csv")).unwrap();
    let run_cfg: Value = serde_json::from_str(header.lines().next().unwrap().trim_start_matches("# ")).unwrap();
    assert_eq!(run_cfg["seed"], 11);
    assert_eq!(run_cfg["params"]["replicas"], 8);
}

#[test]
fn command_line_flags_beat_config_params() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(r#"{{"problem": {CANONICAL}, "seed": 1, "params": {{"replicas": 8, "dt": 0.01}}}}"#);
    let cfg = write_config(dir.path(), "c.json", &body);
    let o = run(&[
        "simulate",
        "--replicas",
        "3",
        "--seed",
        "9",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let rows = csv_rows(&dir.path().join("ensemble.csv"));
    assert_eq!(rows.len(), 4);
    let header = fs::read_to_string(dir.path().join("ensemble.csv")).unwrap();
    let run_cfg: Value = serde_json::from_str(header.lines().next().unwrap().trim_start_matches("# ")).unwrap();
    assert_eq!(run_cfg["seed"], 9);
    assert_eq!(run_cfg["params"]["dt"], 0.01);
}

#[test]
fn mollify_sampled_path() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"problem": {CANONICAL}, "samples": {{"times": [0.0, 0.25, 0.5, 0.75, 1.0], "states": [[1.0], [0.3], [0.0], [0.0], [-0.4]]}}}}"#
    );
    let cfg = write_config(dir.path(), "c.json", &body);
    let o = run(&["mollify", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let j = read_json(&dir.path().join("mollified.json"));
    assert_eq!(j["accepted"], true);
    assert!(j["sup_gap"].as_f64().unwrap() <= 0.05);
    assert!(j["path"]["zero_flags"].is_array());
}

#[test]
fn gibbs_quadrature_and_langevin_agree() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(r#"{{"problem": {CANONICAL}, "seed": 4}}"#);
    let cfg = write_config(dir.path(), "c.json", &body);
    let o = run(&[
        "gibbs",
        "--dt",
        "0.005",
        "--horizon",
        "2000",
        "--outer",
        "200",
        "--inner",
        "8",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("moments.csv"));
    assert_eq!(rows[0], ["coord", "quantity", "quadrature", "langevin", "stderr"]);
    let row = rows.iter().find(|r| r[1] == "mean_abs").unwrap();
    let (q, l, se): (f64, f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap(), row[4].parse().unwrap());
    // The discretisation bias at this dt is far below the printed error bar.
    assert!((q - l).abs() <= 3.0 * se + 5e-3, "quadrature {q}, langevin {l} +- {se}");
    let decay = csv_rows(&dir.path().join("decay.csv"));
    assert_eq!(decay[0], ["t", "cond_var", "bound", "stderr"]);
    assert_eq!(decay.len(), 5);
}

#[test]
fn ldp_report_is_reproducible_and_thread_independent() {
    let dir = tempfile::tempdir().unwrap();
    let body = format!(
        r#"{{"problem": {CANONICAL}, "x0": [0.0], "cost": {{"kind": "terminal", "target": [1.0], "weight": 1.0, "cap": 4.0}}, "seed": 2024,
            "params": {{"replicas": 2000, "dt": 0.01, "m": 8, "multistarts": 4}}}}"#
    );
    let cfg = write_config(dir.path(), "c.json", &body);
    let mut outputs = Vec::new();
    for (k, threads) in ["1", "4", "4"].iter().enumerate() {
        let out = dir.path().join(format!("run{k}"));
        let o = run(&["ldp", "--threads", threads, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        outputs.push((fs::read(out.join("ldp.json")).unwrap(), fs::read(out.join("ldp.csv")).unwrap()));
    }
    assert!(outputs.windows(2).all(|w| w[0] == w[1]));
    let j: Value = serde_json::from_slice(&outputs[0].0).unwrap();
    assert_eq!(j["report"]["variational"]["value"].as_f64().unwrap(), 1.0);
    assert_eq!(j["report"]["eps_values"], serde_json::json!([0.5, 0.35, 0.25]));
}
