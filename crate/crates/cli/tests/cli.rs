use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_fading-ilms");

fn reference_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/ring20.json")
}

fn run(args: &[&str], threads: Option<usize>) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    match threads {
        Some(n) => cmd.env("FADING_ILMS_THREADS", n.to_string()),
        None => cmd.env_remove("FADING_ILMS_THREADS"),
    };
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn scalar_config(gain: f64) -> String {
    format!(
        r#"{{"nodes": 1, "dim": 1, "w_o": [1.0], "data": "complex", "profile_seed": 1,
            "step_size": 0.02, "regressors": {{"covariances": [[[1.0]]]}}, "noise_var": 0.01,
            "channels": {{"type": "deterministic", "gain": {gain}}},
            "sim": {{"iterations": 400, "runs": 8, "tail": 100, "seed": 5}}}}"#
    )
}

#[test]
fn reference_config_passes_and_writes_outputs() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let cfg = reference_config();
    let o = run(&["--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let steady = std::fs::read_to_string(out.join("steady_state.csv")).unwrap();
    assert_eq!(steady.lines().count(), 21);
    let curves = std::fs::read_to_string(out.join("curves.csv")).unwrap();
    assert_eq!(curves.lines().next(), Some("iter,node,msd,emse,mse"));
    assert_eq!(curves.lines().count(), 1 + 2000 * 20);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], serde_json::Value::Bool(true));
    assert!(summary["stability"]["ms_stable"].as_bool().unwrap());
    assert_eq!(summary["provenance"]["seed"], 1);
    assert!(out.join("resolved_config.json").exists());
}

#[test]
fn resolved_config_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = reference_config();
    let base = ["--runs", "10", "--iterations", "300", "--tail", "50", "--mode", "sim"];
    let mut args = vec!["--config", cfg.to_str().unwrap(), "--out", a.to_str().unwrap()];
    args.extend(base);
    assert_eq!(run(&args, None).status.code(), Some(0));
    let resolved = a.join("resolved_config.json");
    let mut args = vec!["--config", resolved.to_str().unwrap(), "--out", b.to_str().unwrap()];
    args.extend(["--mode", "sim"]);
    assert_eq!(run(&args, None).status.code(), Some(0));
    for f in ["steady_state.csv", "curves.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let dir = TempDir::new().unwrap();
    let cfg = reference_config();
    let mut outputs = Vec::new();
    for threads in [1, 4] {
        let out = dir.path().join(format!("t{threads}"));
        let o = run(
            &[
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--runs",
                "20",
                "--iterations",
                "500",
                "--tail",
                "100",
            ],
            Some(threads),
        );
        assert!(matches!(o.status.code(), Some(0) | Some(2)));
        outputs.push(out);
    }
    for f in ["steady_state.csv", "curves.csv"] {
        let a = std::fs::read(outputs[0].join(f)).unwrap();
        let b = std::fs::read(outputs[1].join(f)).unwrap();
        assert!(a == b, "{f} differs between thread counts");
    }
}

#[test]
fn theory_mode_leaves_simulation_columns_empty() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.json", &scalar_config(1.0));
    let out = dir.path().join("out");
    let o = run(&["--config", &cfg, "--mode", "theory", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(0));
    let steady = std::fs::read_to_string(out.join("steady_state.csv")).unwrap();
    let row: Vec<&str> = steady.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "");
    assert_eq!(row[11], "");
    assert!(!out.join("curves.csv").exists());
}

#[test]
fn unstable_profile_exits_three() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.json", &scalar_config(1.2));
    let out = dir.path().join("out");
    let o = run(&["--config", &cfg, "--mode", "theory", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn tolerance_failure_exits_two() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.json", &scalar_config(0.9));
    let out = dir.path().join("out");
    let o = run(&["--config", &cfg, "--tol-db", "0", "--runs", "2", "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(2));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], serde_json::Value::Bool(false));
}

#[test]
fn config_errors_exit_four() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let bad = write_config(
        dir.path(),
        "bad.json",
        &scalar_config(1.0).replace("\"noise_var\": 0.01", "\"noise_var\": -0.01"),
    );
    let o = run(&["--config", &bad, "--out", out.to_str().unwrap()], None);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("node 1"));
    let unknown =
        write_config(dir.path(), "unknown.json", &scalar_config(1.0).replace("\"nodes\"", "\"colour\": 1, \"nodes\""));
    assert_eq!(run(&["--config", &unknown, "--out", out.to_str().unwrap()], None).status.code(), Some(4));
    let missing = dir.path().join("missing.json");
    assert_eq!(run(&["--config", missing.to_str().unwrap()], None).status.code(), Some(4));
}

#[test]
fn seed_flag_changes_simulation() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "s.json", &scalar_config(0.9));
    let mut files = Vec::new();
    for seed in ["1", "2"] {
        let out = dir.path().join(seed);
        run(&["--config", &cfg, "--mode", "sim", "--seed", seed, "--out", out.to_str().unwrap()], None);
        files.push(std::fs::read(out.join("curves.csv")).unwrap());
    }
    assert_ne!(files[0], files[1]);
}
