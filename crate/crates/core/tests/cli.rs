mod common;

use std::path::Path;
use std::process::{Command, Output};

use tmle_core::harness::{DesignConfig, NonresponseConfig, ScenarioConfig};

fn tmle(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_tmle"));
    cmd.args(args).env_remove("TMLE_THREADS");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn write(dir: &Path, cfg: &ScenarioConfig) -> String {
    let path = dir.join("scenario.toml");
    std::fs::write(&path, cfg.to_toml_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn validate_accepts_shipped_scenarios() {
    for name in ["default.toml", "rare_event.toml", "drift.toml"] {
        let path = common::scenarios_dir().join(name);
        let out = tmle(&["validate", "--config", path.to_str().unwrap()], &[]);
        assert_eq!(out.status.code(), Some(0), "{name}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn config_problems_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "schema_version = 1\nname = \"x\"\nunknown = 3\n").unwrap();
    let missing = dir.path().join("missing.toml");
    for path in [&bad, &missing] {
        let out = tmle(&["validate", "--config", path.to_str().unwrap()], &[]);
        assert_eq!(out.status.code(), Some(1));
    }
    let out = tmle(&["frobnicate"], &[]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_reports_and_honours_thread_env() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), &common::small_default(2));
    let out_dir = dir.path().join("out");
    let run = |extra: &[&str], envs: &[(&str, &str)]| {
        let mut args = vec!["run", "--config", &config, "--out", out_dir.to_str().unwrap()];
        args.extend_from_slice(extra);
        tmle(&args, envs)
    };
    let out = run(&["--replicates", "2", "--seed", "9"], &[("TMLE_THREADS", "2")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(out_dir.join("run_manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 9\n"));
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 7);

    let out = run(&[], &[("TMLE_THREADS", "lots")]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&["--threads", "1"], &[("TMLE_THREADS", "lots")]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn widespread_replicate_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = common::small_default(5);
    cfg.target.design = DesignConfig::Srswor { n: 3 };
    cfg.nonresponse = Some(NonresponseConfig {
        intercept: -10.0,
        slope: 0.0,
        floor: 0.001,
    });
    let config = write(dir.path(), &cfg);
    let out_dir = dir.path().join("out");
    let out = tmle(&["run", "--config", &config, "--out", out_dir.to_str().unwrap()], &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}
