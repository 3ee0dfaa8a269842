use std::fs;
use std::path::Path;
use std::process::Command;

use ddsym_cli::config::ExperimentConfig;
use ddsym_cli::figures::Figure;
use ddsym_cli::run::run_config;
use serde_json::Value;

const QUIET_XY4: &str = r#"
name = "quiet"
n_cycles = 10

[hamiltonian]
n_bath = 0
epsilon = 0.0

[sequence]
builder = "xy4"
tau = 5.0
symmetric = true
"#;

const TAU_SWEEP: &str = r#"
name = "tau-sweep"
n_cycles = 6
workers = 2

[hamiltonian]
n_bath = 2
bath_model = "secular_dipolar"
scale_b = 0.05
scale_d = 0.02
seed = 4
epsilon = 0.02

[sequence]
builder = "xy8"
tau = 5.0
symmetric = false

[[sweep]]
path = "sequence.tau"
values = [5.0, 10.0, 20.0, 50.0]
"#;

fn ddsym(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ddsym")).args(args).output().unwrap()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn static_qubit_never_decays() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(QUIET_XY4).unwrap();
    let out = run_config(&cfg, Some(dir.path())).unwrap();
    assert_eq!(out.results.len(), 1);
    let m = read_json(&dir.path().join("point_000/metrics.json"));
    assert_eq!(m["decay_time"]["status"], "not-decayed");
    assert_eq!(m["n_cycles"], 10);
    let csv = fs::read_to_string(dir.path().join("point_000/trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("time,mx,my,mz"));
    assert_eq!(lines.count(), 11);
}

#[test]
fn sweep_writes_one_record_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig::from_toml_str(TAU_SWEEP).unwrap();
    run_config(&cfg, Some(dir.path())).unwrap();
    let summary = read_json(&dir.path().join("summary.json"));
    assert_eq!(summary["n_points"], 4);
    for (i, tau) in [5.0, 10.0, 20.0, 50.0].iter().enumerate() {
        let m = read_json(&dir.path().join(format!("point_{i:03}/metrics.json")));
        assert_eq!(m["parameters"]["sequence.tau"], *tau);
        assert_eq!(m["cycle_time"], 8.0 * tau);
        assert!(dir.path().join(format!("point_{i:03}/aht.txt")).exists());
    }
    let echoed = ExperimentConfig::load(&dir.path().join("config.toml")).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let cfg = ExperimentConfig::from_toml_str(TAU_SWEEP).unwrap();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_config(&cfg, Some(a.path())).unwrap();
    let mut single = cfg.clone();
    single.workers = Some(1);
    run_config(&single, Some(b.path())).unwrap();
    for i in 0..4 {
        for file in ["trajectory.csv", "metrics.json", "aht.txt"] {
            let rel = format!("point_{i:03}/{file}");
            assert_eq!(
                fs::read(a.path().join(&rel)).unwrap(),
                fs::read(b.path().join(&rel)).unwrap(),
                "{rel}"
            );
        }
    }
}

#[test]
fn every_preset_expands() {
    for fig in Figure::ALL {
        let points = fig.preset().unwrap().expand().unwrap();
        assert!(!points.is_empty(), "{fig}");
    }
}

#[test]
fn simulate_subcommand_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("quiet.toml");
    fs::write(&cfg, QUIET_XY4).unwrap();
    let out_dir = dir.path().join("out");
    let out = ddsym(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("summary.json").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(
        &cfg,
        QUIET_XY4.replace("n_cycles = 10", "n_cycles = 10\ntotal_time = 50.0"),
    )
    .unwrap();
    let out = ddsym(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    fs::write(&cfg, QUIET_XY4.replace("tau = 5.0", "tau = -5.0")).unwrap();
    assert_eq!(
        ddsym(&["simulate", "--config", cfg.to_str().unwrap()]).status.code(),
        Some(2)
    );
    let missing = dir.path().join("missing.toml");
    assert_eq!(
        ddsym(&["simulate", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unknown_figure_exits_with_two() {
    let out = ddsym(&["reproduce", "fig6"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fig6"));
}

#[test]
fn parse_prints_canonical_form() {
    let out = ddsym(&["parse", "--dsl", "d2 2x[X d4 Y d4] P45 d2"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let again = ddsym(&["parse", "--dsl", text.trim()]);
    assert_eq!(String::from_utf8_lossy(&again.stdout), text);
    assert_eq!(ddsym(&["parse", "--dsl", "2x[X d4"]).status.code(), Some(2));
}

#[test]
fn aht_subcommand_prints_terms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.toml");
    fs::write(&cfg, TAU_SWEEP).unwrap();
    let out = ddsym(&["aht", "--config", cfg.to_str().unwrap(), "--order", "2"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.matches("# point").count(), 4);
}
