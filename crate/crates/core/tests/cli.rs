use refdriver::config::RunConfig;
use refdriver::generator::{generate, CutinParams};
use refdriver::report::{read_excluded_csv, read_results_csv, ExclusionReason};
use refdriver::scenario::{read_scenario_dir, write_scenario};
use std::path::Path;
use std::process::{Command, Output};

fn refdriver(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_refdriver"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("REFDRIVER_SEED")
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn full_pipeline_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path();
    for stage in ["generate", "simulate", "analyze"] {
        let o = refdriver(&[stage, "--n", "8", "--seed", "3"], out);
        assert_eq!(o.status.code(), Some(0), "{stage}: {}", stderr(&o));
    }
    let o = refdriver(&["report", "--svg"], out);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    assert_eq!(read_scenario_dir(&out.join("scenarios")).unwrap().len(), 8);
    assert_eq!(read_results_csv(&out.join("results/results.csv")).unwrap().len(), 24);
    assert!(out.join("results/excluded.csv").is_file());
    assert!(out.join("analysis/metrics.csv").is_file());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("analysis/summary.json")).unwrap()).unwrap();
    assert_eq!(summary["n_scenarios"], 8);
    for stem in ["hist_t_diff_ccdm", "hist_t_diff_fsm", "hist_ldbo_ccdm", "hist_ldbo_fsm", "hist_ldbo_human"] {
        assert!(out.join("analysis").join(format!("{stem}.csv")).is_file(), "{stem}.csv");
        assert!(out.join("analysis").join(format!("{stem}.svg")).is_file(), "{stem}.svg");
    }
}

#[test]
fn empty_scenario_directory_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let o = refdriver(&["simulate", "--scenarios", empty.to_str().unwrap()], dir.path());
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("no scenarios found"), "{}", stderr(&o));
}

#[test]
fn dump_config_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let o = refdriver(&["dump-config", "--seed", "11", "--models", "fsm,none", "--dt", "0.02"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let text = String::from_utf8(o.stdout).unwrap();
    let cfg = RunConfig::from_toml(&text, "stdout").unwrap();
    assert_eq!(cfg.generate.seed, 11);
    assert_eq!(cfg.dt, 0.02);
    assert_eq!(cfg.models.len(), 2);

    let path = dir.path().join("run.toml");
    std::fs::write(&path, &text).unwrap();
    let again = refdriver(&["dump-config", "--config", path.to_str().unwrap()], dir.path());
    assert_eq!(String::from_utf8(again.stdout).unwrap(), text);
}

#[test]
fn seed_environment_variable_overrides_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_refdriver"))
        .args(["dump-config", "--seed", "1"])
        .env("REFDRIVER_SEED", "42")
        .output()
        .unwrap();
    let cfg = RunConfig::from_toml(&String::from_utf8(o.stdout).unwrap(), "stdout").unwrap();
    assert_eq!(cfg.generate.seed, 42);

    let bad = Command::new(env!("CARGO_BIN_EXE_refdriver"))
        .args(["dump-config"])
        .arg("--out")
        .arg(dir.path())
        .env("REFDRIVER_SEED", "seven")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(1));
    assert!(stderr(&bad).contains("REFDRIVER_SEED"));
}

#[test]
fn exclusions_exit_with_status_two() {
    let dir = tempfile::tempdir().unwrap();
    let scenarios = dir.path().join("scenarios");
    let o = refdriver(&["generate", "--n", "3"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let no_brake = generate(&CutinParams::default()).unwrap();
    write_scenario(&no_brake, &scenarios.join("no-brake.json")).unwrap();

    let o = refdriver(&["simulate"], dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
    assert!(stderr(&o).contains(&no_brake.id));
    let rows = read_excluded_csv(&dir.path().join("results/excluded.csv")).unwrap();
    let all: Vec<_> = rows.iter().filter(|r| r.model == "all").collect();
    assert_eq!(all.len(), 1);
    assert_eq!(all[0].scenario_id, no_brake.id);
    assert_eq!(all[0].reason, ExclusionReason::NoOnset);
}

#[test]
fn unknown_model_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let o = refdriver(&["dump-config", "--models", "ccdm,human"], dir.path());
    assert_ne!(o.status.code(), Some(0));
    assert!(stderr(&o).contains("human"));
}
