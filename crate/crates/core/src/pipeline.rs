//! The generate → simulate → analyze → report stages behind the CLI.

use crate::config::{ConfigError, RunConfig};
use crate::driver::{ModelKind, ModelParams};
use crate::engine::{detect_human_onset, run_batch, simulate_scenario, OnsetError, DEFAULT_ONSET_THRESHOLD};
use crate::generator::generate_suite;
use crate::metrics::{compute_event_metrics, EventMetrics};
use crate::report::{
    histogram_panels, read_metrics_csv, read_results_csv, summarize_model, write_excluded_csv,
    write_metrics_csv, write_panels, write_results_csv, write_summary_json, ExcludedRow, ExclusionReason,
    ReportError, SummaryReport, SUMMARY_SCHEMA,
};
use crate::scenario::{read_scenario_dir, write_scenario, Scenario, ScenarioError};
use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("no scenarios found in {}", .0.display())]
    NoScenarios(PathBuf),
    #[error("cannot create directory {path}: {source}")]
    CreateDir {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path} has no results; run simulate first")]
    MissingResults { path: String },
    #[error("results reference scenario '{0}', which is not in the scenario directory")]
    UnknownScenario(String),
}

/// How a stage finished when it did not fail outright.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Clean,
    /// Finished, but some scenarios were excluded.
    CompletedWithExclusions,
}

fn create_dir(path: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(path).map_err(|source| PipelineError::CreateDir {
        path: path.display().to_string(),
        source,
    })
}

fn model_params(cfg: &RunConfig) -> ModelParams {
    ModelParams {
        ccdm: cfg.ccdm,
        fsm: cfg.fsm,
    }
}

/// Writes the configured suite to the scenario directory.
pub fn generate(cfg: &RunConfig) -> Result<Vec<PathBuf>, PipelineError> {
    let dir = cfg.scenario_dir();
    create_dir(&dir)?;
    let suite = generate_suite(cfg.generate.n, cfg.generate.seed, cfg.generate.preset)?;
    suite
        .iter()
        .map(|s| {
            let path = dir.join(format!("{}.json", s.id));
            write_scenario(s, &path)?;
            Ok(path)
        })
        .collect()
}

fn load_scenarios(cfg: &RunConfig) -> Result<Vec<Scenario>, PipelineError> {
    let dir = cfg.scenario_dir();
    if !dir.is_dir() {
        return Err(PipelineError::NoScenarios(dir));
    }
    let scenarios = read_scenario_dir(&dir)?;
    if scenarios.is_empty() {
        return Err(PipelineError::NoScenarios(dir));
    }
    Ok(scenarios)
}

fn onset_reason(e: OnsetError) -> ExclusionReason {
    match e {
        OnsetError::NoOnset => ExclusionReason::NoOnset,
        OnsetError::AlreadyDecelerating => ExclusionReason::AlreadyDecelerating,
    }
}

#[derive(Debug, Clone)]
pub struct SimulateOutput {
    pub n_scenarios: usize,
    pub n_results: usize,
    pub excluded: Vec<ExcludedRow>,
    pub outcome: Outcome,
}

/// Runs every configured model on every scenario and writes
/// `results/results.csv` and `results/excluded.csv`.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateOutput, PipelineError> {
    cfg.validate()?;
    let scenarios = load_scenarios(cfg)?;
    let batch = run_batch(&scenarios, &cfg.models, &model_params(cfg), cfg.dt);

    let mut excluded: Vec<ExcludedRow> = batch
        .excluded
        .iter()
        .map(|e| ExcludedRow {
            scenario_id: e.scenario_id.clone(),
            model: "all".into(),
            reason: onset_reason(e.reason),
        })
        .collect();
    excluded.extend(
        batch
            .results
            .iter()
            .filter(|r| r.model_name != ModelKind::None.as_str() && r.brake_onset_time.is_none())
            .map(|r| ExcludedRow {
                scenario_id: r.scenario_id.clone(),
                model: r.model_name.clone(),
                reason: ExclusionReason::NeverBraked,
            }),
    );
    excluded.sort();

    let dir = cfg.results_dir();
    create_dir(&dir)?;
    write_results_csv(&dir.join("results.csv"), &batch.results)?;
    write_excluded_csv(&dir.join("excluded.csv"), &excluded)?;

    let outcome = if batch.excluded.is_empty() {
        Outcome::Clean
    } else {
        Outcome::CompletedWithExclusions
    };
    Ok(SimulateOutput {
        n_scenarios: scenarios.len(),
        n_results: batch.results.len(),
        excluded,
        outcome,
    })
}

#[derive(Debug, Clone)]
pub struct AnalyzeOutput {
    pub metrics: Vec<EventMetrics>,
    pub summary: SummaryReport,
}

/// Computes per-event metrics and the per-model summary from the stored
/// results. Worst-case runs missing from the results are simulated here.
pub fn analyze(cfg: &RunConfig) -> Result<AnalyzeOutput, PipelineError> {
    cfg.validate()?;
    let scenarios = load_scenarios(cfg)?;
    let results_path = cfg.results_dir().join("results.csv");
    if !results_path.is_file() {
        return Err(PipelineError::MissingResults {
            path: results_path.display().to_string(),
        });
    }
    let results = read_results_csv(&results_path)?;
    let by_id: BTreeMap<&str, &Scenario> = scenarios.iter().map(|s| (s.id.as_str(), s)).collect();
    let params = model_params(cfg);

    let mut worst_cases = BTreeMap::new();
    for r in results.iter().filter(|r| r.model_name == ModelKind::None.as_str()) {
        worst_cases.insert(r.scenario_id.clone(), r.clone());
    }

    let mut metrics = Vec::new();
    for r in results.iter().filter(|r| r.model_name != ModelKind::None.as_str()) {
        let scenario = *by_id
            .get(r.scenario_id.as_str())
            .ok_or_else(|| PipelineError::UnknownScenario(r.scenario_id.clone()))?;
        if !worst_cases.contains_key(&r.scenario_id) {
            let wc = simulate_scenario(scenario, ModelKind::None, &params, cfg.dt)
                .expect("scenario with results has a human onset");
            worst_cases.insert(r.scenario_id.clone(), wc);
        }
        metrics.push(compute_event_metrics(
            r.human_onset_time,
            r,
            &worst_cases[&r.scenario_id],
            scenario,
        ));
    }

    let mut models: Vec<&str> = results.iter().map(|r| r.model_name.as_str()).collect();
    models.sort_unstable();
    models.dedup();
    let summary = SummaryReport {
        schema: SUMMARY_SCHEMA.into(),
        alpha: cfg.alpha,
        n_scenarios: scenarios.len(),
        n_excluded_scenarios: scenarios
            .iter()
            .filter(|s| detect_human_onset(s, DEFAULT_ONSET_THRESHOLD).is_err())
            .count(),
        models: models
            .iter()
            .map(|m| {
                let mut s = summarize_model(m, &metrics, cfg.alpha);
                if *m == ModelKind::None.as_str() {
                    let rows: Vec<_> = worst_cases.values().collect();
                    s.n_events = rows.len();
                    s.n_crashes = rows.iter().filter(|r| r.collided).count();
                    s.n_no_crash = s.n_events - s.n_crashes;
                    s.worst_case_crashes = s.n_crashes;
                }
                s
            })
            .collect(),
    };

    let dir = cfg.analysis_dir();
    create_dir(&dir)?;
    write_metrics_csv(&dir.join("metrics.csv"), &metrics)?;
    write_summary_json(&dir.join("summary.json"), &summary)?;
    Ok(AnalyzeOutput { metrics, summary })
}

/// Writes histogram CSVs (and SVGs when asked) from `analysis/metrics.csv`.
pub fn report(cfg: &RunConfig, svg: bool) -> Result<Vec<String>, PipelineError> {
    cfg.validate()?;
    let dir = cfg.analysis_dir();
    let path = dir.join("metrics.csv");
    if !path.is_file() {
        return Err(PipelineError::MissingResults {
            path: path.display().to_string(),
        });
    }
    let metrics = read_metrics_csv(&path)?;
    let mut models: Vec<String> = metrics.iter().map(|m| m.model_name.clone()).collect();
    models.sort_unstable();
    models.dedup();
    let panels = histogram_panels(&metrics, &models, cfg.histogram_bin_time, cfg.histogram_bin_dist);
    write_panels(&dir, &panels, svg)?;
    Ok(panels.into_iter().map(|p| p.stem).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Preset;

    fn config(dir: &Path) -> RunConfig {
        let mut cfg = RunConfig {
            output_dir: dir.to_path_buf(),
            ..RunConfig::default()
        };
        cfg.generate.n = 6;
        cfg.generate.preset = Preset::StressLateral;
        cfg
    }

    #[test]
    fn full_pipeline() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        assert_eq!(generate(&cfg).unwrap().len(), 6);
        let sim = simulate(&cfg).unwrap();
        assert_eq!(sim.n_results, 18);
        assert_eq!(sim.outcome, Outcome::Clean);
        let out = analyze(&cfg).unwrap();
        assert_eq!(out.metrics.len(), 12);
        let names: Vec<_> = out.summary.models.iter().map(|m| m.model.as_str()).collect();
        assert_eq!(names, ["ccdm", "fsm", "none"]);
        for m in &out.summary.models {
            assert_eq!(m.n_crashes + m.n_no_crash, m.n_events);
            assert_eq!(m.n_events, 6);
        }
        let stems = report(&cfg, true).unwrap();
        for stem in stems {
            assert!(dir.path().join("analysis").join(format!("{stem}.csv")).is_file());
            assert!(dir.path().join("analysis").join(format!("{stem}.svg")).is_file());
        }
    }

    #[test]
    fn analyze_simulates_missing_worst_case() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path());
        generate(&cfg).unwrap();
        cfg.models = vec![ModelKind::Ccdm];
        simulate(&cfg).unwrap();
        let partial = analyze(&cfg).unwrap();
        cfg.models = ModelKind::ALL.to_vec();
        simulate(&cfg).unwrap();
        let full = analyze(&cfg).unwrap();
        let pick = |o: &AnalyzeOutput| -> Vec<bool> {
            o.metrics
                .iter()
                .filter(|m| m.model_name == "ccdm")
                .map(|m| m.worst_case_crashed)
                .collect()
        };
        assert_eq!(pick(&partial), pick(&full));
    }

    #[test]
    fn empty_scenario_dir_fails() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        fs::create_dir_all(cfg.scenario_dir()).unwrap();
        let err = simulate(&cfg).unwrap_err();
        assert!(err.to_string().contains("no scenarios found"));
    }

    #[test]
    fn exclusions_are_logged_once() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        generate(&cfg).unwrap();
        // Strip the human braking from one scenario so it has no onset.
        let path = cfg.scenario_dir().join("stress_lateral-002.json");
        let mut s = crate::scenario::read_scenario(&path).unwrap();
        let v = s.ego_traj[0].speed;
        for p in s.ego_traj.iter_mut() {
            p.x = v * p.t;
            p.speed = v;
            p.accel = 0.0;
        }
        write_scenario(&s, &path).unwrap();
        let sim = simulate(&cfg).unwrap();
        assert_eq!(sim.outcome, Outcome::CompletedWithExclusions);
        let scenario_level: Vec<_> = sim.excluded.iter().filter(|e| e.model == "all").collect();
        assert_eq!(scenario_level.len(), 1);
        assert_eq!(scenario_level[0].reason, ExclusionReason::NoOnset);
        let mut keys: Vec<_> = sim.excluded.iter().map(|e| (&e.scenario_id, &e.model)).collect();
        let n = keys.len();
        keys.dedup();
        assert_eq!(keys.len(), n);
        assert_eq!(
            crate::report::read_excluded_csv(&cfg.results_dir().join("excluded.csv")).unwrap(),
            sim.excluded
        );
    }
}
