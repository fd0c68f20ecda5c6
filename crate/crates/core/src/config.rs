//! Run configuration, read from and dumped to TOML.

use crate::ccdm::CcdmParams;
use crate::driver::ModelKind;
use crate::engine::DEFAULT_DT;
use crate::fsm::FsmParams;
use crate::generator::Preset;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot parse config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: Box<toml::de::Error>,
    },
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub preset: Preset,
    pub n: usize,
    pub seed: u64,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        Self {
            preset: Preset::PaperLike,
            n: 38,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Defaults to `<output_dir>/scenarios`.
    pub scenario_dir: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub models: Vec<ModelKind>,
    pub dt: f64,
    pub histogram_bin_time: f64,
    pub histogram_bin_dist: f64,
    pub alpha: f64,
    pub generate: GenerateConfig,
    pub ccdm: CcdmParams,
    pub fsm: FsmParams,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario_dir: None,
            output_dir: PathBuf::from("out"),
            models: ModelKind::ALL.to_vec(),
            dt: DEFAULT_DT,
            histogram_bin_time: 0.25,
            histogram_bin_dist: 0.25,
            alpha: 0.01,
            generate: GenerateConfig::default(),
            ccdm: CcdmParams::default(),
            fsm: FsmParams::default(),
        }
    }
}

impl RunConfig {
    pub fn scenario_dir(&self) -> PathBuf {
        self.scenario_dir
            .clone()
            .unwrap_or_else(|| self.output_dir.join("scenarios"))
    }

    pub fn results_dir(&self) -> PathBuf {
        self.output_dir.join("results")
    }

    pub fn analysis_dir(&self) -> PathBuf {
        self.output_dir.join("analysis")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.models.is_empty() {
            return invalid("model set is empty".into());
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return invalid("dt must be positive".into());
        }
        if !(self.histogram_bin_time > 0.0 && self.histogram_bin_dist > 0.0) {
            return invalid("histogram bin widths must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return invalid("alpha must lie in (0, 1)".into());
        }
        if self.generate.n == 0 {
            return invalid("generate.n must be at least 1".into());
        }
        self.ccdm.validate().map_err(ConfigError::Invalid)?;
        self.fsm.validate().map_err(ConfigError::Invalid)?;
        Ok(())
    }

    pub fn from_toml(text: &str, source_name: &str) -> Result<Self, ConfigError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: source_name.to_string(),
            source: Box::new(e),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

/// Renders `cfg` as TOML with a comment on every key naming where its
/// default comes from.
pub fn dump_config(cfg: &RunConfig) -> String {
    let mut out = String::new();
    let key = |out: &mut String, name: &str, value: String, note: &str| {
        writeln!(out, "# {note}").unwrap();
        writeln!(out, "{name} = {value}").unwrap();
    };
    out.push_str("# refdriver run configuration. Units are SI.\n\n");
    if let Some(dir) = &cfg.scenario_dir {
        key(
            &mut out,
            "scenario_dir",
            toml_str(&dir.display().to_string()),
            "scenario directory; omitted means <output_dir>/scenarios",
        );
    }
    key(&mut out, "output_dir", toml_str(&cfg.output_dir.display().to_string()), "output root");
    let models: Vec<String> = cfg.models.iter().map(|m| toml_str(m.as_str())).collect();
    key(&mut out, "models", format!("[{}]", models.join(", ")), "models to simulate: ccdm, fsm, none");
    key(&mut out, "dt", num(cfg.dt), "simulation step, s");
    key(&mut out, "histogram_bin_time", num(cfg.histogram_bin_time), "t_diff histogram bin width, s");
    key(&mut out, "histogram_bin_dist", num(cfg.histogram_bin_dist), "LDBO histogram bin width, m");
    key(&mut out, "alpha", num(cfg.alpha), "significance level for the signed-rank tests");

    out.push_str("\n[generate]\n");
    key(&mut out, "preset", toml_str(cfg.generate.preset.as_str()), "paper_like, stress_lateral or slow_drift");
    key(&mut out, "n", cfg.generate.n.to_string(), "number of events");
    key(&mut out, "seed", cfg.generate.seed.to_string(), "suite seed; REFDRIVER_SEED overrides");

    let c = &cfg.ccdm;
    out.push_str("\n[ccdm]\n");
    key(&mut out, "wandering_half_width", num(c.wandering_half_width), "UN R157 CCDM: wandering zone half-width, m");
    key(&mut out, "risk_perception_time", num(c.risk_perception_time), "UN R157 CCDM: risk perception time, s");
    key(&mut out, "braking_delay", num(c.braking_delay), "UN R157 CCDM: delay from perception to braking, s");
    key(&mut out, "ttc_threshold", num(c.ttc_threshold), "UN R157 CCDM: brake gate, TTC below this, s");
    key(&mut out, "max_decel", num(c.max_decel), "UN R157 CCDM: full braking, m/s^2");
    key(&mut out, "jerk", num(c.jerk), "UN R157 CCDM: brake jerk, m/s^3");

    let f = &cfg.fsm;
    out.push_str("\n[fsm]\n");
    key(&mut out, "comfortable_decel", num(f.comfortable_decel), "UN R157 FSM: comfortable deceleration, m/s^2");
    key(&mut out, "max_decel", num(f.max_decel), "UN R157 FSM: maximum deceleration, m/s^2");
    key(&mut out, "jerk", num(f.jerk), "brake jerk shared with the CCDM, m/s^3");
    key(&mut out, "prediction_horizon", num(f.prediction_horizon), "lateral prediction horizon, s");
    key(&mut out, "reaction_time_proactive", num(f.reaction_time_proactive), "UN R157 FSM: reaction time of the proactive metric, s");
    key(&mut out, "lateral_speed_window", num(f.lateral_speed_window), "window of the lateral speed estimate, s");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dump_round_trips() {
        let cfg = RunConfig::default();
        assert_eq!(RunConfig::from_toml(&dump_config(&cfg), "dump").unwrap(), cfg);
        let custom = RunConfig {
            scenario_dir: Some("some dir/\"quoted\"".into()),
            models: vec![ModelKind::Fsm],
            dt: 0.005,
            generate: GenerateConfig {
                preset: Preset::SlowDrift,
                n: 5,
                seed: 99,
            },
            ..RunConfig::default()
        };
        assert_eq!(RunConfig::from_toml(&dump_config(&custom), "dump").unwrap(), custom);
    }

    #[test]
    fn every_key_is_annotated() {
        let text = dump_config(&RunConfig::default());
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if line.contains(" = ") {
                assert!(lines[i - 1].starts_with('#'), "no comment above {line}");
            }
        }
    }

    #[test]
    fn partial_files_use_defaults() {
        let cfg = RunConfig::from_toml("dt = 0.02\n[ccdm]\nmax_decel = 7.0\n", "mem").unwrap();
        assert_eq!(cfg.dt, 0.02);
        assert_eq!(cfg.ccdm.max_decel, 7.0);
        assert_eq!(cfg.ccdm.jerk, 12.65);
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(matches!(RunConfig::from_toml("models = []", "mem"), Err(ConfigError::Invalid(_))));
        assert!(matches!(
            RunConfig::from_toml("histogram_bin_time = 0.0", "mem"),
            Err(ConfigError::Invalid(_))
        ));
        assert!(matches!(RunConfig::from_toml("bogus = 1", "mem"), Err(ConfigError::Parse { .. })));
        assert!(matches!(RunConfig::from_toml("models = [\"human\"]", "mem"), Err(ConfigError::Parse { .. })));
    }
}
