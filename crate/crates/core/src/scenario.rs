//! Scenario type and its JSON interchange format.
//!
//! One UTF-8 JSON document per scenario. All values are SI (m, s, m/s, m/s²,
//! rad); `x` forward along the road, `y` left-positive.

use crate::kinematics::{LaneLayout, TrajectorySample, Vehicle, VehicleGeometry};
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;
use thiserror::Error;

pub const FORMAT_VERSION: &str = "1.0";

/// Largest allowed spacing between consecutive samples.
pub const MAX_SAMPLE_SPACING: f64 = 0.2;
/// Shortest common time span of the two trajectories.
pub const MIN_COMMON_SPAN: f64 = 1.0;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("parse error in {source_name} at line {line}, column {column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invariant violated ({0})")]
    InvariantViolation(String),
    #[error("invalid generator parameters: {0}")]
    InvalidParams(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: String,
    pub lane: LaneLayout,
    pub ego_geom: VehicleGeometry,
    pub pov_geom: VehicleGeometry,
    pub ego_traj: Vec<TrajectorySample>,
    pub pov_traj: Vec<TrajectorySample>,
}

impl Scenario {
    /// Common time interval covered by both trajectories.
    pub fn common_span(&self) -> Option<(f64, f64)> {
        let start = self.ego_traj.first()?.t.max(self.pov_traj.first()?.t);
        let end = self.ego_traj.last()?.t.min(self.pov_traj.last()?.t);
        (end >= start).then_some((start, end))
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |m: &str| Err(ScenarioError::InvariantViolation(m.to_string()));
        if self.id.is_empty() {
            return fail("id non-empty");
        }
        if !self.ego_geom.is_valid() || !self.pov_geom.is_valid() {
            return fail("vehicle length > 0 and width > 0");
        }
        self.lane.check().map_err(ScenarioError::InvariantViolation)?;
        for traj in [&self.ego_traj, &self.pov_traj] {
            if traj.len() < 2 {
                return fail("trajectory has at least two samples");
            }
            for s in traj {
                let vals = [s.t, s.x, s.y, s.speed, s.accel, s.heading];
                if vals.iter().any(|v| !v.is_finite()) {
                    return fail("sample values finite");
                }
                if s.speed < 0.0 {
                    return fail("speed >= 0");
                }
            }
            for w in traj.windows(2) {
                if w[1].t <= w[0].t {
                    return fail("t strictly increasing");
                }
                if w[1].t - w[0].t > MAX_SAMPLE_SPACING + 1e-9 {
                    return fail("sample spacing <= 0.2 s");
                }
            }
        }
        match self.common_span() {
            Some((a, b)) if b - a >= MIN_COMMON_SPAN - 1e-9 => {}
            _ => return fail("common time interval >= 1 s"),
        }
        let ego0 = Vehicle::new(self.ego_traj[0], self.ego_geom);
        let pov0 = Vehicle::new(self.pov_traj[0], self.pov_geom);
        let lateral_clearance = (pov0.state.y - ego0.state.y).abs()
            - (ego0.lateral_half_extent() + pov0.lateral_half_extent());
        if lateral_clearance <= 0.0 {
            return fail("POV initially clear of the ego corridor");
        }
        Ok(())
    }
}

/// On-disk layout: the scenario fields with a version tag in front.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    format_version: String,
    id: String,
    lane: LaneLayout,
    ego_geom: VehicleGeometry,
    pov_geom: VehicleGeometry,
    ego_traj: Vec<TrajectorySample>,
    pov_traj: Vec<TrajectorySample>,
}

pub fn to_json(s: &Scenario) -> String {
    let file = ScenarioFile {
        format_version: FORMAT_VERSION.to_string(),
        id: s.id.clone(),
        lane: s.lane,
        ego_geom: s.ego_geom,
        pov_geom: s.pov_geom,
        ego_traj: s.ego_traj.clone(),
        pov_traj: s.pov_traj.clone(),
    };
    let mut out = serde_json::to_string_pretty(&file).expect("scenario serializes");
    out.push('\n');
    out
}

pub fn from_json(text: &str, source_name: &str) -> Result<Scenario, ScenarioError> {
    let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ScenarioError::Parse {
        source_name: source_name.to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if file.format_version != FORMAT_VERSION {
        return Err(ScenarioError::Parse {
            source_name: source_name.to_string(),
            line: 1,
            column: 1,
            message: format!(
                "field format_version: unsupported '{}' (expected '{FORMAT_VERSION}')",
                file.format_version
            ),
        });
    }
    let s = Scenario {
        id: file.id,
        lane: file.lane,
        ego_geom: file.ego_geom,
        pov_geom: file.pov_geom,
        ego_traj: file.ego_traj,
        pov_traj: file.pov_traj,
    };
    s.validate()?;
    Ok(s)
}

pub fn write_scenario(s: &Scenario, path: &Path) -> Result<(), ScenarioError> {
    fs::write(path, to_json(s)).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_scenario(path: &Path) -> Result<Scenario, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io {
        path: path.display().to_string(),
        source,
    })?;
    from_json(&text, &path.display().to_string())
}

/// Reads every `*.json` file in `dir`, sorted by file name.
pub fn read_scenario_dir(dir: &Path) -> Result<Vec<Scenario>, ScenarioError> {
    let io = |source| ScenarioError::Io {
        path: dir.display().to_string(),
        source,
    };
    let mut paths: Vec<_> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_scenario(p)).collect()
}
