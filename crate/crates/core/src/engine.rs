//! Counterfactual replay of a cut-in event.
//!
//! The human evasive maneuver is located at the first ego deceleration sample
//! at or below the onset threshold and removed by holding the ego speed from
//! that instant. A driver model then watches the modified event and, from its
//! first nonzero brake request, controls the ego's longitudinal motion through
//! a jerk-limited actuator. The POV always replays its recorded trajectory.

use crate::driver::{Driver, ModelKind, ModelParams};
use crate::kinematics::{
    boxes_overlap, footprint_clearance, interpolate, longitudinal_gap, TrajectorySample, Vehicle,
};
use crate::scenario::Scenario;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const DEFAULT_ONSET_THRESHOLD: f64 = -0.2;
pub const DEFAULT_DT: f64 = 0.01;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OnsetError {
    #[error("ego deceleration never reaches the onset threshold")]
    NoOnset,
    #[error("ego already decelerating at the first sample")]
    AlreadyDecelerating,
}

impl OnsetError {
    pub fn as_str(self) -> &'static str {
        match self {
            OnsetError::NoOnset => "NoOnset",
            OnsetError::AlreadyDecelerating => "AlreadyDecelerating",
        }
    }
}

/// Time of the first ego sample with `accel <= threshold`.
pub fn detect_human_onset(scenario: &Scenario, threshold: f64) -> Result<f64, OnsetError> {
    let traj = &scenario.ego_traj;
    match traj.iter().position(|s| s.accel <= threshold) {
        None => Err(OnsetError::NoOnset),
        Some(0) => Err(OnsetError::AlreadyDecelerating),
        Some(i) => Ok(traj[i].t),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModifiedScenario {
    pub base: Scenario,
    pub human_onset_time: f64,
    pub modified_ego_traj: Vec<TrajectorySample>,
}

/// Freezes the ego speed (and lateral pose) at `onset` and re-integrates `x`.
///
/// Panics if `onset` lies outside the ego trajectory.
pub fn neutralize(scenario: &Scenario, onset: f64) -> ModifiedScenario {
    let at = interpolate(&scenario.ego_traj, onset).expect("onset inside the ego trajectory");
    let mut traj: Vec<TrajectorySample> = scenario
        .ego_traj
        .iter()
        .take_while(|s| s.t < onset)
        .copied()
        .collect();
    let hold = |t: f64| TrajectorySample {
        t,
        x: at.x + at.speed * (t - onset),
        y: at.y,
        speed: at.speed,
        accel: 0.0,
        heading: at.heading,
    };
    traj.push(hold(onset));
    traj.extend(scenario.ego_traj.iter().filter(|s| s.t > onset).map(|s| hold(s.t)));
    ModifiedScenario {
        base: scenario.clone(),
        human_onset_time: onset,
        modified_ego_traj: traj,
    }
}

/// First-order jerk-limited brake: the applied deceleration moves towards the
/// target by at most `jerk_limit · dt` per step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BrakeActuator {
    pub current_decel: f64,
    pub target_decel: f64,
    pub jerk_limit: f64,
}

impl BrakeActuator {
    pub fn new(jerk_limit: f64) -> Self {
        Self {
            current_decel: 0.0,
            target_decel: 0.0,
            jerk_limit,
        }
    }

    /// Advances one step of length `dt`. Returns the speed loss over the step,
    /// i.e. the exact integral of the piecewise-linear deceleration.
    pub fn advance(&mut self, target: f64, dt: f64) -> f64 {
        self.target_decel = target.max(0.0);
        let a0 = self.current_decel;
        let diff = self.target_decel - a0;
        let max_change = self.jerk_limit * dt;
        if diff.abs() <= max_change {
            // reaches the target within the step
            let t_reach = if self.jerk_limit.is_finite() {
                diff.abs() / self.jerk_limit
            } else {
                0.0
            };
            self.current_decel = self.target_decel;
            0.5 * (a0 + self.target_decel) * t_reach + self.target_decel * (dt - t_reach)
        } else {
            let a1 = a0 + max_change * diff.signum();
            self.current_decel = a1;
            0.5 * (a0 + a1) * dt
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationResult {
    pub scenario_id: String,
    pub model_name: String,
    pub human_onset_time: f64,
    pub brake_onset_time: Option<f64>,
    pub detection_time: Option<f64>,
    pub armed_time: Option<f64>,
    pub collided: bool,
    pub collision_time: Option<f64>,
    pub min_gap: f64,
    #[serde(skip)]
    pub ego_trace: Vec<TrajectorySample>,
}

fn lateral_overlap(a: &Vehicle, b: &Vehicle) -> bool {
    (a.state.y - b.state.y).abs() < a.lateral_half_extent() + b.lateral_half_extent()
}

/// Separation measure for near-miss reporting: bumper gap while the vehicles
/// share lateral space, footprint clearance otherwise.
fn separation(ego: &Vehicle, pov: &Vehicle) -> f64 {
    if lateral_overlap(ego, pov) {
        longitudinal_gap(ego, pov)
    } else {
        footprint_clearance(&ego.footprint(), &pov.footprint())
    }
}

/// Replays the modified event with `driver` in control of ego braking.
pub fn simulate(modified: &ModifiedScenario, driver: &mut dyn Driver, dt: f64) -> SimulationResult {
    assert!(dt > 0.0, "dt must be positive");
    let sc = &modified.base;
    let ego_traj = &modified.modified_ego_traj;
    let start = ego_traj[0].t.max(sc.pov_traj[0].t);
    let end = ego_traj.last().unwrap().t.min(sc.pov_traj.last().unwrap().t);

    let mut result = SimulationResult {
        scenario_id: sc.id.clone(),
        model_name: driver.name().to_string(),
        human_onset_time: modified.human_onset_time,
        brake_onset_time: None,
        detection_time: None,
        armed_time: None,
        collided: false,
        collision_time: None,
        min_gap: f64::INFINITY,
        ego_trace: Vec::new(),
    };
    let mut actuator = BrakeActuator::new(driver.jerk_limit());
    // ego state once the model has taken over
    let mut controlled: Option<TrajectorySample> = None;

    let steps = ((end - start) / dt + 1e-9).floor() as usize;
    for k in 0..=steps {
        let t = (start + k as f64 * dt).min(end);
        let ego_state = match controlled {
            None => interpolate(ego_traj, t).expect("t inside the modified trajectory"),
            Some(prev) => {
                let target = actuator.target_decel;
                let loss = actuator.advance(target, dt);
                let speed = (prev.speed - loss).max(0.0);
                TrajectorySample {
                    t,
                    x: prev.x + 0.5 * (prev.speed + speed) * dt,
                    y: prev.y,
                    speed,
                    accel: -actuator.current_decel,
                    heading: prev.heading,
                }
            }
        };
        let pov_state = interpolate(&sc.pov_traj, t).expect("t inside the POV trajectory");
        let mut ego = Vehicle::new(ego_state, sc.ego_geom);
        let pov = Vehicle::new(pov_state, sc.pov_geom);

        let decision = driver.step(t, &ego, &pov, &sc.lane);
        result.detection_time = decision.detection_time;
        result.armed_time = decision.armed_time;
        if controlled.is_none() && decision.decel > 0.0 {
            result.brake_onset_time = Some(t);
            ego.state.accel = 0.0;
        }
        if controlled.is_some() || decision.decel > 0.0 {
            actuator.target_decel = decision.decel.max(0.0);
            controlled = Some(ego.state);
        }

        result.ego_trace.push(ego.state);
        if boxes_overlap(&ego.footprint(), &pov.footprint()) {
            result.collided = true;
            result.collision_time = Some(t);
            // contact counts as zero separation whatever the step's penetration
            result.min_gap = result.min_gap.min(0.0);
            break;
        }
        result.min_gap = result.min_gap.min(separation(&ego, &pov));
        if controlled.is_some() && ego.state.speed <= 0.0 {
            break;
        }
    }
    result
}

/// Detects the onset, neutralizes, and runs `kind` on one scenario.
pub fn simulate_scenario(
    scenario: &Scenario,
    kind: ModelKind,
    params: &ModelParams,
    dt: f64,
) -> Result<SimulationResult, OnsetError> {
    let onset = detect_human_onset(scenario, DEFAULT_ONSET_THRESHOLD)?;
    let modified = neutralize(scenario, onset);
    let mut driver = kind.build(params);
    Ok(simulate(&modified, driver.as_mut(), dt))
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Exclusion {
    pub scenario_id: String,
    pub reason: OnsetError,
}

impl fmt::Display for Exclusion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.scenario_id, self.reason.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BatchOutput {
    /// Sorted by (scenario id, model name).
    pub results: Vec<SimulationResult>,
    /// Sorted by scenario id.
    pub excluded: Vec<Exclusion>,
}

/// Runs every (scenario, model) pair in parallel; output order is fixed.
pub fn run_batch(scenarios: &[Scenario], models: &[ModelKind], params: &ModelParams, dt: f64) -> BatchOutput {
    let per_scenario: Vec<Result<Vec<SimulationResult>, Exclusion>> = scenarios
        .par_iter()
        .map(|sc| {
            let onset = detect_human_onset(sc, DEFAULT_ONSET_THRESHOLD).map_err(|reason| Exclusion {
                scenario_id: sc.id.clone(),
                reason,
            })?;
            let modified = neutralize(sc, onset);
            Ok(models
                .iter()
                .map(|kind| {
                    let mut driver = kind.build(params);
                    simulate(&modified, driver.as_mut(), dt)
                })
                .collect())
        })
        .collect();

    let mut out = BatchOutput::default();
    for r in per_scenario {
        match r {
            Ok(v) => out.results.extend(v),
            Err(e) => out.excluded.push(e),
        }
    }
    out.results
        .sort_by(|a, b| (&a.scenario_id, &a.model_name).cmp(&(&b.scenario_id, &b.model_name)));
    out.excluded.sort();
    out
}
