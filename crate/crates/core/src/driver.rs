//! Common interface for driver models that take over ego braking.

use crate::ccdm::{Ccdm, CcdmParams};
use crate::fsm::{Fsm, FsmParams};
use crate::kinematics::{LaneLayout, Vehicle};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Output of one model step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct DriverDecision {
    /// Requested deceleration magnitude, m/s².
    pub decel: f64,
    /// Time the model first perceived the threat, if it has.
    pub detection_time: Option<f64>,
    /// Time the model became ready to brake, if it has.
    pub armed_time: Option<f64>,
}

pub trait Driver {
    fn name(&self) -> &str;

    /// Jerk limit applied by the brake actuator while this model is in control.
    fn jerk_limit(&self) -> f64;

    /// Advances the model to time `t`. Called at monotonically increasing `t`.
    fn step(&mut self, t: f64, ego: &Vehicle, pov: &Vehicle, lane: &LaneLayout) -> DriverDecision;
}

/// The models a batch can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Ccdm,
    Fsm,
    None,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Ccdm, ModelKind::Fsm, ModelKind::None];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ccdm => "ccdm",
            ModelKind::Fsm => "fsm",
            ModelKind::None => "none",
        }
    }

    pub fn build(self, params: &ModelParams) -> Box<dyn Driver + Send> {
        match self {
            ModelKind::Ccdm => Box::new(Ccdm::new(params.ccdm)),
            ModelKind::Fsm => Box::new(Fsm::new(params.fsm)),
            ModelKind::None => Box::new(NoReaction),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ccdm" => Ok(ModelKind::Ccdm),
            "fsm" => Ok(ModelKind::Fsm),
            "none" => Ok(ModelKind::None),
            other => Err(format!("unknown model '{other}' (expected ccdm, fsm or none)")),
        }
    }
}

/// Parameter sets for every model.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ModelParams {
    pub ccdm: CcdmParams,
    pub fsm: FsmParams,
}

/// Worst-case reference: the ego never reacts.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoReaction;

impl Driver for NoReaction {
    fn name(&self) -> &str {
        "none"
    }

    fn jerk_limit(&self) -> f64 {
        f64::INFINITY
    }

    fn step(&mut self, _: f64, _: &Vehicle, _: &Vehicle, _: &LaneLayout) -> DriverDecision {
        DriverDecision::default()
    }
}

/// Brakes at a fixed time with a fixed target deceleration, regardless of the
/// traffic situation. Used for sensitivity sweeps over the brake onset.
#[derive(Debug, Clone, Copy)]
pub struct ScheduledBrake {
    pub onset: f64,
    pub decel: f64,
    pub jerk: f64,
}

impl Driver for ScheduledBrake {
    fn name(&self) -> &str {
        "scheduled"
    }

    fn jerk_limit(&self) -> f64 {
        self.jerk
    }

    fn step(&mut self, t: f64, _: &Vehicle, _: &Vehicle, _: &LaneLayout) -> DriverDecision {
        DriverDecision {
            decel: if t >= self.onset { self.decel } else { 0.0 },
            ..Default::default()
        }
    }
}
