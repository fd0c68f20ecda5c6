//! Competent-and-careful driver model for cut-ins.
//!
//! The model watches the POV's lateral position. Once the POV leaves the
//! wandering zone around its lane center in the direction of the ego lane, a
//! fixed risk-perception time and braking delay elapse. After that the model
//! brakes at a constant deceleration as soon as the longitudinal TTC is
//! positive and below the threshold. Braking is latched until the event ends.

use crate::driver::{Driver, DriverDecision};
use crate::kinematics::{ttc, LaneLayout, Vehicle};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CcdmParams {
    pub wandering_half_width: f64,
    pub risk_perception_time: f64,
    pub braking_delay: f64,
    pub ttc_threshold: f64,
    pub max_decel: f64,
    pub jerk: f64,
}

impl Default for CcdmParams {
    fn default() -> Self {
        Self {
            wandering_half_width: 0.375,
            risk_perception_time: 0.4,
            braking_delay: 0.75,
            ttc_threshold: 2.0,
            max_decel: 7.6,
            jerk: 12.65,
        }
    }
}

impl CcdmParams {
    pub fn reaction_time(&self) -> f64 {
        self.risk_perception_time + self.braking_delay
    }

    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("wandering_half_width", self.wandering_half_width),
            ("risk_perception_time", self.risk_perception_time),
            ("braking_delay", self.braking_delay),
            ("ttc_threshold", self.ttc_threshold),
            ("max_decel", self.max_decel),
            ("jerk", self.jerk),
        ];
        match fields.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            Some((name, _)) => Err(format!("ccdm.{name} must be strictly positive")),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CcdmPhase {
    Idle,
    /// POV left the wandering zone at `detection_time`; reaction time running.
    Waiting { detection_time: f64 },
    /// Reaction time elapsed; waiting for the TTC gate.
    Armed { detection_time: f64, armed_time: f64 },
    Braking { detection_time: f64, armed_time: f64, onset_time: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CcdmState {
    pub phase: CcdmPhase,
}

impl Default for CcdmState {
    fn default() -> Self {
        Self {
            phase: CcdmPhase::Idle,
        }
    }
}

impl CcdmState {
    pub fn detection_time(&self) -> Option<f64> {
        match self.phase {
            CcdmPhase::Idle => None,
            CcdmPhase::Waiting { detection_time }
            | CcdmPhase::Armed { detection_time, .. }
            | CcdmPhase::Braking { detection_time, .. } => Some(detection_time),
        }
    }

    pub fn armed_time(&self) -> Option<f64> {
        match self.phase {
            CcdmPhase::Armed { armed_time, .. } | CcdmPhase::Braking { armed_time, .. } => {
                Some(armed_time)
            }
            _ => None,
        }
    }

    pub fn onset_time(&self) -> Option<f64> {
        match self.phase {
            CcdmPhase::Braking { onset_time, .. } => Some(onset_time),
            _ => None,
        }
    }
}

/// True when the POV center is more than the wandering half-width away from
/// its lane center, on the ego side.
pub fn outside_wandering_zone(params: &CcdmParams, pov: &Vehicle, pov_lane_center_y: f64, toward_ego: f64) -> bool {
    (pov.state.y - pov_lane_center_y) * toward_ego > params.wandering_half_width
}

/// One step of the CCDM state machine. Several transitions may fire within the
/// same step, so braking can start on the very step the reaction time elapses.
pub fn ccdm_step(
    state: CcdmState,
    params: &CcdmParams,
    t: f64,
    ego: &Vehicle,
    pov: &Vehicle,
    lane: &LaneLayout,
) -> (CcdmState, DriverDecision) {
    let mut phase = state.phase;

    if phase == CcdmPhase::Idle
        && outside_wandering_zone(params, pov, lane.pov_lane_center_y(), lane.toward_ego())
    {
        phase = CcdmPhase::Waiting { detection_time: t };
    }
    if let CcdmPhase::Waiting { detection_time } = phase {
        if t >= detection_time + params.reaction_time() {
            phase = CcdmPhase::Armed {
                detection_time,
                armed_time: t,
            };
        }
    }
    if let CcdmPhase::Armed {
        detection_time,
        armed_time,
    } = phase
    {
        if matches!(ttc(ego, pov), Some(v) if v > 0.0 && v < params.ttc_threshold) {
            phase = CcdmPhase::Braking {
                detection_time,
                armed_time,
                onset_time: t,
            };
        }
    }

    let state = CcdmState { phase };
    let decision = DriverDecision {
        decel: match phase {
            CcdmPhase::Braking { .. } => params.max_decel,
            _ => 0.0,
        },
        detection_time: state.detection_time(),
        armed_time: state.armed_time(),
    };
    (state, decision)
}

/// Stateful wrapper used by the simulation engine.
#[derive(Debug, Clone)]
pub struct Ccdm {
    pub params: CcdmParams,
    pub state: CcdmState,
}

impl Ccdm {
    pub fn new(params: CcdmParams) -> Self {
        Self {
            params,
            state: CcdmState::default(),
        }
    }
}

impl Driver for Ccdm {
    fn name(&self) -> &str {
        "ccdm"
    }

    fn jerk_limit(&self) -> f64 {
        self.params.jerk
    }

    fn step(&mut self, t: f64, ego: &Vehicle, pov: &Vehicle, lane: &LaneLayout) -> DriverDecision {
        let (state, decision) = ccdm_step(self.state, &self.params, t, ego, pov, lane);
        self.state = state;
        decision
    }
}
