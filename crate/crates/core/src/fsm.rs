//! Fuzzy Safety Model.
//!
//! Each step the model predicts the POV's lateral path at constant lateral
//! velocity and finds when (if ever, within the horizon) it would encroach on
//! the ego footprint corridor. The longitudinal situation at that instant gives
//! the deceleration needed to avoid contact, which is mapped onto two fuzzy
//! memberships:
//!
//! * PFS (proactive) uses the gap shortened by a reaction distance and
//!   saturates at the comfortable deceleration.
//! * CFS (critical) grows linearly between the comfortable and maximum
//!   deceleration.
//!
//! The command is proportional to PFS below the comfortable deceleration and
//! interpolates towards the maximum deceleration with CFS above it.

use crate::driver::{Driver, DriverDecision};
use crate::kinematics::{interpolate, longitudinal_gap, LaneLayout, TrajectorySample, Vehicle, VehicleGeometry};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FsmError {
    #[error("POV history spans {available} s, need {required} s")]
    InsufficientHistory { available: f64, required: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FsmParams {
    pub comfortable_decel: f64,
    pub max_decel: f64,
    pub jerk: f64,
    pub prediction_horizon: f64,
    pub reaction_time_proactive: f64,
    pub lateral_speed_window: f64,
}

impl Default for FsmParams {
    fn default() -> Self {
        Self {
            comfortable_decel: 4.0,
            max_decel: 6.0,
            jerk: 12.65,
            prediction_horizon: 4.0,
            reaction_time_proactive: 0.75,
            lateral_speed_window: 0.3,
        }
    }
}

impl FsmParams {
    pub fn validate(&self) -> Result<(), String> {
        let fields = [
            ("comfortable_decel", self.comfortable_decel),
            ("max_decel", self.max_decel),
            ("jerk", self.jerk),
            ("prediction_horizon", self.prediction_horizon),
            ("reaction_time_proactive", self.reaction_time_proactive),
            ("lateral_speed_window", self.lateral_speed_window),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !(*v > 0.0 && v.is_finite())) {
            return Err(format!("fsm.{name} must be strictly positive"));
        }
        if self.comfortable_decel >= self.max_decel {
            return Err("fsm.comfortable_decel must be below fsm.max_decel".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct FuzzyAssessment {
    pub pfs: f64,
    pub cfs: f64,
    /// Predicted time from now until the POV enters the ego corridor.
    pub encroachment_time: Option<f64>,
}

/// Deceleration that brings the closing speed to zero within `gap`.
/// `None` encodes an unbounded requirement (gap already used up).
fn required_decel(closing: f64, gap: f64) -> Option<f64> {
    if closing <= 0.0 {
        Some(0.0)
    } else if gap <= 0.0 {
        None
    } else {
        Some(closing * closing / (2.0 * gap))
    }
}

fn membership(value: Option<f64>, lo: f64, hi: f64) -> f64 {
    match value {
        None => 1.0,
        Some(v) => ((v - lo) / (hi - lo)).clamp(0.0, 1.0),
    }
}

/// Lateral and longitudinal safety check. `pov_history` holds POV samples up to
/// and including the current one, in time order.
pub fn fsm_assess(
    params: &FsmParams,
    ego: &Vehicle,
    pov_history: &[TrajectorySample],
    pov_geom: VehicleGeometry,
) -> Result<FuzzyAssessment, FsmError> {
    let (first, now) = match (pov_history.first(), pov_history.last()) {
        (Some(f), Some(l)) => (f, *l),
        _ => {
            return Err(FsmError::InsufficientHistory {
                available: 0.0,
                required: params.lateral_speed_window,
            })
        }
    };
    let span = now.t - first.t;
    // tolerate accumulated rounding in time stamps
    if span + 1e-9 < params.lateral_speed_window {
        return Err(FsmError::InsufficientHistory {
            available: span,
            required: params.lateral_speed_window,
        });
    }
    let past_t = (now.t - params.lateral_speed_window).max(first.t);
    let past = interpolate(pov_history, past_t).expect("past time lies inside the history");
    let lateral_speed = (now.y - past.y) / (now.t - past_t);

    let pov = Vehicle::new(now, pov_geom);

    // Lateral check: ego holds its lateral position.
    let offset = pov.state.y - ego.state.y;
    let clearance = offset.abs() - (ego.lateral_half_extent() + pov.lateral_half_extent());
    let encroachment_time = if clearance < 0.0 {
        Some(0.0)
    } else {
        let approach = -lateral_speed * offset.signum();
        if approach > 0.0 {
            let tau = clearance / approach;
            (tau <= params.prediction_horizon).then_some(tau)
        } else {
            None
        }
    };
    let Some(tau) = encroachment_time else {
        return Ok(FuzzyAssessment::default());
    };

    // Longitudinal check at the encroachment instant, constant speeds.
    let closing = ego.state.speed - pov.state.speed;
    let gap_enc = longitudinal_gap(ego, &pov) - closing * tau;
    let pov_behind = gap_enc < -(ego.geom.length + pov.geom.length);
    let (a_req, a_pro) = if pov_behind {
        (Some(0.0), Some(0.0))
    } else {
        (
            required_decel(closing, gap_enc),
            required_decel(closing, gap_enc - ego.state.speed * params.reaction_time_proactive),
        )
    };

    Ok(FuzzyAssessment {
        pfs: membership(a_pro, 0.0, params.comfortable_decel),
        cfs: membership(a_req, params.comfortable_decel, params.max_decel),
        encroachment_time,
    })
}

/// Maps the fuzzy assessment to a requested deceleration in `[0, max_decel]`.
pub fn fsm_command(a: &FuzzyAssessment, params: &FsmParams) -> f64 {
    let pfs = a.pfs.clamp(0.0, 1.0);
    let cfs = a.cfs.clamp(0.0, 1.0);
    if cfs == 0.0 {
        pfs * params.comfortable_decel
    } else {
        params.comfortable_decel + cfs * (params.max_decel - params.comfortable_decel)
    }
}

/// Stateful wrapper that buffers the POV history for the lateral speed estimate.
#[derive(Debug, Clone)]
pub struct Fsm {
    pub params: FsmParams,
    history: Vec<TrajectorySample>,
    detection_time: Option<f64>,
}

impl Fsm {
    pub fn new(params: FsmParams) -> Self {
        Self {
            params,
            history: Vec::new(),
            detection_time: None,
        }
    }
}

impl Driver for Fsm {
    fn name(&self) -> &str {
        "fsm"
    }

    fn jerk_limit(&self) -> f64 {
        self.params.jerk
    }

    fn step(&mut self, t: f64, ego: &Vehicle, pov: &Vehicle, _: &LaneLayout) -> DriverDecision {
        self.history.push(TrajectorySample { t, ..pov.state });
        let cutoff = t - 2.0 * self.params.lateral_speed_window;
        let stale = self.history.partition_point(|s| s.t < cutoff);
        // keep one sample at or before the cutoff so the window stays covered
        if stale > 1 {
            self.history.drain(..stale - 1);
        }
        let decel = match fsm_assess(&self.params, ego, &self.history, pov.geom) {
            Ok(a) => {
                if a.encroachment_time.is_some() && self.detection_time.is_none() {
                    self.detection_time = Some(t);
                }
                fsm_command(&a, &self.params)
            }
            Err(FsmError::InsufficientHistory { .. }) => 0.0,
        };
        DriverDecision {
            decel,
            detection_time: self.detection_time,
            armed_time: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::Side;

    fn ego(x: f64, speed: f64) -> Vehicle {
        Vehicle::new(
            TrajectorySample {
                t: 0.0,
                x,
                y: 0.0,
                speed,
                accel: 0.0,
                heading: 0.0,
            },
            VehicleGeometry::default(),
        )
    }

    /// POV history at 10 ms steps over 0.5 s ending at t = 0.5 s.
    fn history(x0: f64, y_end: f64, speed: f64, lateral_speed: f64) -> Vec<TrajectorySample> {
        (0..=50)
            .map(|k| {
                let t = k as f64 * 0.01;
                TrajectorySample {
                    t,
                    x: x0 + speed * (t - 0.5),
                    y: y_end + lateral_speed * (t - 0.5),
                    speed,
                    accel: 0.0,
                    heading: (lateral_speed / speed).atan(),
                }
            })
            .collect()
    }

    fn lane() -> LaneLayout {
        LaneLayout::new(3.5, Side::Left, 0.0)
    }

    #[test]
    fn drifting_away_is_safe() {
        let p = FsmParams::default();
        let h = history(30.0, 3.5, 20.0, 0.5);
        let a = fsm_assess(&p, &ego(0.0, 25.0), &h, VehicleGeometry::default()).unwrap();
        assert_eq!(a, FuzzyAssessment::default());
        assert_eq!(fsm_command(&a, &p), 0.0);
    }

    #[test]
    fn holding_lateral_position_is_safe() {
        let p = FsmParams::default();
        let h = history(10.0, 3.2, 20.0, 0.0);
        let a = fsm_assess(&p, &ego(0.0, 25.0), &h, VehicleGeometry::default()).unwrap();
        assert_eq!(a.encroachment_time, None);
    }

    #[test]
    fn short_history_is_an_error() {
        let p = FsmParams::default();
        let h = history(30.0, 3.5, 20.0, -0.5);
        let err = fsm_assess(&p, &ego(0.0, 25.0), &h[40..], VehicleGeometry::default());
        assert!(matches!(err, Err(FsmError::InsufficientHistory { .. })));
        assert!(fsm_assess(&p, &ego(0.0, 25.0), &[], VehicleGeometry::default()).is_err());
    }

    #[test]
    fn command_membership_law() {
        let p = FsmParams::default();
        let cmd = |pfs, cfs| {
            fsm_command(
                &FuzzyAssessment {
                    pfs,
                    cfs,
                    encroachment_time: Some(0.0),
                },
                &p,
            )
        };
        assert_eq!(cmd(0.5, 0.0), 2.0);
        assert_eq!(cmd(1.0, 1.0), 6.0);
        assert_eq!(cmd(0.0, 0.0), 0.0);
        assert_eq!(cmd(1.0, 0.5), 5.0);
    }

    #[test]
    fn memberships_from_required_decel() {
        let p = FsmParams::default();
        // a_pro = 2 → pfs 0.5
        assert_eq!(membership(Some(2.0), 0.0, p.comfortable_decel), 0.5);
        // a_req = 5 → cfs 0.5
        assert_eq!(membership(Some(5.0), p.comfortable_decel, p.max_decel), 0.5);
        assert_eq!(membership(Some(3.9), p.comfortable_decel, p.max_decel), 0.0);
        assert_eq!(membership(None, p.comfortable_decel, p.max_decel), 1.0);
    }

    #[test]
    fn pov_fully_behind_is_no_threat() {
        let p = FsmParams::default();
        let h = history(-20.0, 2.0, 20.0, -0.8);
        let a = fsm_assess(&p, &ego(0.0, 25.0), &h, VehicleGeometry::default()).unwrap();
        assert!(a.encroachment_time.is_some());
        assert_eq!((a.pfs, a.cfs), (0.0, 0.0));
    }

    #[test]
    fn driver_waits_for_history() {
        let mut fsm = Fsm::new(FsmParams::default());
        let e = ego(0.0, 25.0);
        let pov = Vehicle::new(
            TrajectorySample {
                t: 0.0,
                x: 10.0,
                y: 1.0,
                speed: 20.0,
                accel: 0.0,
                heading: 0.0,
            },
            VehicleGeometry::default(),
        );
        // already overlapping the corridor, but no lateral speed estimate yet
        assert_eq!(fsm.step(0.0, &e, &pov, &lane()).decel, 0.0);
        let mut last = 0.0;
        for k in 1..=40 {
            last = fsm.step(k as f64 * 0.01, &e, &pov, &lane()).decel;
        }
        assert!(last > 0.0);
        assert!(fsm.history.len() <= 62);
    }
}
