//! Per-event comparison of a model run against the human driver.

use crate::engine::SimulationResult;
use crate::kinematics::{interpolate, ldbo_distance, Vehicle};
use crate::scenario::Scenario;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventMetrics {
    pub scenario_id: String,
    pub model_name: String,
    pub human_onset: f64,
    pub model_onset: Option<f64>,
    /// Model brake onset minus human brake onset; negative = model earlier.
    pub t_diff: Option<f64>,
    pub crashed: bool,
    pub worst_case_crashed: bool,
    pub ldbo_human: f64,
    pub ldbo_model: Option<f64>,
    pub ldbo_diff: Option<f64>,
}

/// LDBO of the recorded POV at time `t`, clamped to the trajectory span.
pub fn ldbo_at(scenario: &Scenario, t: f64) -> f64 {
    let first = scenario.pov_traj[0].t;
    let last = scenario.pov_traj[scenario.pov_traj.len() - 1].t;
    let state = interpolate(&scenario.pov_traj, t.clamp(first, last)).expect("clamped into span");
    ldbo_distance(&Vehicle::new(state, scenario.pov_geom), &scenario.lane)
}

pub fn compute_event_metrics(
    human_onset: f64,
    model_result: &SimulationResult,
    worst_case: &SimulationResult,
    scenario: &Scenario,
) -> EventMetrics {
    let ldbo_human = ldbo_at(scenario, human_onset);
    let model_onset = model_result.brake_onset_time;
    let ldbo_model = model_onset.map(|t| ldbo_at(scenario, t));
    EventMetrics {
        scenario_id: scenario.id.clone(),
        model_name: model_result.model_name.clone(),
        human_onset,
        model_onset,
        t_diff: model_onset.map(|t| t - human_onset),
        crashed: model_result.collided,
        worst_case_crashed: worst_case.collided,
        ldbo_human,
        ldbo_model,
        ldbo_diff: ldbo_model.map(|m| m - ldbo_human),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::{LaneLayout, Side, TrajectorySample, VehicleGeometry};

    fn scenario() -> Scenario {
        // POV drifts toward the ego lane at 0.5 m/s starting 1.2 m from the marking.
        let lane = LaneLayout::new(3.5, Side::Left, 0.0);
        let pov = (0..=50)
            .map(|k| {
                let t = k as f64 * 0.1;
                TrajectorySample {
                    t,
                    x: 30.0 + 15.0 * t,
                    y: lane.marking_y + 1.2 - 0.5 * t,
                    speed: 15.0,
                    accel: 0.0,
                    heading: 0.0,
                }
            })
            .collect();
        let ego = (0..=50)
            .map(|k| {
                let t = k as f64 * 0.1;
                TrajectorySample {
                    t,
                    x: 20.0 * t,
                    y: 0.0,
                    speed: 20.0,
                    accel: 0.0,
                    heading: 0.0,
                }
            })
            .collect();
        Scenario {
            id: "m".into(),
            lane,
            ego_geom: VehicleGeometry::default(),
            pov_geom: VehicleGeometry::default(),
            ego_traj: ego,
            pov_traj: pov,
        }
    }

    fn result(model: &str, onset: Option<f64>, collided: bool) -> SimulationResult {
        SimulationResult {
            scenario_id: "m".into(),
            model_name: model.into(),
            human_onset_time: 3.0,
            brake_onset_time: onset,
            detection_time: None,
            armed_time: None,
            collided,
            collision_time: None,
            min_gap: 1.0,
            ego_trace: Vec::new(),
        }
    }

    #[test]
    fn t_diff_sign_convention() {
        let sc = scenario();
        let none = result("none", None, true);
        let m = compute_event_metrics(3.0, &result("ccdm", Some(3.5), false), &none, &sc);
        assert!((m.t_diff.unwrap() - 0.5).abs() < 1e-12);
        let m = compute_event_metrics(3.0, &result("fsm", Some(2.3), false), &none, &sc);
        assert!((m.t_diff.unwrap() + 0.7).abs() < 1e-12);
        assert!(m.worst_case_crashed && !m.crashed);
    }

    #[test]
    fn ldbo_at_onsets() {
        let sc = scenario();
        let none = result("none", None, false);
        let m = compute_event_metrics(1.0, &result("ccdm", Some(2.0), false), &none, &sc);
        // nearest corner: 1.2 - 0.5 t - 0.9 from the marking
        assert!((m.ldbo_human - (-(1.2 - 0.5 - 0.9))).abs() < 1e-9);
        assert!((m.ldbo_model.unwrap() - 0.7).abs() < 1e-9);
        assert!((m.ldbo_diff.unwrap() - 0.5).abs() < 1e-9);
    }

    #[test]
    fn never_braked_has_no_timing() {
        let sc = scenario();
        let none = result("none", None, false);
        let m = compute_event_metrics(3.0, &result("ccdm", None, false), &none, &sc);
        assert_eq!((m.t_diff, m.ldbo_model, m.ldbo_diff), (None, None, None));
    }
}
