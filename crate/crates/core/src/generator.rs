//! Seeded generator of synthetic cut-in events.
//!
//! The POV drives at constant longitudinal speed in the lane next to the ego
//! vehicle and moves laterally along a smoothstep profile
//! `S(u) = 3u² − 2u³`, whose peak slope is 1.5. A lateral displacement `D`
//! with peak lateral speed `v` therefore takes `1.5·D/v` seconds. The ego
//! drives at constant speed and, optionally, brakes at a constant rate from a
//! given time on, which stands in for the human evasive maneuver.

use crate::kinematics::{LaneLayout, Side, TrajectorySample, VehicleGeometry};
use crate::scenario::{Scenario, ScenarioError, MAX_SAMPLE_SPACING};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

/// Peak slope of the smoothstep profile.
pub const SMOOTHSTEP_PEAK: f64 = 1.5;
/// Default delay of the synthetic human brake after the POV touches the marking.
pub const HUMAN_REACTION_AFTER_CROSSING: f64 = 1.2;
/// Bound on the seeded start-position jitter, m.
pub const MAX_JITTER: f64 = 0.1;
/// Bound on the lateral part of the jitter, m.
const MAX_LATERAL_JITTER: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutinParams {
    pub ego_speed: f64,
    pub pov_speed: f64,
    /// Bumper-to-bumper distance at t = 0.
    pub initial_gap: f64,
    /// Peak lateral speed of the POV.
    pub pov_lateral_speed: f64,
    pub lane_change_start: f64,
    pub lane_width: f64,
    pub duration: f64,
    pub sample_dt: f64,
    pub human_brake_time: Option<f64>,
    pub human_brake_decel: f64,
    pub seed: u64,
    pub pov_side: Side,
    /// Offset of the ego from its lane center toward the POV side.
    pub ego_lateral_offset: f64,
    /// Lateral travel of the POV; a full lane width when `None`.
    pub lateral_displacement: Option<f64>,
    pub ego_geom: VehicleGeometry,
    pub pov_geom: VehicleGeometry,
}

impl Default for CutinParams {
    fn default() -> Self {
        Self {
            ego_speed: 25.0,
            pov_speed: 17.0,
            initial_gap: 15.0,
            pov_lateral_speed: 0.8,
            lane_change_start: 1.0,
            lane_width: 3.5,
            duration: 8.0,
            sample_dt: 0.1,
            human_brake_time: None,
            human_brake_decel: 5.0,
            seed: 0,
            pov_side: Side::Left,
            ego_lateral_offset: 0.0,
            lateral_displacement: None,
            ego_geom: VehicleGeometry::default(),
            pov_geom: VehicleGeometry::default(),
        }
    }
}

fn smoothstep(u: f64) -> f64 {
    let u = u.clamp(0.0, 1.0);
    u * u * (3.0 - 2.0 * u)
}

fn smoothstep_slope(u: f64) -> f64 {
    if (0.0..=1.0).contains(&u) {
        6.0 * u * (1.0 - u)
    } else {
        0.0
    }
}

/// Rounds to the 1e-9 grid so generated files do not depend on the last bits
/// of platform math routines.
fn quantize(v: f64) -> f64 {
    (v * 1e9).round() / 1e9
}

/// Start offsets drawn from the seed.
#[derive(Debug, Clone, Copy)]
struct Jitter {
    x: f64,
    y: f64,
}

impl Jitter {
    fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Self {
            x: rng.gen_range(-MAX_JITTER..=MAX_JITTER),
            y: rng.gen_range(-MAX_LATERAL_JITTER..=MAX_LATERAL_JITTER),
        }
    }
}

impl CutinParams {
    pub fn displacement(&self) -> f64 {
        self.lateral_displacement.unwrap_or(self.lane_width)
    }

    /// Time for the full lateral maneuver.
    pub fn traversal_time(&self) -> f64 {
        SMOOTHSTEP_PEAK * self.displacement() / self.pov_lateral_speed
    }

    pub fn lane(&self) -> LaneLayout {
        LaneLayout::new(self.lane_width, self.pov_side, 0.0)
    }

    fn pov_start_y(&self) -> f64 {
        self.lane().pov_lane_center_y() + Jitter::from_seed(self.seed).y
    }

    /// POV center lateral position at time `t`.
    pub fn pov_y(&self, t: f64) -> f64 {
        let u = (t - self.lane_change_start) / self.traversal_time();
        self.pov_start_y() + self.lane().toward_ego() * self.displacement() * smoothstep(u)
    }

    pub fn pov_lateral_velocity(&self, t: f64) -> f64 {
        let tt = self.traversal_time();
        let u = (t - self.lane_change_start) / tt;
        self.lane().toward_ego() * self.displacement() * smoothstep_slope(u) / tt
    }

    /// Time at which the POV center has moved `distance` toward the ego lane.
    /// `None` if the maneuver never covers that distance.
    pub fn time_at_displacement(&self, distance: f64) -> Option<f64> {
        let frac = distance / self.displacement();
        if !(0.0..=1.0).contains(&frac) {
            return None;
        }
        let (mut lo, mut hi) = (0.0f64, 1.0f64);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if smoothstep(mid) < frac {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Some(self.lane_change_start + 0.5 * (lo + hi) * self.traversal_time())
    }

    /// Time at which the POV's side (center minus half width) reaches the
    /// marking, ignoring heading. `None` if it never does.
    pub fn marking_crossing_time(&self) -> Option<f64> {
        let lane = self.lane();
        self.time_at_displacement((self.pov_start_y() - lane.marking_y).abs() - self.pov_geom.half_width())
    }

    /// Time at which the POV footprint first reaches the lateral band swept by
    /// the ego footprint, ignoring heading.
    pub fn corridor_entry_time(&self) -> Option<f64> {
        let ego_y = self.lane().ego_lane_center_y + self.pov_side.sign() * self.ego_lateral_offset;
        let clearance =
            (self.pov_start_y() - ego_y).abs() - self.ego_geom.half_width() - self.pov_geom.half_width();
        self.time_at_displacement(clearance)
    }

    /// Human brake time `HUMAN_REACTION_AFTER_CROSSING` after the marking crossing.
    pub fn default_human_brake_time(&self) -> Option<f64> {
        self.marking_crossing_time().map(|t| t + HUMAN_REACTION_AFTER_CROSSING)
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ScenarioError> {
        let fail = |m: &str| Err(ScenarioError::InvalidParams(m.to_string()));
        let finite = [
            self.ego_speed,
            self.pov_speed,
            self.initial_gap,
            self.pov_lateral_speed,
            self.lane_change_start,
            self.lane_width,
            self.duration,
            self.sample_dt,
            self.human_brake_decel,
            self.ego_lateral_offset,
        ];
        if finite.iter().any(|v| !v.is_finite()) {
            return fail("all parameters finite");
        }
        if !(self.pov_speed >= 0.0 && self.pov_speed < self.ego_speed) {
            return fail("0 <= pov_speed < ego_speed");
        }
        if !(self.initial_gap > 0.0) {
            return fail("initial_gap > 0");
        }
        if !(self.pov_lateral_speed > 0.0) {
            return fail("pov_lateral_speed > 0");
        }
        if !(self.lane_width > 0.0) {
            return fail("lane_width > 0");
        }
        if !(self.sample_dt > 0.0 && self.sample_dt <= MAX_SAMPLE_SPACING) {
            return fail("0 < sample_dt <= 0.2");
        }
        if !(self.duration >= 1.0) {
            return fail("duration >= 1 s");
        }
        if self.lane_change_start < 0.0 {
            return fail("lane_change_start >= 0");
        }
        if self.lateral_displacement.is_some_and(|d| !(d > 0.0 && d.is_finite())) {
            return fail("lateral_displacement > 0");
        }
        if !self.ego_geom.is_valid() || !self.pov_geom.is_valid() {
            return fail("vehicle geometry positive");
        }
        if let Some(tb) = self.human_brake_time {
            if !(tb > 0.0 && tb < self.duration) {
                return fail("0 < human_brake_time < duration");
            }
            if !(self.human_brake_decel > 0.0) {
                return fail("human_brake_decel > 0");
            }
        }
        Ok(())
    }
}

fn ego_state(p: &CutinParams, t: f64) -> (f64, f64, f64) {
    let v0 = p.ego_speed;
    match p.human_brake_time {
        Some(tb) if t >= tb => {
            let a = p.human_brake_decel;
            let x_b = v0 * tb;
            let t_stop = v0 / a;
            let tau = (t - tb).min(t_stop);
            let speed = v0 - a * tau;
            let x = x_b + v0 * tau - 0.5 * a * tau * tau;
            let accel = if t - tb < t_stop { -a } else { 0.0 };
            (x, speed, accel)
        }
        _ => (v0 * t, v0, 0.0),
    }
}

pub fn generate(params: &CutinParams) -> Result<Scenario, ScenarioError> {
    params.validate()?;
    let p = params;
    let lane = p.lane();
    let jitter = Jitter::from_seed(p.seed);
    let ego_y = lane.ego_lane_center_y + p.pov_side.sign() * p.ego_lateral_offset;
    let pov_x0 = p.ego_geom.half_length() + p.initial_gap + p.pov_geom.half_length() + jitter.x;

    let n = (p.duration / p.sample_dt).round() as usize;
    let times: Vec<f64> = (0..=n).map(|k| quantize(k as f64 * p.sample_dt)).collect();

    let ego_traj = times
        .iter()
        .map(|&t| {
            let (x, speed, accel) = ego_state(p, t);
            TrajectorySample {
                t,
                x: quantize(x),
                y: quantize(ego_y),
                speed: quantize(speed),
                accel: quantize(accel),
                heading: 0.0,
            }
        })
        .collect();
    let pov_traj = times
        .iter()
        .map(|&t| TrajectorySample {
            t,
            x: quantize(pov_x0 + p.pov_speed * t),
            y: quantize(p.pov_y(t)),
            speed: quantize(p.pov_speed),
            accel: 0.0,
            heading: quantize(p.pov_lateral_velocity(t).atan2(p.pov_speed)),
        })
        .collect();

    let scenario = Scenario {
        id: format!("cutin-{}", p.seed),
        lane,
        ego_geom: p.ego_geom,
        pov_geom: p.pov_geom,
        ego_traj,
        pov_traj,
    };
    scenario.validate()?;
    Ok(scenario)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    PaperLike,
    StressLateral,
    SlowDrift,
}

impl Preset {
    pub fn as_str(self) -> &'static str {
        match self {
            Preset::PaperLike => "paper_like",
            Preset::StressLateral => "stress_lateral",
            Preset::SlowDrift => "slow_drift",
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Preset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "paper_like" => Ok(Preset::PaperLike),
            "stress_lateral" => Ok(Preset::StressLateral),
            "slow_drift" => Ok(Preset::SlowDrift),
            other => Err(format!(
                "unknown preset '{other}' (expected paper_like, stress_lateral or slow_drift)"
            )),
        }
    }
}

/// Draws the parameters of event `index` of a preset suite.
pub fn preset_params(preset: Preset, seed: u64, index: usize) -> CutinParams {
    let event_seed = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(index as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(event_seed);
    let side = if index.is_multiple_of(2) { Side::Left } else { Side::Right };
    let mut p = CutinParams {
        seed: event_seed,
        pov_side: side,
        ..CutinParams::default()
    };
    match preset {
        Preset::PaperLike => {
            p.ego_speed = rng.gen_range(20.0..=35.0);
            let closing = rng.gen_range(3.0..=12.0);
            p.pov_speed = p.ego_speed - closing;
            let gap_at_crossing = rng.gen_range(5.0..=30.0);
            p.pov_lateral_speed = rng.gen_range(0.4..=1.5);
            p.lane_change_start = rng.gen_range(1.0..=2.0);
            p.human_brake_decel = rng.gen_range(3.0..=6.0);
            let tail = rng.gen_range(1.0..=4.0);
            let crossing = p.marking_crossing_time().expect("full lane change crosses the marking");
            p.initial_gap = gap_at_crossing + closing * crossing;
            p.human_brake_time = Some(crossing + HUMAN_REACTION_AFTER_CROSSING);
            p.duration = crossing + HUMAN_REACTION_AFTER_CROSSING + tail;
        }
        Preset::StressLateral => {
            p.ego_speed = rng.gen_range(22.0..=32.0);
            let closing = rng.gen_range(6.0..=12.0);
            p.pov_speed = p.ego_speed - closing;
            p.pov_lateral_speed = rng.gen_range(1.2..=2.0);
            p.lane_change_start = rng.gen_range(1.0..=1.5);
            p.human_brake_decel = rng.gen_range(4.0..=7.0);
            // Without a reaction the ego reaches the POV's rear bumper this
            // long after the POV enters the ego corridor.
            let margin = rng.gen_range(0.4..=1.4);
            let entry = p.corridor_entry_time().expect("full lane change enters the corridor");
            p.initial_gap = closing * (entry + margin);
            let crossing = p.marking_crossing_time().expect("full lane change crosses the marking");
            p.human_brake_time = Some(crossing + HUMAN_REACTION_AFTER_CROSSING);
            p.duration = (entry + margin).max(crossing + HUMAN_REACTION_AFTER_CROSSING) + 3.0;
        }
        Preset::SlowDrift => {
            p.ego_speed = rng.gen_range(20.0..=30.0);
            p.pov_speed = p.ego_speed - rng.gen_range(3.0..=8.0);
            p.initial_gap = rng.gen_range(10.0..=30.0);
            p.pov_lateral_speed = rng.gen_range(0.1..=0.3);
            p.lateral_displacement = Some(rng.gen_range(0.15..=0.30));
            p.ego_lateral_offset = rng.gen_range(0.3..=0.6);
            p.lane_width = quantize(rng.gen_range(3.2..=3.5));
            p.pov_geom = VehicleGeometry::new(
                quantize(rng.gen_range(4.5..=5.5)),
                quantize(rng.gen_range(1.8..=2.1)),
            );
            p.lane_change_start = rng.gen_range(1.0..=2.0);
            p.human_brake_decel = rng.gen_range(1.0..=2.0);
            let drift_end = p.lane_change_start + p.traversal_time();
            p.human_brake_time = Some(drift_end + 0.5);
            p.duration = drift_end + 2.5;
        }
    }
    p
}

pub fn generate_suite(n: usize, seed: u64, preset: Preset) -> Result<Vec<Scenario>, ScenarioError> {
    (0..n)
        .map(|i| {
            let mut s = generate(&preset_params(preset, seed, i))?;
            s.id = format!("{}-{:03}", preset.as_str(), i);
            Ok(s)
        })
        .collect()
}
