//! Road-frame kinematic primitives.
//!
//! Coordinates: `x` runs along the (straight) road, forward positive; `y` is
//! lateral, left positive. Vehicle positions refer to the footprint center.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("time {t} outside trajectory span [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },
    #[error("empty trajectory")]
    Empty,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleGeometry {
    pub length: f64,
    pub width: f64,
}

impl VehicleGeometry {
    pub const fn new(length: f64, width: f64) -> Self {
        Self { length, width }
    }

    pub fn half_length(&self) -> f64 {
        0.5 * self.length
    }

    pub fn half_width(&self) -> f64 {
        0.5 * self.width
    }

    pub fn is_valid(&self) -> bool {
        self.length > 0.0 && self.width > 0.0
    }
}

impl Default for VehicleGeometry {
    /// Mid-size passenger car.
    fn default() -> Self {
        Self::new(4.5, 1.8)
    }
}

/// Side of the ego lane on which the POV starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    /// Sign of `y` pointing from the ego lane toward this side.
    pub fn sign(self) -> f64 {
        match self {
            Side::Left => 1.0,
            Side::Right => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LaneLayout {
    pub lane_width: f64,
    pub pov_side: Side,
    pub ego_lane_center_y: f64,
    /// Marking between the ego lane and the POV's original lane.
    pub marking_y: f64,
}

impl LaneLayout {
    pub fn new(lane_width: f64, pov_side: Side, ego_lane_center_y: f64) -> Self {
        Self {
            lane_width,
            pov_side,
            ego_lane_center_y,
            marking_y: ego_lane_center_y + pov_side.sign() * 0.5 * lane_width,
        }
    }

    pub fn pov_lane_center_y(&self) -> f64 {
        self.ego_lane_center_y + self.pov_side.sign() * self.lane_width
    }

    /// Unit direction (in `y`) from the POV lane toward the ego lane.
    pub fn toward_ego(&self) -> f64 {
        -self.pov_side.sign()
    }

    /// Checks `lane_width > 0` and that the marking sits half a lane from the
    /// ego lane center on the POV side.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn check(&self) -> Result<(), String> {
        if !(self.lane_width > 0.0) {
            return Err("lane_width > 0".into());
        }
        let expected = self.ego_lane_center_y + self.pov_side.sign() * 0.5 * self.lane_width;
        if (self.marking_y - expected).abs() > 1e-9 * self.lane_width.max(1.0) {
            return Err("marking_y = ego_lane_center_y ± lane_width/2 on pov_side".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub speed: f64,
    pub accel: f64,
    pub heading: f64,
}

/// A trajectory sample together with the footprint of the vehicle it belongs to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Vehicle {
    pub state: TrajectorySample,
    pub geom: VehicleGeometry,
}

impl Vehicle {
    pub fn new(state: TrajectorySample, geom: VehicleGeometry) -> Self {
        Self { state, geom }
    }

    pub fn footprint(&self) -> OrientedBox {
        OrientedBox {
            center_x: self.state.x,
            center_y: self.state.y,
            half_length: self.geom.half_length(),
            half_width: self.geom.half_width(),
            heading: self.state.heading,
        }
    }

    /// Half of the footprint's extent along `y`.
    pub fn lateral_half_extent(&self) -> f64 {
        let (s, c) = self.state.heading.sin_cos();
        self.geom.half_length() * s.abs() + self.geom.half_width() * c.abs()
    }
}

/// Wraps an angle to (-π, π].
pub fn wrap_angle(a: f64) -> f64 {
    let mut w = a % (2.0 * PI);
    if w <= -PI {
        w += 2.0 * PI;
    } else if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Samples the trajectory at `t`, linearly interpolating between neighbours.
/// Heading follows the shortest arc.
pub fn interpolate(traj: &[TrajectorySample], t: f64) -> Result<TrajectorySample, KinematicsError> {
    let (first, last) = match (traj.first(), traj.last()) {
        (Some(f), Some(l)) => (f, l),
        _ => return Err(KinematicsError::Empty),
    };
    if !(t >= first.t && t <= last.t) {
        return Err(KinematicsError::OutOfRange {
            t,
            start: first.t,
            end: last.t,
        });
    }
    // first index with sample.t >= t
    let i = traj.partition_point(|s| s.t < t);
    let hi = &traj[i];
    if hi.t == t {
        return Ok(*hi);
    }
    let lo = &traj[i - 1];
    let w = (t - lo.t) / (hi.t - lo.t);
    let lerp = |a: f64, b: f64| a + (b - a) * w;
    Ok(TrajectorySample {
        t,
        x: lerp(lo.x, hi.x),
        y: lerp(lo.y, hi.y),
        speed: lerp(lo.speed, hi.speed),
        accel: lerp(lo.accel, hi.accel),
        heading: wrap_angle(lo.heading + wrap_angle(hi.heading - lo.heading) * w),
    })
}

/// Bumper-to-bumper distance along the road axis, POV assumed ahead.
/// Negative when the footprints overlap longitudinally.
pub fn longitudinal_gap(ego: &Vehicle, pov: &Vehicle) -> f64 {
    (pov.state.x - pov.geom.half_length()) - (ego.state.x + ego.geom.half_length())
}

/// Longitudinal time-to-collision. `None` when the vehicles are not closing.
/// Negative while the footprints overlap longitudinally.
pub fn ttc(ego: &Vehicle, pov: &Vehicle) -> Option<f64> {
    let closing = ego.state.speed - pov.state.speed;
    if closing <= 0.0 {
        return None;
    }
    Some(longitudinal_gap(ego, pov) / closing)
}

/// Signed intrusion of the POV's corner nearest the ego lane past the shared
/// marking. Negative while the POV is entirely in its original lane.
pub fn ldbo_distance(pov: &Vehicle, lane: &LaneLayout) -> f64 {
    let toward = lane.toward_ego();
    pov.footprint()
        .corners()
        .iter()
        .map(|&(_, y)| (y - lane.marking_y) * toward)
        .fold(f64::NEG_INFINITY, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrientedBox {
    pub center_x: f64,
    pub center_y: f64,
    pub half_length: f64,
    pub half_width: f64,
    pub heading: f64,
}

impl OrientedBox {
    /// Unit vectors along the box's length and width.
    pub fn axes(&self) -> [(f64, f64); 2] {
        let (s, c) = self.heading.sin_cos();
        [(c, s), (-s, c)]
    }

    /// Corners in counter-clockwise order starting front-left.
    pub fn corners(&self) -> [(f64, f64); 4] {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (l, w) = (self.half_length, self.half_width);
        let at = |a: f64, b: f64| (self.center_x + a * ux + b * vx, self.center_y + a * uy + b * vy);
        [at(l, w), at(-l, w), at(-l, -w), at(l, -w)]
    }

    /// Projection radius of the box onto a unit axis.
    fn radius_on(&self, axis: (f64, f64)) -> f64 {
        let [(ux, uy), (vx, vy)] = self.axes();
        self.half_length * (ux * axis.0 + uy * axis.1).abs()
            + self.half_width * (vx * axis.0 + vy * axis.1).abs()
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [(ux, uy), (vx, vy)] = self.axes();
        let (dx, dy) = (x - self.center_x, y - self.center_y);
        (dx * ux + dy * uy).abs() <= self.half_length && (dx * vx + dy * vy).abs() <= self.half_width
    }
}

/// Separating-axis test over the four edge normals. Touching boxes count as
/// overlapping.
pub fn boxes_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    let d = (b.center_x - a.center_x, b.center_y - a.center_y);
    a.axes().into_iter().chain(b.axes()).all(|axis| {
        let dist = (d.0 * axis.0 + d.1 * axis.1).abs();
        dist <= a.radius_on(axis) + b.radius_on(axis)
    })
}

fn point_segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let ab = (b.0 - a.0, b.1 - a.1);
    let ap = (p.0 - a.0, p.1 - a.1);
    let len2 = ab.0 * ab.0 + ab.1 * ab.1;
    let s = if len2 > 0.0 {
        ((ap.0 * ab.0 + ap.1 * ab.1) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (cx, cy) = (a.0 + s * ab.0 - p.0, a.1 + s * ab.1 - p.1);
    cx.hypot(cy)
}

/// Euclidean clearance between two footprints; zero when they overlap.
pub fn footprint_clearance(a: &OrientedBox, b: &OrientedBox) -> f64 {
    if boxes_overlap(a, b) {
        return 0.0;
    }
    let (ca, cb) = (a.corners(), b.corners());
    let mut best = f64::INFINITY;
    for (pts, poly) in [(&ca, &cb), (&cb, &ca)] {
        for &p in pts.iter() {
            for k in 0..4 {
                best = best.min(point_segment_distance(p, poly[k], poly[(k + 1) % 4]));
            }
        }
    }
    best
}
