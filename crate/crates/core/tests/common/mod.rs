//! Independent oracles shared by the integration tests.

#![allow(dead_code)]

use refdriver::kinematics::OrientedBox;

/// Two-sided signed-rank p-value by enumerating every sign assignment.
/// Returns `(W, p)`.
pub fn brute_force_wilcoxon(diffs: &[f64]) -> (f64, f64) {
    let nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    let n = nz.len();
    let ranks: Vec<f64> = nz
        .iter()
        .map(|d| {
            let below = nz.iter().filter(|e| e.abs() < d.abs()).count() as f64;
            let equal = nz.iter().filter(|e| e.abs() == d.abs()).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect();
    let observed: f64 = nz.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).map(|(_, r)| r).sum();
    let (mut lower, mut upper) = (0u64, 0u64);
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w <= observed + 1e-9 {
            lower += 1;
        }
        if w >= observed - 1e-9 {
            upper += 1;
        }
    }
    let p = (2.0 * lower.min(upper) as f64 / (1u64 << n) as f64).min(1.0);
    (observed, p)
}

/// Points on a `k × k` grid covering the box, edges included.
fn grid_points(b: &OrientedBox, k: usize) -> Vec<(f64, f64)> {
    let [(ux, uy), (vx, vy)] = [(b.heading.cos(), b.heading.sin()), (-b.heading.sin(), b.heading.cos())];
    let mut pts = Vec::with_capacity(k * k);
    for i in 0..k {
        for j in 0..k {
            let a = -b.half_length + 2.0 * b.half_length * i as f64 / (k - 1) as f64;
            let c = -b.half_width + 2.0 * b.half_width * j as f64 / (k - 1) as f64;
            pts.push((b.center_x + a * ux + c * vx, b.center_y + a * uy + c * vy));
        }
    }
    pts
}

/// Points spaced along the four edges.
fn edge_points(b: &OrientedBox, per_edge: usize) -> Vec<(f64, f64)> {
    let c = b.corners();
    let mut pts = Vec::with_capacity(4 * per_edge);
    for k in 0..4 {
        let (p, q) = (c[k], c[(k + 1) % 4]);
        for i in 0..per_edge {
            let s = i as f64 / per_edge as f64;
            pts.push((p.0 + s * (q.0 - p.0), p.1 + s * (q.1 - p.1)));
        }
    }
    pts
}

/// Point-in-box with the box's own axes, computed without the library.
fn inside(b: &OrientedBox, p: (f64, f64)) -> bool {
    let (s, c) = b.heading.sin_cos();
    let (dx, dy) = (p.0 - b.center_x, p.1 - b.center_y);
    (dx * c + dy * s).abs() <= b.half_length && (-dx * s + dy * c).abs() <= b.half_width
}

/// Sampling oracle: the boxes overlap if a sampled point of one lies in the
/// other. Uses 100 × 100 interior grids and 2500 points per edge on each box.
pub fn sampled_overlap(a: &OrientedBox, b: &OrientedBox) -> bool {
    for (x, y) in [(a, b), (b, a)] {
        let mut pts = grid_points(x, 100);
        pts.extend(edge_points(x, 2500));
        if pts.iter().any(|&p| inside(y, p)) {
            return true;
        }
    }
    false
}

/// Signed separation along the best separating axis: positive when apart,
/// negative (penetration depth) when overlapping.
pub fn separation_depth(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let axes = |h: f64| [(h.cos(), h.sin()), (-h.sin(), h.cos())];
    let radius = |o: &OrientedBox, ax: (f64, f64)| {
        let [(ux, uy), (vx, vy)] = axes(o.heading);
        o.half_length * (ux * ax.0 + uy * ax.1).abs() + o.half_width * (vx * ax.0 + vy * ax.1).abs()
    };
    let d = (b.center_x - a.center_x, b.center_y - a.center_y);
    axes(a.heading)
        .into_iter()
        .chain(axes(b.heading))
        .map(|ax| (d.0 * ax.0 + d.1 * ax.1).abs() - radius(a, ax) - radius(b, ax))
        .fold(f64::NEG_INFINITY, f64::max)
}
