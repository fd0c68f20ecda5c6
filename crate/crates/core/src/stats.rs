//! Summary statistics: median, fixed-width histograms and the two-sided
//! Wilcoxon signed-rank test.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

/// Largest number of nonzero differences handled by the exact null distribution.
pub const EXACT_LIMIT: usize = 20;

#[derive(Debug, Error, Clone, Copy, PartialEq, Eq)]
pub enum StatsError {
    #[error("input is empty")]
    EmptyInput,
    #[error("all differences are zero")]
    AllZero,
}

pub fn median(values: &[f64]) -> Result<f64, StatsError> {
    if values.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Ok(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub bin_width: f64,
    /// `counts.len() + 1` edges; bin `i` is `[edges[i], edges[i + 1])`.
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
}

/// Bins the finite values into half-open bins whose edges are integer
/// multiples of `bin_width`.
pub fn histogram(values: &[f64], bin_width: f64) -> Histogram {
    assert!(bin_width > 0.0 && bin_width.is_finite(), "bin width must be positive");
    let idx: Vec<i64> = values
        .iter()
        .filter(|v| v.is_finite())
        .map(|v| (v / bin_width).floor() as i64)
        .collect();
    let (Some(&lo), Some(&hi)) = (idx.iter().min(), idx.iter().max()) else {
        return Histogram {
            bin_width,
            bin_edges: Vec::new(),
            counts: Vec::new(),
        };
    };
    let mut counts = vec![0u64; (hi - lo + 1) as usize];
    for i in idx {
        counts[(i - lo) as usize] += 1;
    }
    let bin_edges = (lo..=hi + 1).map(|k| k as f64 * bin_width).collect();
    Histogram {
        bin_width,
        bin_edges,
        counts,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WilcoxonMethod {
    Exact,
    NormalApprox,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of the ranks of the positive differences.
    pub w_statistic: f64,
    pub p_value: f64,
    pub n_effective: usize,
    pub method: WilcoxonMethod,
}

/// Average ranks (1-based) of `abs_values`, which must be sorted ascending.
/// Also returns the sizes of the tie groups.
fn average_ranks_sorted(abs_values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let n = abs_values.len();
    let mut ranks = vec![0.0; n];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && abs_values[j] == abs_values[i] {
            j += 1;
        }
        let avg = 0.5 * ((i + 1) + j) as f64;
        ranks[i..j].iter_mut().for_each(|r| *r = avg);
        ties.push(j - i);
        i = j;
    }
    (ranks, ties)
}

/// Two-sided Wilcoxon signed-rank test of the differences against zero.
///
/// Zeros are dropped; ties share average ranks. Up to [`EXACT_LIMIT`] nonzero
/// differences the p-value comes from the exact null distribution of `W`
/// over all sign assignments; beyond that a normal approximation with tie and
/// continuity corrections is used.
pub fn wilcoxon_signed_rank(diffs: &[f64]) -> Result<WilcoxonResult, StatsError> {
    if diffs.is_empty() {
        return Err(StatsError::EmptyInput);
    }
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    if nz.is_empty() {
        return Err(StatsError::AllZero);
    }
    nz.sort_by(|a, b| a.abs().total_cmp(&b.abs()));
    let abs: Vec<f64> = nz.iter().map(|d| d.abs()).collect();
    let (ranks, ties) = average_ranks_sorted(&abs);
    let n = nz.len();
    let w: f64 = nz
        .iter()
        .zip(&ranks)
        .filter(|(d, _)| **d > 0.0)
        .fold(0.0, |acc, (_, r)| acc + r);

    if n <= EXACT_LIMIT {
        // Doubled ranks are integers even with ties.
        let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
        let total: usize = doubled.iter().sum();
        let mut dist = vec![0u64; total + 1];
        dist[0] = 1;
        let mut reach = 0;
        for &r in &doubled {
            for s in (0..=reach).rev() {
                if dist[s] > 0 {
                    dist[s + r] += dist[s];
                }
            }
            reach += r;
        }
        let w2 = (2.0 * w).round() as usize;
        let lower: u64 = dist[..=w2].iter().sum();
        let upper: u64 = dist[w2..].iter().sum();
        let denom = (1u64 << n) as f64;
        let p = (2.0 * lower.min(upper) as f64 / denom).min(1.0);
        Ok(WilcoxonResult {
            w_statistic: w,
            p_value: p,
            n_effective: n,
            method: WilcoxonMethod::Exact,
        })
    } else {
        let nf = n as f64;
        let mean = nf * (nf + 1.0) / 4.0;
        let tie_term: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
        let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term;
        let z = ((w - mean).abs() - 0.5).max(0.0) / var.sqrt();
        let normal = Normal::new(0.0, 1.0).expect("standard normal");
        let p = (2.0 * normal.sf(z)).clamp(0.0, 1.0);
        Ok(WilcoxonResult {
            w_statistic: w,
            p_value: p,
            n_effective: n,
            method: WilcoxonMethod::NormalApprox,
        })
    }
}
