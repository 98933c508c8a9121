//! Closed-form analytics for restart strategies of amplitude amplification.
//!
//! With `S` marked states out of `N` and `sin²θ = S/N`, a trial of `t`
//! amplification iterations followed by a measurement succeeds with
//! probability `p_t = sin²((2t+1)θ)`. Repeating such trials until success
//! makes the total iteration count a geometric multiple of `t`, so its mean
//! is `t/p_t` and its standard deviation `(t/p_t)·√(1−p_t)`. This module
//! evaluates those quantities for every trial length and marks the
//! mean/standard-deviation efficient frontier.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Success probabilities below this are treated as a degenerate strategy.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// A trial whose failure probability is at most this is reported as certain
/// (infinite Sharpe ratio).
pub const CERTAINTY_TOLERANCE: f64 = 1e-6;

/// Rotation angle of amplitude amplification for a given solution fraction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProblemAngle {
    theta: f64,
    fraction: f64,
}

impl ProblemAngle {
    pub fn from_fraction(fraction: f64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::InvalidFraction(fraction));
        }
        Ok(Self {
            theta: fraction.sqrt().asin(),
            fraction,
        })
    }

    pub fn from_counts(solutions: u64, states: u64) -> Result<Self> {
        if states == 0 || solutions > states {
            return Err(Error::InvalidArgument(format!(
                "{solutions} solutions among {states} states"
            )));
        }
        Self::from_fraction(solutions as f64 / states as f64)
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }
}

/// One restart strategy: trial length `t` and the statistics of the total
/// iteration count when trials are repeated until success.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub t: u64,
    pub p: f64,
    pub mean: f64,
    pub second_moment: f64,
    pub std: f64,
    pub sharpe: f64,
    pub efficient: bool,
}

impl FrontierPoint {
    /// Statistics for trial length `t`. The `efficient` flag starts out false;
    /// [`frontier`] sets it relative to the other strategies.
    pub fn at(t: u64, angle: ProblemAngle) -> Result<Self> {
        let p = success_probability(t, angle);
        Self::from_probability(t, p)
    }

    pub fn from_probability(t: u64, p: f64) -> Result<Self> {
        if t == 0 {
            return Err(Error::InvalidArgument(
                "restart strategies need at least one iteration per trial".into(),
            ));
        }
        if !(p >= PROBABILITY_FLOOR) || p > 1.0 {
            return Err(Error::DegenerateStrategy { t, p });
        }
        let tf = t as f64;
        let mean = tf / p;
        let mut point = Self {
            t,
            p,
            mean,
            second_moment: second_moment(tf, p),
            std: mean * (1.0 - p).sqrt(),
            sharpe: 0.0,
            efficient: false,
        };
        point.sharpe = sharpe(&point);
        Ok(point)
    }
}

/// `E[η_t²] = t²(2 − 3p + p²)/((1 − p)p²)`. The numerator factors as
/// `(1 − p)(2 − p)`, which keeps the expression finite at `p = 1`.
pub fn second_moment(t: f64, p: f64) -> f64 {
    t * t * (2.0 - p) / (p * p)
}

/// `sin²((2t+1)θ)`, clamped to `[0, 1]`.
pub fn success_probability(t: u64, angle: ProblemAngle) -> f64 {
    let phase = (2 * t + 1) as f64 * angle.theta;
    let s = phase.sin();
    (s * s).clamp(0.0, 1.0)
}

/// The iteration count that brings the success probability closest to one.
pub fn certainty_iterations(angle: ProblemAngle) -> Result<u64> {
    if angle.fraction > 0.5 {
        return Err(Error::RegimeViolation(angle.fraction));
    }
    // (2t + 1)θ = π/2, rounded to the nearest integer t.
    let t = (PI / (4.0 * angle.theta) - 0.5).round();
    Ok((t as u64).max(1))
}

/// Expected number of iterations `t / p_t` for the restart strategy of length `t`.
pub fn expected_iterations(t: u64, angle: ProblemAngle) -> Result<f64> {
    FrontierPoint::at(t, angle).map(|pt| pt.mean)
}

/// Return-to-risk ratio `mean / std = 1/√(1 − p)`. Strategies within
/// [`CERTAINTY_TOLERANCE`] of certain success report `f64::INFINITY`.
pub fn sharpe(point: &FrontierPoint) -> f64 {
    let miss = 1.0 - point.p;
    if point.std == 0.0 || miss <= CERTAINTY_TOLERANCE {
        f64::INFINITY
    } else {
        miss.sqrt().recip()
    }
}

/// Every restart strategy with `t ∈ [1, t_max]`, ordered by `t`, with
/// Pareto-efficiency flags on `(mean, std)`.
///
/// Trial lengths whose success probability falls below [`PROBABILITY_FLOOR`]
/// have no finite mean and are left out.
pub fn frontier(angle: ProblemAngle, t_max: u64) -> Vec<FrontierPoint> {
    let mut points: Vec<FrontierPoint> = (1..=t_max)
        .filter_map(|t| FrontierPoint::at(t, angle).ok())
        .collect();
    let objectives: Vec<(f64, f64)> = points.iter().map(|p| (p.mean, p.std)).collect();
    for (point, efficient) in points.iter_mut().zip(efficient_flags(&objectives)) {
        point.efficient = efficient;
    }
    points
}

/// The strategy with the smallest expected iteration count over `t ∈ [1, t_max]`.
pub fn optimal_restart(angle: ProblemAngle, t_max: u64) -> Result<FrontierPoint> {
    if t_max == 0 {
        return Err(Error::InvalidArgument("t_max must be positive".into()));
    }
    if angle.fraction <= 0.5 {
        let certain = certainty_iterations(angle)?;
        if t_max < certain {
            return Err(Error::InvalidArgument(format!(
                "t_max = {t_max} is below the certainty iteration count {certain}"
            )));
        }
    }
    frontier(angle, t_max)
        .into_iter()
        .min_by(|a, b| a.mean.total_cmp(&b.mean).then(a.std.total_cmp(&b.std)))
        .ok_or(Error::DegenerateStrategy { t: t_max, p: 0.0 })
}

/// Root `z ∈ (π/2, π)` of `tan(z/2) = z`, the optimal rotation phase of the
/// continuous restart problem. Minimizing `u / sin²u` over `u = tθ`-like
/// phases gives `tan u = 2u`; with `z = 2u` this is the equation above.
pub fn optimal_phase_root() -> f64 {
    let f = |z: f64| (z / 2.0).tan() - z;
    let (mut lo, mut hi) = (1.6, 3.1);
    while hi - lo > 1e-12 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Small-angle optimal expected waiting time `z / (4θ sin²(z/2))`.
pub fn continuous_optimal_mean(angle: ProblemAngle) -> f64 {
    let z = optimal_phase_root();
    let s = (z / 2.0).sin();
    z / (4.0 * angle.theta * s * s)
}

/// Pareto flags for minimization of both coordinates: a point is efficient
/// when no other point is at least as good in both and strictly better in one.
/// Identical points do not dominate each other.
pub fn efficient_flags(points: &[(f64, f64)]) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (points[a], points[b]);
        pa.0.total_cmp(&pb.0).then(pa.1.total_cmp(&pb.1))
    });

    let mut flags = vec![false; points.len()];
    // Smallest second coordinate over all strictly-earlier groups of equal points.
    let mut best_before = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let head = points[order[i]];
        let mut j = i;
        while j < order.len() && points[order[j]] == head {
            j += 1;
        }
        let efficient = head.1 < best_before;
        for &idx in &order[i..j] {
            flags[idx] = efficient;
        }
        best_before = best_before.min(head.1);
        i = j;
    }
    flags
}
