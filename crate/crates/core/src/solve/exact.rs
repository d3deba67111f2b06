use serde::{Deserialize, Serialize};

use crate::costs::{CostModel, WsaaProblem};
use crate::error::{ensure_finite, Result, WsaaError};

use super::newton::newton_direction;
use super::{armijo_step, norm, SolverTrace};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSolution {
    pub z: Vec<f64>,
    pub value: f64,
}

/// Smallest value whose cumulative weight reaches `level` (the left-continuous
/// generalized inverse of the weighted empirical CDF).
pub fn weighted_quantile(values: &[f64], weights: &[f64], level: f64) -> Result<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(WsaaError::invalid(
            "weighted quantile needs equally many values and weights",
        ));
    }
    if !(level > 0.0 && level <= 1.0) {
        return Err(WsaaError::invalid(format!(
            "quantile level must lie in (0, 1], got {level}"
        )));
    }
    ensure_finite(values, "quantile values")?;
    let mut order: Vec<usize> = (0..values.len()).filter(|&i| weights[i] > 0.0).collect();
    if order.is_empty() {
        return Err(WsaaError::invalid(
            "weighted quantile needs a positive weight",
        ));
    }
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut cum = 0.0;
    for (k, &i) in order.iter().enumerate() {
        cum += weights[i];
        // Ties are absorbed before the comparison so that the cumulative
        // weight at a value counts all of its copies.
        let tied_next = order.get(k + 1).is_some_and(|&j| values[j] == values[i]);
        if !tied_next && cum >= level {
            return Ok(values[i]);
        }
    }
    Ok(values[*order.last().expect("nonempty")])
}

/// Unique root `q` of `cu Σ w (y - q)^+ = co Σ w (q - y)^+`, found exactly by
/// locating the linear piece that contains it.
pub fn weighted_expectile(values: &[f64], weights: &[f64], cu: f64, co: f64) -> Result<f64> {
    if values.is_empty() || values.len() != weights.len() {
        return Err(WsaaError::invalid(
            "weighted expectile needs equally many values and weights",
        ));
    }
    ensure_finite(values, "expectile values")?;
    let mut pts: Vec<(f64, f64)> = values
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(v, w)| (*v, *w))
        .collect();
    if pts.is_empty() {
        return Err(WsaaError::invalid(
            "weighted expectile needs a positive weight",
        ));
    }
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total_w: f64 = pts.iter().map(|p| p.1).sum();
    let total_s: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    // With the k smallest points below q the condition is linear in q:
    // co (W_lo q - S_lo) = cu (S_hi - W_hi q).
    let (mut w_lo, mut s_lo) = (0.0, 0.0);
    for k in 0..=pts.len() {
        let (w_hi, s_hi) = (total_w - w_lo, total_s - s_lo);
        let q = (co * s_lo + cu * s_hi) / (co * w_lo + cu * w_hi);
        let above_prev = k == 0 || q >= pts[k - 1].0;
        let below_next = k == pts.len() || q <= pts[k].0;
        if above_prev && below_next {
            return Ok(q);
        }
        if k < pts.len() {
            w_lo += pts[k].1;
            s_lo += pts[k].0 * pts[k].1;
        }
    }
    // Rounding can make adjacent pieces miss by an ulp; fall back to the
    // piece whose root is closest to its interval.
    let mut best = (f64::INFINITY, pts[0].0);
    let (mut w_lo, mut s_lo) = (0.0, 0.0);
    for k in 0..=pts.len() {
        let (w_hi, s_hi) = (total_w - w_lo, total_s - s_lo);
        let q = (co * s_lo + cu * s_hi) / (co * w_lo + cu * w_hi);
        let lo = if k == 0 {
            f64::NEG_INFINITY
        } else {
            pts[k - 1].0
        };
        let hi = if k == pts.len() {
            f64::INFINITY
        } else {
            pts[k].0
        };
        let miss = (lo - q).max(q - hi).max(0.0);
        if miss < best.0 {
            best = (miss, q.clamp(lo, hi));
        }
        if k < pts.len() {
            w_lo += pts[k].1;
            s_lo += pts[k].0 * pts[k].1;
        }
    }
    Ok(best.1)
}

const EXACT_NEWTON_A: f64 = 0.1;
const EXACT_NEWTON_B: f64 = 0.5;
const EXACT_NEWTON_MAX_ITERS: usize = 500;
const EXACT_GRADIENT_TOL: f64 = 1e-10;

/// Exact minimizer of the wSAA problem.
pub fn solve_exact(p: &WsaaProblem) -> Result<ExactSolution> {
    let z = match p.model() {
        CostModel::Newsvendor { .. } => {
            let level = p.model().critical_ratio().expect("newsvendor has a ratio");
            let q = weighted_quantile(p.outcomes(), p.weights().as_slice(), level)?;
            p.bounds().project(&[q])
        }
        CostModel::Expectile { cu, co } => {
            let q = weighted_expectile(p.outcomes(), p.weights().as_slice(), *cu, *co)?;
            p.bounds().project(&[q])
        }
        CostModel::Quartic { b, .. } => exact_quartic(p, b)?,
    };
    let value = p.objective_unchecked(&z);
    Ok(ExactSolution { z, value })
}

fn exact_quartic(p: &WsaaProblem, b: &[f64]) -> Result<Vec<f64>> {
    let d = b.len();
    let mut start = vec![0.0; d];
    for (w, y) in p.support() {
        for j in 0..d {
            start[j] += w * b[j] * y[j];
        }
    }
    let start = p.bounds().project(&start);
    let spread: Vec<f64> = p
        .bounds()
        .lower()
        .iter()
        .zip(p.bounds().upper())
        .map(|(l, u)| 0.1 * (u - l))
        .collect();
    let mut starts = vec![start.clone()];
    for sign in [1.0, -1.0, 0.5] {
        let s: Vec<f64> = start
            .iter()
            .zip(&spread)
            .enumerate()
            .map(|(j, (z, w))| z + sign * w * if j % 2 == 0 { 1.0 } else { -1.0 })
            .collect();
        starts.push(p.bounds().project(&s));
    }
    let mut last_err = None;
    for s in starts {
        match newton_to_tolerance(p, s) {
            Ok(z) => return Ok(z),
            Err(e @ WsaaError::Curvature { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(WsaaError::OracleFailure {
        reason: format!(
            "every Newton start hit a singular Hessian ({})",
            last_err.expect("at least one start")
        ),
        trace: None,
    })
}

/// Norm of the projected gradient `z - Π(z - ∇f)`.
fn projected_gradient_norm(p: &WsaaProblem, z: &[f64], g: &[f64]) -> f64 {
    let t: Vec<f64> = z.iter().zip(g).map(|(a, b)| a - b).collect();
    let proj = p.bounds().project(&t);
    z.iter()
        .zip(&proj)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

fn newton_to_tolerance(p: &WsaaProblem, z0: Vec<f64>) -> Result<Vec<f64>> {
    let f0 = p.objective_unchecked(&z0);
    let mut trace = SolverTrace::start(z0, f0);
    for _ in 0..EXACT_NEWTON_MAX_ITERS {
        let z = trace.last().to_vec();
        let f = *trace.objective_values.last().expect("nonempty");
        let g = p.gradient_unchecked(&z);
        if projected_gradient_norm(p, &z, &g) < EXACT_GRADIENT_TOL {
            return Ok(z);
        }
        let d = newton_direction(p, &z, &g)?;
        if norm(&d) <= 4.0 * f64::EPSILON * (1.0 + norm(&z)) {
            return Ok(z);
        }
        match armijo_step(p, &z, f, &g, &d, EXACT_NEWTON_A, EXACT_NEWTON_B) {
            Ok(Some((ell, next))) => {
                let f_next = p.objective_unchecked(&next);
                trace.push(next, f_next);
                trace.backtrack_counts.push(ell);
            }
            Ok(None) => return Ok(z),
            Err(_) => {
                return Err(WsaaError::OracleFailure {
                    reason: "line search stalled before the gradient tolerance was met".into(),
                    trace: Some(Box::new(trace)),
                })
            }
        }
    }
    Err(WsaaError::OracleFailure {
        reason: format!("gradient tolerance not met within {EXACT_NEWTON_MAX_ITERS} Newton steps"),
        trace: Some(Box::new(trace)),
    })
}
