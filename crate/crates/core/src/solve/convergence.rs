use serde::{Deserialize, Serialize};

use crate::costs::{CostModel, WsaaProblem};
use crate::error::{Result, WsaaError};
use crate::stats::ols;

use super::SolverTrace;

/// Convergence regime of an optimization algorithm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ConvergenceClass {
    /// `gap_m <= Δ / m^β`.
    Sublinear { beta: f64 },
    /// `gap_t <= θ gap_{t-1}`.
    Linear { theta: f64 },
    /// `gap_t <= θ gap_{t-1}^η`.
    Superlinear { theta: f64, eta: f64 },
}

impl ConvergenceClass {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ConvergenceClass::Sublinear { beta } if !(beta > 0.0 && beta.is_finite()) => Err(
                WsaaError::InvalidRegime(format!("sublinear beta must be positive, got {beta}")),
            ),
            ConvergenceClass::Linear { theta } if !(theta > 0.0 && theta < 1.0) => Err(
                WsaaError::InvalidRegime(format!("linear theta must lie in (0, 1), got {theta}")),
            ),
            ConvergenceClass::Superlinear { theta, eta }
                if !(theta > 0.0 && theta.is_finite() && eta > 1.0 && eta.is_finite()) =>
            {
                Err(WsaaError::InvalidRegime(format!(
                    "superlinear needs theta > 0 and eta > 1, got theta = {theta}, eta = {eta}"
                )))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConvergenceClass::Sublinear { .. } => "sublinear",
            ConvergenceClass::Linear { .. } => "linear",
            ConvergenceClass::Superlinear { .. } => "superlinear",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifyOptions {
    /// Gaps at or below this are treated as converged and not checked.
    pub converged_below: f64,
    /// Open interval of gaps used to fit `(θ, η)` in the superlinear case.
    pub fit_window: (f64, f64),
    /// Bound `Δ` for the sublinear check; without it only `Δ̂` is reported.
    pub delta_bound: Option<f64>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            converged_below: 1e-13,
            fit_window: (1e-12, 1e-2),
            delta_bound: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub passed: bool,
    /// `θ̂` for linear, `Δ̂ = max t^β gap_t` for sublinear and the largest
    /// `gap_t / gap_{t-1}^η` for superlinear.
    pub worst_ratio: f64,
    /// Fitted `(θ̂, η̂)` for superlinear traces with at least two usable
    /// pairs in the fit window.
    pub fitted: Option<(f64, f64)>,
    /// Number of inequalities that were actually checked.
    pub checked: usize,
}

/// Optimality gaps `f(z_t) - f(ẑ)` computed from per-sample differences,
/// which keeps gaps far below the objective's magnitude accurate.
pub fn stable_gaps(p: &WsaaProblem, trace: &SolverTrace, z_hat: &[f64]) -> Result<Vec<f64>> {
    trace
        .iterates
        .iter()
        .map(|z| p.objective_gap(z, z_hat))
        .collect()
}

/// Sublinear constant `Δ = diam(Z) L` for the subgradient method, with `L`
/// the Lipschitz constant of the newsvendor objective. `None` for smooth
/// models.
pub fn subgradient_delta_bound(p: &WsaaProblem) -> Option<f64> {
    match *p.model() {
        CostModel::Newsvendor { cu, co } => Some(p.bounds().diameter() * cu.max(co)),
        _ => None,
    }
}

/// Checks a trace against its convergence class using `objective_values -
/// f_star` as gaps.
pub fn verify_convergence_class(
    trace: &SolverTrace,
    f_star: f64,
    cls: ConvergenceClass,
    opts: &VerifyOptions,
) -> Result<ConvergenceReport> {
    let gaps: Vec<f64> = trace.objective_values.iter().map(|f| f - f_star).collect();
    verify_gaps(&gaps, cls, opts)
}

/// Checks the defining inequality of `cls` along a gap sequence
/// `gap_0, gap_1, ...`.
pub fn verify_gaps(
    gaps: &[f64],
    cls: ConvergenceClass,
    opts: &VerifyOptions,
) -> Result<ConvergenceReport> {
    cls.validate()?;
    let eps = opts.converged_below;
    let slack = 1e-12;
    let report = match cls {
        ConvergenceClass::Linear { theta } => {
            let mut worst: f64 = 0.0;
            let mut checked = 0;
            for w in gaps.windows(2) {
                if w[0] <= eps || w[1] <= eps {
                    continue;
                }
                worst = worst.max(w[1] / w[0]);
                checked += 1;
            }
            ConvergenceReport {
                passed: worst <= theta * (1.0 + slack),
                worst_ratio: worst,
                fitted: None,
                checked,
            }
        }
        ConvergenceClass::Sublinear { beta } => {
            // The delivered point of a sublinear method is its best iterate.
            let mut best = f64::INFINITY;
            let mut worst: f64 = 0.0;
            let mut checked = 0;
            for (t, g) in gaps.iter().enumerate().skip(1) {
                best = best.min(*g).min(gaps[0]);
                if best <= eps {
                    continue;
                }
                worst = worst.max((t as f64).powf(beta) * best);
                checked += 1;
            }
            ConvergenceReport {
                passed: opts
                    .delta_bound
                    .is_none_or(|delta| worst <= delta * (1.0 + slack)),
                worst_ratio: worst,
                fitted: None,
                checked,
            }
        }
        ConvergenceClass::Superlinear { theta, eta } => {
            let mut worst: f64 = 0.0;
            let mut checked = 0;
            for w in gaps.windows(2) {
                if w[0] <= eps || w[1] <= eps {
                    continue;
                }
                worst = worst.max(w[1] / w[0].powf(eta));
                checked += 1;
            }
            ConvergenceReport {
                passed: worst <= theta * (1.0 + slack),
                worst_ratio: worst,
                fitted: fit_superlinear(gaps, opts.fit_window),
                checked,
            }
        }
    };
    Ok(report)
}

/// OLS of `ln gap_{t+1}` on `ln gap_t` over consecutive pairs inside the
/// window; returns `(θ̂, η̂)`.
fn fit_superlinear(gaps: &[f64], (lo, hi): (f64, f64)) -> Option<(f64, f64)> {
    let inside = |g: f64| g > lo && g < hi;
    let (xs, ys): (Vec<f64>, Vec<f64>) = gaps
        .windows(2)
        .filter(|w| inside(w[0]) && inside(w[1]))
        .map(|w| (w[0].ln(), w[1].ln()))
        .unzip();
    if xs.len() < 2 {
        return None;
    }
    let fit = ols(&xs, &ys).ok()?;
    Some((fit.intercept.exp(), fit.slope))
}
