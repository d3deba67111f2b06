//! Budgeted iterative solvers, exact solvers and convergence checks for the
//! wSAA problem.

mod convergence;
mod exact;
mod first_order;
mod newton;

use serde::{Deserialize, Serialize};

use crate::costs::WsaaProblem;
use crate::error::{ensure_dim, ensure_finite, Result, WsaaError};

pub use convergence::{
    stable_gaps, subgradient_delta_bound, verify_convergence_class, verify_gaps, ConvergenceClass,
    ConvergenceReport, VerifyOptions,
};
pub use exact::{solve_exact, weighted_expectile, weighted_quantile, ExactSolution};
pub use first_order::{projected_gradient_armijo, projected_subgradient};
pub use newton::{h_metric_projection, projected_newton};

/// Largest backtracking exponent tried before the line search gives up.
pub const MAX_BACKTRACKS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum Algorithm {
    /// Projected subgradient with the fixed step `mu0 / sqrt(m + 1)`.
    Subgradient { mu0: f64 },
    /// Projected gradient with Armijo backtracking.
    GradientArmijo { a: f64, b: f64 },
    /// Projected Newton with Hessian-metric projection and Armijo
    /// backtracking.
    NewtonArmijo { a: f64, b: f64 },
}

impl Algorithm {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Algorithm::Subgradient { mu0 } => {
                if !(mu0 > 0.0 && mu0.is_finite()) {
                    return Err(WsaaError::invalid(format!(
                        "mu0 must be positive, got {mu0}"
                    )));
                }
            }
            Algorithm::GradientArmijo { a, b } | Algorithm::NewtonArmijo { a, b } => {
                if !(a > 0.0 && a < 0.5) {
                    return Err(WsaaError::invalid(format!(
                        "Armijo parameter a must lie in (0, 0.5), got {a}"
                    )));
                }
                if !(b > 0.0 && b < 1.0) {
                    return Err(WsaaError::invalid(format!(
                        "Armijo parameter b must lie in (0, 1), got {b}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            Algorithm::Subgradient { .. } => "subgradient",
            Algorithm::GradientArmijo { .. } => "gradient_armijo",
            Algorithm::NewtonArmijo { .. } => "newton_armijo",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    /// Iteration budget `m`.
    pub max_iters: usize,
    pub z0: Vec<f64>,
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm, max_iters: usize, z0: Vec<f64>) -> Result<Self> {
        let cfg = Self {
            algorithm,
            max_iters,
            z0,
        };
        cfg.algorithm.validate()?;
        ensure_finite(&cfg.z0, "initial point")?;
        Ok(cfg)
    }

    pub(crate) fn check_against(&self, p: &WsaaProblem) -> Result<()> {
        self.algorithm.validate()?;
        ensure_dim(p.model().d_z(), self.z0.len(), "initial point")?;
        ensure_finite(&self.z0, "initial point")?;
        if !p.bounds().contains(&self.z0, 1e-10) {
            return Err(WsaaError::invalid(format!(
                "initial point {:?} lies outside the feasible box",
                self.z0
            )));
        }
        Ok(())
    }
}

/// Iterates and objective values of one solver run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverTrace {
    /// `z^(0), ..., z^(iterations_used)`.
    pub iterates: Vec<Vec<f64>>,
    /// Objective value at each iterate.
    pub objective_values: Vec<f64>,
    pub iterations_used: usize,
    /// Backtracking exponent accepted at each iteration (empty for the
    /// subgradient method).
    pub backtrack_counts: Vec<usize>,
    /// Index of the iterate the solver delivers: the best one for the
    /// subgradient method, the last one otherwise.
    pub delivered_index: usize,
}

impl SolverTrace {
    fn start(z0: Vec<f64>, f0: f64) -> Self {
        Self {
            iterates: vec![z0],
            objective_values: vec![f0],
            iterations_used: 0,
            backtrack_counts: Vec::new(),
            delivered_index: 0,
        }
    }

    fn push(&mut self, z: Vec<f64>, f: f64) {
        self.iterates.push(z);
        self.objective_values.push(f);
        self.iterations_used += 1;
        self.delivered_index = self.iterations_used;
    }

    pub fn delivered(&self) -> &[f64] {
        &self.iterates[self.delivered_index]
    }

    pub fn delivered_value(&self) -> f64 {
        self.objective_values[self.delivered_index]
    }

    pub fn last(&self) -> &[f64] {
        self.iterates.last().expect("trace holds at least z0")
    }
}

/// Runs the configured algorithm for its iteration budget.
pub fn run_solver(p: &WsaaProblem, cfg: &SolverConfig) -> Result<SolverTrace> {
    match cfg.algorithm {
        Algorithm::Subgradient { .. } => projected_subgradient(p, cfg),
        Algorithm::GradientArmijo { .. } => projected_gradient_armijo(p, cfg),
        Algorithm::NewtonArmijo { .. } => projected_newton(p, cfg),
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Armijo backtracking along a feasible direction `d` from `z`.
///
/// Returns the accepted exponent and point, or `None` when `z` is
/// stationary up to rounding. The sufficient-decrease test uses per-sample
/// objective differences so that it stays meaningful close to the optimum.
pub(crate) fn armijo_step(
    p: &WsaaProblem,
    z: &[f64],
    f_z: f64,
    grad: &[f64],
    d: &[f64],
    a: f64,
    b: f64,
) -> std::result::Result<Option<(usize, Vec<f64>)>, usize> {
    let slope = dot(grad, d);
    let scale = f_z.abs().max(f64::MIN_POSITIVE);
    if !(slope < 0.0) || norm(d) <= f64::EPSILON * (1.0 + norm(z)) {
        return Ok(None);
    }
    let bounds = p.bounds();
    let mut step = 1.0;
    for ell in 0..=MAX_BACKTRACKS {
        let cand = bounds.project(
            &z.iter()
                .zip(d)
                .map(|(zi, di)| zi + step * di)
                .collect::<Vec<_>>(),
        );
        let decrease = p
            .objective_gap(&cand, z)
            .expect("candidate lies in the box and has the right dimension");
        if decrease <= a * step * slope {
            return Ok(Some((ell, cand)));
        }
        step *= b;
    }
    // A directional derivative this small is indistinguishable from zero.
    if slope.abs() <= 1e-9 * scale {
        return Ok(None);
    }
    Err(MAX_BACKTRACKS)
}
