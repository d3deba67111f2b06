use crate::costs::WsaaProblem;
use crate::error::{Result, WsaaError};

use super::{armijo_step, Algorithm, SolverConfig, SolverTrace};

/// Projected subgradient descent with the fixed step `mu0 / sqrt(m + 1)`.
///
/// Runs exactly `m` iterations and delivers the best iterate seen.
pub fn projected_subgradient(p: &WsaaProblem, cfg: &SolverConfig) -> Result<SolverTrace> {
    cfg.check_against(p)?;
    let Algorithm::Subgradient { mu0 } = cfg.algorithm else {
        return Err(WsaaError::invalid(
            "projected_subgradient needs a subgradient configuration",
        ));
    };
    if p.model().is_smooth() {
        return Err(WsaaError::WrongModel {
            operation: "subgradient",
            model: p.model().name(),
        });
    }
    let m = cfg.max_iters;
    let step = mu0 / ((m + 1) as f64).sqrt();
    let z0 = p.bounds().project(&cfg.z0);
    let f0 = p.objective_unchecked(&z0);
    let mut trace = SolverTrace::start(z0, f0);
    let mut best = (0, f0);
    let mut z = trace.iterates[0].clone();
    for t in 1..=m {
        let g = p.subgradient_unchecked(z[0]);
        z = p.bounds().project(&[z[0] - step * g]);
        let f = p.objective_unchecked(&z);
        trace.push(z.clone(), f);
        if f < best.1 {
            best = (t, f);
        }
    }
    trace.delivered_index = best.0;
    Ok(trace)
}

/// Projected gradient descent with Armijo backtracking along
/// `d = Π(z - ∇f(z)) - z`.
pub fn projected_gradient_armijo(p: &WsaaProblem, cfg: &SolverConfig) -> Result<SolverTrace> {
    cfg.check_against(p)?;
    let Algorithm::GradientArmijo { a, b } = cfg.algorithm else {
        return Err(WsaaError::invalid(
            "projected_gradient_armijo needs a gradient_armijo configuration",
        ));
    };
    if !p.model().is_smooth() {
        return Err(WsaaError::WrongModel {
            operation: "gradient",
            model: p.model().name(),
        });
    }
    let z0 = p.bounds().project(&cfg.z0);
    let f0 = p.objective_unchecked(&z0);
    let mut trace = SolverTrace::start(z0, f0);
    for t in 1..=cfg.max_iters {
        let z = trace.last().to_vec();
        let f = *trace.objective_values.last().expect("nonempty");
        let g = p.gradient_unchecked(&z);
        let target: Vec<f64> = z.iter().zip(&g).map(|(zi, gi)| zi - gi).collect();
        let d: Vec<f64> = p
            .bounds()
            .project(&target)
            .iter()
            .zip(&z)
            .map(|(pi, zi)| pi - zi)
            .collect();
        match armijo_step(p, &z, f, &g, &d, a, b) {
            Ok(Some((ell, next))) => {
                let f_next = p.objective_unchecked(&next);
                trace.push(next, f_next);
                trace.backtrack_counts.push(ell);
            }
            Ok(None) => break,
            Err(backtracks) => {
                return Err(WsaaError::StalledLineSearch {
                    iteration: t,
                    backtracks,
                    trace: Box::new(trace),
                })
            }
        }
    }
    Ok(trace)
}
