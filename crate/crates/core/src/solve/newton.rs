use nalgebra::{DMatrix, DVector};

use crate::costs::{FeasibleBox, WsaaProblem};
use crate::error::{Result, WsaaError};

use super::{armijo_step, Algorithm, SolverConfig, SolverTrace};

/// Smallest Hessian eigenvalue accepted as positive definite.
const MIN_EIGENVALUE: f64 = 1e-10;
const MAX_PROJECTION_DIM: usize = 4;

/// `argmin_{z in box} (z - target)' H (z - target) / 2`, solved exactly by
/// enumerating which coordinates sit at their lower bound, upper bound or
/// are free.
pub fn h_metric_projection(
    h: &DMatrix<f64>,
    target: &[f64],
    bounds: &FeasibleBox,
) -> Result<Vec<f64>> {
    let d = target.len();
    if d > MAX_PROJECTION_DIM {
        return Err(WsaaError::UnsupportedDimension(d));
    }
    if h.nrows() != d || h.ncols() != d || bounds.dim() != d {
        return Err(WsaaError::DimensionMismatch {
            expected: d,
            got: h.nrows(),
            context: "metric projection",
        });
    }
    if bounds.contains(target, 0.0) {
        return Ok(target.to_vec());
    }
    let (lo, hi) = (bounds.lower(), bounds.upper());
    let tol = 1e-12 * (1.0 + bounds.diameter());
    let mut best: Option<(f64, Vec<f64>)> = None;
    let patterns = 3usize.pow(d as u32);
    for code in 0..patterns {
        // Digit j of `code` in base 3: 0 free, 1 lower, 2 upper.
        let mut z = target.to_vec();
        let mut free = Vec::with_capacity(d);
        let mut c = code;
        for j in 0..d {
            match c % 3 {
                0 => free.push(j),
                1 => z[j] = lo[j],
                _ => z[j] = hi[j],
            }
            c /= 3;
        }
        if !free.is_empty() {
            // Stationarity in the free block: H_FF (z_F - t_F) = -H_FC (z_C - t_C).
            let k = free.len();
            let mut hff = DMatrix::zeros(k, k);
            let mut rhs = DVector::zeros(k);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    hff[(r, s)] = h[(i, j)];
                }
                rhs[r] = -(0..d)
                    .filter(|j| !free.contains(j))
                    .map(|j| h[(i, j)] * (z[j] - target[j]))
                    .sum::<f64>();
            }
            let Some(sol) = hff.cholesky().map(|c| c.solve(&rhs)) else {
                continue;
            };
            for (r, &i) in free.iter().enumerate() {
                z[i] = target[i] + sol[r];
            }
        }
        if !bounds.contains(&z, tol) {
            continue;
        }
        let z = bounds.project(&z);
        let diff = DVector::from_iterator(d, z.iter().zip(target).map(|(a, b)| a - b));
        let val = diff.dot(&(h * &diff));
        if best.as_ref().is_none_or(|(v, _)| val < *v) {
            best = Some((val, z));
        }
    }
    best.map(|(_, z)| z)
        .ok_or_else(|| WsaaError::invalid("metric projection found no feasible pattern"))
}

pub(crate) fn check_curvature(h: &DMatrix<f64>) -> Result<()> {
    let min = h
        .clone()
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min);
    if !(min >= MIN_EIGENVALUE) {
        return Err(WsaaError::Curvature {
            min_eigenvalue: min,
        });
    }
    Ok(())
}

/// One projected Newton direction `Π_H(z - H⁻¹∇f) - z` at `z`.
pub(crate) fn newton_direction(p: &WsaaProblem, z: &[f64], g: &[f64]) -> Result<Vec<f64>> {
    let h = p.hessian_unchecked(z);
    check_curvature(&h)?;
    let d = z.len();
    let step = h
        .clone()
        .cholesky()
        .ok_or(WsaaError::Curvature {
            min_eigenvalue: 0.0,
        })?
        .solve(&DVector::from_column_slice(g));
    let target: Vec<f64> = (0..d).map(|j| z[j] - step[j]).collect();
    let proj = h_metric_projection(&h, &target, p.bounds())?;
    Ok(proj.iter().zip(z).map(|(a, b)| a - b).collect())
}

/// Projected Newton with Armijo backtracking.
pub fn projected_newton(p: &WsaaProblem, cfg: &SolverConfig) -> Result<SolverTrace> {
    cfg.check_against(p)?;
    let Algorithm::NewtonArmijo { a, b } = cfg.algorithm else {
        return Err(WsaaError::invalid(
            "projected_newton needs a newton_armijo configuration",
        ));
    };
    if !p.model().is_smooth() {
        return Err(WsaaError::WrongModel {
            operation: "hessian",
            model: p.model().name(),
        });
    }
    if p.model().d_z() > MAX_PROJECTION_DIM {
        return Err(WsaaError::UnsupportedDimension(p.model().d_z()));
    }
    let z0 = p.bounds().project(&cfg.z0);
    let f0 = p.objective_unchecked(&z0);
    let mut trace = SolverTrace::start(z0, f0);
    for t in 1..=cfg.max_iters {
        let z = trace.last().to_vec();
        let f = *trace.objective_values.last().expect("nonempty");
        let g = p.gradient_unchecked(&z);
        let d = newton_direction(p, &z, &g)?;
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
