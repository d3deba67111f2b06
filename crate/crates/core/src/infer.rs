//! Variance estimation and normal-approximation confidence intervals for the
//! optimal conditional expected cost.

use serde::{Deserialize, Serialize};

use crate::costs::WsaaProblem;
use crate::error::{Result, WsaaError};
use crate::kernels::Kernel;
use crate::stats::normal_quantile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalReport {
    pub estimate: f64,
    pub variance_hat: f64,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
    /// Nominal coverage `1 - α`.
    pub level: f64,
    pub n: usize,
    pub h: f64,
    pub d_x: usize,
}

impl IntervalReport {
    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// `σ̂² = Σ w_i (F(z; y_i) - f̂(z))²`.
pub fn sample_cond_variance(p: &WsaaProblem, z: &[f64]) -> Result<f64> {
    let f_hat = p.objective(z)?;
    let model = p.model();
    let s: f64 = p
        .support()
        .map(|(w, y)| {
            let r = model.value_unchecked(z, y) - f_hat;
            w * r * r
        })
        .sum();
    Ok(s.max(0.0))
}

fn check_scale(n: usize, h: f64, d_x: usize) -> Result<f64> {
    if n == 0 || d_x == 0 || !(h > 0.0 && h.is_finite()) {
        return Err(WsaaError::invalid(format!(
            "need n >= 1, d_x >= 1 and a positive bandwidth; got n = {n}, d_x = {d_x}, h = {h}"
        )));
    }
    Ok(n as f64 * h.powi(d_x as i32))
}

/// `V̂ = n h^{d_x} σ̂² Σ w_i²`, which needs no density estimate.
pub fn variance_estimate(p: &WsaaProblem, z: &[f64], n: usize, h: f64, d_x: usize) -> Result<f64> {
    let scale = check_scale(n, h, d_x)?;
    let v = scale * sample_cond_variance(p, z)? * p.weights().sum_of_squares();
    if v < 0.0 {
        log::debug!("clamping negative variance estimate {v:e} to zero");
    }
    Ok(v.max(0.0))
}

/// `Ṽ = σ̂² R₂ / p̂`, from a density estimate and the kernel roughness.
pub fn direct_variance_estimate(
    p: &WsaaProblem,
    z: &[f64],
    kde_value: f64,
    r2: f64,
) -> Result<f64> {
    if !(kde_value > 0.0) {
        return Err(WsaaError::DegenerateDensity);
    }
    if !(r2 > 0.0 && r2.is_finite()) {
        return Err(WsaaError::invalid(format!(
            "kernel roughness must be positive, got {r2}"
        )));
    }
    Ok(sample_cond_variance(p, z)? * r2 / kde_value)
}

/// `Ṽ` for a kernel normalized to unit mass, given the density estimate
/// and roughness of the unnormalized kernel `K(0) = 1`. This is the quantity
/// `V̂` estimates, whichever normalization the weights use.
pub fn normalized_direct_variance(
    p: &WsaaProblem,
    z: &[f64],
    kernel: Kernel,
    d_x: usize,
    raw_kde: f64,
) -> Result<f64> {
    let mass = kernel.mass(d_x)?;
    direct_variance_estimate(p, z, raw_kde / mass, kernel.r2(d_x)? / (mass * mass))
}

/// `estimate ∓ Φ⁻¹(1 - α/2) sqrt(V̂ / (n h^{d_x}))`.
pub fn confidence_interval(
    estimate: f64,
    variance_hat: f64,
    n: usize,
    h: f64,
    d_x: usize,
    alpha: f64,
) -> Result<IntervalReport> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(WsaaError::invalid(format!(
            "alpha must lie in (0, 1), got {alpha}"
        )));
    }
    if !(variance_hat >= 0.0 && variance_hat.is_finite()) {
        return Err(WsaaError::invalid(format!(
            "variance estimate must be finite and nonnegative, got {variance_hat}"
        )));
    }
    if !estimate.is_finite() {
        return Err(WsaaError::invalid("point estimate is not finite"));
    }
    let scale = check_scale(n, h, d_x)?;
    let half_width = normal_quantile(1.0 - alpha / 2.0)? * (variance_hat / scale).sqrt();
    Ok(IntervalReport {
        estimate,
        variance_hat,
        half_width,
        lower: estimate - half_width,
        upper: estimate + half_width,
        level: 1.0 - alpha,
        n,
        h,
        d_x,
    })
}

/// Splits `f_budgeted - f_star` into optimization and statistical error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    pub optimization_error: f64,
    pub statistical_error: f64,
}

pub fn error_decomposition(f_budgeted: f64, f_exact: f64, f_star: f64) -> ErrorDecomposition {
    ErrorDecomposition {
        optimization_error: f_budgeted - f_exact,
        statistical_error: f_exact - f_star,
    }
}

/// `(f̂ - f*) / sqrt(σ̂² Σ w²)`, asymptotically standard normal.
pub fn studentized_pivot(p: &WsaaProblem, z: &[f64], f_star: f64) -> Result<f64> {
    let sd = (sample_cond_variance(p, z)? * p.weights().sum_of_squares()).sqrt();
    if !(sd > 0.0) {
        return Err(WsaaError::invalid("pivot needs a positive standard error"));
    }
    Ok((p.objective(z)? - f_star) / sd)
}
