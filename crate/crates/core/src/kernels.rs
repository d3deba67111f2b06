//! Kernel functions, bandwidth schedules and Nadaraya–Watson weights.
//!
//! Covariate matrices are passed as flat row-major slices; the covariate
//! dimension is taken from the query point `x0`. All kernels here are the
//! unnormalized textbook forms, so `K(0) = 1` for every family.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Result, WsaaError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kernel {
    Uniform,
    Epanechnikov,
    Gaussian,
}

impl Kernel {
    /// Kernel value at a point with squared norm `sq_norm`.
    #[inline]
    pub fn value_at_sq_norm(self, sq_norm: f64) -> f64 {
        match self {
            Kernel::Uniform => {
                if sq_norm <= 1.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Kernel::Epanechnikov => {
                if sq_norm <= 1.0 {
                    1.0 - sq_norm
                } else {
                    0.0
                }
            }
            Kernel::Gaussian => (-0.5 * sq_norm).exp(),
        }
    }

    pub fn eval(self, u: &[f64]) -> Result<f64> {
        ensure_finite(u, "kernel argument")?;
        Ok(self.value_at_sq_norm(sq_norm(u)))
    }

    /// `∫ K(u)² du` over `R^d`.
    pub fn r2(self, d: usize) -> Result<f64> {
        check_dim(d)?;
        let ball = unit_ball_volume(d);
        Ok(match self {
            Kernel::Gaussian => PI.powf(d as f64 / 2.0),
            Kernel::Uniform => ball,
            // Radial integral of (1 - r^2)^2 r^(d-1) over [0, 1] is
            // 8 / (d (d + 2) (d + 4)); the unit sphere has area d * V_d.
            Kernel::Epanechnikov => 8.0 * ball / ((d as f64 + 2.0) * (d as f64 + 4.0)),
        })
    }

    /// `∫ K(u) du` over `R^d`. Dividing by this turns `K` into a density.
    pub fn mass(self, d: usize) -> Result<f64> {
        check_dim(d)?;
        let ball = unit_ball_volume(d);
        Ok(match self {
            Kernel::Gaussian => (2.0 * PI).powf(d as f64 / 2.0),
            Kernel::Uniform => ball,
            Kernel::Epanechnikov => 2.0 * ball / (d as f64 + 2.0),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Uniform => "uniform",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Gaussian => "gaussian",
        }
    }
}

fn check_dim(d: usize) -> Result<()> {
    if d == 0 {
        return Err(WsaaError::invalid("covariate dimension must be positive"));
    }
    Ok(())
}

/// Lebesgue volume of the unit ball in `R^d`.
pub fn unit_ball_volume(d: usize) -> f64 {
    // V_0 = 1, V_1 = 2, V_d = 2π/d · V_{d-2}.
    let mut even = 1.0;
    let mut odd = 2.0;
    for k in 2..=d {
        if k % 2 == 0 {
            even *= 2.0 * PI / k as f64;
        } else {
            odd *= 2.0 * PI / k as f64;
        }
    }
    if d.is_multiple_of(2) {
        even
    } else {
        odd
    }
}

#[inline]
fn sq_norm(u: &[f64]) -> f64 {
    u.iter().map(|v| v * v).sum()
}

#[inline]
fn scaled_sq_distance(row: &[f64], x0: &[f64], inv_h: f64) -> f64 {
    row.iter()
        .zip(x0)
        .map(|(a, b)| {
            let u = (a - b) * inv_h;
            u * u
        })
        .sum()
}

/// Bandwidth rule `h_n = h0 · n^(-delta)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSchedule {
    pub h0: f64,
    pub delta: f64,
    pub d_x: usize,
}

impl BandwidthSchedule {
    pub fn new(h0: f64, delta: f64, d_x: usize) -> Result<Self> {
        if !(h0 > 0.0 && h0.is_finite()) {
            return Err(WsaaError::invalid(format!("h0 must be positive, got {h0}")));
        }
        check_dim(d_x)?;
        let upper = 1.0 / d_x as f64;
        if !(delta > 0.0 && delta < upper) {
            return Err(WsaaError::invalid(format!(
                "delta must lie in (0, 1/d_x) = (0, {upper}), got {delta}"
            )));
        }
        let schedule = Self { h0, delta, d_x };
        if !schedule.undersmooths() {
            log::warn!(
                "delta = {delta} is at or below 1/(d_x + 4) = {}; the kernel bias is not \
                 negligible relative to the CLT scaling",
                1.0 / (d_x as f64 + 4.0)
            );
        }
        Ok(schedule)
    }

    /// True when `delta > 1/(d_x + 4)`, the range where intervals are
    /// asymptotically unbiased.
    pub fn undersmooths(&self) -> bool {
        self.delta > 1.0 / (self.d_x as f64 + 4.0)
    }

    pub fn bandwidth(&self, n: usize) -> Result<f64> {
        if n == 0 {
            return Err(WsaaError::invalid("bandwidth needs a positive sample size"));
        }
        Ok(self.h0 * (n as f64).powf(-self.delta))
    }
}

/// Nonnegative weights summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(WsaaError::invalid("weight vector is empty"));
        }
        if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(WsaaError::invalid(format!(
                "weight {i} is negative or non-finite: {}",
                weights[i]
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 * weights.len().max(1) as f64 {
            return Err(WsaaError::invalid(format!("weights sum to {total}, not 1")));
        }
        Ok(Self(weights))
    }

    /// Normalizes nonnegative masses. Fails when the total mass is zero.
    pub fn from_masses(masses: Vec<f64>) -> Result<Self> {
        let total: f64 = masses.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(WsaaError::invalid(format!(
                "cannot normalize masses with total {total}"
            )));
        }
        Ok(Self(masses.into_iter().map(|m| m / total).collect()))
    }

    pub fn uniform(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(WsaaError::invalid("weight vector is empty"));
        }
        Ok(Self(vec![1.0 / n as f64; n]))
    }

    pub fn point_mass(n: usize, k: usize) -> Result<Self> {
        if k >= n {
            return Err(WsaaError::invalid(format!(
                "point mass index {k} out of range for length {n}"
            )));
        }
        let mut w = vec![0.0; n];
        w[k] = 1.0;
        Ok(Self(w))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn sum_of_squares(&self) -> f64 {
        self.0.iter().map(|w| w * w).sum()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

/// `Σ w_i²`; the inverse of the Kish effective sample size.
pub fn sum_sq_weights(w: &WeightVector) -> f64 {
    w.sum_of_squares()
}

fn validate_design(covariates: &[f64], x0: &[f64], h: f64) -> Result<usize> {
    let d = x0.len();
    check_dim(d)?;
    if covariates.is_empty() || !covariates.len().is_multiple_of(d) {
        return Err(WsaaError::invalid(format!(
            "covariate buffer of length {} is not a nonempty multiple of d_x = {d}",
            covariates.len()
        )));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(WsaaError::invalid(format!(
            "bandwidth must be positive, got {h}"
        )));
    }
    ensure_finite(x0, "query point")?;
    ensure_finite(covariates, "covariates")?;
    Ok(covariates.len() / d)
}

/// Nadaraya–Watson weights `K((x_i - x0)/h) / Σ_j K((x_j - x0)/h)`.
pub fn nw_weights(covariates: &[f64], x0: &[f64], kernel: Kernel, h: f64) -> Result<WeightVector> {
    validate_design(covariates, x0, h)?;
    let d = x0.len();
    let inv_h = 1.0 / h;
    let sq: Vec<f64> = covariates
        .chunks_exact(d)
        .map(|row| scaled_sq_distance(row, x0, inv_h))
        .collect();

    let masses: Vec<f64> = match kernel {
        Kernel::Gaussian => {
            // Shift log-kernel values by their max so the nearest point has
            // mass exactly one.
            let min_sq = sq.iter().copied().fold(f64::INFINITY, f64::min);
            sq.iter().map(|s| (-0.5 * (s - min_sq)).exp()).collect()
        }
        _ => sq.iter().map(|&s| kernel.value_at_sq_norm(s)).collect(),
    };
    let peak = masses.iter().copied().fold(0.0, f64::max);
    if peak == 0.0 {
        let min_sq = sq.iter().copied().fold(f64::INFINITY, f64::min);
        return Err(WsaaError::EmptyNeighborhood {
            min_distance: min_sq.sqrt() * h,
            bandwidth: h,
        });
    }
    // Rescaling by the peak makes equal masses exactly one, so identical
    // covariates give exactly uniform weights.
    let masses: Vec<f64> = masses.into_iter().map(|m| m / peak).collect();
    let total: f64 = masses.iter().sum();
    Ok(WeightVector(
        masses.into_iter().map(|m| m / total).collect(),
    ))
}

/// Kernel density estimate `(n h^d)^-1 Σ K((x_i - x0)/h)` with the
/// unnormalized kernel.
pub fn kde(covariates: &[f64], x0: &[f64], kernel: Kernel, h: f64) -> Result<f64> {
    let n = validate_design(covariates, x0, h)?;
    let d = x0.len();
    let inv_h = 1.0 / h;
    let total: f64 = covariates
        .chunks_exact(d)
        .map(|row| kernel.value_at_sq_norm(scaled_sq_distance(row, x0, inv_h)))
        .sum();
    Ok(total / (n as f64 * h.powi(d as i32)))
}

/// `∫ K²(u) du` over `R^{d_x}`.
pub fn kernel_r2(kernel: Kernel, d_x: usize) -> Result<f64> {
    kernel.r2(d_x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kernel_values() {
        assert_eq!(Kernel::Gaussian.eval(&[0.0, 0.0]).unwrap(), 1.0);
        assert_eq!(Kernel::Uniform.eval(&[2.0]).unwrap(), 0.0);
        assert!((Kernel::Epanechnikov.eval(&[0.3, 0.4]).unwrap() - 0.75).abs() < 1e-15);
        assert!(Kernel::Gaussian.eval(&[f64::NAN]).is_err());
        for k in [Kernel::Uniform, Kernel::Epanechnikov, Kernel::Gaussian] {
            assert_eq!(k.eval(&[0.0; 3]).unwrap(), 1.0);
        }
    }

    #[test]
    fn bandwidth_schedule() {
        let s = BandwidthSchedule::new(1.0, 0.2, 2).unwrap();
        assert_eq!(s.bandwidth(1).unwrap(), 1.0);
        assert!(s.undersmooths());
        let s = BandwidthSchedule::new(2.0, 0.2, 2).unwrap();
        assert!((s.bandwidth(32).unwrap() - 1.0).abs() < 1e-15);
        assert!(s.bandwidth(0).is_err());
        // Allowed with a warning.
        assert!(!BandwidthSchedule::new(1.0, 1.0 / 6.0, 2)
            .unwrap()
            .undersmooths());
        assert!(BandwidthSchedule::new(1.0, 0.5, 2).is_err());
        assert!(BandwidthSchedule::new(0.0, 0.2, 2).is_err());
    }

    #[test]
    fn nw_two_point_example() {
        let w = nw_weights(&[0.0, 1.0], &[0.0], Kernel::Gaussian, 1.0).unwrap();
        // K(0) = 1, K(1) = e^{-1/2}.
        let k1 = (-0.5f64).exp();
        assert!((w.as_slice()[0] - 1.0 / (1.0 + k1)).abs() < 1e-15);
        assert!((w.as_slice()[0] - 0.6225).abs() < 1e-4);
        assert!((w.as_slice()[1] - 0.3775).abs() < 1e-4);
        assert!((sum_sq_weights(&w) - 0.5300).abs() < 1e-3);
    }

    #[test]
    fn nw_identical_covariates_are_uniform() {
        for k in [Kernel::Uniform, Kernel::Epanechnikov, Kernel::Gaussian] {
            let w = nw_weights(&[1.5; 8], &[1.5, 1.5], k, 0.3).unwrap();
            assert!(w.as_slice().iter().all(|&v| v == 0.25));
            let w = nw_weights(&[0.7; 14], &[0.8, 0.75], k, 0.3).unwrap();
            assert_eq!(w, WeightVector::uniform(7).unwrap());
        }
    }

    #[test]
    fn nw_empty_neighborhood() {
        let err = nw_weights(&[0.5, -0.3, 0.2], &[0.0], Kernel::Uniform, 0.1).unwrap_err();
        match err {
            WsaaError::EmptyNeighborhood { min_distance, .. } => {
                assert!((min_distance - 0.2).abs() < 1e-12)
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn gaussian_weights_survive_tiny_bandwidths() {
        let w = nw_weights(&[0.0, 1.0, 3.0], &[10.0], Kernel::Gaussian, 1e-3).unwrap();
        assert_eq!(w.as_slice()[2], 1.0);
    }

    #[test]
    fn kde_examples() {
        assert_eq!(kde(&[0.0], &[0.0], Kernel::Gaussian, 1.0).unwrap(), 1.0);
        let v = kde(&[0.0, 1.0], &[0.0], Kernel::Gaussian, 1.0).unwrap();
        assert!((v - (1.0 + (-0.5f64).exp()) / 2.0).abs() < 1e-15);
        assert!((v - 0.8033).abs() < 1e-4);
        assert_eq!(kde(&[1.0, 2.0], &[0.0], Kernel::Uniform, 0.5).unwrap(), 0.0);
    }

    #[test]
    fn r2_closed_forms() {
        assert!((kernel_r2(Kernel::Gaussian, 2).unwrap() - PI).abs() < 1e-14);
        assert_eq!(kernel_r2(Kernel::Uniform, 1).unwrap(), 2.0);
        assert!((kernel_r2(Kernel::Uniform, 2).unwrap() - PI).abs() < 1e-14);
        // 1-D Epanechnikov: ∫_{-1}^{1} (1 - u²)² du = 16/15.
        assert!((kernel_r2(Kernel::Epanechnikov, 1).unwrap() - 16.0 / 15.0).abs() < 1e-14);
        assert!((unit_ball_volume(3) - 4.0 * PI / 3.0).abs() < 1e-14);
        assert!(kernel_r2(Kernel::Gaussian, 0).is_err());
    }

    /// Midpoint rule for `∫_0^R g(r) r^(d-1) dr` times the sphere area.
    fn radial_integral(d: usize, radius: f64, g: impl Fn(f64) -> f64) -> f64 {
        let area = [2.0, 2.0 * PI, 4.0 * PI][d - 1];
        let steps = 200_000;
        let dr = radius / steps as f64;
        let s: f64 = (0..steps)
            .map(|i| {
                let r = (i as f64 + 0.5) * dr;
                g(r) * r.powi(d as i32 - 1)
            })
            .sum();
        area * s * dr
    }

    #[test]
    fn r2_and_mass_match_quadrature() {
        for d in 1..=3 {
            for k in [Kernel::Uniform, Kernel::Epanechnikov, Kernel::Gaussian] {
                let radius = if k == Kernel::Gaussian { 12.0 } else { 1.0 };
                let r2 = radial_integral(d, radius, |r| k.value_at_sq_norm(r * r).powi(2));
                let mass = radial_integral(d, radius, |r| k.value_at_sq_norm(r * r));
                assert!((r2 - k.r2(d).unwrap()).abs() < 1e-6 * r2, "{k:?} d={d}");
                assert!(
                    (mass - k.mass(d).unwrap()).abs() < 1e-6 * mass,
                    "{k:?} d={d}"
                );
            }
        }
    }

    #[test]
    fn weight_vector_validation() {
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        assert!(WeightVector::new(vec![0.5, 0.6]).is_err());
        assert!(WeightVector::new(vec![1.5, -0.5]).is_err());
        assert!(WeightVector::new(vec![]).is_err());
        assert_eq!(sum_sq_weights(&WeightVector::uniform(4).unwrap()), 0.25);
        assert_eq!(
            sum_sq_weights(&WeightVector::point_mass(5, 2).unwrap()),
            1.0
        );
    }

    fn kernel_strategy() -> impl Strategy<Value = Kernel> {
        prop_oneof![
            Just(Kernel::Uniform),
            Just(Kernel::Epanechnikov),
            Just(Kernel::Gaussian)
        ]
    }

    fn design() -> impl Strategy<Value = (usize, Vec<f64>, Vec<f64>)> {
        (1usize..4).prop_flat_map(|d| {
            (
                Just(d),
                prop::collection::vec(-3.0f64..3.0, d..(d * 30)).prop_map(move |mut v| {
                    v.truncate(v.len() / d * d);
                    v
                }),
                prop::collection::vec(-1.0f64..1.0, d),
            )
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn weights_form_a_simplex(k in kernel_strategy(), (_d, xs, x0) in design(), h in 0.05f64..5.0) {
            if let Ok(w) = nw_weights(&xs, &x0, k, h) {
                prop_assert!(w.as_slice().iter().all(|&v| v >= 0.0));
                let total: f64 = w.as_slice().iter().sum();
                prop_assert!((total - 1.0).abs() <= 1e-12);
            }
        }

        #[test]
        fn weights_are_translation_invariant(
            k in kernel_strategy(),
            (d, xs, x0) in design(),
            h in 0.05f64..5.0,
            shift in -2.0f64..2.0,
        ) {
            let xs_s: Vec<f64> = xs.iter().map(|v| v + shift).collect();
            let x0_s: Vec<f64> = x0.iter().map(|v| v + shift).collect();
            let a = nw_weights(&xs, &x0, k, h);
            let b = nw_weights(&xs_s, &x0_s, k, h);
            if let (Ok(a), Ok(b)) = (&a, &b) {
                for (p, q) in a.as_slice().iter().zip(b.as_slice()) {
                    prop_assert!((p - q).abs() < 1e-9, "d={} {} vs {}", d, p, q);
                }
            }
        }

        #[test]
        fn weights_are_scale_consistent(
            k in kernel_strategy(),
            (_d, xs, x0) in design(),
            h in 0.05f64..5.0,
            a in 0.1f64..10.0,
        ) {
            let xs_s: Vec<f64> = xs.iter().map(|v| v * a).collect();
            let x0_s: Vec<f64> = x0.iter().map(|v| v * a).collect();
            let w1 = nw_weights(&xs, &x0, k, h);
            let w2 = nw_weights(&xs_s, &x0_s, k, a * h);
            if let (Ok(w1), Ok(w2)) = (&w1, &w2) {
                for (p, q) in w1.as_slice().iter().zip(w2.as_slice()) {
                    prop_assert!((p - q).abs() < 1e-9);
                }
            }
        }

        #[test]
        fn kde_is_nonnegative(k in kernel_strategy(), (_d, xs, x0) in design(), h in 0.05f64..5.0) {
            let v = kde(&xs, &x0, k, h).unwrap();
            prop_assert!(v >= 0.0);
            let nearest = xs
                .chunks_exact(x0.len())
                .map(|r| r.iter().zip(&x0).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
                .fold(f64::INFINITY, f64::min);
            if k == Kernel::Gaussian && nearest / (h * h) < 1000.0 {
                prop_assert!(v > 0.0);
            }
        }
    }
}
