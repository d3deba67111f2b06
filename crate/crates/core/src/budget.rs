//! Splitting a compute budget `Γ` between sample size `n` and solver
//! iterations `m`, with the matching rate exponents.
//!
//! One iteration over `n` samples costs `n` budget units; line-search
//! evaluations are not charged.

use serde::{Deserialize, Serialize};

use crate::error::{Result, WsaaError};
use crate::solve::ConvergenceClass;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AllocationRule {
    /// `c0 Γ^κ` (sublinear), `κ ln Γ` (linear), `κ ln ln Γ` (superlinear).
    Optimal,
    /// `c0 Γ^κ̃` (linear) or `κ̃ ln Γ` (superlinear).
    OverOptimizing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AllocationExtras {
    pub c0: f64,
    pub kappa_tilde: Option<f64>,
    /// Replaces `κ*` in the optimal rule, e.g. to study misallocation.
    pub kappa_override: Option<f64>,
}

impl Default for AllocationExtras {
    fn default() -> Self {
        Self {
            c0: 1.0,
            kappa_tilde: None,
            kappa_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub regime: ConvergenceClass,
    pub rule: AllocationRule,
    pub gamma: u64,
    pub n: u64,
    pub m: u64,
    pub kappa_star: f64,
    /// Constant actually used in the rule (`κ`, or `κ̃` when over-optimizing).
    pub kappa: f64,
    pub rate_exponent: f64,
    /// The rule asked for fewer than one iteration and `m` was raised to 1.
    pub clamped: bool,
}

fn check_statistics(delta: f64, d_x: usize) -> Result<f64> {
    if d_x == 0 {
        return Err(WsaaError::invalid("covariate dimension must be positive"));
    }
    let rho = 1.0 - delta * d_x as f64;
    if !(delta > 0.0 && rho > 0.0) {
        return Err(WsaaError::invalid(format!(
            "bandwidth exponent must satisfy 0 < delta < 1/d_x, got delta = {delta}, d_x = {d_x}"
        )));
    }
    Ok(rho)
}

/// Threshold constant `κ*` of the regime.
pub fn kappa_star(regime: ConvergenceClass, delta: f64, d_x: usize) -> Result<f64> {
    regime.validate()?;
    let rho = check_statistics(delta, d_x)?;
    Ok(match regime {
        ConvergenceClass::Sublinear { beta } => rho / (rho + 2.0 * beta),
        ConvergenceClass::Linear { theta } => rho / (2.0 * (1.0 / theta).ln()),
        ConvergenceClass::Superlinear { eta, .. } => 1.0 / eta.ln(),
    })
}

/// Allocates budget `gamma` as `m = max(1, round(rule))`, `n = floor(Γ/m)`.
pub fn allocate(
    regime: ConvergenceClass,
    rule: AllocationRule,
    gamma: u64,
    delta: f64,
    d_x: usize,
    extras: &AllocationExtras,
) -> Result<AllocationPlan> {
    if gamma < 8 {
        return Err(WsaaError::invalid(format!(
            "budget must be at least 8, got {gamma}"
        )));
    }
    let k_star = kappa_star(regime, delta, d_x)?;
    if !(extras.c0 > 0.0 && extras.c0.is_finite()) {
        return Err(WsaaError::invalid(format!(
            "c0 must be positive, got {}",
            extras.c0
        )));
    }
    let g = gamma as f64;
    let (kappa, raw) = match rule {
        AllocationRule::Optimal => {
            let kappa = extras.kappa_override.unwrap_or(k_star);
            if !(kappa > 0.0 && kappa.is_finite()) {
                return Err(WsaaError::invalid(format!(
                    "kappa must be positive, got {kappa}"
                )));
            }
            let raw = match regime {
                ConvergenceClass::Sublinear { .. } => {
                    if kappa >= 1.0 {
                        return Err(WsaaError::invalid(format!(
                            "sublinear allocation needs kappa < 1, got {kappa}"
                        )));
                    }
                    extras.c0 * g.powf(kappa)
                }
                ConvergenceClass::Linear { .. } => kappa * g.ln(),
                ConvergenceClass::Superlinear { .. } => kappa * g.ln().ln(),
            };
            (kappa, raw)
        }
        AllocationRule::OverOptimizing => {
            let kt = extras.kappa_tilde.ok_or_else(|| {
                WsaaError::invalid("over-optimizing allocation needs kappa_tilde")
            })?;
            let raw = match regime {
                ConvergenceClass::Sublinear { .. } => {
                    return Err(WsaaError::invalid(
                        "over-optimizing allocation is not defined for sublinear algorithms",
                    ))
                }
                ConvergenceClass::Linear { .. } => {
                    if !(kt > 0.0 && kt < 1.0) {
                        return Err(WsaaError::invalid(format!(
                            "linear over-optimizing needs kappa_tilde in (0, 1), got {kt}"
                        )));
                    }
                    extras.c0 * g.powf(kt)
                }
                ConvergenceClass::Superlinear { .. } => {
                    if !(kt > 0.0 && kt.is_finite()) {
                        return Err(WsaaError::invalid(format!(
                            "superlinear over-optimizing needs kappa_tilde > 0, got {kt}"
                        )));
                    }
                    kt * g.ln()
                }
            };
            (kt, raw)
        }
    };
    let rounded = raw.round();
    let clamped = rounded < 1.0;
    if clamped {
        log::warn!(
            "allocation rule asks for {raw:.3} iterations at budget {gamma}; using one iteration"
        );
    }
    let m = (rounded.max(1.0) as u64).min(gamma);
    let n = gamma / m;
    let rate_exponent = theoretical_rate(regime, rule, delta, d_x, kappa)?;
    Ok(AllocationPlan {
        regime,
        rule,
        gamma,
        n,
        m,
        kappa_star: k_star,
        kappa,
        rate_exponent,
        clamped,
    })
}

/// Power of `Γ` in the convergence rate of the budgeted estimator, ignoring
/// logarithmic factors. `kappa` is the rule constant (`κ̃` when
/// over-optimizing).
pub fn theoretical_rate(
    regime: ConvergenceClass,
    rule: AllocationRule,
    delta: f64,
    d_x: usize,
    kappa: f64,
) -> Result<f64> {
    let k_star = kappa_star(regime, delta, d_x)?;
    let rho = 1.0 - delta * d_x as f64;
    let reaches = kappa >= k_star * (1.0 - 1e-12);
    Ok(match (regime, rule) {
        (ConvergenceClass::Sublinear { beta }, _) => {
            if reaches {
                -(1.0 - kappa) * rho / 2.0
            } else {
                -kappa * beta
            }
        }
        (ConvergenceClass::Linear { theta }, AllocationRule::Optimal) => {
            if reaches {
                -rho / 2.0
            } else {
                -kappa * (1.0 / theta).ln()
            }
        }
        (ConvergenceClass::Linear { .. }, AllocationRule::OverOptimizing) => {
            -(1.0 - kappa) * rho / 2.0
        }
        (ConvergenceClass::Superlinear { .. }, AllocationRule::Optimal) => {
            // Below the threshold the error decays slower than any power.
            if reaches {
                -rho / 2.0
            } else {
                0.0
            }
        }
        (ConvergenceClass::Superlinear { .. }, AllocationRule::OverOptimizing) => -rho / 2.0,
    })
}

/// Linear rate `1 - a b λ / L` of projected gradient descent with Armijo
/// backtracking on a `λ`-strongly convex, `L`-smooth objective.
pub fn theta_for_projected_gd(lambda: f64, l: f64, a: f64, b: f64) -> Result<f64> {
    if !(lambda > 0.0 && l.is_finite()) {
        return Err(WsaaError::invalid(
            "lambda and L must be positive and finite",
        ));
    }
    if lambda > l {
        return Err(WsaaError::invalid(format!(
            "strong convexity {lambda} exceeds smoothness {l}"
        )));
    }
    if !(a > 0.0 && a < 0.5) || !(b > 0.0 && b < 1.0) {
        return Err(WsaaError::invalid(format!(
            "Armijo parameters must satisfy a in (0, 0.5), b in (0, 1); got a = {a}, b = {b}"
        )));
    }
    Ok(1.0 - a * b * lambda / l)
}

/// `ψ = ln(θ^{-1/(η-1)} / (f(z0) - f*))`, the log-scale closeness of the
/// start to the optimum for a superlinear method.
pub fn initial_gap_psi(theta: f64, eta: f64, f_z0: f64, f_star: f64) -> Result<f64> {
    if !(eta > 1.0) || !(theta > 0.0) {
        return Err(WsaaError::InvalidRegime(format!(
            "psi needs theta > 0 and eta > 1, got theta = {theta}, eta = {eta}"
        )));
    }
    if !(f_z0 > f_star) {
        return Err(WsaaError::InvalidGap { f_z0, f_star });
    }
    Ok(-theta.ln() / (eta - 1.0) - (f_z0 - f_star).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const LIN: fn(f64) -> ConvergenceClass = |theta| ConvergenceClass::Linear { theta };

    #[test]
    fn kappa_star_examples() {
        let k = kappa_star(
            ConvergenceClass::Superlinear {
                theta: 1.0,
                eta: 2.0,
            },
            0.2,
            2,
        )
        .unwrap();
        assert!((k - 1.0 / 2f64.ln()).abs() < 1e-15);
        assert!((k - std::f64::consts::LOG2_E).abs() < 1e-12);
        let k = kappa_star(ConvergenceClass::Sublinear { beta: 0.5 }, 0.2, 2).unwrap();
        assert!((k - 0.375).abs() < 1e-15);
    }

    #[test]
    fn linear_allocation_example() {
        let plan = allocate(
            LIN(0.5),
            AllocationRule::Optimal,
            10_000,
            0.2,
            2,
            &AllocationExtras::default(),
        )
        .unwrap();
        assert!((plan.kappa_star - 0.6 / (2.0 * 2f64.ln())).abs() < 1e-15);
        assert!((plan.kappa_star - 0.4328).abs() < 1e-4);
        assert_eq!((plan.m, plan.n), (4, 2500));
        assert!((plan.rate_exponent + 0.3).abs() < 1e-12);
    }

    #[test]
    fn invalid_regimes_are_rejected() {
        let e = AllocationExtras::default();
        assert!(matches!(
            allocate(LIN(1.0), AllocationRule::Optimal, 100, 0.2, 2, &e),
            Err(WsaaError::InvalidRegime(_))
        ));
        assert!(matches!(
            allocate(
                ConvergenceClass::Superlinear {
                    theta: 1.0,
                    eta: 1.0
                },
                AllocationRule::Optimal,
                100,
                0.2,
                2,
                &e
            ),
            Err(WsaaError::InvalidRegime(_))
        ));
        assert!(allocate(LIN(0.5), AllocationRule::Optimal, 7, 0.2, 2, &e).is_err());
        assert!(allocate(LIN(0.5), AllocationRule::OverOptimizing, 100, 0.2, 2, &e).is_err());
        assert!(allocate(
            ConvergenceClass::Sublinear { beta: 0.5 },
            AllocationRule::OverOptimizing,
            100,
            0.2,
            2,
            &AllocationExtras {
                kappa_tilde: Some(0.5),
                ..e
            }
        )
        .is_err());
    }

    #[test]
    fn theta_examples() {
        assert!(theta_for_projected_gd(1.0, 1.0, 0.5, 1.0).is_err());
        let t = theta_for_projected_gd(2.0 * 0.5, 2.0 * 1.0, 0.45, 0.9).unwrap();
        assert!((t - 0.7975).abs() < 1e-15);
        let t = theta_for_projected_gd(1.0, 2.0, 1e-9, 0.9).unwrap();
        assert!(1.0 - t < 1e-9);
        assert!(theta_for_projected_gd(3.0, 2.0, 0.1, 0.5).is_err());
    }

    #[test]
    fn rate_examples() {
        let r = theoretical_rate(LIN(0.5), AllocationRule::Optimal, 0.2, 2, 1.0).unwrap();
        assert!((r + 0.3).abs() < 1e-12);
        let sub = ConvergenceClass::Sublinear { beta: 0.5 };
        let r = theoretical_rate(sub, AllocationRule::Optimal, 0.2, 2, 0.375).unwrap();
        assert!((r + 0.1875).abs() < 1e-12);
        let r = theoretical_rate(LIN(0.5), AllocationRule::OverOptimizing, 0.2, 2, 0.5).unwrap();
        assert!((r + 0.15).abs() < 1e-12);
        let r = theoretical_rate(sub, AllocationRule::Optimal, 0.2, 2, 0.2).unwrap();
        assert!((r + 0.1).abs() < 1e-12);
    }

    #[test]
    fn misallocated_linear_rate_is_half() {
        let theta = 0.7975;
        let k = kappa_star(LIN(theta), 0.2, 2).unwrap();
        let r = theoretical_rate(LIN(theta), AllocationRule::Optimal, 0.2, 2, k / 2.0).unwrap();
        assert!((r + 0.6 / 4.0).abs() < 1e-12);
    }

    #[test]
    fn psi_examples() {
        let psi = initial_gap_psi(1.0, 2.0, (-2f64).exp(), 0.0).unwrap();
        assert!((psi - 2.0).abs() < 1e-14);
        assert_eq!(initial_gap_psi(1.0, 2.0, 1.0, 0.0).unwrap(), 0.0);
        let psi = initial_gap_psi(1f64.exp(), 2.0, 1.0, 0.0).unwrap();
        assert!((psi + 1.0).abs() < 1e-14);
        assert!(matches!(
            initial_gap_psi(1.0, 2.0, 1.0, 1.0),
            Err(WsaaError::InvalidGap { .. })
        ));
    }

    #[test]
    fn slower_algorithms_need_more_iterations() {
        let slow = kappa_star(LIN(0.9), 0.2, 2).unwrap();
        let fast = kappa_star(LIN(0.5), 0.2, 2).unwrap();
        assert!(slow > fast);
    }

    #[test]
    fn linear_rule_is_monotone_and_admissible_in_the_limit() {
        let e = AllocationExtras::default();
        let mut prev_m = 0;
        for k in 4..=14 {
            let gamma = 10f64.powf(k as f64 / 2.0).round() as u64;
            let plan = allocate(LIN(0.7975), AllocationRule::Optimal, gamma, 0.2, 2, &e).unwrap();
            assert!(plan.m >= prev_m);
            prev_m = plan.m;
            if gamma >= 10_000 {
                assert!((plan.n * plan.m) as f64 / gamma as f64 >= 0.95);
            }
        }
    }

    fn regime() -> impl Strategy<Value = ConvergenceClass> {
        prop_oneof![
            (0.05f64..2.0).prop_map(|beta| ConvergenceClass::Sublinear { beta }),
            (0.01f64..0.99).prop_map(|theta| ConvergenceClass::Linear { theta }),
            (0.1f64..10.0, 1.05f64..4.0)
                .prop_map(|(theta, eta)| ConvergenceClass::Superlinear { theta, eta }),
        ]
    }

    proptest! {
        #[test]
        fn plans_are_admissible(
            cls in regime(),
            gamma in 8u64..10_000_000,
            delta in 0.05f64..0.45,
            over in any::<bool>(),
            kt in 0.05f64..0.95,
        ) {
            let rule = if over && !matches!(cls, ConvergenceClass::Sublinear { .. }) {
                AllocationRule::OverOptimizing
            } else {
                AllocationRule::Optimal
            };
            let extras = AllocationExtras { kappa_tilde: Some(kt), ..AllocationExtras::default() };
            let plan = allocate(cls, rule, gamma, delta, 2, &extras).unwrap();
            prop_assert!(plan.n >= 1 && plan.m >= 1);
            prop_assert!(plan.n * plan.m <= gamma);
            prop_assert!(gamma - plan.n * plan.m < plan.n + plan.m);
        }
    }
}
