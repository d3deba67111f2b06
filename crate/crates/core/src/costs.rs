//! Cost models `F(z; y)` and the weighted objective of the wSAA problem.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, ensure_finite, Result, WsaaError};
use crate::kernels::WeightVector;

/// A convex cost family with its derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CostModel {
    /// `c_u (y - z)^+ + c_o (z - y)^+`.
    Newsvendor { cu: f64, co: f64 },
    /// `c_u (y - z)^2 1{y >= z} + c_o (z - y)^2 1{y < z}`.
    Expectile { cu: f64, co: f64 },
    /// `Σ_j a_j (z_j - b_j y_j)^4`.
    Quartic { a: Vec<f64>, b: Vec<f64> },
}

impl CostModel {
    pub fn newsvendor(cu: f64, co: f64) -> Result<Self> {
        let m = CostModel::Newsvendor { cu, co };
        m.validate()?;
        Ok(m)
    }

    pub fn expectile(cu: f64, co: f64) -> Result<Self> {
        let m = CostModel::Expectile { cu, co };
        m.validate()?;
        Ok(m)
    }

    pub fn quartic(a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        let m = CostModel::Quartic { a, b };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            CostModel::Newsvendor { cu, co } | CostModel::Expectile { cu, co } => {
                if !(*cu > 0.0 && *co > 0.0 && cu.is_finite() && co.is_finite()) {
                    return Err(WsaaError::invalid(format!(
                        "{} costs must be positive, got cu = {cu}, co = {co}",
                        self.name()
                    )));
                }
            }
            CostModel::Quartic { a, b } => {
                if a.is_empty() || a.len() != b.len() {
                    return Err(WsaaError::invalid(
                        "quartic coefficient vectors must be nonempty and of equal length",
                    ));
                }
                if a.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(WsaaError::invalid(
                        "quartic a coefficients must be positive",
                    ));
                }
                ensure_finite(b, "quartic b coefficients")?;
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            CostModel::Newsvendor { .. } => "newsvendor",
            CostModel::Expectile { .. } => "expectile",
            CostModel::Quartic { .. } => "quartic",
        }
    }

    pub fn d_z(&self) -> usize {
        match self {
            CostModel::Quartic { a, .. } => a.len(),
            _ => 1,
        }
    }

    pub fn d_y(&self) -> usize {
        self.d_z()
    }

    /// Whether gradients and Hessians exist (everywhere but on a null set).
    pub fn is_smooth(&self) -> bool {
        !matches!(self, CostModel::Newsvendor { .. })
    }

    /// Optimal level of the newsvendor quantile or expectile, `c_u/(c_u+c_o)`.
    pub fn critical_ratio(&self) -> Option<f64> {
        match self {
            CostModel::Newsvendor { cu, co } | CostModel::Expectile { cu, co } => {
                Some(cu / (cu + co))
            }
            CostModel::Quartic { .. } => None,
        }
    }

    fn check_args(&self, z: &[f64], y: &[f64]) -> Result<()> {
        ensure_dim(self.d_z(), z.len(), "decision")?;
        ensure_dim(self.d_y(), y.len(), "outcome")?;
        ensure_finite(z, "decision")?;
        ensure_finite(y, "outcome")
    }

    pub fn value(&self, z: &[f64], y: &[f64]) -> Result<f64> {
        self.check_args(z, y)?;
        Ok(self.value_unchecked(z, y))
    }

    #[inline]
    pub(crate) fn value_unchecked(&self, z: &[f64], y: &[f64]) -> f64 {
        match self {
            CostModel::Newsvendor { cu, co } => {
                let (z, y) = (z[0], y[0]);
                if y >= z {
                    cu * (y - z)
                } else {
                    co * (z - y)
                }
            }
            CostModel::Expectile { cu, co } => {
                let (z, y) = (z[0], y[0]);
                if y >= z {
                    cu * (y - z) * (y - z)
                } else {
                    co * (z - y) * (z - y)
                }
            }
            CostModel::Quartic { a, b } => a
                .iter()
                .zip(b)
                .zip(z.iter().zip(y))
                .map(|((a, b), (z, y))| {
                    let s = z - b * y;
                    let s2 = s * s;
                    a * s2 * s2
                })
                .sum(),
        }
    }

    /// `F(z; y) - F(zref; y)` computed without cancelling two large values
    /// where the algebra allows it.
    #[inline]
    pub(crate) fn value_difference_unchecked(&self, z: &[f64], zref: &[f64], y: &[f64]) -> f64 {
        match self {
            CostModel::Newsvendor { .. } => {
                self.value_unchecked(z, y) - self.value_unchecked(zref, y)
            }
            CostModel::Expectile { cu, co } => {
                let (z, r, y) = (z[0], zref[0], y[0]);
                match (y >= z, y >= r) {
                    // c (y - z)^2 - c (y - r)^2 = c (r - z)(2y - z - r)
                    (true, true) => cu * (r - z) * (2.0 * y - z - r),
                    (false, false) => co * (z - r) * (z + r - 2.0 * y),
                    _ => self.value_unchecked(&[z], &[y]) - self.value_unchecked(&[r], &[y]),
                }
            }
            CostModel::Quartic { a, b } => a
                .iter()
                .zip(b)
                .enumerate()
                .map(|(j, (a, b))| {
                    let u = z[j] - b * y[j];
                    let v = zref[j] - b * y[j];
                    // u^4 - v^4 = (u - v)(u + v)(u^2 + v^2)
                    a * (z[j] - zref[j]) * (u + v) * (u * u + v * v)
                })
                .sum(),
        }
    }

    /// Minimal-norm subgradient of the nonsmooth newsvendor cost.
    pub fn subgradient(&self, z: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_args(z, y)?;
        match self {
            CostModel::Newsvendor { .. } => Ok(vec![self.subgradient_unchecked(z[0], y[0])]),
            _ => Err(WsaaError::WrongModel {
                operation: "subgradient",
                model: self.name(),
            }),
        }
    }

    #[inline]
    fn subgradient_unchecked(&self, z: f64, y: f64) -> f64 {
        match self {
            CostModel::Newsvendor { cu, co } => {
                if z < y {
                    -cu
                } else if z > y {
                    *co
                } else {
                    0.0
                }
            }
            _ => unreachable!("subgradient is only defined for the newsvendor cost"),
        }
    }

    pub fn gradient(&self, z: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check_args(z, y)?;
        self.require_smooth("gradient")?;
        let mut out = vec![0.0; self.d_z()];
        self.add_gradient(z, y, 1.0, &mut out);
        Ok(out)
    }

    /// `out += weight * ∇F(z; y)`.
    #[inline]
    fn add_gradient(&self, z: &[f64], y: &[f64], weight: f64, out: &mut [f64]) {
        match self {
            CostModel::Expectile { cu, co } => {
                let (z, y) = (z[0], y[0]);
                out[0] += weight
                    * if y >= z {
                        -2.0 * cu * (y - z)
                    } else {
                        2.0 * co * (z - y)
                    };
            }
            CostModel::Quartic { a, b } => {
                for j in 0..a.len() {
                    let s = z[j] - b[j] * y[j];
                    out[j] += weight * 4.0 * a[j] * s * s * s;
                }
            }
            CostModel::Newsvendor { .. } => unreachable!("checked by require_smooth"),
        }
    }

    pub fn hessian(&self, z: &[f64], y: &[f64]) -> Result<DMatrix<f64>> {
        self.check_args(z, y)?;
        self.require_smooth("hessian")?;
        let d = self.d_z();
        let mut diag = vec![0.0; d];
        self.add_hessian_diagonal(z, y, 1.0, &mut diag);
        Ok(DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag)))
    }

    /// Both smooth models have diagonal Hessians.
    #[inline]
    fn add_hessian_diagonal(&self, z: &[f64], y: &[f64], weight: f64, out: &mut [f64]) {
        match self {
            CostModel::Expectile { cu, co } => {
                out[0] += weight * if y[0] > z[0] { 2.0 * cu } else { 2.0 * co };
            }
            CostModel::Quartic { a, b } => {
                for j in 0..a.len() {
                    let s = z[j] - b[j] * y[j];
                    out[j] += weight * 12.0 * a[j] * s * s;
                }
            }
            CostModel::Newsvendor { .. } => unreachable!("checked by require_smooth"),
        }
    }

    fn require_smooth(&self, operation: &'static str) -> Result<()> {
        if self.is_smooth() {
            Ok(())
        } else {
            Err(WsaaError::WrongModel {
                operation,
                model: self.name(),
            })
        }
    }
}

/// Axis-aligned feasible region `{z : lower <= z <= upper}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibleBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl FeasibleBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(WsaaError::invalid(
                "box bounds must be nonempty and of equal length",
            ));
        }
        ensure_finite(&lower, "box lower bound")?;
        ensure_finite(&upper, "box upper bound")?;
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(WsaaError::invalid("box lower bound exceeds upper bound"));
        }
        let b = Self { lower, upper };
        if !(b.diameter() > 0.0) {
            return Err(WsaaError::invalid("box has zero diameter"));
        }
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) * (u - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn midpoint(&self) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| 0.5 * (l + u))
            .collect()
    }

    /// Euclidean projection, i.e. componentwise clipping.
    pub fn project(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(self.lower.iter().zip(&self.upper))
            .map(|(v, (l, u))| v.clamp(*l, *u))
            .collect()
    }

    pub fn contains(&self, z: &[f64], tol: f64) -> bool {
        z.len() == self.dim()
            && z.iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *v >= l - tol && *v <= u + tol)
    }
}

/// The weighted problem `min_{z in box} Σ_i w_i F(z; y_i)`.
#[derive(Debug, Clone)]
pub struct WsaaProblem {
    outcomes: Vec<f64>,
    weights: WeightVector,
    model: CostModel,
    bounds: FeasibleBox,
}

impl WsaaProblem {
    /// `outcomes` is a flat row-major `n × d_y` buffer.
    pub fn new(
        outcomes: Vec<f64>,
        weights: WeightVector,
        model: CostModel,
        bounds: FeasibleBox,
    ) -> Result<Self> {
        model.validate()?;
        let d_y = model.d_y();
        ensure_dim(model.d_z(), bounds.dim(), "feasible box")?;
        ensure_dim(weights.len() * d_y, outcomes.len(), "outcome buffer")?;
        ensure_finite(&outcomes, "outcomes")?;
        Ok(Self {
            outcomes,
            weights,
            model,
            bounds,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &WeightVector {
        &self.weights
    }

    pub fn model(&self) -> &CostModel {
        &self.model
    }

    pub fn bounds(&self) -> &FeasibleBox {
        &self.bounds
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn outcome(&self, i: usize) -> &[f64] {
        let d = self.model.d_y();
        &self.outcomes[i * d..(i + 1) * d]
    }

    /// `(w_i, y_i)` pairs with nonzero weight.
    pub(crate) fn support(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.weights
            .as_slice()
            .iter()
            .zip(self.outcomes.chunks_exact(self.model.d_y()))
            .filter(|(w, _)| **w > 0.0)
            .map(|(w, y)| (*w, y))
    }

    fn check_decision(&self, z: &[f64]) -> Result<()> {
        ensure_dim(self.model.d_z(), z.len(), "decision")?;
        ensure_finite(z, "decision")?;
        debug_assert!(
            self.bounds
                .contains(z, 1e-8 * (1.0 + self.bounds.diameter())),
            "decision {z:?} lies outside the feasible box"
        );
        Ok(())
    }

    /// `f̂(z) = Σ w_i F(z; y_i)`.
    pub fn objective(&self, z: &[f64]) -> Result<f64> {
        self.check_decision(z)?;
        Ok(self.objective_unchecked(z))
    }

    pub(crate) fn objective_unchecked(&self, z: &[f64]) -> f64 {
        self.support()
            .map(|(w, y)| w * self.model.value_unchecked(z, y))
            .sum()
    }

    /// `f̂(z) - f̂(zref)`, accumulated per sample so that small gaps near
    /// the optimum keep their relative precision.
    pub fn objective_gap(&self, z: &[f64], zref: &[f64]) -> Result<f64> {
        self.check_decision(z)?;
        self.check_decision(zref)?;
        Ok(self
            .support()
            .map(|(w, y)| w * self.model.value_difference_unchecked(z, zref, y))
            .sum())
    }

    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_decision(z)?;
        self.model.require_smooth("gradient")?;
        Ok(self.gradient_unchecked(z))
    }

    pub(crate) fn gradient_unchecked(&self, z: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.model.d_z()];
        for (w, y) in self.support() {
            self.model.add_gradient(z, y, w, &mut g);
        }
        g
    }

    pub fn subgradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_decision(z)?;
        if self.model.is_smooth() {
            return Err(WsaaError::WrongModel {
                operation: "subgradient",
                model: self.model.name(),
            });
        }
        Ok(vec![self.subgradient_unchecked(z[0])])
    }

    pub(crate) fn subgradient_unchecked(&self, z: f64) -> f64 {
        self.support()
            .map(|(w, y)| w * self.model.subgradient_unchecked(z, y[0]))
            .sum()
    }

    pub fn hessian(&self, z: &[f64]) -> Result<DMatrix<f64>> {
        self.check_decision(z)?;
        self.model.require_smooth("hessian")?;
        Ok(self.hessian_unchecked(z))
    }

    pub(crate) fn hessian_unchecked(&self, z: &[f64]) -> DMatrix<f64> {
        let mut diag = vec![0.0; self.model.d_z()];
        for (w, y) in self.support() {
            self.model.add_hessian_diagonal(z, y, w, &mut diag);
        }
        DMatrix::from_diagonal(&nalgebra::DVector::from_vec(diag))
    }
}
