use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::budget::{AllocationExtras, AllocationRule};
use crate::costs::{CostModel, FeasibleBox};
use crate::error::{Result, WsaaError};
use crate::kernels::{BandwidthSchedule, Kernel};
use crate::simulate::{random_quartic, RngStream, Simulator};
use crate::solve::{Algorithm, ConvergenceClass};
use crate::tune::DEFAULT_H0_MULTIPLIERS;

/// Version stamped into configs, `records.csv` and `summary.json`.
pub const SCHEMA_VERSION: u32 = 1;

/// A Monte Carlo experiment, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    #[serde(default)]
    pub name: String,
    pub dgp: Simulator,
    pub model: ModelSpec,
    pub bounds: BoxSpec,
    pub kernel: KernelSpec,
    pub x0: X0Spec,
    pub mode: ModeSpec,
    #[serde(default)]
    pub tuning: Option<TuningSpec>,
    pub replications: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    pub base_seed: u64,
    #[serde(default = "default_oracle_samples")]
    pub oracle_samples: usize,
    /// Store wall-clock time per replication. Off by default so that
    /// outputs are a pure function of the config.
    #[serde(default)]
    pub record_timing: bool,
}

fn default_alpha() -> f64 {
    0.05
}

fn default_oracle_samples() -> usize {
    1_000_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    Newsvendor {
        cu: f64,
        co: f64,
    },
    Expectile {
        cu: f64,
        co: f64,
    },
    Quartic {
        a: Vec<f64>,
        b: Vec<f64>,
    },
    /// Quartic cost with coefficients drawn once from `seed`.
    RandomQuartic {
        dim: usize,
        seed: u64,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<CostModel> {
        match self {
            ModelSpec::Newsvendor { cu, co } => CostModel::newsvendor(*cu, *co),
            ModelSpec::Expectile { cu, co } => CostModel::expectile(*cu, *co),
            ModelSpec::Quartic { a, b } => CostModel::quartic(a.clone(), b.clone()),
            ModelSpec::RandomQuartic { dim, seed } => {
                random_quartic(*dim, RngStream::new(*seed, 0))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxSpec {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub kind: Kernel,
    pub delta: f64,
    /// Bandwidth constant; required unless `[tuning]` selects it.
    #[serde(default)]
    pub h0: Option<f64>,
}

/// The query covariate: an explicit point or componentwise marginal
/// quantiles of the covariate law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct X0Spec {
    #[serde(default)]
    pub point: Option<Vec<f64>>,
    #[serde(default)]
    pub quantile: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModeSpec {
    /// Exact wSAA solutions at each sample size.
    Unconstrained { n: Vec<usize> },
    /// Budgeted solves at each budget `Γ`.
    Budgeted {
        gamma: Vec<u64>,
        regime: ConvergenceClass,
        #[serde(default = "default_rule")]
        rule: AllocationRule,
        algorithm: Algorithm,
        #[serde(default)]
        extras: AllocationExtras,
        /// Initial point; the box midpoint when absent and not tuned.
        #[serde(default)]
        z0: Option<Vec<f64>>,
    },
}

fn default_rule() -> AllocationRule {
    AllocationRule::Optimal
}

/// Cross-validation on an independent pilot dataset per grid point; the
/// selected parameters are then used for every replication at that point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TuningSpec {
    /// Candidate `h0` values as multiples of the covariate scale.
    #[serde(default = "default_multipliers")]
    pub h0_multipliers: Vec<f64>,
    /// Absolute `h0` candidates; replace the scaled grid when given.
    #[serde(default)]
    pub h0: Option<Vec<f64>>,
    #[serde(default)]
    pub mu0: Vec<f64>,
    #[serde(default)]
    pub z0: Vec<Vec<f64>>,
    /// Extra `z0` candidates at these per-coordinate offsets from the exact
    /// wSAA solution on the pilot data.
    #[serde(default)]
    pub z0_offsets: Vec<f64>,
    #[serde(default = "default_k")]
    pub k: usize,
    /// Pilot sample size; the grid point's `n` when absent.
    #[serde(default)]
    pub pilot_n: Option<usize>,
}

fn default_multipliers() -> Vec<f64> {
    DEFAULT_H0_MULTIPLIERS.to_vec()
}

fn default_k() -> usize {
    5
}

fn config_err(msg: impl Into<String>) -> WsaaError {
    WsaaError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    /// Checks everything that can be checked without sampling.
    pub fn validate(&self) -> Result<()> {
        let wrap = |e: WsaaError| match e {
            WsaaError::Config(_) => e,
            other => config_err(other.to_string()),
        };
        if self.schema_version != SCHEMA_VERSION {
            return Err(config_err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.replications == 0 {
            return Err(config_err("replications must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(config_err(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.oracle_samples == 0 {
            return Err(config_err("oracle_samples must be positive"));
        }
        self.dgp.validate().map_err(wrap)?;
        let model = self.model.build().map_err(wrap)?;
        if model.d_y() != self.dgp.d_y() {
            return Err(config_err(format!(
                "the {} cost expects {}-dimensional outcomes but the {} simulator produces {}",
                model.name(),
                model.d_y(),
                self.dgp.name(),
                self.dgp.d_y()
            )));
        }
        let bounds = self.bounds().map_err(wrap)?;
        if bounds.dim() != model.d_z() {
            return Err(config_err(format!(
                "box has dimension {} but decisions have dimension {}",
                bounds.dim(),
                model.d_z()
            )));
        }
        if let Some(h0) = self.kernel.h0 {
            BandwidthSchedule::new(h0, self.kernel.delta, self.dgp.d_x()).map_err(wrap)?;
        } else if self.tuning.is_none() {
            return Err(config_err(
                "kernel.h0 is required when no [tuning] section is given",
            ));
        } else {
            BandwidthSchedule::new(1.0, self.kernel.delta, self.dgp.d_x()).map_err(wrap)?;
        }
        self.x0().map_err(wrap)?;
        match &self.mode {
            ModeSpec::Unconstrained { n } => {
                if n.is_empty() || n.iter().any(|v| *v < 8) {
                    return Err(config_err("every sample size must be at least 8"));
                }
            }
            ModeSpec::Budgeted {
                gamma,
                regime,
                algorithm,
                z0,
                ..
            } => {
                if gamma.is_empty() || gamma.iter().any(|v| *v < 8) {
                    return Err(config_err("every budget must be at least 8"));
                }
                regime.validate().map_err(wrap)?;
                algorithm.validate().map_err(wrap)?;
                let smooth_needed = !matches!(algorithm, Algorithm::Subgradient { .. });
                if smooth_needed != model.is_smooth() {
                    return Err(config_err(format!(
                        "the {} algorithm cannot be used with the {} cost",
                        algorithm.name(),
                        model.name()
                    )));
                }
                if let Some(z0) = z0 {
                    if !bounds.contains(z0, 0.0) || z0.len() != bounds.dim() {
                        return Err(config_err("mode.z0 must lie in the box"));
                    }
                }
            }
        }
        if let Some(t) = &self.tuning {
            if t.k < 2 {
                return Err(config_err("tuning.k must be at least 2"));
            }
            let h0_ok = match &t.h0 {
                Some(v) => !v.is_empty() && v.iter().all(|h| *h > 0.0),
                None => !t.h0_multipliers.is_empty() && t.h0_multipliers.iter().all(|h| *h > 0.0),
            };
            if !h0_ok {
                return Err(config_err(
                    "tuning h0 candidates must be positive and nonempty",
                ));
            }
            if t.mu0.iter().any(|m| !(*m > 0.0)) {
                return Err(config_err("tuning mu0 candidates must be positive"));
            }
            if t.z0
                .iter()
                .any(|z| z.len() != bounds.dim() || !bounds.contains(z, 0.0))
            {
                return Err(config_err("tuning z0 candidates must lie in the box"));
            }
        }
        Ok(())
    }

    pub fn bounds(&self) -> Result<FeasibleBox> {
        FeasibleBox::new(self.bounds.lower.clone(), self.bounds.upper.clone())
    }

    pub fn x0(&self) -> Result<Vec<f64>> {
        match (&self.x0.point, self.x0.quantile) {
            (Some(p), None) => {
                if p.len() != self.dgp.d_x() || p.iter().any(|v| !v.is_finite()) {
                    return Err(config_err("x0.point must be a finite covariate vector"));
                }
                Ok(p.clone())
            }
            (None, Some(tau)) => self.dgp.covariate_quantile(tau),
            _ => Err(config_err("give exactly one of x0.point and x0.quantile")),
        }
    }

    /// `n` or `Γ` values of the grid.
    pub fn grid_sizes(&self) -> Vec<u64> {
        match &self.mode {
            ModeSpec::Unconstrained { n } => n.iter().map(|v| *v as u64).collect(),
            ModeSpec::Budgeted { gamma, .. } => gamma.clone(),
        }
    }
}
