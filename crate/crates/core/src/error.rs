use thiserror::Error;

use crate::solve::SolverTrace;

pub type Result<T, E = WsaaError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum WsaaError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    /// Every kernel value vanished at the query point.
    #[error(
        "empty kernel neighborhood: nearest covariate is at distance {min_distance} \
         with bandwidth {bandwidth}"
    )]
    EmptyNeighborhood { min_distance: f64, bandwidth: f64 },

    #[error("operation `{operation}` is not defined for the {model} cost model")]
    WrongModel {
        operation: &'static str,
        model: &'static str,
    },

    #[error("line search stalled at iteration {iteration} after {backtracks} backtracks")]
    StalledLineSearch {
        iteration: usize,
        backtracks: usize,
        trace: Box<SolverTrace>,
    },

    #[error("hessian is not positive definite (min eigenvalue {min_eigenvalue:e})")]
    Curvature { min_eigenvalue: f64 },

    #[error("unsupported decision dimension {0} for the metric projection (max 4)")]
    UnsupportedDimension(usize),

    #[error("oracle failed to converge: {reason}")]
    OracleFailure {
        reason: String,
        trace: Option<Box<SolverTrace>>,
    },

    #[error("invalid convergence regime: {0}")]
    InvalidRegime(String),

    #[error("invalid optimality gap: f(z0) = {f_z0} is not above f* = {f_star}")]
    InvalidGap { f_z0: f64, f_star: f64 },

    #[error("kernel density estimate is zero")]
    DegenerateDensity,

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl WsaaError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        WsaaError::InvalidArgument(msg.into())
    }
}

pub(crate) fn ensure_finite(values: &[f64], what: &str) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(WsaaError::invalid(format!(
            "{what} has a non-finite entry at position {i}"
        ))),
        None => Ok(()),
    }
}

pub(crate) fn ensure_dim(expected: usize, got: usize, context: &'static str) -> Result<()> {
    if expected != got {
        return Err(WsaaError::DimensionMismatch {
            expected,
            got,
            context,
        });
    }
    Ok(())
}
