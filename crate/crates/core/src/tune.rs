//! k-fold cross-validation of the bandwidth constant, the subgradient step
//! constant and the initial point.

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::costs::{CostModel, FeasibleBox, WsaaProblem};
use crate::error::{Result, WsaaError};
use crate::kernels::{nw_weights, BandwidthSchedule, Kernel};
use crate::simulate::{Dataset, RngStream};
use crate::solve::{run_solver, solve_exact, Algorithm, SolverConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub h0: Vec<f64>,
    /// Step constants; only used with the subgradient method.
    #[serde(default)]
    pub mu0: Vec<f64>,
    /// Initial points; only used with budgeted solves.
    #[serde(default)]
    pub z0: Vec<Vec<f64>>,
    #[serde(default = "default_folds")]
    pub k: usize,
}

fn default_folds() -> usize {
    5
}

/// Multipliers of the covariate scale tried by default.
pub const DEFAULT_H0_MULTIPLIERS: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];

impl CvGrid {
    /// `{0.25, 0.5, 1, 2, 4}` times the geometric mean of the per-dimension
    /// covariate standard deviations.
    pub fn default_for(data: &Dataset) -> Self {
        Self {
            h0: scaled_h0_grid(data, &DEFAULT_H0_MULTIPLIERS),
            mu0: Vec::new(),
            z0: Vec::new(),
            k: default_folds(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h0.is_empty() {
            return Err(WsaaError::invalid("the h0 grid is empty"));
        }
        if self
            .h0
            .iter()
            .chain(&self.mu0)
            .any(|v| !(*v > 0.0 && v.is_finite()))
        {
            return Err(WsaaError::invalid("h0 and mu0 candidates must be positive"));
        }
        if self.k < 2 {
            return Err(WsaaError::invalid(format!(
                "need at least 2 folds, got {}",
                self.k
            )));
        }
        Ok(())
    }
}

/// Bandwidth constants `multipliers × s`, with `s` the geometric mean of the
/// covariate standard deviations. A single scale keeps the kernel isotropic.
pub fn scaled_h0_grid(data: &Dataset, multipliers: &[f64]) -> Vec<f64> {
    let sds = data.covariate_sds();
    let log_mean = sds
        .iter()
        .map(|s| s.max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / sds.len() as f64;
    let scale = log_mean.exp();
    let scale = if scale.is_finite() && scale > 0.0 {
        scale
    } else {
        1.0
    };
    multipliers.iter().map(|m| m * scale).collect()
}

/// How each fold problem is solved.
#[derive(Debug, Clone, PartialEq)]
pub enum FoldSolve {
    Exact,
    /// Budgeted run with `iterations` steps of `algorithm`; candidate `mu0`
    /// and `z0` override the template.
    Budgeted {
        algorithm: Algorithm,
        iterations: usize,
        default_z0: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvCandidate {
    pub h0: f64,
    pub mu0: Option<f64>,
    pub z0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: CvCandidate,
    /// Mean over folds of the summed held-out cost; `+∞` when disqualified.
    pub score: f64,
    pub disqualified: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub best: CvCandidate,
    pub best_score: f64,
    pub scores: Vec<CandidateScore>,
}

/// Random permutation of `0..n` cut into `k` contiguous blocks whose sizes
/// differ by at most one.
pub fn fold_partition(n: usize, k: usize, stream: RngStream) -> Result<Vec<Vec<usize>>> {
    if k < 2 || n < k {
        return Err(WsaaError::invalid(format!(
            "cannot split {n} samples into {k} folds"
        )));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut stream.rng());
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let size = base + usize::from(f < extra);
        folds.push(perm[start..start + size].to_vec());
        start += size;
    }
    Ok(folds)
}

fn candidates(grid: &CvGrid) -> Vec<CvCandidate> {
    let mut h0 = grid.h0.clone();
    h0.sort_by(f64::total_cmp);
    let mut mu0: Vec<Option<f64>> = grid.mu0.iter().copied().map(Some).collect();
    mu0.sort_by(|a, b| a.unwrap().total_cmp(&b.unwrap()));
    if mu0.is_empty() {
        mu0.push(None);
    }
    let mut z0: Vec<Option<Vec<f64>>> = grid.z0.iter().cloned().map(Some).collect();
    z0.sort_by(|a, b| {
        let (a, b) = (a.as_ref().unwrap(), b.as_ref().unwrap());
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    if z0.is_empty() {
        z0.push(None);
    }
    let mut out = Vec::new();
    for h in &h0 {
        for m in &mu0 {
            for z in &z0 {
                out.push(CvCandidate {
                    h0: *h,
                    mu0: *m,
                    z0: z.clone(),
                });
            }
        }
    }
    out
}

#[allow(clippy::too_many_arguments)]
fn fold_score(
    data: &Dataset,
    x0: &[f64],
    model: &CostModel,
    bounds: &FeasibleBox,
    kernel: Kernel,
    h: f64,
    held_out: &[usize],
    retained: &[usize],
    cand: &CvCandidate,
    solve: &FoldSolve,
) -> Result<f64> {
    let train = data.select(retained);
    let w = nw_weights(train.covariates(), x0, kernel, h)?;
    let p = WsaaProblem::new(train.outcomes().to_vec(), w, model.clone(), bounds.clone())?;
    let z = match solve {
        FoldSolve::Exact => solve_exact(&p)?.z,
        FoldSolve::Budgeted {
            algorithm,
            iterations,
            default_z0,
        } => {
            let algorithm = match (*algorithm, cand.mu0) {
                (Algorithm::Subgradient { .. }, Some(mu0)) => Algorithm::Subgradient { mu0 },
                (a, _) => a,
            };
            let z0 = cand.z0.clone().unwrap_or_else(|| default_z0.clone());
            let cfg = SolverConfig::new(algorithm, *iterations, z0)?;
            run_solver(&p, &cfg)?.delivered().to_vec()
        }
    };
    Ok(held_out
        .iter()
        .map(|&i| model.value_unchecked(&z, data.outcome(i)))
        .sum())
}

/// Scores every candidate by its mean held-out cost and picks the smallest;
/// ties go to the smallest `h0`, then `mu0`, then `z0` in lexicographic
/// order.
#[allow(clippy::too_many_arguments)]
pub fn kfold_cv(
    data: &Dataset,
    x0: &[f64],
    grid: &CvGrid,
    model: &CostModel,
    bounds: &FeasibleBox,
    kernel: Kernel,
    delta: f64,
    solve: &FoldSolve,
    stream: RngStream,
) -> Result<CvReport> {
    grid.validate()?;
    let n = data.len();
    if n < 2 * grid.k {
        return Err(WsaaError::invalid(format!(
            "cross-validation needs at least {} samples for {} folds, got {n}",
            2 * grid.k,
            grid.k
        )));
    }
    let folds = fold_partition(n, grid.k, stream)?;
    let retained: Vec<Vec<usize>> = (0..grid.k)
        .map(|l| {
            let mut r: Vec<usize> = folds
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != l)
                .flat_map(|(_, f)| f.iter().copied())
                .collect();
            r.sort_unstable();
            r
        })
        .collect();
    let cands = candidates(grid);
    let jobs: Vec<(usize, usize)> = (0..cands.len())
        .flat_map(|c| (0..grid.k).map(move |l| (c, l)))
        .collect();
    let results: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(c, l)| {
            let h = BandwidthSchedule::new(cands[c].h0, delta, data.d_x())?.bandwidth(n)?;
            fold_score(
                data,
                x0,
                model,
                bounds,
                kernel,
                h,
                &folds[l],
                &retained[l],
                &cands[c],
                solve,
            )
        })
        .collect();

    let mut scores = Vec::with_capacity(cands.len());
    for (c, cand) in cands.into_iter().enumerate() {
        let mut total = 0.0;
        let mut reason = None;
        for l in 0..grid.k {
            match &results[c * grid.k + l] {
                Ok(s) => total += s,
                Err(e) => {
                    if !matches!(e, WsaaError::EmptyNeighborhood { .. }) {
                        log::debug!("cv candidate {cand:?} failed on fold {l}: {e}");
                    }
                    reason = Some(format!("fold {l}: {e}"));
                    break;
                }
            }
        }
        let score = if reason.is_some() {
            f64::INFINITY
        } else {
            total / grid.k as f64
        };
        scores.push(CandidateScore {
            candidate: cand,
            score,
            disqualified: reason,
        });
    }
    let best = scores
        .iter()
        .filter(|s| s.disqualified.is_none())
        .fold(None::<&CandidateScore>, |acc, s| match acc {
            Some(b) if b.score <= s.score => Some(b),
            _ => Some(s),
        })
        .ok_or_else(|| WsaaError::invalid("every cross-validation candidate was disqualified"))?;
    Ok(CvReport {
        best: best.candidate.clone(),
        best_score: best.score,
        scores: scores.clone(),
    })
}
