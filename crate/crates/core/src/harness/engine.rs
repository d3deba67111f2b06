use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::budget::{allocate, AllocationPlan};
use crate::costs::{CostModel, FeasibleBox, WsaaProblem};
use crate::error::{Result, WsaaError};
use crate::infer::{
    confidence_interval, normalized_direct_variance, studentized_pivot, variance_estimate,
};
use crate::kernels::{kde, nw_weights, BandwidthSchedule};
use crate::simulate::{Dataset, OracleSolution, RngStream};
use crate::solve::{run_solver, solve_exact, Algorithm, ExactSolution, SolverConfig, SolverTrace};
use crate::stats::{mean, ols, sample_sd};
use crate::tune::{kfold_cv, scaled_h0_grid, CvGrid, CvReport, FoldSolve};

use super::config::{ExperimentConfig, ModeSpec, SCHEMA_VERSION};

/// Share of failed replications above which a grid point is degraded.
pub const DEGRADED_FAILURE_SHARE: f64 = 0.2;

const ORACLE_STREAM: u64 = u64::MAX;
const PILOT_STREAM: u64 = u64::MAX - 1;
const FOLD_STREAM: u64 = u64::MAX - 2;

/// Seed of grid point `index`, spread by the golden-ratio increment.
pub fn point_seed(base_seed: u64, index: usize) -> u64 {
    base_seed.wrapping_add((index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Everything a replication at one grid point needs, fixed before any
/// replication runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub index: usize,
    /// `n` in unconstrained mode, `Γ` in budgeted mode.
    pub size: u64,
    pub n: usize,
    /// Solver iterations; 0 for exact solves.
    pub m: usize,
    pub h0: f64,
    pub h: f64,
    pub seed: u64,
    pub algorithm: Option<Algorithm>,
    pub z0: Option<Vec<f64>>,
    pub plan: Option<AllocationPlan>,
    pub cv: Option<CvReport>,
}

/// A validated config with its oracle and per-point parameters.
#[derive(Debug, Clone)]
pub struct PreparedExperiment {
    pub config: ExperimentConfig,
    pub model: CostModel,
    pub bounds: FeasibleBox,
    pub x0: Vec<f64>,
    pub oracle: OracleSolution,
    pub points: Vec<GridPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub schema_version: u32,
    pub grid_index: usize,
    pub size: u64,
    pub rep_id: u64,
    pub n: usize,
    pub m: usize,
    pub h: f64,
    pub estimate: f64,
    pub f_star: f64,
    pub covered: bool,
    pub half_width: f64,
    pub lower: f64,
    pub upper: f64,
    pub variance_hat: f64,
    pub variance_direct: f64,
    pub pivot: f64,
    pub optimization_error: f64,
    pub statistical_error: f64,
    pub solver_iterations: usize,
    pub elapsed_ms: Option<f64>,
    pub failure: Option<String>,
}

impl ReplicationRecord {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// A replication together with the objects it was computed from.
#[derive(Debug, Clone)]
pub struct ReplicationDetail {
    pub record: ReplicationRecord,
    pub problem: Option<WsaaProblem>,
    pub exact: Option<ExactSolution>,
    pub trace: Option<SolverTrace>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    /// Absent with only two points.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSummary {
    pub grid_index: usize,
    pub size: u64,
    pub n: usize,
    pub m: usize,
    pub h0: f64,
    pub h: f64,
    pub mu0: Option<f64>,
    pub z0: Option<Vec<f64>>,
    pub successes: usize,
    pub failures: usize,
    /// Statistics over successful replications; absent when there are none.
    pub coverage: Option<f64>,
    pub mean_relative_width: Option<f64>,
    pub sd_relative_width: Option<f64>,
    pub relative_rmse: Option<f64>,
    pub mean_estimate: Option<f64>,
    pub degraded: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub schema_version: u32,
    pub name: String,
    pub mode: String,
    pub x0: Vec<f64>,
    pub alpha: f64,
    pub replications: usize,
    pub oracle: OracleSolution,
    pub points: Vec<PointSummary>,
    /// Log-log slope of relative RMSE against `n` or `Γ`.
    pub slope: Option<SlopeFit>,
    pub theoretical_slope: f64,
    pub degraded: bool,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub records: Vec<ReplicationRecord>,
    pub summary: ExperimentSummary,
}

/// Computes the oracle, the allocation and the tuned parameters of every
/// grid point.
pub fn prepare(config: &ExperimentConfig) -> Result<PreparedExperiment> {
    config.validate()?;
    let model = config.model.build()?;
    let bounds = config.bounds()?;
    let x0 = config.x0()?;
    let oracle = config.dgp.oracle_optimal_value(
        &x0,
        &model,
        &bounds,
        config.oracle_samples,
        RngStream::new(config.base_seed, ORACLE_STREAM),
    )?;
    let d_x = config.dgp.d_x();
    let delta = config.kernel.delta;
    let mut points = Vec::new();
    for (index, size) in config.grid_sizes().into_iter().enumerate() {
        let seed = point_seed(config.base_seed, index);
        let (n, m, algorithm, z0, plan) = match &config.mode {
            ModeSpec::Unconstrained { .. } => (size as usize, 0, None, None, None),
            ModeSpec::Budgeted {
                regime,
                rule,
                algorithm,
                extras,
                z0,
                ..
            } => {
                let plan = allocate(*regime, *rule, size, delta, d_x, extras)?;
                let z0 = z0.clone().unwrap_or_else(|| bounds.midpoint());
                (
                    plan.n as usize,
                    plan.m as usize,
                    Some(*algorithm),
                    Some(z0),
                    Some(plan),
                )
            }
        };
        let mut point = GridPoint {
            index,
            size,
            n,
            m,
            h0: config.kernel.h0.unwrap_or(f64::NAN),
            h: f64::NAN,
            seed,
            algorithm,
            z0,
            plan,
            cv: None,
        };
        if config.tuning.is_some() {
            tune_point(config, &model, &bounds, &x0, &mut point)?;
        }
        point.h = BandwidthSchedule::new(point.h0, delta, d_x)?.bandwidth(n)?;
        points.push(point);
    }
    Ok(PreparedExperiment {
        config: config.clone(),
        model,
        bounds,
        x0,
        oracle,
        points,
    })
}

fn tune_point(
    config: &ExperimentConfig,
    model: &CostModel,
    bounds: &FeasibleBox,
    x0: &[f64],
    point: &mut GridPoint,
) -> Result<()> {
    let t = config.tuning.as_ref().expect("tuning present");
    let pilot_n = t.pilot_n.unwrap_or(point.n).max(2 * t.k);
    let pilot = config
        .dgp
        .sample_dataset(pilot_n, RngStream::new(point.seed, PILOT_STREAM))?;
    let h0_grid = match &t.h0 {
        Some(v) => v.clone(),
        None => scaled_h0_grid(&pilot, &t.h0_multipliers),
    };
    let mut z0 = t.z0.clone();
    if !t.z0_offsets.is_empty() && point.algorithm.is_some() {
        let center = pilot_solution(config, model, bounds, x0, &pilot, &h0_grid)?;
        for off in &t.z0_offsets {
            let shifted: Vec<f64> = center.iter().map(|c| c + off).collect();
            let z = bounds.project(&shifted);
            if !z0.contains(&z) {
                z0.push(z);
            }
        }
    }
    let mu0 = match point.algorithm {
        Some(Algorithm::Subgradient { .. }) => t.mu0.clone(),
        _ => Vec::new(),
    };
    let grid = CvGrid {
        h0: h0_grid,
        mu0,
        z0,
        k: t.k,
    };
    let solve = match (point.algorithm, &point.z0) {
        (Some(algorithm), Some(z0)) => FoldSolve::Budgeted {
            algorithm,
            iterations: point.m,
            default_z0: z0.clone(),
        },
        _ => FoldSolve::Exact,
    };
    let report = kfold_cv(
        &pilot,
        x0,
        &grid,
        model,
        bounds,
        config.kernel.kind,
        config.kernel.delta,
        &solve,
        RngStream::new(point.seed, FOLD_STREAM),
    )?;
    point.h0 = report.best.h0;
    if let (Some(Algorithm::Subgradient { .. }), Some(mu0)) = (point.algorithm, report.best.mu0) {
        point.algorithm = Some(Algorithm::Subgradient { mu0 });
    }
    if let Some(z0) = &report.best.z0 {
        point.z0 = Some(z0.clone());
    }
    point.cv = Some(report);
    Ok(())
}

/// Exact wSAA solution on the pilot data, used to center `z0` candidates.
fn pilot_solution(
    config: &ExperimentConfig,
    model: &CostModel,
    bounds: &FeasibleBox,
    x0: &[f64],
    pilot: &Dataset,
    h0_grid: &[f64],
) -> Result<Vec<f64>> {
    let h0 = match config.kernel.h0 {
        Some(h0) => h0,
        None => {
            let mut sorted = h0_grid.to_vec();
            sorted.sort_by(f64::total_cmp);
            sorted[sorted.len() / 2]
        }
    };
    let h = BandwidthSchedule::new(h0, config.kernel.delta, pilot.d_x())?.bandwidth(pilot.len())?;
    let w = nw_weights(pilot.covariates(), x0, config.kernel.kind, h)?;
    let p = WsaaProblem::new(pilot.outcomes().to_vec(), w, model.clone(), bounds.clone())?;
    Ok(solve_exact(&p)?.z)
}

fn nan_record(prep: &PreparedExperiment, point: &GridPoint, rep_id: u64) -> ReplicationRecord {
    ReplicationRecord {
        schema_version: SCHEMA_VERSION,
        grid_index: point.index,
        size: point.size,
        rep_id,
        n: point.n,
        m: point.m,
        h: point.h,
        estimate: f64::NAN,
        f_star: prep.oracle.f_star,
        covered: false,
        half_width: f64::NAN,
        lower: f64::NAN,
        upper: f64::NAN,
        variance_hat: f64::NAN,
        variance_direct: f64::NAN,
        pivot: f64::NAN,
        optimization_error: f64::NAN,
        statistical_error: f64::NAN,
        solver_iterations: 0,
        elapsed_ms: None,
        failure: None,
    }
}

/// One replication; failures are stored in the record, never returned.
pub fn run_replication(
    prep: &PreparedExperiment,
    point_index: usize,
    rep_id: u64,
) -> ReplicationRecord {
    run_replication_detailed(prep, point_index, rep_id).record
}

/// Like [`run_replication`] but also returns the problem, the exact
/// solution and the solver trace.
pub fn run_replication_detailed(
    prep: &PreparedExperiment,
    point_index: usize,
    rep_id: u64,
) -> ReplicationDetail {
    let point = &prep.points[point_index];
    let start = Instant::now();
    let mut detail = ReplicationDetail {
        record: nan_record(prep, point, rep_id),
        problem: None,
        exact: None,
        trace: None,
    };
    if let Err(e) = replicate(prep, point, &mut detail) {
        detail.record.failure = Some(e.to_string());
        detail.record.covered = false;
    }
    if prep.config.record_timing {
        detail.record.elapsed_ms = Some(start.elapsed().as_secs_f64() * 1e3);
    }
    detail
}

fn replicate(
    prep: &PreparedExperiment,
    point: &GridPoint,
    detail: &mut ReplicationDetail,
) -> Result<()> {
    let cfg = &prep.config;
    let d_x = cfg.dgp.d_x();
    let kernel = cfg.kernel.kind;
    let data = cfg
        .dgp
        .sample_dataset(point.n, RngStream::new(point.seed, detail.record.rep_id))?;
    let w = nw_weights(data.covariates(), &prep.x0, kernel, point.h)?;
    let p = WsaaProblem::new(
        data.outcomes().to_vec(),
        w,
        prep.model.clone(),
        prep.bounds.clone(),
    )?;
    let exact = solve_exact(&p)?;
    let f_star = prep.oracle.f_star;
    let rec = &mut detail.record;
    let z = match (&point.algorithm, &point.z0) {
        (Some(algorithm), Some(z0)) => {
            let trace = run_solver(&p, &SolverConfig::new(*algorithm, point.m, z0.clone())?)?;
            let z = trace.delivered().to_vec();
            rec.solver_iterations = trace.iterations_used;
            rec.optimization_error = p.objective_gap(&z, &exact.z)?;
            detail.trace = Some(trace);
            z
        }
        _ => {
            rec.optimization_error = 0.0;
            exact.z.clone()
        }
    };
    let estimate = p.objective(&z)?;
    rec.statistical_error = exact.value - f_star;
    let v_hat = variance_estimate(&p, &z, point.n, point.h, d_x)?;
    let ci = confidence_interval(estimate, v_hat, point.n, point.h, d_x, cfg.alpha)?;
    rec.estimate = estimate;
    rec.variance_hat = v_hat;
    rec.half_width = ci.half_width;
    rec.lower = ci.lower;
    rec.upper = ci.upper;
    rec.covered = ci.covers(f_star);
    rec.variance_direct = kde(data.covariates(), &prep.x0, kernel, point.h)
        .and_then(|k| normalized_direct_variance(&p, &z, kernel, d_x, k))
        .unwrap_or(f64::NAN);
    rec.pivot = studentized_pivot(&p, &z, f_star).unwrap_or(f64::NAN);
    detail.problem = Some(p);
    detail.exact = Some(exact);
    Ok(())
}

/// Runs every replication at every grid point on `workers` threads (all
/// cores when `None`). Output does not depend on the worker count.
pub fn run_experiment(
    prep: &PreparedExperiment,
    workers: Option<usize>,
) -> Result<ExperimentOutput> {
    let reps = prep.config.replications;
    let jobs: Vec<(usize, u64)> = (0..prep.points.len())
        .flat_map(|i| (0..reps as u64).map(move |r| (i, r)))
        .collect();
    let run = || -> Vec<ReplicationRecord> {
        jobs.par_iter()
            .map(|&(i, r)| run_replication(prep, i, r))
            .collect()
    };
    let records = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| WsaaError::invalid(format!("cannot start worker pool: {e}")))?
            .install(run),
        None => run(),
    };
    let summary = summarize(prep, &records)?;
    Ok(ExperimentOutput { records, summary })
}

/// Aggregates records into per-point statistics and the rate slope.
pub fn summarize(
    prep: &PreparedExperiment,
    records: &[ReplicationRecord],
) -> Result<ExperimentSummary> {
    let f_star = prep.oracle.f_star;
    let scale = f_star.abs();
    let mut points = Vec::with_capacity(prep.points.len());
    for point in &prep.points {
        let recs: Vec<&ReplicationRecord> = records
            .iter()
            .filter(|r| r.grid_index == point.index)
            .collect();
        let ok: Vec<&ReplicationRecord> = recs.iter().copied().filter(|r| !r.failed()).collect();
        let failures = recs.len() - ok.len();
        let (coverage, mean_w, sd_w, rmse, mean_est) = if ok.is_empty() {
            (None, None, None, None, None)
        } else {
            let k = ok.len() as f64;
            let widths: Vec<f64> = ok.iter().map(|r| 2.0 * r.half_width / scale).collect();
            let mse = ok
                .iter()
                .map(|r| (r.estimate - f_star).powi(2))
                .sum::<f64>()
                / k;
            let estimates: Vec<f64> = ok.iter().map(|r| r.estimate).collect();
            (
                Some(ok.iter().filter(|r| r.covered).count() as f64 / k),
                Some(mean(&widths)),
                Some(sample_sd(&widths)),
                Some(mse.sqrt() / scale),
                Some(mean(&estimates)),
            )
        };
        let degraded =
            recs.is_empty() || failures as f64 > DEGRADED_FAILURE_SHARE * recs.len() as f64;
        if degraded {
            log::warn!(
                "grid point {} ({}) is degraded: {failures} of {} replications failed",
                point.index,
                point.size,
                recs.len()
            );
        }
        let mu0 = match point.algorithm {
            Some(Algorithm::Subgradient { mu0 }) => Some(mu0),
            _ => None,
        };
        points.push(PointSummary {
            grid_index: point.index,
            size: point.size,
            n: point.n,
            m: point.m,
            h0: point.h0,
            h: point.h,
            mu0,
            z0: point.z0.clone(),
            successes: ok.len(),
            failures,
            coverage,
            mean_relative_width: mean_w,
            sd_relative_width: sd_w,
            relative_rmse: rmse,
            mean_estimate: mean_est,
            degraded,
        });
    }
    let (sizes, rmses): (Vec<f64>, Vec<f64>) = points
        .iter()
        .filter_map(|p| {
            p.relative_rmse
                .filter(|r| *r > 0.0 && r.is_finite())
                .map(|r| (p.size as f64, r))
        })
        .unzip();
    let slope = if sizes.len() >= 2 {
        fit_loglog_slope(&sizes, &rmses).ok()
    } else {
        None
    };
    let cfg = &prep.config;
    let rho = 1.0 - cfg.kernel.delta * cfg.dgp.d_x() as f64;
    let (mode, theoretical_slope) = match &cfg.mode {
        ModeSpec::Unconstrained { .. } => ("unconstrained", -rho / 2.0),
        ModeSpec::Budgeted { .. } => (
            "budgeted",
            prep.points
                .first()
                .and_then(|p| p.plan.as_ref())
                .map(|p| p.rate_exponent)
                .unwrap_or(f64::NAN),
        ),
    };
    Ok(ExperimentSummary {
        schema_version: SCHEMA_VERSION,
        name: cfg.name.clone(),
        mode: mode.to_string(),
        x0: prep.x0.clone(),
        alpha: cfg.alpha,
        replications: cfg.replications,
        oracle: prep.oracle.clone(),
        degraded: points.iter().any(|p| p.degraded),
        points,
        slope,
        theoretical_slope,
    })
}

/// OLS of `ln rmse` on `ln size`.
pub fn fit_loglog_slope(sizes: &[f64], rmses: &[f64]) -> Result<SlopeFit> {
    if sizes.len() != rmses.len() || sizes.len() < 2 {
        return Err(WsaaError::invalid(
            "slope fit needs at least two paired points",
        ));
    }
    if sizes
        .iter()
        .chain(rmses)
        .any(|v| !(*v > 0.0 && v.is_finite()))
    {
        return Err(WsaaError::invalid("slope fit needs positive finite values"));
    }
    let xs: Vec<f64> = sizes.iter().map(|v| v.ln()).collect();
    let ys: Vec<f64> = rmses.iter().map(|v| v.ln()).collect();
    let fit = ols(&xs, &ys)?;
    Ok(SlopeFit {
        slope: fit.slope,
        stderr: fit.slope_stderr,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::ExperimentConfig;

    fn config(extra: &str) -> ExperimentConfig {
        let text = format!(
            r#"
schema_version = 1
replications = 4
base_seed = 11
oracle_samples = 20000
{extra}
[dgp]
kind = "newsvendor"
[model]
kind = "newsvendor"
cu = 10.0
co = 2.0
[bounds]
lower = [0.0]
upper = [200.0]
[kernel]
kind = "gaussian"
delta = 0.2
h0 = 0.5
[x0]
quantile = 0.25
[mode]
kind = "unconstrained"
n = [100, 400]
"#
        );
        ExperimentConfig::from_toml_str(&text).unwrap()
    }

    #[test]
    fn slope_examples() {
        let f = fit_loglog_slope(&[10.0, 100.0], &[1.0, 0.1]).unwrap();
        assert!((f.slope + 1.0).abs() < 1e-12);
        let f = fit_loglog_slope(&[10.0, 100.0, 1000.0], &[0.3, 0.3, 0.3]).unwrap();
        assert!(f.slope.abs() < 1e-12);
        assert!(fit_loglog_slope(&[10.0, 0.0], &[1.0, 1.0]).is_err());
        assert!(fit_loglog_slope(&[10.0, 100.0], &[1.0, -1.0]).is_err());
        assert!(fit_loglog_slope(&[10.0], &[1.0]).is_err());
    }

    #[test]
    fn unconstrained_records_are_consistent() {
        let prep = prepare(&config("")).unwrap();
        let out = run_experiment(&prep, Some(2)).unwrap();
        assert_eq!(out.records.len(), 8);
        for r in &out.records {
            assert!(r.failure.is_none());
            assert_eq!(r.m, 0);
            assert_eq!(r.optimization_error, 0.0);
            assert_eq!(r.covered, r.lower <= r.f_star && r.f_star <= r.upper);
            assert!((r.estimate - r.f_star - r.statistical_error).abs() < 1e-9 * r.f_star.abs());
            assert!(r.elapsed_ms.is_none());
        }
        assert_eq!(out.summary.points.len(), 2);
        assert!(out.summary.slope.is_some());
        assert!((out.summary.theoretical_slope + 0.3).abs() < 1e-12);
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let prep = prepare(&config("")).unwrap();
        let a = run_experiment(&prep, Some(1)).unwrap();
        let b = run_experiment(&prep, Some(3)).unwrap();
        assert_eq!(format!("{:?}", a.records), format!("{:?}", b.records));
        assert_eq!(run_replication(&prep, 1, 2), run_replication(&prep, 1, 2));
    }

    #[test]
    fn single_replication_summary_matches_record() {
        let prep = prepare(&config("").clone()).map(|mut p| {
            p.config.replications = 1;
            p
        });
        let prep = prep.unwrap();
        let out = run_experiment(&prep, None).unwrap();
        let r = &out.records[0];
        let s = &out.summary.points[0];
        assert_eq!(s.coverage, Some(if r.covered { 1.0 } else { 0.0 }));
        assert_eq!(s.mean_estimate, Some(r.estimate));
        assert_eq!(s.sd_relative_width, Some(0.0));
        let rel = (r.estimate - r.f_star).abs() / r.f_star;
        assert!((s.relative_rmse.unwrap() - rel).abs() < 1e-12);
    }

    #[test]
    fn exact_estimates_give_full_coverage_and_zero_rmse() {
        let prep = prepare(&config("")).unwrap();
        let f = prep.oracle.f_star;
        let records: Vec<ReplicationRecord> = (0..3)
            .map(|i| ReplicationRecord {
                estimate: f,
                covered: true,
                half_width: 0.0,
                lower: f,
                upper: f,
                failure: None,
                ..nan_record(&prep, &prep.points[0], i)
            })
            .collect();
        let s = summarize(&prep, &records).unwrap();
        assert_eq!(s.points[0].coverage, Some(1.0));
        assert_eq!(s.points[0].relative_rmse, Some(0.0));
        assert!(s.points[1].degraded);
    }

    #[test]
    fn compact_kernel_failures_are_recorded() {
        let mut cfg = config("");
        cfg.kernel.kind = crate::kernels::Kernel::Uniform;
        cfg.kernel.h0 = Some(1e-4);
        let prep = prepare(&cfg).unwrap();
        let out = run_experiment(&prep, None).unwrap();
        assert!(out
            .records
            .iter()
            .all(|r| r.failure.as_deref().is_some_and(|f| f.contains("empty"))));
        assert!(out.summary.degraded);
        assert!(out.summary.points.iter().all(|p| p.coverage.is_none()));
    }

    #[test]
    fn budgeted_mode_respects_budget() {
        let mut cfg = config("");
        cfg.mode = ModeSpec::Budgeted {
            gamma: vec![1000, 5000],
            regime: crate::solve::ConvergenceClass::Sublinear { beta: 0.5 },
            rule: crate::budget::AllocationRule::Optimal,
            algorithm: Algorithm::Subgradient { mu0: 5.0 },
            extras: Default::default(),
            z0: Some(vec![100.0]),
        };
        cfg.validate().unwrap();
        let prep = prepare(&cfg).unwrap();
        let out = run_experiment(&prep, None).unwrap();
        for r in &out.records {
            assert!((r.n * r.m) as u64 <= r.size);
            assert!(r.m >= 1 && r.solver_iterations == r.m);
            assert!(r.optimization_error >= 0.0);
        }
        assert!((out.summary.theoretical_slope + 0.1875).abs() < 1e-12);
    }

    #[test]
    fn tuning_picks_from_the_grid() {
        let cfg = config("[tuning]\nh0 = [0.25, 0.5, 1.0]\npilot_n = 200");
        let mut cfg = cfg;
        cfg.kernel.h0 = None;
        cfg.validate().unwrap();
        let prep = prepare(&cfg).unwrap();
        for p in &prep.points {
            assert!([0.25, 0.5, 1.0].contains(&p.h0));
            assert_eq!(p.cv.as_ref().unwrap().scores.len(), 3);
        }
        let again = prepare(&cfg).unwrap();
        assert_eq!(prep.points, again.points);
    }

    #[test]
    fn point_seeds_differ() {
        let s: Vec<u64> = (0..5).map(|i| point_seed(7, i)).collect();
        for i in 0..5 {
            for j in 0..i {
                assert_ne!(s[i], s[j]);
            }
        }
    }
}
