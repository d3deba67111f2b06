use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use wsaa::budget::{allocate, AllocationExtras, AllocationRule};
use wsaa::costs::{CostModel, FeasibleBox, WsaaProblem};
use wsaa::harness::{prepare, run_experiment, write_outputs, ExperimentConfig};
use wsaa::infer::{confidence_interval, normalized_direct_variance, variance_estimate};
use wsaa::kernels::{kde, nw_weights, BandwidthSchedule, Kernel};
use wsaa::simulate::{Dataset, RngStream, Simulator};
use wsaa::solve::{run_solver, solve_exact, Algorithm, ConvergenceClass, SolverConfig};
use wsaa::tune::{kfold_cv, scaled_h0_grid, CvGrid, FoldSolve, DEFAULT_H0_MULTIPLIERS};
use wsaa::WsaaError;

#[derive(Parser)]
#[command(
    name = "wsaa",
    version,
    about = "Kernel-weighted SAA under a compute budget"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a dataset from a built-in simulator and write it as CSV.
    Simulate(SimulateArgs),
    /// Solve the weighted problem at a query point.
    Solve(SolveArgs),
    /// Solve and report a confidence interval for the optimal cost.
    Infer(InferArgs),
    /// Split a compute budget into sample size and iterations.
    Allocate(AllocateArgs),
    /// Cross-validate the bandwidth constant on a dataset.
    Cv(CvArgs),
    /// Run a Monte Carlo experiment from a TOML config.
    Experiment(ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum DgpKind {
    Newsvendor,
    Quartic,
    Weather,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long, value_enum)]
    dgp: DgpKind,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0)]
    stream: u64,
    #[arg(long)]
    noise_sd: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ProblemArgs {
    /// Dataset CSV with columns x1.., y1..
    #[arg(long)]
    data: PathBuf,
    /// Query covariate, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Vec<f64>,
    /// Cost model as JSON, e.g. '{"kind":"newsvendor","cu":10,"co":2}'.
    #[arg(long)]
    model: String,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    lower: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    upper: Vec<f64>,
    #[arg(long, value_enum, default_value = "gaussian")]
    kernel: KernelKind,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    /// Bandwidth constant; `h = h0 n^-delta`.
    #[arg(long, default_value_t = 1.0)]
    h0: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelKind {
    Uniform,
    Epanechnikov,
    Gaussian,
}

impl From<KernelKind> for Kernel {
    fn from(k: KernelKind) -> Self {
        match k {
            KernelKind::Uniform => Kernel::Uniform,
            KernelKind::Epanechnikov => Kernel::Epanechnikov,
            KernelKind::Gaussian => Kernel::Gaussian,
        }
    }
}

#[derive(Args)]
struct SolverArgs {
    /// Budgeted algorithm as JSON, e.g. '{"name":"subgradient","mu0":5}';
    /// the exact solver when absent.
    #[arg(long)]
    algorithm: Option<String>,
    #[arg(long, default_value_t = 100)]
    iters: usize,
    /// Initial point; the box midpoint when absent.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    z0: Option<Vec<f64>>,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
}

#[derive(Args)]
struct InferArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeKind {
    Sublinear,
    Linear,
    Superlinear,
}

#[derive(Clone, Copy, ValueEnum)]
enum RuleKind {
    Optimal,
    OverOptimizing,
}

#[derive(Args)]
struct AllocateArgs {
    #[arg(long, value_enum)]
    regime: RegimeKind,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long, value_enum, default_value = "optimal")]
    rule: RuleKind,
    #[arg(long)]
    gamma: u64,
    #[arg(long, default_value_t = 0.2)]
    delta: f64,
    #[arg(long, default_value_t = 2)]
    d_x: usize,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    #[arg(long)]
    kappa_tilde: Option<f64>,
    #[arg(long)]
    kappa_override: Option<f64>,
}

#[derive(Args)]
struct CvArgs {
    #[command(flatten)]
    problem: ProblemArgs,
    /// Candidate h0 values; multiples of the covariate scale by default.
    #[arg(long, value_delimiter = ',')]
    grid: Option<Vec<f64>>,
    #[arg(long, default_value_t = 5)]
    k: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct ExperimentArgs {
    #[arg(long)]
    config: PathBuf,
    /// Output directory for records.csv and summary.json.
    #[arg(long)]
    out: PathBuf,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    workers: Option<usize>,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_DEGRADED: u8 = 3;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<WsaaError>(), Some(WsaaError::Config(_))));
            ExitCode::from(if config_error { EXIT_CONFIG } else { 1 })
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Simulate(a) => simulate(a),
        Command::Solve(a) => solve(a),
        Command::Infer(a) => infer(a),
        Command::Allocate(a) => allocate_cmd(a),
        Command::Cv(a) => cv(a),
        Command::Experiment(a) => experiment(a),
    }
}

fn print_json(value: &serde_json::Value) -> Result<u8> {
    let text = serde_json::to_string_pretty(value)?;
    match writeln!(std::io::stdout().lock(), "{text}") {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(0),
    }
}

fn simulate(a: SimulateArgs) -> Result<u8> {
    let mut sim = match a.dgp {
        DgpKind::Newsvendor => Simulator::newsvendor(),
        DgpKind::Quartic => Simulator::quartic(),
        DgpKind::Weather => Simulator::weather(),
    };
    if let Some(sd) = a.noise_sd {
        sim = sim.with_noise_sd(sd);
    }
    let data = sim.sample_dataset(a.n, RngStream::new(a.seed, a.stream))?;
    data.write_csv(&a.out)
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(0)
}

struct Loaded {
    data: Dataset,
    model: CostModel,
    bounds: FeasibleBox,
    kernel: Kernel,
    h: f64,
}

fn load(p: &ProblemArgs) -> Result<Loaded> {
    let data =
        Dataset::read_csv(&p.data).with_context(|| format!("reading {}", p.data.display()))?;
    let model: CostModel = serde_json::from_str(&p.model).context("parsing --model")?;
    model.validate()?;
    let bounds = FeasibleBox::new(p.lower.clone(), p.upper.clone())?;
    if p.x0.len() != data.d_x() {
        bail!(
            "--x0 has {} entries but the data has {} covariates",
            p.x0.len(),
            data.d_x()
        );
    }
    let h = BandwidthSchedule::new(p.h0, p.delta, data.d_x())?.bandwidth(data.len())?;
    Ok(Loaded {
        data,
        model,
        bounds,
        kernel: p.kernel.into(),
        h,
    })
}

fn build_problem(p: &ProblemArgs, l: &Loaded) -> Result<WsaaProblem> {
    let w = nw_weights(l.data.covariates(), &p.x0, l.kernel, l.h)?;
    Ok(WsaaProblem::new(
        l.data.outcomes().to_vec(),
        w,
        l.model.clone(),
        l.bounds.clone(),
    )?)
}

/// Returns the delivered decision and iterations used.
fn solve_problem(problem: &WsaaProblem, s: &SolverArgs) -> Result<(Vec<f64>, usize)> {
    match &s.algorithm {
        None => Ok((solve_exact(problem)?.z, 0)),
        Some(text) => {
            let algorithm: Algorithm = serde_json::from_str(text).context("parsing --algorithm")?;
            let z0 = s.z0.clone().unwrap_or_else(|| problem.bounds().midpoint());
            let trace = run_solver(problem, &SolverConfig::new(algorithm, s.iters, z0)?)?;
            Ok((trace.delivered().to_vec(), trace.iterations_used))
        }
    }
}

fn solve(a: SolveArgs) -> Result<u8> {
    let l = load(&a.problem)?;
    let problem = build_problem(&a.problem, &l)?;
    let (z, iterations) = solve_problem(&problem, &a.solver)?;
    let objective = problem.objective(&z)?;
    print_json(&serde_json::json!({
        "z": z,
        "objective": objective,
        "iterations": iterations,
        "h": l.h,
    }))
}

fn infer(a: InferArgs) -> Result<u8> {
    let l = load(&a.problem)?;
    let problem = build_problem(&a.problem, &l)?;
    let (z, iterations) = solve_problem(&problem, &a.solver)?;
    let d_x = l.data.d_x();
    let n = l.data.len();
    let estimate = problem.objective(&z)?;
    let v_hat = variance_estimate(&problem, &z, n, l.h, d_x)?;
    let ci = confidence_interval(estimate, v_hat, n, l.h, d_x, a.alpha)?;
    let direct = kde(l.data.covariates(), &a.problem.x0, l.kernel, l.h)
        .and_then(|k| normalized_direct_variance(&problem, &z, l.kernel, d_x, k))
        .ok();
    print_json(&serde_json::json!({
        "z": z,
        "iterations": iterations,
        "interval": ci,
        "variance_direct": direct,
    }))
}

fn allocate_cmd(a: AllocateArgs) -> Result<u8> {
    let need = |v: Option<f64>, name: &str| {
        v.with_context(|| format!("--{name} is required for this regime"))
    };
    let regime = match a.regime {
        RegimeKind::Sublinear => ConvergenceClass::Sublinear {
            beta: need(a.beta, "beta")?,
        },
        RegimeKind::Linear => ConvergenceClass::Linear {
            theta: need(a.theta, "theta")?,
        },
        RegimeKind::Superlinear => ConvergenceClass::Superlinear {
            theta: need(a.theta, "theta")?,
            eta: need(a.eta, "eta")?,
        },
    };
    let rule = match a.rule {
        RuleKind::Optimal => AllocationRule::Optimal,
        RuleKind::OverOptimizing => AllocationRule::OverOptimizing,
    };
    let extras = AllocationExtras {
        c0: a.c0,
        kappa_tilde: a.kappa_tilde,
        kappa_override: a.kappa_override,
    };
    let plan = allocate(regime, rule, a.gamma, a.delta, a.d_x, &extras)?;
    print_json(&serde_json::to_value(plan)?)
}

fn cv(a: CvArgs) -> Result<u8> {
    let l = load(&a.problem)?;
    let h0 = a
        .grid
        .unwrap_or_else(|| scaled_h0_grid(&l.data, &DEFAULT_H0_MULTIPLIERS));
    let grid = CvGrid {
        h0,
        mu0: Vec::new(),
        z0: Vec::new(),
        k: a.k,
    };
    let report = kfold_cv(
        &l.data,
        &a.problem.x0,
        &grid,
        &l.model,
        &l.bounds,
        l.kernel,
        a.problem.delta,
        &FoldSolve::Exact,
        RngStream::new(a.seed, 0),
    )?;
    print_json(&serde_json::to_value(report)?)
}

fn experiment(a: ExperimentArgs) -> Result<u8> {
    let cfg = ExperimentConfig::from_path(&a.config)?;
    let prep = prepare(&cfg)?;
    let out = run_experiment(&prep, a.workers)?;
    let (records, summary) = write_outputs(&a.out, &out)?;
    eprintln!("wrote {} and {}", records.display(), summary.display());
    if out.summary.degraded {
        eprintln!("experiment degraded: more than 20% of replications failed at some grid point");
        return Ok(EXIT_DEGRADED);
    }
    Ok(0)
}
