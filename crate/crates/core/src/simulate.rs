//! Synthetic data-generating processes, reproducible random streams, dataset
//! CSV I/O and the large-sample oracle for the true optimal conditional cost.

use std::io::{Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::costs::{CostModel, FeasibleBox, WsaaProblem};
use crate::error::{ensure_dim, ensure_finite, Result, WsaaError};
use crate::kernels::WeightVector;
use crate::solve::solve_exact;
use crate::stats::{normal_quantile, sample_sd};

/// Identifies one independent, reproducible random sequence.
///
/// Streams sharing a seed but differing in `stream_id` are independent
/// ChaCha8 streams, so replication `r` can use `stream_id = r` regardless of
/// how replications are scheduled across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        rng
    }
}

/// Samples stored as flat row-major covariate and outcome buffers.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    d_x: usize,
    d_y: usize,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl Dataset {
    pub fn new(d_x: usize, d_y: usize, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if d_x == 0 || d_y == 0 {
            return Err(WsaaError::invalid("dataset dimensions must be positive"));
        }
        if !x.len().is_multiple_of(d_x) {
            return Err(WsaaError::invalid(format!(
                "covariate buffer of length {} is not a multiple of d_x = {d_x}",
                x.len()
            )));
        }
        let n = x.len() / d_x;
        ensure_dim(n * d_y, y.len(), "dataset outcomes")?;
        ensure_finite(&x, "covariates")?;
        ensure_finite(&y, "outcomes")?;
        Ok(Self { d_x, d_y, x, y })
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.d_x
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn d_x(&self) -> usize {
        self.d_x
    }

    pub fn d_y(&self) -> usize {
        self.d_y
    }

    pub fn covariates(&self) -> &[f64] {
        &self.x
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.y
    }

    pub fn covariate(&self, i: usize) -> &[f64] {
        &self.x[i * self.d_x..(i + 1) * self.d_x]
    }

    pub fn outcome(&self, i: usize) -> &[f64] {
        &self.y[i * self.d_y..(i + 1) * self.d_y]
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(indices.len() * self.d_x);
        let mut y = Vec::with_capacity(indices.len() * self.d_y);
        for &i in indices {
            x.extend_from_slice(self.covariate(i));
            y.extend_from_slice(self.outcome(i));
        }
        Dataset {
            d_x: self.d_x,
            d_y: self.d_y,
            x,
            y,
        }
    }

    /// Per-dimension sample standard deviation of the covariates.
    pub fn covariate_sds(&self) -> Vec<f64> {
        (0..self.d_x)
            .map(|j| {
                let col: Vec<f64> = self.x.iter().skip(j).step_by(self.d_x).copied().collect();
                sample_sd(&col)
            })
            .collect()
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let header: Vec<String> = (1..=self.d_x)
            .map(|j| format!("x{j}"))
            .chain((1..=self.d_y).map(|j| format!("y{j}")))
            .collect();
        w.write_record(&header)?;
        for i in 0..self.len() {
            let row: Vec<String> = self
                .covariate(i)
                .iter()
                .chain(self.outcome(i))
                .map(|v| format!("{v:?}"))
                .collect();
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        let (mut d_x, mut d_y) = (0, 0);
        for (pos, name) in headers.iter().enumerate() {
            let name = name.trim();
            let expected_x = format!("x{}", d_x + 1);
            let expected_y = format!("y{}", d_y + 1);
            if d_y == 0 && name == expected_x {
                d_x += 1;
            } else if d_x > 0 && name == expected_y {
                d_y += 1;
            } else {
                return Err(WsaaError::invalid(format!(
                    "unexpected dataset column `{name}` at position {pos}; \
                     expected the header x1,...,x<d_x>,y1,...,y<d_y>"
                )));
            }
        }
        if d_x == 0 || d_y == 0 {
            return Err(WsaaError::invalid(
                "dataset header needs at least one x and one y column",
            ));
        }
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for (line, record) in r.records().enumerate() {
            let record = record?;
            for (pos, field) in record.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| {
                    WsaaError::invalid(format!(
                        "row {}: cannot parse `{field}` as a number",
                        line + 1
                    ))
                })?;
                if pos < d_x {
                    x.push(v);
                } else {
                    y.push(v);
                }
            }
        }
        Dataset::new(d_x, d_y, x, y)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.to_csv_writer(std::io::BufWriter::new(file))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Dataset::from_csv_reader(std::io::BufReader::new(file))
    }
}

fn default_newsvendor_noise() -> f64 {
    3.0
}

fn default_quartic_noise() -> f64 {
    1.0
}

fn default_weather_noise() -> f64 {
    0.25
}

/// Joint law of `(X, Y)`.
///
/// `noise_sd` scales the conditional noise; setting it to zero makes `Y` a
/// deterministic function of `X`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Simulator {
    /// `X1 ~ N(20, 2²)`, `X2 ~ LogNormal(1, 0.3²)`; `Y | X` normal with sd 3
    /// truncated at zero, mean `100 + (X1 - 20) + X2·s(X2)` where `s` steps
    /// through 2, 4, 6, 8 on `(-∞,2]`, `(2,4]`, `(4,6]`, `(6,∞)`.
    Newsvendor {
        #[serde(default = "default_newsvendor_noise")]
        noise_sd: f64,
    },
    /// `X1 ~ N(10, 4)`, `X2 ~ N(8, 1)`;
    /// `Y | X ~ N((ln(X1 + 4) + 5, sqrt|X2| + 10), I)`.
    Quartic {
        #[serde(default = "default_quartic_noise")]
        noise_sd: f64,
    },
    /// Synthetic hourly bike demand driven by temperature (°C) and wind
    /// speed (kph). Demand peaks near 20 °C, decays with wind, and carries
    /// mean-one lognormal noise.
    Weather {
        #[serde(default = "default_weather_noise")]
        noise_sd: f64,
    },
}

const WEATHER_BASE: f64 = 300.0;
const WEATHER_PEAK: f64 = 2200.0;
const WEATHER_BEST_TEMP: f64 = 20.0;
const WEATHER_TEMP_SPREAD: f64 = 9.0;
const WEATHER_WIND_SCALE: f64 = 25.0;

impl Simulator {
    pub fn newsvendor() -> Self {
        Simulator::Newsvendor {
            noise_sd: default_newsvendor_noise(),
        }
    }

    pub fn quartic() -> Self {
        Simulator::Quartic {
            noise_sd: default_quartic_noise(),
        }
    }

    pub fn weather() -> Self {
        Simulator::Weather {
            noise_sd: default_weather_noise(),
        }
    }

    pub fn with_noise_sd(self, sd: f64) -> Self {
        match self {
            Simulator::Newsvendor { .. } => Simulator::Newsvendor { noise_sd: sd },
            Simulator::Quartic { .. } => Simulator::Quartic { noise_sd: sd },
            Simulator::Weather { .. } => Simulator::Weather { noise_sd: sd },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Simulator::Newsvendor { .. } => "newsvendor",
            Simulator::Quartic { .. } => "quartic",
            Simulator::Weather { .. } => "weather",
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sd = self.noise_sd();
        if !(sd >= 0.0 && sd.is_finite()) {
            return Err(WsaaError::invalid(format!(
                "noise sd must be finite and nonnegative, got {sd}"
            )));
        }
        Ok(())
    }

    fn noise_sd(&self) -> f64 {
        match *self {
            Simulator::Newsvendor { noise_sd }
            | Simulator::Quartic { noise_sd }
            | Simulator::Weather { noise_sd } => noise_sd,
        }
    }

    pub fn d_x(&self) -> usize {
        2
    }

    pub fn d_y(&self) -> usize {
        match self {
            Simulator::Quartic { .. } => 2,
            _ => 1,
        }
    }

    fn sample_covariate<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        match self {
            Simulator::Newsvendor { .. } => {
                let x1 = 20.0 + 2.0 * rng.sample::<f64, _>(StandardNormal);
                let x2 = LogNormal::new(1.0, 0.3)
                    .expect("valid lognormal")
                    .sample(rng);
                out.extend([x1, x2]);
            }
            Simulator::Quartic { .. } => {
                let x1 = 10.0 + 2.0 * rng.sample::<f64, _>(StandardNormal);
                let x2 = 8.0 + rng.sample::<f64, _>(StandardNormal);
                out.extend([x1, x2]);
            }
            Simulator::Weather { .. } => {
                let temp = 15.0 + 8.0 * rng.sample::<f64, _>(StandardNormal);
                let wind = LogNormal::new(12f64.ln(), 0.4)
                    .expect("valid lognormal")
                    .sample(rng);
                out.extend([temp, wind]);
            }
        }
    }

    /// Pre-noise location of `Y | X = x`: the parent-normal mean for the
    /// newsvendor law, the mean vector for the quartic law and the
    /// conditional mean for the weather law.
    pub fn conditional_location(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Simulator::Newsvendor { .. } => {
                vec![100.0 + (x[0] - 20.0) + x[1] * newsvendor_step(x[1])]
            }
            Simulator::Quartic { .. } => {
                vec![(x[0] + 4.0).ln() + 5.0, x[1].abs().sqrt() + 10.0]
            }
            Simulator::Weather { .. } => {
                let dt = x[0] - WEATHER_BEST_TEMP;
                let bump = (-dt * dt / (2.0 * WEATHER_TEMP_SPREAD * WEATHER_TEMP_SPREAD)).exp();
                vec![
                    WEATHER_BASE
                        + WEATHER_PEAK * bump * (-x[1].max(0.0) / WEATHER_WIND_SCALE).exp(),
                ]
            }
        }
    }

    fn sample_outcome<R: Rng + ?Sized>(&self, x: &[f64], rng: &mut R, out: &mut Vec<f64>) {
        let loc = self.conditional_location(x);
        let sd = self.noise_sd();
        match self {
            Simulator::Newsvendor { .. } => {
                // Rejection from the parent normal; the mean sits ~30 sd
                // above zero, so a rejection essentially never happens.
                let y = loop {
                    let y = loc[0] + sd * rng.sample::<f64, _>(StandardNormal);
                    if y >= 0.0 {
                        break y;
                    }
                };
                out.push(y);
            }
            Simulator::Quartic { .. } => {
                for mu in loc {
                    out.push(mu + sd * rng.sample::<f64, _>(StandardNormal));
                }
            }
            Simulator::Weather { .. } => {
                let e: f64 = rng.sample(StandardNormal);
                out.push(loc[0] * (sd * e - 0.5 * sd * sd).exp());
            }
        }
    }

    /// `n` i.i.d. draws of `(X, Y)`.
    pub fn sample_dataset(&self, n: usize, stream: RngStream) -> Result<Dataset> {
        self.validate()?;
        if n == 0 {
            return Err(WsaaError::invalid("sample size must be at least 1"));
        }
        let mut rng = stream.rng();
        let mut x = Vec::with_capacity(n * self.d_x());
        let mut y = Vec::with_capacity(n * self.d_y());
        for i in 0..n {
            self.sample_covariate(&mut rng, &mut x);
            let xi = [x[i * 2], x[i * 2 + 1]];
            self.sample_outcome(&xi, &mut rng, &mut y);
        }
        Dataset::new(self.d_x(), self.d_y(), x, y)
    }

    /// `count` i.i.d. draws from `Y | X = x0`, flattened row-major.
    pub fn sample_conditional(
        &self,
        x0: &[f64],
        count: usize,
        stream: RngStream,
    ) -> Result<Vec<f64>> {
        self.validate()?;
        ensure_dim(self.d_x(), x0.len(), "query covariate")?;
        ensure_finite(x0, "query covariate")?;
        if count == 0 {
            return Err(WsaaError::invalid(
                "conditional sample size must be at least 1",
            ));
        }
        let mut rng = stream.rng();
        let mut out = Vec::with_capacity(count * self.d_y());
        for _ in 0..count {
            self.sample_outcome(x0, &mut rng, &mut out);
        }
        Ok(out)
    }

    /// Componentwise marginal quantiles of `X` at level `tau`.
    pub fn covariate_quantile(&self, tau: f64) -> Result<Vec<f64>> {
        if !(tau > 0.0 && tau < 1.0) {
            return Err(WsaaError::invalid(format!(
                "quantile level must lie in (0, 1), got {tau}"
            )));
        }
        let q = normal_quantile(tau)?;
        Ok(match self {
            Simulator::Newsvendor { .. } => vec![20.0 + 2.0 * q, (1.0 + 0.3 * q).exp()],
            Simulator::Quartic { .. } => vec![10.0 + 2.0 * q, 8.0 + q],
            Simulator::Weather { .. } => vec![15.0 + 8.0 * q, (12f64.ln() + 0.4 * q).exp()],
        })
    }

    /// Oracle `(z*, f*)` from `count` conditional draws at `x0`.
    pub fn oracle_optimal_value(
        &self,
        x0: &[f64],
        model: &CostModel,
        bounds: &FeasibleBox,
        count: usize,
        stream: RngStream,
    ) -> Result<OracleSolution> {
        ensure_dim(self.d_y(), model.d_y(), "cost model outcome dimension")?;
        let outcomes = self.sample_conditional(x0, count, stream)?;
        oracle_from_outcomes(outcomes, model, bounds)
    }
}

/// Right-closed step coefficient of the newsvendor conditional mean.
pub fn newsvendor_step(x2: f64) -> f64 {
    if x2 <= 2.0 {
        2.0
    } else if x2 <= 4.0 {
        4.0
    } else if x2 <= 6.0 {
        6.0
    } else {
        8.0
    }
}

/// Random quartic cost: `a_j ~ N(20, 15)` (15 read as the variance; a
/// nonpositive draw is redrawn) and `b_j ~ U[-5, -1]`.
pub fn random_quartic(d: usize, stream: RngStream) -> Result<CostModel> {
    if d == 0 {
        return Err(WsaaError::invalid("quartic dimension must be positive"));
    }
    let mut rng = stream.rng();
    let normal = Normal::new(20.0, 15f64.sqrt()).expect("valid normal");
    let unif = Uniform::new_inclusive(-5.0, -1.0).expect("valid range");
    let a: Vec<f64> = (0..d)
        .map(|_| loop {
            let v: f64 = normal.sample(&mut rng);
            if v > 0.0 {
                break v;
            }
        })
        .collect();
    let b: Vec<f64> = (0..d).map(|_| unif.sample(&mut rng)).collect();
    CostModel::quartic(a, b)
}

/// High-precision stand-in for the true optimum at a covariate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleSolution {
    pub z_star: Vec<f64>,
    pub f_star: f64,
    /// Standard error of `f_star`, from the sample spread of `F(z*; Y)`.
    pub std_error: f64,
    pub sample_size: usize,
}

/// Solves the equally weighted SAA over `outcomes` (flat, row-major).
pub fn oracle_from_outcomes(
    outcomes: Vec<f64>,
    model: &CostModel,
    bounds: &FeasibleBox,
) -> Result<OracleSolution> {
    let d_y = model.d_y();
    if outcomes.is_empty() || !outcomes.len().is_multiple_of(d_y) {
        return Err(WsaaError::invalid(
            "oracle outcomes do not form whole samples",
        ));
    }
    let count = outcomes.len() / d_y;
    let problem = WsaaProblem::new(
        outcomes,
        WeightVector::uniform(count)?,
        model.clone(),
        bounds.clone(),
    )?;
    let sol = solve_exact(&problem).map_err(|e| match e {
        WsaaError::OracleFailure { .. } => e,
        WsaaError::StalledLineSearch { trace, .. } => WsaaError::OracleFailure {
            reason: "line search stalled while solving the oracle problem".into(),
            trace: Some(trace),
        },
        other => WsaaError::OracleFailure {
            reason: other.to_string(),
            trace: None,
        },
    })?;
    let costs: Vec<f64> = problem
        .outcomes()
        .chunks_exact(d_y)
        .map(|y| model.value_unchecked(&sol.z, y))
        .collect();
    Ok(OracleSolution {
        std_error: sample_sd(&costs) / (count as f64).sqrt(),
        z_star: sol.z,
        f_star: sol.value,
        sample_size: count,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stats::{normal_cdf, normal_pdf};

    #[test]
    fn streams_reproduce_and_differ() {
        let sim = Simulator::newsvendor();
        let a = sim.sample_dataset(50, RngStream::new(7, 3)).unwrap();
        let b = sim.sample_dataset(50, RngStream::new(7, 3)).unwrap();
        let c = sim.sample_dataset(50, RngStream::new(7, 4)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.outcomes(), c.outcomes());
        let mut ba = Vec::new();
        let mut bb = Vec::new();
        a.to_csv_writer(&mut ba).unwrap();
        b.to_csv_writer(&mut bb).unwrap();
        assert_eq!(ba, bb);
    }

    #[test]
    fn newsvendor_outcomes_are_nonnegative() {
        let d = Simulator::newsvendor()
            .sample_dataset(5000, RngStream::new(1, 0))
            .unwrap();
        assert!(d.outcomes().iter().all(|y| *y >= 0.0));
    }

    #[test]
    fn zero_noise_gives_the_mean_function() {
        let sim = Simulator::newsvendor().with_noise_sd(0.0);
        let d = sim.sample_dataset(200, RngStream::new(2, 0)).unwrap();
        for i in 0..d.len() {
            let x = d.covariate(i);
            let want = 100.0 + (x[0] - 20.0) + x[1] * newsvendor_step(x[1]);
            assert_eq!(d.outcome(i)[0], want);
        }
    }

    #[test]
    fn quartic_covariate_mean() {
        let n = 10_000;
        let d = Simulator::quartic()
            .sample_dataset(n, RngStream::new(3, 0))
            .unwrap();
        let m: f64 = (0..n).map(|i| d.covariate(i)[0]).sum::<f64>() / n as f64;
        assert!((m - 10.0).abs() < 10.0 * (4.0 / n as f64).sqrt());
    }

    #[test]
    fn newsvendor_conditional_mean_matches_truncated_normal() {
        let sim = Simulator::newsvendor();
        let x0 = [18.0, 3.0];
        let mu = 100.0 - 2.0 + 3.0 * 4.0;
        let alpha = -mu / 3.0;
        let want = mu + 3.0 * normal_pdf(alpha) / (1.0 - normal_cdf(alpha));
        let ys = sim
            .sample_conditional(&x0, 1_000_000, RngStream::new(4, 0))
            .unwrap();
        let got = ys.iter().sum::<f64>() / ys.len() as f64;
        assert!((got - want).abs() < 0.05, "{got} vs {want}");
    }

    #[test]
    fn quartic_conditional_means() {
        let sim = Simulator::quartic();
        let ys = sim
            .sample_conditional(&[10.0, 8.0], 1_000_000, RngStream::new(5, 0))
            .unwrap();
        let n = ys.len() / 2;
        let m1 = ys.iter().step_by(2).sum::<f64>() / n as f64;
        let m2 = ys.iter().skip(1).step_by(2).sum::<f64>() / n as f64;
        assert!((m1 - (14f64.ln() + 5.0)).abs() < 0.01);
        assert!((m2 - (8f64.sqrt() + 10.0)).abs() < 0.01);
        let one = sim
            .sample_conditional(&[10.0, 8.0], 1, RngStream::new(5, 1))
            .unwrap();
        assert_eq!(one.len(), 2);
    }

    #[test]
    fn covariate_quantiles() {
        let med = Simulator::newsvendor().covariate_quantile(0.5).unwrap();
        assert!((med[0] - 20.0).abs() < 1e-12);
        assert!((med[1] - 1f64.exp()).abs() < 1e-12);
        assert_eq!(
            Simulator::quartic().covariate_quantile(0.5).unwrap(),
            vec![10.0, 8.0]
        );
        let q = Simulator::newsvendor().covariate_quantile(0.25).unwrap();
        assert!((q[0] - 18.651).abs() < 1e-3);
        assert!((q[1] - (1.0 - 0.3 * 0.674_489_750_196_081_7f64).exp()).abs() < 1e-9);
        assert!((q[1] - 2.222).abs() < 2e-3);
        assert!(Simulator::newsvendor().covariate_quantile(1.0).is_err());
    }

    #[test]
    fn step_is_right_closed() {
        assert_eq!(newsvendor_step(2.0), 2.0);
        assert_eq!(newsvendor_step(2.0 + 1e-12), 4.0);
        assert_eq!(newsvendor_step(4.0), 4.0);
        assert_eq!(newsvendor_step(6.0), 6.0);
        assert_eq!(newsvendor_step(6.000001), 8.0);
        assert_eq!(newsvendor_step(-1.0), 2.0);
    }

    #[test]
    fn weather_demand_scale() {
        let d = Simulator::weather()
            .sample_dataset(20_000, RngStream::new(6, 0))
            .unwrap();
        let mean = d.outcomes().iter().sum::<f64>() / d.len() as f64;
        assert!(mean > 300.0 && mean < 3000.0, "{mean}");
        assert!(d.outcomes().iter().all(|y| *y > 0.0));
    }

    #[test]
    fn random_quartic_coefficients() {
        for s in 0..50 {
            let CostModel::Quartic { a, b } = random_quartic(2, RngStream::new(s, 0)).unwrap()
            else {
                unreachable!()
            };
            assert!(a.iter().all(|v| *v > 0.0));
            assert!(b.iter().all(|v| (-5.0..=-1.0).contains(v)));
        }
    }

    #[test]
    fn oracle_point_mass() {
        let bx = FeasibleBox::new(vec![0.0], vec![200.0]).unwrap();
        let nv = CostModel::newsvendor(10.0, 2.0).unwrap();
        let o = oracle_from_outcomes(vec![42.0; 1000], &nv, &bx).unwrap();
        assert_eq!(o.z_star, vec![42.0]);
        assert_eq!(o.f_star, 0.0);

        let bx = FeasibleBox::new(vec![-50.0, -50.0], vec![50.0, 50.0]).unwrap();
        let q = CostModel::quartic(vec![3.0, 5.0], vec![1.0, 1.0]).unwrap();
        let o = oracle_from_outcomes([1.5, -2.0].repeat(100), &q, &bx).unwrap();
        assert!((o.z_star[0] - 1.5).abs() < 1e-6 && (o.z_star[1] + 2.0).abs() < 1e-6);
    }

    #[test]
    fn oracle_uniform_law() {
        let mut rng = RngStream::new(8, 0).rng();
        let ys: Vec<f64> = (0..1_000_000).map(|_| rng.random::<f64>()).collect();
        let bx = FeasibleBox::new(vec![0.0], vec![1.0]).unwrap();
        let nv = CostModel::newsvendor(1.0, 1.0).unwrap();
        let o = oracle_from_outcomes(ys, &nv, &bx).unwrap();
        assert!((o.z_star[0] - 0.5).abs() < 0.01);
        assert!((o.f_star - 0.25).abs() < 0.01);
    }

    #[test]
    fn oracle_runs_agree_within_standard_errors() {
        let sim = Simulator::newsvendor();
        let x0 = sim.covariate_quantile(0.25).unwrap();
        let nv = CostModel::newsvendor(10.0, 2.0).unwrap();
        let bx = FeasibleBox::new(vec![0.0], vec![200.0]).unwrap();
        let a = sim
            .oracle_optimal_value(&x0, &nv, &bx, 1_000_000, RngStream::new(9, 0))
            .unwrap();
        let b = sim
            .oracle_optimal_value(&x0, &nv, &bx, 1_000_000, RngStream::new(9, 1))
            .unwrap();
        let pooled = (a.std_error.powi(2) + b.std_error.powi(2)).sqrt();
        assert!((a.f_star - b.f_star).abs() < 3.0 * pooled);
    }

    #[test]
    fn csv_round_trip() {
        let d = Simulator::quartic()
            .sample_dataset(25, RngStream::new(10, 0))
            .unwrap();
        let mut buf = Vec::new();
        d.to_csv_writer(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x1,x2,y1,y2\n"));
        let back = Dataset::from_csv_reader(buf.as_slice()).unwrap();
        assert_eq!(back, d);
    }

    #[test]
    fn csv_rejects_bad_headers_and_values() {
        assert!(Dataset::from_csv_reader("y1,x1\n1,2\n".as_bytes()).is_err());
        assert!(Dataset::from_csv_reader("x1,y1\n1,abc\n".as_bytes()).is_err());
        assert!(Dataset::from_csv_reader("x1,y1\n1\n".as_bytes()).is_err());
        let d = Dataset::from_csv_reader("x1,x2,y1\n1,2,3\n4,5,6\n".as_bytes()).unwrap();
        assert_eq!(d.covariate(1), &[4.0, 5.0]);
        assert_eq!(d.outcome(0), &[3.0]);
    }
}
