//! Rolling-origin forecast evaluation.
//!
//! A [`Forecaster`] produces predictive distributions from data up to an
//! origin. [`rolling_eval`] scores them against the realized rows and
//! collects per-cell losses, log scores, interval coverage and PIT values
//! into an [`EvalReport`]. Reports from two models are compared through
//! origin-indexed paired deltas and a circular moving-block bootstrap.
//!
//! Work is split so callers can parallelize: [`score_origin`] handles one
//! origin and [`EvalReport::assemble`] merges results in origin order.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::gaussmodel::{covariates_at, forecast_gaussian, GaussianSpec, ForecastInputs, NetworkPolicy, ObsNoise};
use crate::design::{build_design, DesignRecipe};
use crate::graph::{perturb, NetworkSeq, PerturbKind, WeightMatrix};
use crate::lgss::{Belief, FilterRun, StateNoiseSpec};
use crate::linalg::Matrix;
use crate::poissonmodel::{ForecastEnsemble, McContext, PoissonSpec, StabilizerConfig, EXPLOSION_THRESHOLD};
use crate::rng;
use crate::stats;

pub const DEFAULT_HORIZONS: [usize; 4] = [1, 2, 4, 8];
pub const DEFAULT_COVERAGE: f64 = 0.9;
pub const TAIL_TRIM: f64 = 0.05;
/// Block length for quarterly series.
pub const QUARTERLY_BLOCK: usize = 8;
/// Block length for monthly series.
pub const MONTHLY_BLOCK: usize = 3;
pub const MIN_REPLICATES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScoreKind {
    Mae,
    Mse,
    GaussianLpd,
    PoissonLs,
    PreqMcLs,
    Coverage { level: f64 },
    Pit,
}

impl ScoreKind {
    pub fn all() -> Vec<ScoreKind> {
        vec![
            ScoreKind::Mae,
            ScoreKind::Mse,
            ScoreKind::GaussianLpd,
            ScoreKind::PoissonLs,
            ScoreKind::PreqMcLs,
            ScoreKind::Coverage { level: DEFAULT_COVERAGE },
            ScoreKind::Pit,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BootstrapConfig {
    pub block_len: usize,
    pub replicates: usize,
    pub seed: u64,
    pub level: f64,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        Self { block_len: QUARTERLY_BLOCK, replicates: 2000, seed: 0, level: 0.95 }
    }
}

impl BootstrapConfig {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.block_len >= 1, InvalidInput, "block length must be at least 1");
        ensure!(self.replicates >= MIN_REPLICATES, InvalidInput,
            "need at least {MIN_REPLICATES} bootstrap replicates, got {}", self.replicates);
        ensure!(self.level > 0.0 && self.level < 1.0, InvalidInput, "bootstrap level {} must be in (0, 1)", self.level);
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPlan {
    pub origins: Vec<usize>,
    pub horizons: Vec<usize>,
    pub scores: Vec<ScoreKind>,
    pub bootstrap: BootstrapConfig,
    /// Seed for PIT randomization.
    pub seed: u64,
}

impl EvalPlan {
    /// Default horizons and scores.
    pub fn new(origins: Vec<usize>) -> Self {
        Self { origins, horizons: DEFAULT_HORIZONS.to_vec(), scores: ScoreKind::all(), bootstrap: BootstrapConfig::default(), seed: 0 }
    }

    /// Every origin from `first` up to the last one that leaves room for
    /// the largest horizon in a panel of `rows` rows.
    pub fn expanding(first: usize, rows: usize, horizons: Vec<usize>) -> Result<Self> {
        let hmax = horizons.iter().copied().max().unwrap_or(0);
        ensure!(rows > first + hmax, InvalidInput, "no origin in [{first}, {}] leaves room for horizon {hmax}", rows.saturating_sub(1));
        let origins = (first..rows - hmax).collect();
        Ok(Self { horizons, ..Self::new(origins) })
    }

    pub fn max_horizon(&self) -> usize {
        self.horizons.last().copied().unwrap_or(0)
    }

    /// Checks the plan against a panel with `rows` rows.
    pub fn validate(&self, rows: usize) -> Result<()> {
        ensure!(!self.origins.is_empty(), InvalidInput, "plan has no origins");
        ensure!(!self.horizons.is_empty(), InvalidInput, "plan has no horizons");
        ensure!(self.horizons[0] >= 1, InvalidInput, "horizons must be positive");
        ensure!(self.horizons.windows(2).all(|w| w[0] < w[1]), InvalidInput,
            "horizons must be strictly ascending, got {:?}", self.horizons);
        let hmax = self.max_horizon();
        for &t in &self.origins {
            ensure!(t + hmax < rows, InvalidInput,
                "origin {t} plus horizon {hmax} runs past the last row {}", rows.saturating_sub(1));
        }
        for s in &self.scores {
            if let ScoreKind::Coverage { level } = s {
                ensure!(*level > 0.0 && *level < 1.0, InvalidInput, "coverage level {level} must be in (0, 1)");
            }
        }
        Ok(())
    }

    pub fn wants(&self, kind: ScoreKind) -> bool {
        self.scores.iter().any(|s| core::mem::discriminant(s) == core::mem::discriminant(&kind))
    }

    fn coverage_level(&self) -> Option<f64> {
        self.scores.iter().find_map(|s| match s {
            ScoreKind::Coverage { level } => Some(*level),
            _ => None,
        })
    }
}

/// A predictive distribution for one panel row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Prediction {
    Gaussian { mean: Vec<f64>, cov: Matrix },
    Poisson { intensity: Vec<f64> },
    Ensemble(ForecastEnsemble),
}

impl Prediction {
    pub fn n_nodes(&self) -> usize {
        match self {
            Prediction::Gaussian { mean, .. } => mean.len(),
            Prediction::Poisson { intensity } => intensity.len(),
            Prediction::Ensemble(e) => e.n_nodes(),
        }
    }

    /// Predictive mean per node.
    pub fn point(&self) -> Vec<f64> {
        match self {
            Prediction::Gaussian { mean, .. } => mean.clone(),
            Prediction::Poisson { intensity } => intensity.clone(),
            Prediction::Ensemble(e) => (0..e.n_nodes()).map(|i| stats::mean(&e.node_intensities(i))).collect(),
        }
    }

    /// The log score that applies to this representation.
    pub fn log_score_kind(&self) -> ScoreKind {
        match self {
            Prediction::Gaussian { .. } => ScoreKind::GaussianLpd,
            Prediction::Poisson { .. } => ScoreKind::PoissonLs,
            Prediction::Ensemble(_) => ScoreKind::PreqMcLs,
        }
    }
}

/// Produces predictions for `horizons` (ascending) from data up to `origin`.
pub trait Forecaster {
    fn forecast(&self, origin: usize, horizons: &[usize]) -> Result<Vec<Prediction>>;
}

fn to_count(y: f64) -> Result<u64> {
    ensure!(y >= 0.0 && libm::floor(y) == y && y.is_finite(), InvalidInput, "count outcome {y} is not a nonnegative integer");
    Ok(y as u64)
}

/// Multivariate normal log density.
pub fn gaussian_lpd(mean: &[f64], cov: &Matrix, y: &[f64]) -> Result<f64> {
    let n = mean.len();
    ensure!(y.len() == n && cov.rows() == n && cov.cols() == n, Dimension,
        "gaussian score: mean {n}, outcome {}, covariance {}x{}", y.len(), cov.rows(), cov.cols());
    let chol = cov.cholesky()?;
    let z = chol.forward(&crate::linalg::sub_vec(y, mean));
    Ok(-0.5 * (n as f64 * stats::LN_2PI + chol.log_det() + crate::linalg::dot(&z, &z)))
}

/// `sum_i log Poisson(y_i; lambda_i)`.
pub fn poisson_ls(intensity: &[f64], y: &[f64]) -> Result<f64> {
    ensure!(intensity.len() == y.len(), Dimension, "poisson score: {} intensities, {} outcomes", intensity.len(), y.len());
    let mut s = 0.0;
    for (&l, &v) in intensity.iter().zip(y) {
        s += stats::poisson_log_pmf(to_count(v)?, l);
    }
    Ok(s)
}

/// `log (1/S) sum_s prod_i Poisson(y_i; lambda_i^(s))`, accumulated in log
/// space. An outcome impossible under every draw scores `-inf`.
pub fn preq_mc_ls(ens: &ForecastEnsemble, y: &[f64]) -> Result<f64> {
    ensure!(ens.n_nodes() == y.len(), Dimension, "ensemble has {} nodes, outcome {}", ens.n_nodes(), y.len());
    ensure!(ens.n_draws() >= 1, InvalidInput, "empty ensemble");
    let counts = y.iter().map(|&v| to_count(v)).collect::<Result<Vec<_>>>()?;
    let ln_fact: Vec<f64> = counts.iter().map(|&c| stats::ln_factorial(c)).collect();
    let per_draw: Vec<f64> = (0..ens.n_draws())
        .map(|s| {
            let lam = ens.intensities.row(s);
            let mut acc = 0.0;
            for i in 0..counts.len() {
                acc += if lam[i] > 0.0 && lam[i].is_finite() {
                    counts[i] as f64 * libm::log(lam[i]) - lam[i] - ln_fact[i]
                } else {
                    stats::poisson_log_pmf(counts[i], lam[i])
                };
            }
            acc
        })
        .collect();
    Ok(stats::log_sum_exp(&per_draw) - libm::log(ens.n_draws() as f64))
}

/// Point loss or log score of `pred` at outcome `y`.
pub fn score(kind: ScoreKind, pred: &Prediction, y: &[f64]) -> Result<f64> {
    ensure!(pred.n_nodes() == y.len(), Dimension, "prediction has {} nodes, outcome {}", pred.n_nodes(), y.len());
    match (kind, pred) {
        (ScoreKind::Mae, p) => Ok(mean_abs(&p.point(), y)),
        (ScoreKind::Mse, p) => Ok(mean_sq(&p.point(), y)),
        (ScoreKind::GaussianLpd, Prediction::Gaussian { mean, cov }) => gaussian_lpd(mean, cov, y),
        (ScoreKind::PoissonLs, Prediction::Poisson { intensity }) => poisson_ls(intensity, y),
        (ScoreKind::PreqMcLs, Prediction::Ensemble(e)) => preq_mc_ls(e, y),
        (k, _) => Err(Error::InvalidInput(format!("score {k:?} does not apply to this prediction type"))),
    }
}

fn mean_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64
}

fn mean_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64
}

/// Smallest `k` with `Poisson(lambda)` CDF at least `prob`.
fn poisson_quantile(prob: f64, lambda: f64) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    let mut lo = 0u64;
    let mut hi = (lambda + 10.0 * libm::sqrt(lambda) + 10.0) as u64;
    while stats::poisson_cdf(hi as i64, lambda) < prob {
        hi *= 2;
    }
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if stats::poisson_cdf(mid as i64, lambda) >= prob {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Equal-tailed interval coverage flags and PIT values per node.
///
/// Count forecasts get a randomized PIT `F(y-1) + V (F(y) - F(y-1))`, with
/// `F` the mixture CDF for ensembles. Ensemble intervals use the sample
/// quantiles of the simulated counts.
pub fn coverage_and_pit(pred: &Prediction, y: &[f64], level: f64, seed: u64) -> Result<(Vec<bool>, Vec<f64>)> {
    ensure!(level > 0.0 && level < 1.0, InvalidInput, "coverage level {level} must be in (0, 1)");
    let n = pred.n_nodes();
    ensure!(y.len() == n, Dimension, "prediction has {n} nodes, outcome {}", y.len());
    let lo_p = (1.0 - level) / 2.0;
    let hi_p = 1.0 - lo_p;
    let mut covered = Vec::with_capacity(n);
    let mut pit = Vec::with_capacity(n);
    match pred {
        Prediction::Gaussian { mean, cov } => {
            let z = stats::normal_quantile(hi_p);
            for i in 0..n {
                let sd = libm::sqrt(cov[(i, i)].max(0.0));
                ensure!(sd > 0.0, InvalidInput, "predictive variance at node {i} is not positive");
                let u = (y[i] - mean[i]) / sd;
                covered.push(u.abs() <= z);
                pit.push(stats::normal_cdf(u));
            }
        }
        Prediction::Poisson { intensity } => {
            let mut g = rng::stream(seed, "pit", 0);
            for i in 0..n {
                let c = to_count(y[i])?;
                let lam = intensity[i];
                covered.push(poisson_quantile(lo_p, lam) <= c && c <= poisson_quantile(hi_p, lam));
                let (f_prev, f) = (stats::poisson_cdf(c as i64 - 1, lam), stats::poisson_cdf(c as i64, lam));
                pit.push(f_prev + g.random::<f64>() * (f - f_prev));
            }
        }
        Prediction::Ensemble(e) => {
            let mut g = rng::stream(seed, "pit", 0);
            let s = e.n_draws();
            for i in 0..n {
                let c = to_count(y[i])?;
                let mut draws: Vec<u64> = (0..s).map(|d| e.count(d, i)).collect();
                draws.sort_unstable();
                let q = |p: f64| draws[(libm::ceil(p * s as f64) as usize).clamp(1, s) - 1];
                covered.push(q(lo_p) <= c && c <= q(hi_p));
                let (f_prev, f) = (e.mixture_cdf(i, c as i64 - 1), e.mixture_cdf(i, c as i64));
                pit.push(f_prev + g.random::<f64>() * (f - f_prev));
            }
        }
    }
    Ok((covered, pit))
}

/// Per-node results for one `(origin, horizon)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellScores {
    pub origin: usize,
    pub horizon: usize,
    pub point: Vec<f64>,
    pub abs_err: Vec<f64>,
    pub sq_err: Vec<f64>,
    /// Joint log score; `-inf` marks a zero-probability outcome.
    pub log_score: Option<f64>,
    pub covered: Option<Vec<bool>>,
    pub pit: Option<Vec<f64>>,
    /// Ensemble draws whose largest intensity exceeds the explosion threshold.
    pub exploded_draws: Option<(usize, usize)>,
}

impl CellScores {
    pub fn mae(&self) -> f64 {
        stats::mean(&self.abs_err)
    }

    pub fn mse(&self) -> f64 {
        stats::mean(&self.sq_err)
    }

    pub fn coverage(&self) -> Option<f64> {
        self.covered.as_ref().map(|c| c.iter().filter(|&&b| b).count() as f64 / c.len() as f64)
    }

    pub fn zero_probability(&self) -> bool {
        self.log_score == Some(f64::NEG_INFINITY)
    }

    pub fn value(&self, metric: Metric) -> Option<f64> {
        match metric {
            Metric::Mae => Some(self.mae()),
            Metric::Mse => Some(self.mse()),
            Metric::LogScore => self.log_score,
            Metric::Coverage => self.coverage(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CellFailure {
    pub origin: usize,
    pub horizon: usize,
    pub message: String,
}

/// Everything scored at one origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OriginResult {
    pub origin: usize,
    pub cells: Vec<CellScores>,
    pub failures: Vec<CellFailure>,
}

fn cell_seed(seed: u64, origin: usize, horizon: usize) -> u64 {
    rng::derive_seed(rng::derive_seed(seed, "pit-origin", origin as u64), "pit-horizon", horizon as u64)
}

fn score_cell(origin: usize, horizon: usize, pred: &Prediction, y: &[f64], plan: &EvalPlan) -> Result<CellScores> {
    ensure!(pred.n_nodes() == y.len(), Dimension, "prediction has {} nodes, panel has {}", pred.n_nodes(), y.len());
    let point = pred.point();
    let abs_err = point.iter().zip(y).map(|(m, v)| (m - v).abs()).collect();
    let sq_err = point.iter().zip(y).map(|(m, v)| (m - v) * (m - v)).collect();
    let kind = pred.log_score_kind();
    let log_score = if plan.wants(kind) { Some(score(kind, pred, y)?) } else { None };
    let (covered, pit) = match (plan.coverage_level(), plan.wants(ScoreKind::Pit)) {
        (None, false) => (None, None),
        (level, want_pit) => {
            let (c, u) = coverage_and_pit(pred, y, level.unwrap_or(DEFAULT_COVERAGE), cell_seed(plan.seed, origin, horizon))?;
            (level.map(|_| c), want_pit.then_some(u))
        }
    };
    let exploded_draws = match pred {
        Prediction::Ensemble(e) => Some((exploded_count(e), e.n_draws())),
        _ => None,
    };
    Ok(CellScores { origin, horizon, point, abs_err, sq_err, log_score, covered, pit, exploded_draws })
}

fn exploded_count(e: &ForecastEnsemble) -> usize {
    (0..e.n_draws()).filter(|&d| e.intensities.row(d).iter().any(|&l| !(l <= EXPLOSION_THRESHOLD))).count()
}

/// Scores the forecasts issued at `origin` (or records why they failed).
pub fn score_origin(origin: usize, forecasts: Result<Vec<Prediction>>, panel: &Matrix, plan: &EvalPlan) -> OriginResult {
    let mut out = OriginResult { origin, cells: Vec::new(), failures: Vec::new() };
    let preds = match forecasts {
        Ok(p) if p.len() == plan.horizons.len() => p,
        Ok(p) => {
            let message = format!("forecaster returned {} predictions for {} horizons", p.len(), plan.horizons.len());
            out.failures = plan.horizons.iter().map(|&h| CellFailure { origin, horizon: h, message: message.clone() }).collect();
            return out;
        }
        Err(e) => {
            let message = e.to_string();
            out.failures = plan.horizons.iter().map(|&h| CellFailure { origin, horizon: h, message: message.clone() }).collect();
            return out;
        }
    };
    for (pred, &h) in preds.iter().zip(&plan.horizons) {
        match score_cell(origin, h, pred, panel.row(origin + h), plan) {
            Ok(c) => out.cells.push(c),
            Err(e) => out.failures.push(CellFailure { origin, horizon: h, message: e.to_string() }),
        }
    }
    out
}

/// Scores every origin of `plan` sequentially.
pub fn rolling_eval(forecaster: &dyn Forecaster, panel: &Matrix, plan: &EvalPlan) -> Result<EvalReport> {
    plan.validate(panel.rows())?;
    let results = plan
        .origins
        .iter()
        .map(|&t| score_origin(t, forecaster.forecast(t, &plan.horizons), panel, plan))
        .collect();
    Ok(EvalReport::assemble(plan.clone(), results))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Mae,
    Mse,
    LogScore,
    Coverage,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::Mae, Metric::Mse, Metric::LogScore, Metric::Coverage];

    pub fn name(&self) -> &'static str {
        match self {
            Metric::Mae => "mae",
            Metric::Mse => "mse",
            Metric::LogScore => "log_score",
            Metric::Coverage => "coverage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMetrics {
    pub explosion_prob: f64,
    pub mae: f64,
    pub median_abs_err: f64,
    pub trimmed_mae: f64,
}

fn tail_from(exploded: usize, draws: usize, abs_err: &[f64]) -> TailMetrics {
    TailMetrics {
        explosion_prob: if draws == 0 { 0.0 } else { exploded as f64 / draws as f64 },
        mae: stats::mean(abs_err),
        median_abs_err: stats::median(abs_err),
        trimmed_mae: stats::trimmed_mean(abs_err, TAIL_TRIM),
    }
}

/// Tail diagnostics over ensembles paired with their realized rows.
/// Errors are per-node absolute deviations of the ensemble mean.
pub fn tail_metrics(cases: &[(&ForecastEnsemble, &[f64])]) -> Result<TailMetrics> {
    ensure!(!cases.is_empty(), InvalidInput, "tail metrics need at least one ensemble");
    let (mut exploded, mut draws, mut errs) = (0, 0, Vec::new());
    for (e, y) in cases {
        ensure!(e.n_nodes() == y.len(), Dimension, "ensemble has {} nodes, outcome {}", e.n_nodes(), y.len());
        exploded += exploded_count(e);
        draws += e.n_draws();
        let m = Prediction::Ensemble((*e).clone()).point();
        errs.extend(m.iter().zip(y.iter()).map(|(a, b)| (a - b).abs()));
    }
    Ok(tail_from(exploded, draws, &errs))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonSummary {
    pub horizon: usize,
    pub n_origins: usize,
    pub n_failed: usize,
    pub mae: f64,
    pub mse: f64,
    /// Mean joint log score; `-inf` if any cell had a zero-probability outcome.
    pub log_score: Option<f64>,
    pub n_zero_probability: usize,
    pub coverage: Option<f64>,
    pub tail: Option<TailMetrics>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub plan: EvalPlan,
    /// Sorted by origin, then horizon.
    pub cells: Vec<CellScores>,
    pub failures: Vec<CellFailure>,
    pub summary: Vec<HorizonSummary>,
}

impl EvalReport {
    /// Merges per-origin results (any order) into a report.
    pub fn assemble(plan: EvalPlan, mut results: Vec<OriginResult>) -> Self {
        results.sort_by_key(|r| r.origin);
        let mut cells = Vec::new();
        let mut failures = Vec::new();
        for r in results {
            cells.extend(r.cells);
            failures.extend(r.failures);
        }
        cells.sort_by_key(|c| (c.origin, c.horizon));
        failures.sort_by_key(|f| (f.origin, f.horizon));
        let summary = plan
            .horizons
            .iter()
            .map(|&h| {
                let hc: Vec<&CellScores> = cells.iter().filter(|c| c.horizon == h).collect();
                summarize(h, &hc, failures.iter().filter(|f| f.horizon == h).count())
            })
            .collect();
        Self { plan, cells, failures, summary }
    }

    pub fn horizon(&self, h: usize) -> Option<&HorizonSummary> {
        self.summary.iter().find(|s| s.horizon == h)
    }

    pub fn cell(&self, origin: usize, h: usize) -> Option<&CellScores> {
        self.cells.iter().find(|c| c.origin == origin && c.horizon == h)
    }

    /// `(origin, value)` for the valid origins at horizon `h`.
    pub fn per_origin(&self, metric: Metric, h: usize) -> Vec<(usize, f64)> {
        self.cells.iter().filter(|c| c.horizon == h).filter_map(|c| c.value(metric).map(|v| (c.origin, v))).collect()
    }

    /// PIT values, optionally restricted to one horizon.
    pub fn pit_values(&self, h: Option<usize>) -> Vec<f64> {
        self.cells
            .iter()
            .filter(|c| h.map_or(true, |h| c.horizon == h))
            .filter_map(|c| c.pit.as_ref())
            .flatten()
            .copied()
            .collect()
    }

    /// Proportion of PIT values in each of `bins` equal-width bins.
    pub fn pit_histogram(&self, h: Option<usize>, bins: usize) -> Vec<f64> {
        pit_histogram(&self.pit_values(h), bins)
    }
}

pub fn pit_histogram(values: &[f64], bins: usize) -> Vec<f64> {
    let mut counts = vec![0usize; bins];
    for &u in values {
        let b = ((u * bins as f64) as usize).min(bins - 1);
        counts[b] += 1;
    }
    let total = values.len().max(1) as f64;
    counts.iter().map(|&c| c as f64 / total).collect()
}

fn summarize(h: usize, cells: &[&CellScores], n_failed: usize) -> HorizonSummary {
    let abs: Vec<f64> = cells.iter().flat_map(|c| c.abs_err.iter().copied()).collect();
    let sq: Vec<f64> = cells.iter().flat_map(|c| c.sq_err.iter().copied()).collect();
    let logs: Vec<f64> = cells.iter().filter_map(|c| c.log_score).collect();
    let flags: Vec<bool> = cells.iter().filter_map(|c| c.covered.as_ref()).flatten().copied().collect();
    let ens: Vec<(usize, usize)> = cells.iter().filter_map(|c| c.exploded_draws).collect();
    let tail = (!ens.is_empty()).then(|| {
        let (e, d) = ens.iter().fold((0, 0), |(a, b), (x, y)| (a + x, b + y));
        tail_from(e, d, &abs)
    });
    HorizonSummary {
        horizon: h,
        n_origins: cells.len(),
        n_failed,
        mae: stats::mean(&abs),
        mse: stats::mean(&sq),
        log_score: (!logs.is_empty()).then(|| stats::mean(&logs)),
        n_zero_probability: logs.iter().filter(|v| **v == f64::NEG_INFINITY).count(),
        coverage: (!flags.is_empty()).then(|| flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64),
        tail,
    }
}

/// `a - b` per origin valid in both reports, in origin order.
pub fn paired_deltas(a: &EvalReport, b: &EvalReport, metric: Metric, h: usize) -> Vec<(usize, f64)> {
    let bv = b.per_origin(metric, h);
    a.per_origin(metric, h)
        .into_iter()
        .filter_map(|(t, x)| bv.iter().find(|(s, _)| *s == t).map(|(_, y)| (t, x - y)))
        .collect()
}

/// Circular moving-block bootstrap percentile interval for the mean.
pub fn block_bootstrap_ci(deltas: &[f64], block_len: usize, replicates: usize, seed: u64, level: f64) -> Result<(f64, f64)> {
    let means = bootstrap_means(deltas, &BootstrapConfig { block_len, replicates, seed, level })?;
    Ok(percentile_ci(means, level))
}

/// Resampled means, one per replicate, each from its own stream.
pub fn bootstrap_means(deltas: &[f64], cfg: &BootstrapConfig) -> Result<Vec<f64>> {
    cfg.validate()?;
    ensure!(!deltas.is_empty(), InvalidInput, "bootstrap needs at least one delta");
    Ok((0..cfg.replicates).map(|b| bootstrap_replicate(deltas, cfg.block_len, cfg.seed, b)).collect())
}

pub fn bootstrap_replicate(deltas: &[f64], block_len: usize, seed: u64, index: usize) -> f64 {
    let n = deltas.len();
    let mut g = rng::stream(seed, "block-bootstrap", index as u64);
    let mut sum = 0.0;
    let mut taken = 0;
    while taken < n {
        let start = g.random_range(0..n);
        for j in 0..block_len.min(n - taken) {
            sum += deltas[(start + j) % n];
        }
        taken += block_len.min(n - taken);
    }
    sum / n as f64
}

pub fn percentile_ci(mut means: Vec<f64>, level: f64) -> (f64, f64) {
    means.sort_by(f64::total_cmp);
    let a = (1.0 - level) / 2.0;
    (stats::quantile_sorted(&means, a), stats::quantile_sorted(&means, 1.0 - a))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaSummary {
    pub horizon: usize,
    pub metric: Metric,
    pub n: usize,
    pub delta: f64,
    pub lo: f64,
    pub hi: f64,
}

/// Mean paired delta `a - b` with a bootstrap interval, per horizon.
pub fn compare(a: &EvalReport, b: &EvalReport, metric: Metric, cfg: &BootstrapConfig) -> Result<Vec<DeltaSummary>> {
    a.plan
        .horizons
        .iter()
        .map(|&h| {
            let d: Vec<f64> = paired_deltas(a, b, metric, h).into_iter().map(|(_, v)| v).collect();
            ensure!(!d.is_empty(), InvalidInput, "no origin is valid in both reports at horizon {h}");
            let (lo, hi) = block_bootstrap_ci(&d, cfg.block_len, cfg.replicates, cfg.seed, cfg.level)?;
            Ok(DeltaSummary { horizon: h, metric, n: d.len(), delta: stats::mean(&d), lo, hi })
        })
        .collect()
}

/// Mean paired deltas per horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HorizonDelta {
    pub horizon: usize,
    pub mae: f64,
    pub mse: f64,
    pub log_score: Option<f64>,
}

fn horizon_deltas(a: &EvalReport, b: &EvalReport) -> Vec<HorizonDelta> {
    let mean_of = |m: Metric, h: usize| {
        let d: Vec<f64> = paired_deltas(a, b, m, h).into_iter().map(|(_, v)| v).collect();
        (!d.is_empty()).then(|| stats::mean(&d))
    };
    a.plan
        .horizons
        .iter()
        .map(|&h| HorizonDelta {
            horizon: h,
            mae: mean_of(Metric::Mae, h).unwrap_or(f64::NAN),
            mse: mean_of(Metric::Mse, h).unwrap_or(f64::NAN),
            log_score: mean_of(Metric::LogScore, h),
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StressArm {
    pub label: String,
    pub kind: Option<PerturbKind>,
    pub summary: Vec<HorizonSummary>,
    pub vs_original: Vec<HorizonDelta>,
    pub vs_baseline: Vec<HorizonDelta>,
}

/// Applies `kind` to every snapshot with the same seed, so label
/// permutations stay aligned over time.
pub fn perturb_networks(networks: &NetworkSeq, kind: &PerturbKind, seed: u64) -> Result<NetworkSeq> {
    Ok(match networks {
        NetworkSeq::Static(w) => NetworkSeq::Static(perturb(w, kind, seed)?),
        NetworkSeq::Dynamic(ws) => NetworkSeq::Dynamic(ws.iter().map(|w| perturb(w, kind, seed)).collect::<Result<Vec<_>>>()?),
    })
}

pub fn stress_arm(label: String, kind: Option<PerturbKind>, report: &EvalReport, original: &EvalReport, baseline: &EvalReport) -> StressArm {
    StressArm {
        label,
        kind,
        summary: report.summary.clone(),
        vs_original: horizon_deltas(report, original),
        vs_baseline: horizon_deltas(report, baseline),
    }
}

/// Re-evaluates with each perturbed network sequence. `eval` refits and
/// scores a model given networks; `original` and `baseline` are the
/// unperturbed and no-network reports.
pub fn stress_suite<F>(
    networks: &NetworkSeq,
    perturbations: &[PerturbKind],
    seed: u64,
    original: &EvalReport,
    baseline: &EvalReport,
    mut eval: F,
) -> Result<Vec<StressArm>>
where
    F: FnMut(&NetworkSeq) -> Result<EvalReport>,
{
    let mut arms = vec![stress_arm(String::from("original"), None, original, original, baseline)];
    for (i, kind) in perturbations.iter().enumerate() {
        let w = perturb_networks(networks, kind, rng::derive_seed(seed, "stress-arm", i as u64))?;
        let report = eval(&w)?;
        arms.push(stress_arm(kind.label(), Some(*kind), &report, original, baseline));
    }
    Ok(arms)
}

/// Panel, networks and covariates shared by the forecasters.
#[derive(Debug, Clone, Copy)]
pub struct PanelData<'a> {
    pub panel: &'a Matrix,
    pub networks: &'a NetworkSeq,
    pub covariates: Option<&'a [Matrix]>,
}

/// Owned inputs for a forecast issued at one origin.
#[derive(Debug, Clone)]
pub struct OriginInputs {
    pub history: Matrix,
    pub future_networks: Option<Vec<WeightMatrix>>,
    pub future_covariates: Option<Vec<Matrix>>,
}

impl<'a> PanelData<'a> {
    pub fn new(panel: &'a Matrix, networks: &'a NetworkSeq) -> Self {
        Self { panel, networks, covariates: None }
    }

    pub fn origin_inputs(&self, origin: usize, h: usize, policy: NetworkPolicy, covariate_count: usize) -> Result<OriginInputs> {
        let n = self.panel.cols();
        ensure!(origin < self.panel.rows(), InvalidInput, "origin {origin} is past the last row {}", self.panel.rows() - 1);
        let history = self.panel.block(0, 0, origin + 1, n);
        let future_networks = match policy {
            NetworkPolicy::CarryForward => None,
            _ => Some((1..=h).map(|k| self.networks.at(origin + k).clone()).collect()),
        };
        let future_covariates = if covariate_count > 0 {
            let z = self.covariates.ok_or_else(|| Error::Missing(String::from("covariates")))?;
            Some((1..=h).map(|k| covariates_at(Some(z), origin + k).cloned().ok_or_else(|| {
                Error::Missing(format!("covariates for row {}", origin + k))
            })).collect::<Result<Vec<_>>>()?)
        } else {
            None
        };
        Ok(OriginInputs { history, future_networks, future_covariates })
    }
}

impl OriginInputs {
    pub fn as_forecast_inputs<'b>(&'b self, data: &PanelData<'b>, policy: NetworkPolicy) -> ForecastInputs<'b> {
        ForecastInputs {
            history: &self.history,
            networks: data.networks,
            covariates: data.covariates,
            future_networks: self.future_networks.as_deref(),
            future_covariates: self.future_covariates.as_deref(),
            policy,
        }
    }
}

fn select(horizons: &[usize], mut all: Vec<Prediction>) -> Result<Vec<Prediction>> {
    ensure!(horizons.iter().all(|&h| h >= 1 && h <= all.len()), InvalidInput, "requested horizons exceed the forecast length");
    let mut out = Vec::with_capacity(horizons.len());
    for &h in horizons.iter().rev() {
        all.truncate(h);
        out.push(all.pop().expect("horizon checked above"));
    }
    out.reverse();
    Ok(out)
}

fn steps_at(origin: usize, p: usize, run: &FilterRun) -> Result<usize> {
    ensure!(origin + 1 >= p, InvalidInput, "origin {origin} precedes the first usable row {}", p.saturating_sub(1));
    let steps = origin + 1 - p;
    ensure!(steps <= run.len(), InvalidInput, "origin {origin} is beyond the filtered sample");
    Ok(steps)
}

/// Gaussian model forecasts from a full-sample filter truncated at each
/// origin.
#[derive(Debug, Clone, Copy)]
pub struct GaussianForecaster<'a> {
    pub data: PanelData<'a>,
    pub spec: &'a GaussianSpec,
    pub run: &'a FilterRun,
    pub policy: NetworkPolicy,
}

impl Forecaster for GaussianForecaster<'_> {
    fn forecast(&self, origin: usize, horizons: &[usize]) -> Result<Vec<Prediction>> {
        let hmax = horizons.last().copied().unwrap_or(0);
        let run = self.run.truncated(steps_at(origin, self.spec.recipe.lag_order, self.run)?)?;
        let owned = self.data.origin_inputs(origin, hmax, self.policy, self.spec.recipe.covariate_count)?;
        let fc = forecast_gaussian(&run, self.spec, &owned.as_forecast_inputs(&self.data, self.policy), hmax)?;
        select(horizons, fc.into_iter().map(|f| Prediction::Gaussian { mean: f.mean, cov: f.cov }).collect())
    }
}

/// Poisson Monte-Carlo ensembles from a truncated full-sample filter.
#[derive(Debug, Clone, Copy)]
pub struct PoissonForecaster<'a> {
    pub data: PanelData<'a>,
    pub spec: &'a PoissonSpec,
    pub run: &'a FilterRun,
    pub policy: NetworkPolicy,
    pub stabilizer: StabilizerConfig,
    pub draws: usize,
    pub seed: u64,
}

impl PoissonForecaster<'_> {
    /// Simulation context for `origin`; draws can run in any order.
    pub fn context(&self, origin: usize, hmax: usize) -> Result<McContext> {
        ensure!(self.draws >= 1, InvalidInput, "need at least one draw");
        let run = self.run.truncated(steps_at(origin, self.spec.recipe.lag_order, self.run)?)?;
        let owned = self.data.origin_inputs(origin, hmax, self.policy, self.spec.recipe.covariate_count)?;
        let seed = rng::derive_seed(self.seed, "forecast-origin", origin as u64);
        McContext::new(&run, self.spec, &owned.as_forecast_inputs(&self.data, self.policy), hmax, self.stabilizer, seed)
    }

    pub fn predictions(horizons: &[usize], ensembles: Vec<ForecastEnsemble>) -> Result<Vec<Prediction>> {
        select(horizons, ensembles.into_iter().map(Prediction::Ensemble).collect())
    }
}

impl Forecaster for PoissonForecaster<'_> {
    fn forecast(&self, origin: usize, horizons: &[usize]) -> Result<Vec<Prediction>> {
        let ctx = self.context(origin, horizons.last().copied().unwrap_or(0))?;
        let paths: Vec<_> = (0..self.draws).map(|s| ctx.draw(s)).collect();
        Self::predictions(horizons, ctx.assemble(&paths))
    }
}

/// Constant-coefficient VAR on the network design, refit by least squares
/// at each origin. Forecasts include coefficient uncertainty.
#[derive(Debug, Clone)]
pub struct OlsForecaster<'a> {
    pub data: PanelData<'a>,
    pub recipe: DesignRecipe,
    pub policy: NetworkPolicy,
}

impl OlsForecaster<'_> {
    /// Least-squares fit on rows `p..=origin` as a zero-noise state-space
    /// model whose belief is the sampling law of the estimate.
    pub fn fit(&self, origin: usize) -> Result<(GaussianSpec, FilterRun)> {
        let p = self.recipe.lag_order;
        let k = self.recipe.n_columns();
        let n = self.data.panel.cols();
        ensure!(origin >= p, InvalidInput, "origin {origin} leaves no rows for least squares");
        let mut xtx = Matrix::zeros(k, k);
        let mut xty = vec![0.0; k];
        let mut yy = 0.0;
        for t in p..=origin {
            let lags: Vec<Vec<f64>> = (1..=p).map(|l| self.data.panel.row(t - l).to_vec()).collect();
            let x = build_design(self.data.networks.at(t), &lags, covariates_at(self.data.covariates, t), &self.recipe)?.into_matrix();
            let y = self.data.panel.row(t);
            xtx.add_assign(&x.t_mul(&x));
            for (a, b) in xty.iter_mut().zip(x.t_mul_vec(y)) {
                *a += b;
            }
            yy += crate::linalg::dot(y, y);
        }
        let rows = (origin + 1 - p) * n;
        ensure!(rows > k, InvalidInput, "least squares needs more than {k} observations, origin {origin} gives {rows}");
        let chol = xtx.cholesky().map_err(|_| Error::NotPositiveDefinite(String::from("least-squares normal equations")))?;
        let theta = chol.solve_vec(&xty);
        let rss = (yy - crate::linalg::dot(&theta, &xty)).max(0.0);
        let sigma2 = (rss / (rows - k) as f64).max(f64::MIN_POSITIVE);
        let belief = Belief::new(theta, chol.inverse().scale(sigma2), origin as i64)?;
        let spec = GaussianSpec {
            recipe: self.recipe.clone(),
            state_noise: StateNoiseSpec::random_walk(Matrix::zeros(k, k))?,
            obs_noise: ObsNoise::Scalar(sigma2),
            init: belief.clone(),
            edge: None,
        };
        let run = FilterRun {
            initial: belief,
            filtered: Vec::new(),
            predicted: Vec::new(),
            loglik: 0.0,
            per_step_loglik: Vec::new(),
            threshold_states: None,
            state_noise: Vec::new(),
            transition: Matrix::identity(k),
        };
        Ok((spec, run))
    }
}

impl Forecaster for OlsForecaster<'_> {
    fn forecast(&self, origin: usize, horizons: &[usize]) -> Result<Vec<Prediction>> {
        let hmax = horizons.last().copied().unwrap_or(0);
        let (spec, run) = self.fit(origin)?;
        let owned = self.data.origin_inputs(origin, hmax, self.policy, self.recipe.covariate_count)?;
        let fc = forecast_gaussian(&run, &spec, &owned.as_forecast_inputs(&self.data, self.policy), hmax)?;
        select(horizons, fc.into_iter().map(|f| Prediction::Gaussian { mean: f.mean, cov: f.cov }).collect())
    }
}
