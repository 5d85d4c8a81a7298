//! Poisson network DGLM with log link.
//!
//! Filtering linearizes the log-likelihood around the current intensity
//! (pseudo-observation `eta + (y - lambda) / lambda` with variance
//! `1 / lambda`), relinearizing once at the first-pass posterior mean.
//! Forecasts are Monte-Carlo ensembles of coefficient paths and counts, with
//! optional forecast-only damping and caps.

use alloc::vec;
use alloc::vec::Vec;

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::design::{design_times, DesignRecipe};
use crate::error::{ensure, Result};
use crate::gaussmodel::{self, design_at, ForecastInputs};
use crate::graph::{NetworkSeq, SparseWeights};
use crate::lgss::{update, Belief, Filter, FilterRun, ObsBlock, ObsLabel, StateNoiseSpec};
use crate::linalg::{psd_factor, Matrix};
use crate::rng;
use crate::stats;

/// Intensity floor used in the linearized update.
pub const LAMBDA_FLOOR: f64 = 1e-8;
/// Cap on the linear predictor during filtering and raw forecasting.
pub const ETA_CAP: f64 = 20.0;
pub const EXPLOSION_THRESHOLD: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonSpec {
    pub recipe: DesignRecipe,
    pub state_noise: StateNoiseSpec,
    pub init: Belief,
}

impl PoissonSpec {
    pub fn simple(recipe: DesignRecipe, q: f64, p0_scale: f64) -> Result<Self> {
        recipe.validate()?;
        let k = recipe.n_columns();
        let mut init = Belief::diffuse(k, p0_scale);
        init.time_index = recipe.lag_order as i64 - 1;
        Ok(Self { recipe, state_noise: StateNoiseSpec::random_walk(Matrix::identity(k).scale(q))?, init })
    }

    pub fn validate(&self) -> Result<()> {
        self.recipe.validate()?;
        self.state_noise.validate()?;
        let k = self.recipe.n_columns();
        ensure!(self.state_noise.dim() == k && self.init.dim() == k, Dimension,
            "state noise and initial belief must have dimension {k}");
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilizerConfig {
    pub phi: f64,
    pub eta_max: f64,
    pub lambda_max: f64,
    pub enabled: bool,
}

impl Default for StabilizerConfig {
    fn default() -> Self {
        Self { phi: 0.98, eta_max: 12.0, lambda_max: 1e5, enabled: true }
    }
}

impl StabilizerConfig {
    /// Unmodified recursion: no damping, no intensity cap, `eta <= 20`.
    pub fn baseline() -> Self {
        Self { enabled: false, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.enabled {
            ensure!(self.phi > 0.0 && self.phi <= 1.0, InvalidInput, "phi = {} not in (0, 1]", self.phi);
            ensure!(self.lambda_max > 0.0, InvalidInput, "lambda_max must be positive");
            ensure!(!self.eta_max.is_nan(), InvalidInput, "eta_max is NaN");
        }
        Ok(())
    }

    fn effective(&self) -> (f64, f64, f64) {
        if self.enabled {
            (self.phi, self.eta_max, self.lambda_max)
        } else {
            (1.0, ETA_CAP, f64::INFINITY)
        }
    }

    /// Intensity for a linear predictor under this configuration.
    pub fn intensity(&self, eta: f64) -> f64 {
        let (_, eta_max, lambda_max) = self.effective();
        libm::exp(eta.min(eta_max)).min(lambda_max)
    }
}

/// Counts must be finite, nonnegative integers.
pub fn check_counts(panel: &Matrix) -> Result<()> {
    for (k, &v) in panel.data().iter().enumerate() {
        ensure!(v.is_finite() && v >= 0.0 && libm::floor(v) == v, InvalidInput,
            "count at row {}, node {} is {v}; counts must be nonnegative integers", k / panel.cols(), k % panel.cols());
    }
    Ok(())
}

/// Linearized filter over rows `p..T`. The recorded per-step likelihood is
/// the plug-in Poisson log-mass at the predicted intensities.
pub fn fit_poisson(panel: &Matrix, networks: &NetworkSeq, z: Option<&[Matrix]>, spec: &PoissonSpec) -> Result<FilterRun> {
    spec.validate()?;
    let p = spec.recipe.lag_order;
    ensure!(panel.rows() > p, InvalidInput, "panel has {} rows, needs at least p + 1 = {}", panel.rows(), p + 1);
    check_counts(panel)?;
    networks.validate(panel.cols(), panel.rows())?;
    let mut filter = Filter::new(spec.init.clone(), spec.state_noise.clone())?;
    for t in p..panel.rows() {
        let (pred, q, s) = filter.predict_next()?;
        let x = design_at(panel, t, networks.at(t), z, &spec.recipe)?.into_matrix();
        let y = panel.row(t);
        let eta_pred = x.mul_vec(&pred.mean);
        let ll: f64 = y.iter().zip(&eta_pred).map(|(&yi, &e)| stats::poisson_log_pmf(yi as u64, clamp_intensity(e))).sum();
        let mut post = pred.clone();
        for _ in 0..2 {
            let eta = x.mul_vec(&post.mean);
            let (pseudo, var): (Vec<f64>, Vec<f64>) = eta
                .iter()
                .zip(y)
                .map(|(&e, &yi)| {
                    let lam = clamp_intensity(e);
                    (libm::log(lam) + (yi - lam) / lam, 1.0 / lam)
                })
                .unzip();
            let blk = ObsBlock::new(x.clone(), Matrix::from_diag(&var), pseudo, ObsLabel::Node)?;
            post = update(&pred, &blk)?.0;
        }
        filter.push(pred, post, q, s, ll);
    }
    Ok(filter.finish())
}

fn clamp_intensity(eta: f64) -> f64 {
    libm::exp(eta.min(ETA_CAP)).max(LAMBDA_FLOOR)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastEnsemble {
    pub horizon: usize,
    /// `S x N` intensities.
    pub intensities: Matrix,
    /// `S x N` counts, row-major.
    pub counts: Vec<u64>,
    pub stabilizer: StabilizerConfig,
    pub seed: u64,
}

impl ForecastEnsemble {
    pub fn n_draws(&self) -> usize {
        self.intensities.rows()
    }

    pub fn n_nodes(&self) -> usize {
        self.intensities.cols()
    }

    pub fn count(&self, draw: usize, node: usize) -> u64 {
        self.counts[draw * self.n_nodes() + node]
    }

    pub fn node_intensities(&self, node: usize) -> Vec<f64> {
        self.intensities.col(node)
    }

    pub fn node_counts(&self, node: usize) -> Vec<f64> {
        (0..self.n_draws()).map(|s| self.count(s, node) as f64).collect()
    }

    /// Predictive `P(Y_node <= y)` as the Poisson mixture over draws.
    pub fn mixture_cdf(&self, node: usize, y: i64) -> f64 {
        let s = self.n_draws() as f64;
        (0..self.n_draws()).map(|d| stats::poisson_cdf(y, self.intensities[(d, node)])).sum::<f64>() / s
    }

    /// `log mean_s Poisson(y; lambda_s)`.
    pub fn mixture_log_pmf(&self, node: usize, y: u64) -> f64 {
        let terms: Vec<f64> = (0..self.n_draws()).map(|d| stats::poisson_log_pmf(y, self.intensities[(d, node)])).collect();
        stats::log_sum_exp(&terms) - libm::log(self.n_draws() as f64)
    }
}

/// Per-draw simulation state, shareable across threads.
#[derive(Debug, Clone)]
pub struct McContext {
    recipe: DesignRecipe,
    stab: StabilizerConfig,
    mean: Vec<f64>,
    p_factor: Matrix,
    q_factors: [Matrix; 2],
    lags: Vec<Vec<f64>>,
    networks: Vec<SparseWeights>,
    covariates: Vec<Option<Matrix>>,
    horizon: usize,
    seed: u64,
}

/// One simulated path: intensities and counts per horizon.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawPath {
    pub intensities: Vec<Vec<f64>>,
    pub counts: Vec<Vec<u64>>,
}

impl McContext {
    pub fn new(
        run: &FilterRun,
        spec: &PoissonSpec,
        inputs: &ForecastInputs<'_>,
        horizon: usize,
        stab: StabilizerConfig,
        seed: u64,
    ) -> Result<Self> {
        ensure!(horizon >= 1, InvalidInput, "horizon must be at least 1");
        stab.validate()?;
        spec.validate()?;
        let p = spec.recipe.lag_order;
        let history = inputs.history;
        ensure!(history.rows() >= p, InvalidInput, "history has fewer than p rows");
        let last = run.last();
        let networks = (1..=horizon).map(|k| inputs.network_for(k).map(SparseWeights::new)).collect::<Result<Vec<_>>>()?;
        let covariates = (1..=horizon)
            .map(|k| inputs.covariates_for(k, spec.recipe.covariate_count).map(|z| z.cloned()))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            recipe: spec.recipe.clone(),
            stab,
            mean: last.mean.clone(),
            p_factor: psd_factor(&last.cov)?,
            q_factors: [
                psd_factor(&gaussmodel::first_step_q(run, &spec.state_noise)?)?,
                psd_factor(&gaussmodel::later_q(&spec.state_noise))?,
            ],
            lags: gaussmodel::lags(history, history.rows(), p),
            networks,
            covariates,
            horizon,
            seed,
        })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn draw(&self, index: usize) -> DrawPath {
        let mut g = rng::stream(self.seed, "poisson-mc-forecast", index as u64);
        let (phi, _, _) = self.stab.effective();
        let mut theta = rng::correlated_normal(&mut g, &self.mean, &self.p_factor);
        let mut lags = self.lags.clone();
        let mut out = DrawPath { intensities: Vec::with_capacity(self.horizon), counts: Vec::with_capacity(self.horizon) };
        for k in 0..self.horizon {
            let drift: Vec<f64> = theta.iter().zip(&self.mean).map(|(th, m)| phi * th + (1.0 - phi) * m).collect();
            theta = rng::correlated_normal(&mut g, &drift, &self.q_factors[usize::from(k > 0)]);
            let w = &self.networks[k];
            let eta = design_times(|v| w.apply(v), &lags, self.covariates[k].as_ref(), &self.recipe, &theta);
            let lam: Vec<f64> = eta.iter().map(|&e| self.stab.intensity(e)).collect();
            let counts: Vec<u64> = lam.iter().map(|&l| sample_poisson(&mut g, l)).collect();
            lags.insert(0, counts.iter().map(|&c| c as f64).collect());
            lags.truncate(self.recipe.lag_order);
            out.intensities.push(lam);
            out.counts.push(counts);
        }
        out
    }

    /// Collects draw paths (in draw order) into per-horizon ensembles.
    pub fn assemble(&self, paths: &[DrawPath]) -> Vec<ForecastEnsemble> {
        let s = paths.len();
        let n = self.lags[0].len();
        (0..self.horizon)
            .map(|k| {
                let mut lam = Matrix::zeros(s, n);
                let mut counts = Vec::with_capacity(s * n);
                for (d, path) in paths.iter().enumerate() {
                    lam.row_mut(d).copy_from_slice(&path.intensities[k]);
                    counts.extend_from_slice(&path.counts[k]);
                }
                ForecastEnsemble { horizon: k + 1, intensities: lam, counts, stabilizer: self.stab, seed: self.seed }
            })
            .collect()
    }
}

fn sample_poisson<R: rand::Rng + ?Sized>(g: &mut R, lambda: f64) -> u64 {
    if !(lambda > 0.0) {
        return 0;
    }
    match Poisson::new(lambda) {
        Ok(d) => d.sample(g) as u64,
        Err(_) => lambda as u64,
    }
}

/// Ensembles for horizons `1..=h` from `draws` simulated paths.
pub fn mc_forecast(
    run: &FilterRun,
    spec: &PoissonSpec,
    inputs: &ForecastInputs<'_>,
    h: usize,
    draws: usize,
    stab: StabilizerConfig,
    seed: u64,
) -> Result<Vec<ForecastEnsemble>> {
    ensure!(draws >= 1, InvalidInput, "need at least one draw");
    let ctx = McContext::new(run, spec, inputs, h, stab, seed)?;
    let paths: Vec<DrawPath> = (0..draws).map(|s| ctx.draw(s)).collect();
    Ok(ctx.assemble(&paths))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    /// Per-node mean intensity (the point forecast).
    pub mean: Vec<f64>,
    /// Per-node median intensity.
    pub median: Vec<f64>,
    /// `quantiles[j][i]`: count quantile `probs[j]` at node `i`.
    pub quantiles: Vec<Vec<f64>>,
    pub probs: Vec<f64>,
    /// Fraction of draws whose largest intensity exceeds the threshold.
    pub explosion_prob: f64,
    pub max_intensity: f64,
}

pub fn ensemble_stats(ens: &ForecastEnsemble, probs: &[f64]) -> Result<EnsembleStats> {
    ensure!(ens.n_draws() >= 1, InvalidInput, "empty ensemble");
    let n = ens.n_nodes();
    let mut mean = Vec::with_capacity(n);
    let mut median = Vec::with_capacity(n);
    let mut quantiles = vec![Vec::with_capacity(n); probs.len()];
    for i in 0..n {
        let lam = ens.node_intensities(i);
        mean.push(stats::mean(&lam));
        median.push(stats::median(&lam));
        let mut c = ens.node_counts(i);
        c.sort_by(f64::total_cmp);
        for (j, &pr) in probs.iter().enumerate() {
            quantiles[j].push(stats::quantile_sorted(&c, pr));
        }
    }
    let maxes: Vec<f64> = (0..ens.n_draws()).map(|d| ens.intensities.row(d).iter().cloned().fold(0.0, f64::max)).collect();
    let exploded = maxes.iter().filter(|&&m| m > EXPLOSION_THRESHOLD).count();
    Ok(EnsembleStats {
        mean,
        median,
        quantiles,
        probs: probs.to_vec(),
        explosion_prob: exploded as f64 / ens.n_draws() as f64,
        max_intensity: maxes.iter().cloned().fold(0.0, f64::max),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussmodel::{fit_gaussian, GaussianSpec, ObsNoise};
    use crate::graph::{row_normalize, Adjacency, WeightMatrix};
    use crate::linalg::max_abs_diff;
    use crate::Error;

    fn intercept_only() -> DesignRecipe {
        DesignRecipe { include_network_lags: false, include_own_lags: false, ..DesignRecipe::default() }
    }

    fn ring(n: usize) -> WeightMatrix {
        let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
        row_normalize(&Adjacency::from_edges(n, &edges, false).unwrap())
    }

    fn poisson_panel(n: usize, t: usize, theta: [f64; 3], w: &WeightMatrix, seed: u64) -> Matrix {
        let mut g = rng::stream(seed, "poisson-test-panel", 0);
        let mut rows: Vec<Vec<f64>> = vec![(0..n).map(|_| sample_poisson(&mut g, libm::exp(theta[0])) as f64).collect()];
        for _ in 1..t {
            let prev = rows.last().unwrap().clone();
            let wy = w.apply(&prev);
            rows.push((0..n).map(|i| sample_poisson(&mut g, libm::exp(theta[0] + theta[1] * wy[i] + theta[2] * prev[i])) as f64).collect());
        }
        Matrix::from_rows(&rows).unwrap()
    }

    #[test]
    fn constant_rate_recovers_log_mean() {
        let w = NetworkSeq::Static(WeightMatrix::observed(Matrix::zeros(1, 1)).unwrap());
        let mut g = rng::stream(4, "poisson-const", 0);
        let ys: Vec<f64> = (0..501).map(|_| sample_poisson(&mut g, 3.0) as f64).collect();
        let panel = Matrix::new(501, 1, ys.clone()).unwrap();
        let spec = PoissonSpec::simple(intercept_only(), 0.0, 10.0).unwrap();
        let run = fit_poisson(&panel, &w, None, &spec).unwrap();
        let ybar = stats::mean(&ys[1..]);
        assert!((run.last().mean[0] - libm::log(ybar)).abs() < 0.05);
        assert!((run.loglik - run.per_step_loglik.iter().sum::<f64>()).abs() < 1e-9);
    }

    #[test]
    fn all_zero_counts_stay_finite() {
        let w = NetworkSeq::Static(ring(4));
        let panel = Matrix::zeros(30, 4);
        let spec = PoissonSpec::simple(DesignRecipe::full(1, 0), 0.01, 1.0).unwrap();
        let run = fit_poisson(&panel, &w, None, &spec).unwrap();
        let b = run.last();
        assert!(b.mean.iter().all(|m| m.is_finite()) && b.cov.is_finite());
        assert!(b.mean[0] < -1.0);
    }

    #[test]
    fn rejects_non_counts() {
        let w = NetworkSeq::Static(ring(2));
        let spec = PoissonSpec::simple(DesignRecipe::full(1, 0), 0.01, 1.0).unwrap();
        let bad = Matrix::from_rows(&[[1.0, 2.0], [0.5, 1.0]]).unwrap();
        assert!(matches!(fit_poisson(&bad, &w, None, &spec), Err(Error::InvalidInput(_))));
        let neg = Matrix::from_rows(&[[1.0, 2.0], [-1.0, 1.0]]).unwrap();
        assert!(fit_poisson(&neg, &w, None, &spec).is_err());
    }

    #[test]
    fn large_counts_match_gaussian_on_logs() {
        let n = 20;
        let w = ring(n);
        let nets = NetworkSeq::Static(w.clone());
        let mut g = rng::stream(1, "poisson-large", 0);
        let panel = Matrix::from_fn(60, n, |_, _| sample_poisson(&mut g, 200.0) as f64);
        let spec = PoissonSpec::simple(intercept_only(), 1e-4, 10.0).unwrap();
        let run = fit_poisson(&panel, &nets, None, &spec).unwrap();
        let logs = panel.map(libm::log);
        let gspec = GaussianSpec {
            obs_noise: ObsNoise::Scalar(1.0 / 200.0),
            ..GaussianSpec::simple(intercept_only(), 1e-4, 0.005, 10.0).unwrap()
        };
        let grun = fit_gaussian(&logs, &nets, None, &gspec).unwrap();
        // The prior at 0 is far from log(200); the linearized filter needs a
        // few steps to reach the log scale.
        for (a, b) in run.filtered.iter().zip(&grun.filtered).skip(15) {
            assert!((a.mean[0] - b.mean[0]).abs() <= 0.05 * b.mean[0].abs());
        }
    }

    #[test]
    fn stabilizer_caps() {
        let stab = StabilizerConfig::default();
        assert_eq!(stab.intensity(15.0), 1e5);
        assert_eq!(StabilizerConfig { lambda_max: 1e9, ..stab }.intensity(15.0), libm::exp(12.0));
        assert_eq!(StabilizerConfig::baseline().intensity(25.0), libm::exp(20.0));
        assert!(StabilizerConfig { phi: 1.5, ..stab }.validate().is_err());
    }

    #[test]
    fn degenerate_ensemble_mean() {
        let n = 5;
        let w = ring(n);
        let nets = NetworkSeq::Static(w.clone());
        let panel = poisson_panel(n, 20, [0.3, 0.08, 0.05], &w, 2);
        let mut spec = PoissonSpec::simple(DesignRecipe::full(1, 0), 0.0, 1.0).unwrap();
        spec.init.cov = Matrix::zeros(3, 3);
        let run = fit_poisson(&panel, &nets, None, &spec).unwrap();
        let inputs = ForecastInputs::carry_forward(&panel, &nets);
        let ens = mc_forecast(&run, &spec, &inputs, 1, 1, StabilizerConfig::baseline(), 0).unwrap();
        let x = design_at(&Matrix::vstack(&panel, &Matrix::zeros(1, n)).unwrap(), 20, &w, None, &spec.recipe).unwrap();
        let expect: Vec<f64> = x.matrix().mul_vec(&run.last().mean).iter().map(|e| libm::exp(*e)).collect();
        assert!(max_abs_diff(ens[0].intensities.row(0), &expect) < 1e-12);
    }

    #[test]
    fn ensembles_are_deterministic_and_capped() {
        let n = 6;
        let w = ring(n);
        let nets = NetworkSeq::Static(w.clone());
        let panel = poisson_panel(n, 30, [0.2, 0.08, 0.05], &w, 3);
        let spec = PoissonSpec::simple(DesignRecipe::full(1, 0), 0.01, 1.0).unwrap();
        let run = fit_poisson(&panel, &nets, None, &spec).unwrap();
        let inputs = ForecastInputs::carry_forward(&panel, &nets);
        let stab = StabilizerConfig { lambda_max: 3.0, ..StabilizerConfig::default() };
        let a = mc_forecast(&run, &spec, &inputs, 4, 50, stab, 11).unwrap();
        let b = mc_forecast(&run, &spec, &inputs, 4, 50, stab, 11).unwrap();
        assert_eq!(a, b);
        for e in &a {
            assert!(e.intensities.data().iter().all(|&l| l <= 3.0));
        }
        let c = mc_forecast(&run, &spec, &inputs, 4, 50, stab, 12).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn one_step_means_match_plug_in() {
        let n = 8;
        let w = ring(n);
        let nets = NetworkSeq::Static(w.clone());
        let panel = poisson_panel(n, 60, [0.3, 0.08, 0.05], &w, 5);
        let spec = PoissonSpec::simple(DesignRecipe::full(1, 0), 1e-4, 1.0).unwrap();
        let run = fit_poisson(&panel, &nets, None, &spec).unwrap();
        let inputs = ForecastInputs::carry_forward(&panel, &nets);
        let s = 4000;
        let ens = mc_forecast(&run, &spec, &inputs, 1, s, StabilizerConfig::baseline(), 1).unwrap();
        let st = ensemble_stats(&ens[0], &[0.05, 0.95]).unwrap();
        let x = design_at(&Matrix::vstack(&panel, &Matrix::zeros(1, n)).unwrap(), 60, &w, None, &spec.recipe).unwrap();
        let plug: Vec<f64> = x.matrix().mul_vec(&run.last().mean).iter().map(|e| libm::exp(*e)).collect();
        for i in 0..n {
            let counts = ens[0].node_counts(i);
            let m = stats::mean(&counts);
            assert!((m - plug[i]).abs() <= 3.0 * libm::sqrt(plug[i].max(1.0)) * 3.0 / libm::sqrt(s as f64) + 0.02 * plug[i]);
            assert!(st.quantiles[0][i] <= st.quantiles[1][i]);
        }
    }

    #[test]
    fn ensemble_stat_examples() {
        let lam = Matrix::from_rows(&[[2.0, 3.0]]).unwrap();
        let one = ForecastEnsemble { horizon: 1, intensities: lam, counts: vec![1, 4], stabilizer: StabilizerConfig::default(), seed: 0 };
        let st = ensemble_stats(&one, &[0.5]).unwrap();
        assert_eq!(st.mean, st.median);
        assert_eq!(st.mean, vec![2.0, 3.0]);
        assert_eq!(st.explosion_prob, 0.0);

        let mut lam = Matrix::from_fn(300, 2, |_, _| 5.0);
        lam[(17, 1)] = 2e6;
        let ens = ForecastEnsemble { horizon: 1, intensities: lam, counts: vec![5; 600], stabilizer: StabilizerConfig::baseline(), seed: 0 };
        let st = ensemble_stats(&ens, &[]).unwrap();
        assert_eq!(st.explosion_prob, 1.0 / 300.0);
    }

    #[test]
    fn mixture_scores() {
        let lam = Matrix::from_rows(&[[1.0], [3.0]]).unwrap();
        let ens = ForecastEnsemble { horizon: 1, intensities: lam, counts: vec![0, 2], stabilizer: StabilizerConfig::default(), seed: 0 };
        let direct = 0.5 * (libm::exp(stats::poisson_log_pmf(2, 1.0)) + libm::exp(stats::poisson_log_pmf(2, 3.0)));
        assert!((ens.mixture_log_pmf(0, 2) - libm::log(direct)).abs() < 1e-14);
        let cdf = 0.5 * (stats::poisson_cdf(2, 1.0) + stats::poisson_cdf(2, 3.0));
        assert!((ens.mixture_cdf(0, 2) - cdf).abs() < 1e-14);
        assert_eq!(ens.mixture_cdf(0, -1), 0.0);
    }
}
