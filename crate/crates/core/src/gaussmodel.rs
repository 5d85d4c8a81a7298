//! Gaussian network TVP-VAR.
//!
//! `y_t = X_t theta_t + eps_t`, where `X_t` is the network design built from
//! lagged observations, and `theta_t` follows a random walk (optionally with
//! threshold-switched innovation variances). Panels are `T x N` matrices with
//! one row per time point; the first `p` rows only serve as initial lags.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::design::{build_design, ColumnLabel, DesignMatrix, DesignRecipe};
use crate::error::{ensure, Error, Result};
use crate::graph::{NetworkSeq, WeightMatrix};
use crate::lgss::{
    self, two_block_update, Belief, Filter, FilterRun, NoiseMode, ObsBlock, ObsLabel, StateNoiseSpec,
};
use crate::linalg::{psd_factor, Matrix};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsNoise {
    Scalar(f64),
    Diagonal(Vec<f64>),
    Full(Matrix),
}

impl ObsNoise {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            ObsNoise::Scalar(s) => ensure!(*s > 0.0 && s.is_finite(), InvalidInput, "sigma2 = {s} must be positive"),
            ObsNoise::Diagonal(d) => {
                ensure!(d.len() == n, Dimension, "diagonal noise has length {}, panel has {n} nodes", d.len());
                ensure!(d.iter().all(|v| *v > 0.0 && v.is_finite()), InvalidInput, "diagonal noise must be positive");
            }
            ObsNoise::Full(r) => {
                ensure!(r.rows() == n && r.cols() == n, Dimension, "noise covariance is {}x{}, expected {n}x{n}", r.rows(), r.cols());
                r.cholesky().map_err(|_| Error::NotPositiveDefinite(String::from("observation noise R")))?;
            }
        }
        Ok(())
    }

    pub fn matrix(&self, n: usize) -> Matrix {
        match self {
            ObsNoise::Scalar(s) => Matrix::identity(n).scale(*s),
            ObsNoise::Diagonal(d) => Matrix::from_diag(d),
            ObsNoise::Full(r) => r.clone(),
        }
    }
}

/// Gaussian edge observations `a_t = L psi_t + u_t`, `u_t ~ N(0, U)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeSubmodel {
    pub loading: Matrix,
    pub noise: Matrix,
    pub state_noise: StateNoiseSpec,
    pub init: Belief,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianSpec {
    pub recipe: DesignRecipe,
    pub state_noise: StateNoiseSpec,
    pub obs_noise: ObsNoise,
    pub init: Belief,
    pub edge: Option<EdgeSubmodel>,
}

impl GaussianSpec {
    /// Constant diagonal `Q = q I`, `R = sigma2 I`, prior `N(0, p0_scale I)`.
    pub fn simple(recipe: DesignRecipe, q: f64, sigma2: f64, p0_scale: f64) -> Result<Self> {
        recipe.validate()?;
        let k = recipe.n_columns();
        let mut init = Belief::diffuse(k, p0_scale);
        init.time_index = recipe.lag_order as i64 - 1;
        Ok(Self {
            recipe,
            state_noise: StateNoiseSpec::random_walk(Matrix::identity(k).scale(q))?,
            obs_noise: ObsNoise::Scalar(sigma2),
            init,
            edge: None,
        })
    }

    pub fn n_coefficients(&self) -> usize {
        self.recipe.n_columns()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        self.recipe.validate()?;
        self.state_noise.validate()?;
        let k = self.recipe.n_columns();
        ensure!(self.state_noise.dim() == k, Dimension, "state noise has dimension {}, design has {k} columns", self.state_noise.dim());
        ensure!(self.init.dim() == k, Dimension, "initial belief has dimension {}, design has {k} columns", self.init.dim());
        self.obs_noise.validate(n)?;
        if let Some(e) = &self.edge {
            let ke = e.state_noise.dim();
            ensure!(e.loading.cols() == ke && e.init.dim() == ke, Dimension, "edge loading/initial law must have {ke} columns");
            ensure!(e.noise.rows() == e.loading.rows() && e.noise.is_square(), Dimension, "edge noise must be {m}x{m}", m = e.loading.rows());
            e.noise.cholesky().map_err(|_| Error::NotPositiveDefinite(String::from("edge noise U")))?;
        }
        Ok(())
    }

    /// Sum of state-noise variances (`q0` in threshold mode).
    pub fn state_noise_trace(&self) -> f64 {
        match &self.state_noise.mode {
            NoiseMode::Constant(q) => q.trace(),
            NoiseMode::Threshold { q0, .. } => q0.iter().sum(),
        }
    }
}

/// Covariates per panel row (`len == rows`) or static (`len == 1`).
pub fn covariates_at(z: Option<&[Matrix]>, t: usize) -> Option<&Matrix> {
    z.map(|zs| &zs[t.min(zs.len() - 1)])
}

pub(crate) fn lags(panel: &Matrix, t: usize, p: usize) -> Vec<Vec<f64>> {
    (1..=p).map(|l| panel.row(t - l).to_vec()).collect()
}

/// Design for panel row `t` under network `w`.
pub fn design_at(panel: &Matrix, t: usize, w: &WeightMatrix, z: Option<&[Matrix]>, recipe: &DesignRecipe) -> Result<DesignMatrix> {
    ensure!(t >= recipe.lag_order && t < panel.rows(), InvalidInput,
        "row {t} lacks {} lags in a panel of {} rows", recipe.lag_order, panel.rows());
    let zt = if recipe.covariate_count > 0 { covariates_at(z, t) } else { None };
    build_design(w, &lags(panel, t, recipe.lag_order), zt, recipe)
}

fn check_panel(panel: &Matrix, networks: &NetworkSeq, z: Option<&[Matrix]>, spec: &GaussianSpec) -> Result<()> {
    let n = panel.cols();
    ensure!(panel.rows() > spec.recipe.lag_order, InvalidInput,
        "panel has {} rows, needs at least p + 1 = {}", panel.rows(), spec.recipe.lag_order + 1);
    ensure!(panel.is_finite(), InvalidInput, "panel has non-finite values");
    networks.validate(n, panel.rows())?;
    if spec.recipe.covariate_count > 0 {
        let zs = z.ok_or_else(|| Error::Missing(String::from("covariates required by the design recipe")))?;
        ensure!(zs.len() == 1 || zs.len() == panel.rows(), Dimension,
            "covariates have {} snapshots, panel has {} rows", zs.len(), panel.rows());
    }
    spec.validate(n)
}

/// Kalman filter over rows `p..T`.
pub fn fit_gaussian(panel: &Matrix, networks: &NetworkSeq, z: Option<&[Matrix]>, spec: &GaussianSpec) -> Result<FilterRun> {
    check_panel(panel, networks, z, spec)?;
    let n = panel.cols();
    let r = spec.obs_noise.matrix(n);
    let p = spec.recipe.lag_order;
    lgss::run_filter(spec.init.clone(), spec.state_noise.clone(), panel.rows() - p, |i| {
        let t = p + i;
        let x = design_at(panel, t, networks.at(t), z, &spec.recipe)?;
        Ok(vec![ObsBlock::new(x.into_matrix(), r.clone(), panel.row(t).to_vec(), ObsLabel::Node)?])
    })
}

/// Joint node-edge filter over `Xi_t = (theta_t, psi_t)`: edge block
/// `[0 | L]` first, then the node block `[X_t | 0]` built from the realized
/// network at `t`.
pub fn fit_joint_node_edge(
    panel: &Matrix,
    edge_obs: &Matrix,
    networks: &NetworkSeq,
    z: Option<&[Matrix]>,
    spec: &GaussianSpec,
) -> Result<FilterRun> {
    check_panel(panel, networks, z, spec)?;
    let edge = spec.edge.as_ref().ok_or_else(|| Error::Missing(String::from("edge submodel")))?;
    ensure!(edge_obs.rows() == panel.rows() && edge_obs.cols() == edge.loading.rows(), Dimension,
        "edge observations are {}x{}, expected {}x{}", edge_obs.rows(), edge_obs.cols(), panel.rows(), edge.loading.rows());
    let n = panel.cols();
    let k = spec.n_coefficients();
    let ke = edge.state_noise.dim();
    let p = spec.recipe.lag_order;
    let r = spec.obs_noise.matrix(n);
    let mut init_cov = Matrix::block_diag(&spec.init.cov, &edge.init.cov);
    init_cov.symmetrize();
    let mut mean = spec.init.mean.clone();
    mean.extend_from_slice(&edge.init.mean);
    let initial = Belief::new(mean, init_cov, spec.init.time_index)?;
    let joint_spec = joint_noise(&spec.state_noise, &edge.state_noise)?;
    let mut filter = Filter::new(initial, joint_spec)?;
    let h_edge = Matrix::hstack(&Matrix::zeros(edge.loading.rows(), k), &edge.loading)?;
    for t in p..panel.rows() {
        let (pred, q, s) = filter.predict_next()?;
        let edge_blk = ObsBlock::new(h_edge.clone(), edge.noise.clone(), edge_obs.row(t).to_vec(), ObsLabel::Edge)?;
        let x = design_at(panel, t, networks.at(t), z, &spec.recipe)?;
        let h_node = Matrix::hstack(x.matrix(), &Matrix::zeros(n, ke))?;
        let node_blk = ObsBlock::new(h_node, r.clone(), panel.row(t).to_vec(), ObsLabel::Node)?;
        let (post, le, ln) = two_block_update(&pred, &edge_blk, &node_blk)?;
        filter.push(pred, post, q, s, le + ln);
    }
    Ok(filter.finish())
}

fn joint_noise(node: &StateNoiseSpec, edge: &StateNoiseSpec) -> Result<StateNoiseSpec> {
    let transition = Matrix::block_diag(&node.transition, &edge.transition);
    let mode = match (&node.mode, &edge.mode) {
        (NoiseMode::Constant(a), NoiseMode::Constant(b)) => NoiseMode::Constant(Matrix::block_diag(a, b)),
        (NoiseMode::Threshold { q0, q1, d }, NoiseMode::Threshold { q0: e0, q1: e1, d: ed }) => NoiseMode::Threshold {
            q0: q0.iter().chain(e0).copied().collect(),
            q1: q1.iter().chain(e1).copied().collect(),
            d: d.iter().chain(ed).copied().collect(),
        },
        _ => return Err(Error::Unsupported(String::from("node and edge state noise must use the same mode"))),
    };
    Ok(StateNoiseSpec { mode, transition })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub state_noise: StateNoiseSpec,
    pub obs_noise: ObsNoise,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub index: usize,
    pub loglik: Option<f64>,
    pub state_noise_trace: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub spec: GaussianSpec,
    pub best: usize,
    pub table: Vec<CandidateResult>,
}

/// Grid search over the innovations log-likelihood.
pub fn select_hyperparams(
    panel: &Matrix,
    networks: &NetworkSeq,
    z: Option<&[Matrix]>,
    base: &GaussianSpec,
    grid: &[Candidate],
) -> Result<Selection> {
    ensure!(!grid.is_empty(), InvalidInput, "hyperparameter grid is empty");
    let mut table = Vec::with_capacity(grid.len());
    let mut best: Option<(usize, f64, f64)> = None;
    for (index, cand) in grid.iter().enumerate() {
        let spec = GaussianSpec { state_noise: cand.state_noise.clone(), obs_noise: cand.obs_noise.clone(), ..base.clone() };
        let trace = spec.state_noise_trace();
        match fit_gaussian(panel, networks, z, &spec) {
            Ok(run) if run.loglik.is_finite() => {
                let ll = run.loglik;
                let better = match best {
                    None => true,
                    Some((_, bl, bt)) => ll > bl || (ll == bl && trace < bt),
                };
                if better {
                    best = Some((index, ll, trace));
                }
                table.push(CandidateResult { index, loglik: Some(ll), state_noise_trace: trace, error: None });
            }
            Ok(run) => table.push(CandidateResult {
                index,
                loglik: None,
                state_noise_trace: trace,
                error: Some(format!("non-finite log-likelihood {}", run.loglik)),
            }),
            Err(e) => table.push(CandidateResult { index, loglik: None, state_noise_trace: trace, error: Some(e.to_string()) }),
        }
    }
    let Some((idx, _, _)) = best else {
        let msgs: Vec<String> = table.iter().map(|c| format!("#{}: {}", c.index, c.error.as_deref().unwrap_or("?"))).collect();
        return Err(Error::AllCandidatesFailed(msgs.join("; ")));
    };
    let spec = GaussianSpec { state_noise: grid[idx].state_noise.clone(), obs_noise: grid[idx].obs_noise.clone(), ..base.clone() };
    Ok(Selection { spec, best: idx, table })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkPolicy {
    /// True future networks.
    Oracle,
    /// Last observed network reused for every horizon.
    #[default]
    CarryForward,
    UserSupplied,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianForecast {
    pub horizon: usize,
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub network_policy: NetworkPolicy,
}

/// Data available at the forecast origin (the last row of `history`).
#[derive(Debug, Clone, Copy)]
pub struct ForecastInputs<'a> {
    pub history: &'a Matrix,
    pub networks: &'a NetworkSeq,
    pub covariates: Option<&'a [Matrix]>,
    /// Networks for the rows after the origin (oracle / user-supplied).
    pub future_networks: Option<&'a [WeightMatrix]>,
    /// Covariates for the rows after the origin.
    pub future_covariates: Option<&'a [Matrix]>,
    pub policy: NetworkPolicy,
}

impl<'a> ForecastInputs<'a> {
    pub fn carry_forward(history: &'a Matrix, networks: &'a NetworkSeq) -> Self {
        Self { history, networks, covariates: None, future_networks: None, future_covariates: None, policy: NetworkPolicy::CarryForward }
    }

    fn origin(&self) -> usize {
        self.history.rows() - 1
    }

    /// Network used `k >= 1` steps past the origin.
    pub fn network_for(&self, k: usize) -> Result<&'a WeightMatrix> {
        match self.policy {
            NetworkPolicy::CarryForward => Ok(self.networks.at(self.origin())),
            NetworkPolicy::Oracle | NetworkPolicy::UserSupplied => {
                let fw = self.future_networks.ok_or_else(|| {
                    Error::Missing(format!("future networks required by the {:?} policy", self.policy))
                })?;
                fw.get(k - 1).ok_or_else(|| Error::Missing(format!("future network for horizon {k}")))
            }
        }
    }

    pub fn covariates_for(&self, k: usize, q: usize) -> Result<Option<&'a Matrix>> {
        if q == 0 {
            return Ok(None);
        }
        let fz = self.future_covariates.ok_or_else(|| Error::Missing(String::from("future covariates")))?;
        let z = fz.get(k - 1).ok_or_else(|| Error::Missing(format!("future covariates for horizon {k}")))?;
        Ok(Some(z))
    }
}

/// Lag matrices `B_l = sum_r beta_(r,l) W^r + beta_own,l I` at coefficient `theta`.
pub fn lag_operators(theta: &[f64], w: &WeightMatrix, recipe: &DesignRecipe) -> Vec<Matrix> {
    let n = w.n_nodes();
    (1..=recipe.lag_order)
        .map(|lag| {
            let mut b = Matrix::zeros(n, n);
            if recipe.include_network_lags {
                for &power in &recipe.network_powers {
                    let j = recipe.column_of(ColumnLabel::NetworkLag { power, lag }).expect("network column");
                    b.add_assign(&w.power(power).scale(theta[j]));
                }
            }
            if let Some(j) = recipe.column_of(ColumnLabel::OwnLag { lag }) {
                b.add_diag(theta[j]);
            }
            b
        })
        .collect()
}

pub(crate) fn first_step_q(run: &FilterRun, spec: &StateNoiseSpec) -> Result<Matrix> {
    match &spec.mode {
        NoiseMode::Constant(q) => Ok(q.clone()),
        NoiseMode::Threshold { .. } => {
            let t = run.len();
            let prev = &run.belief_after(t).mean;
            let prev2 = if t >= 1 { &run.belief_after(t - 1).mean } else { prev };
            Ok(lgss::threshold_q(prev, prev2, spec)?.0)
        }
    }
}

pub(crate) fn later_q(spec: &StateNoiseSpec) -> Matrix {
    match &spec.mode {
        NoiseMode::Constant(q) => q.clone(),
        NoiseMode::Threshold { q0, .. } => Matrix::from_diag(q0),
    }
}

/// Iterated `h`-step forecasts from the last filtered belief in `run`.
///
/// Means chain through predicted coefficient means. Covariances propagate
/// `(theta error, y errors at the last p horizons)` through the recursion
/// linearized at the predicted means; this is exact for `h = 1`.
pub fn forecast_gaussian(run: &FilterRun, spec: &GaussianSpec, inputs: &ForecastInputs<'_>, h: usize) -> Result<Vec<GaussianForecast>> {
    ensure!(h >= 1, InvalidInput, "horizon must be at least 1");
    let history = inputs.history;
    let n = history.cols();
    let p = spec.recipe.lag_order;
    let k = spec.n_coefficients();
    ensure!(history.rows() >= p, InvalidInput, "history has fewer than p rows");
    spec.validate(n)?;
    let f = &spec.state_noise.transition;
    let r = spec.obs_noise.matrix(n);
    let last = run.last();
    ensure!(last.dim() == k, Dimension, "filter state has dimension {}, spec {k}", last.dim());

    let d = k + p * n;
    let mut cov = Matrix::zeros(d, d);
    cov.set_block(0, 0, &last.cov);
    let mut theta = last.mean.clone();
    // Extended series: history followed by predicted means.
    let mut ext = history.clone();
    let mut out = Vec::with_capacity(h);
    for step in 1..=h {
        let q = if step == 1 { first_step_q(run, &spec.state_noise)? } else { later_q(&spec.state_noise) };
        theta = f.mul_vec(&theta);
        let w = inputs.network_for(step)?;
        let zt = inputs.covariates_for(step, spec.recipe.covariate_count)?;
        let t = ext.rows();
        let y_lags = lags(&ext, t, p);
        let x = build_design(w, &y_lags, zt, &spec.recipe)?.into_matrix();
        let mean = x.mul_vec(&theta);
        let bs = lag_operators(&theta, w, &spec.recipe);

        let mut a = Matrix::zeros(d, d);
        a.set_block(0, 0, f);
        a.set_block(k, 0, &x.mul(f));
        for (l, b) in bs.iter().enumerate() {
            a.set_block(k, k + l * n, b);
        }
        for l in 1..p {
            a.set_block(k + l * n, k + (l - 1) * n, &Matrix::identity(n));
        }
        let mut noise = Matrix::zeros(d, d);
        let xq = x.mul(&q);
        noise.set_block(0, 0, &q);
        noise.set_block(k, 0, &xq);
        noise.set_block(0, k, &xq.transpose());
        noise.set_block(k, k, &xq.mul_t(&x).add(&r));
        cov = a.mul(&cov).mul_t(&a).add(&noise);
        cov.symmetrize();

        let mut pred_cov = cov.block(k, k, n, n);
        pred_cov.symmetrize();
        out.push(GaussianForecast { horizon: step, mean: mean.clone(), cov: pred_cov, network_policy: inputs.policy });
        ext = Matrix::vstack(&ext, &Matrix::new(1, n, mean)?)?;
    }
    Ok(out)
}

/// Monte-Carlo reference forecast: samples coefficient paths and
/// observation noise, returning sample moments per horizon.
pub fn forecast_gaussian_mc(
    run: &FilterRun,
    spec: &GaussianSpec,
    inputs: &ForecastInputs<'_>,
    h: usize,
    draws: usize,
    seed: u64,
) -> Result<Vec<GaussianForecast>> {
    ensure!(h >= 1 && draws >= 2, InvalidInput, "need h >= 1 and at least two draws");
    let history = inputs.history;
    let n = history.cols();
    let p = spec.recipe.lag_order;
    let f = &spec.state_noise.transition;
    let r_factor = psd_factor(&spec.obs_noise.matrix(n))?;
    let last = run.last();
    let p_factor = psd_factor(&last.cov)?;
    let q_factors = [psd_factor(&first_step_q(run, &spec.state_noise)?)?, psd_factor(&later_q(&spec.state_noise))?];
    let mut sums = vec![vec![0.0; n]; h];
    let mut cross = vec![Matrix::zeros(n, n); h];
    for s in 0..draws {
        let mut g = rng::stream(seed, "gauss-mc-forecast", s as u64);
        let mut theta = rng::correlated_normal(&mut g, &last.mean, &p_factor);
        let mut lag_rows: Vec<Vec<f64>> = (1..=p).map(|l| history.row(history.rows() - l).to_vec()).collect();
        for step in 1..=h {
            let qf = &q_factors[usize::from(step > 1)];
            theta = rng::correlated_normal(&mut g, &f.mul_vec(&theta), qf);
            let w = inputs.network_for(step)?;
            let zt = inputs.covariates_for(step, spec.recipe.covariate_count)?;
            let x = build_design(w, &lag_rows, zt, &spec.recipe)?;
            let y = rng::correlated_normal(&mut g, &x.matrix().mul_vec(&theta), &r_factor);
            for i in 0..n {
                sums[step - 1][i] += y[i];
                for j in 0..n {
                    cross[step - 1][(i, j)] += y[i] * y[j];
                }
            }
            lag_rows.insert(0, y);
            lag_rows.truncate(p);
        }
    }
    let s = draws as f64;
    Ok((0..h)
        .map(|i| {
            let mean: Vec<f64> = sums[i].iter().map(|v| v / s).collect();
            let cov = Matrix::from_fn(n, n, |a, b| (cross[i][(a, b)] - s * mean[a] * mean[b]) / (s - 1.0));
            GaussianForecast { horizon: i + 1, mean, cov, network_policy: inputs.policy }
        })
        .collect())
}

/// One-step forecast with `w_hat` replacing the network in the design; the
/// coefficient prediction is unchanged.
pub fn plug_in_forecast(
    run: &FilterRun,
    spec: &GaussianSpec,
    history: &Matrix,
    w_hat: &WeightMatrix,
    z_next: Option<&Matrix>,
) -> Result<GaussianForecast> {
    let n = history.cols();
    let p = spec.recipe.lag_order;
    ensure!(history.rows() >= p, InvalidInput, "history has fewer than p rows");
    ensure!(w_hat.n_nodes() == n, Dimension, "plug-in network has {} nodes, panel has {n}", w_hat.n_nodes());
    let x = build_design(w_hat, &lags(history, history.rows(), p), z_next, &spec.recipe)?.into_matrix();
    let q = first_step_q(run, &spec.state_noise)?;
    let pred = lgss::predict(run.last(), &spec.state_noise, &q)?;
    let mut cov = x.mul(&pred.cov).mul_t(&x).add(&spec.obs_noise.matrix(n));
    cov.symmetrize();
    Ok(GaussianForecast { horizon: 1, mean: x.mul_vec(&pred.mean), cov, network_policy: NetworkPolicy::UserSupplied })
}
