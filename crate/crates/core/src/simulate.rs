//! Data-generating processes: random graphs, coefficient paths, Gaussian and
//! Poisson panels, and logistic dynamic edges.
//!
//! Every generator is a pure function of its seed. Each stage draws from its
//! own labelled stream, so changing one stage never shifts another's draws.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::design::{build_design, DesignRecipe};
use crate::error::{ensure, Error, Result};
use crate::gaussmodel::{covariates_at, lag_operators};
use crate::graph::{operator_norm, row_normalize, Adjacency, NetworkSeq, Provenance, WeightMatrix};
use crate::linalg::{psd_factor, Matrix};
use crate::rng;

pub const DEFAULT_SIGMA: f64 = 0.5;
pub const DEFAULT_JUMP_RATE: f64 = 0.02;
pub const DEFAULT_JUMP_SIZE: (f64, f64) = (0.2, 0.5);
pub const DEFAULT_BURN_IN: usize = 50;
pub const DEFAULT_TARGET_DENSITY: f64 = 0.15;
pub const DEFAULT_ETA_CAP: f64 = 30.0;
/// Stability multipliers of the simulation-suite grid.
pub const STABILITY_GRID: [f64; 5] = [0.60, 0.80, 1.00, 1.05, 1.10];

const STABILITY_TOL: f64 = 1e-8;
const STABILITY_MAX_ITER: usize = 5_000;

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + libm::exp(-x))
}

// ---------------------------------------------------------------- graphs

/// Edge-logit intercept of the latent-distance model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LatentIntercept {
    Fixed(f64),
    /// Chosen by bisection so the expected density given the sampled
    /// embeddings matches the target.
    TargetDensity(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    LatentDistance { dim: usize, scale: f64, intercept: LatentIntercept },
    Sbm { block_sizes: Vec<usize>, p_in: f64, p_out: f64 },
    ScaleFree { m_attach: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphGen {
    pub kind: GraphKind,
    pub n_nodes: usize,
    pub seed: u64,
}

impl GraphGen {
    pub fn latent_distance(n_nodes: usize, dim: usize, scale: f64, seed: u64) -> Self {
        let intercept = LatentIntercept::TargetDensity(DEFAULT_TARGET_DENSITY);
        Self { kind: GraphKind::LatentDistance { dim, scale, intercept }, n_nodes, seed }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.n_nodes >= 2, InvalidInput, "graph needs at least 2 nodes, got {}", self.n_nodes);
        match &self.kind {
            GraphKind::LatentDistance { dim, scale, intercept } => {
                ensure!(*dim > 0, InvalidInput, "latent dimension must be positive");
                ensure!(scale.is_finite() && *scale >= 0.0, InvalidInput, "latent scale {scale} must be nonnegative");
                match *intercept {
                    LatentIntercept::Fixed(a) => ensure!(a.is_finite(), InvalidInput, "intercept {a} is not finite"),
                    LatentIntercept::TargetDensity(d) => {
                        ensure!(d > 0.0 && d < 1.0, InvalidInput, "target density {d} not in (0,1)")
                    }
                }
            }
            GraphKind::Sbm { block_sizes, p_in, p_out } => {
                ensure!(block_sizes.iter().sum::<usize>() == self.n_nodes, InvalidInput,
                    "block sizes sum to {}, expected {}", block_sizes.iter().sum::<usize>(), self.n_nodes);
                for p in [*p_in, *p_out] {
                    ensure!((0.0..=1.0).contains(&p), InvalidInput, "probability {p} not in [0,1]");
                }
            }
            GraphKind::ScaleFree { m_attach } => {
                ensure!(*m_attach >= 1, InvalidInput, "m_attach must be at least 1");
            }
        }
        Ok(())
    }
}

/// Samples an undirected adjacency and its row-normalized weights.
pub fn gen_graph(g: &GraphGen) -> Result<(WeightMatrix, Adjacency)> {
    g.validate()?;
    let n = g.n_nodes;
    let mut r = rng::stream(g.seed, "graph", 0);
    let edges: Vec<(usize, usize, f64)> = match &g.kind {
        GraphKind::LatentDistance { dim, scale, intercept } => {
            let z: Vec<Vec<f64>> = (0..n).map(|_| rng::standard_normals(&mut r, *dim)).collect();
            let mut dist = Vec::with_capacity(n * (n - 1) / 2);
            for i in 0..n {
                for j in i + 1..n {
                    let d2: f64 = z[i].iter().zip(&z[j]).map(|(a, b)| (a - b) * (a - b)).sum();
                    dist.push(libm::sqrt(d2));
                }
            }
            let a = match *intercept {
                LatentIntercept::Fixed(a) => a,
                LatentIntercept::TargetDensity(d) => density_intercept(&dist, *scale, d),
            };
            let mut out = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if r.random::<f64>() < logistic(a - scale * dist[k]) {
                        out.push((i, j, 1.0));
                    }
                    k += 1;
                }
            }
            out
        }
        GraphKind::Sbm { block_sizes, p_in, p_out } => {
            let block: Vec<usize> = block_sizes.iter().enumerate().flat_map(|(b, &s)| vec![b; s]).collect();
            let mut out = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    let p = if block[i] == block[j] { *p_in } else { *p_out };
                    if r.random::<f64>() < p {
                        out.push((i, j, 1.0));
                    }
                }
            }
            out
        }
        GraphKind::ScaleFree { m_attach } => preferential_attachment(n, *m_attach, &mut r),
    };
    let adj = Adjacency::from_edges(n, &edges, false)?;
    let w = WeightMatrix::new(row_normalize(&adj).matrix().clone(), Provenance::Simulated)?;
    Ok((w, adj))
}

/// Intercept `a` with mean of `logistic(a - scale * d)` equal to `target`.
fn density_intercept(dist: &[f64], scale: f64, target: f64) -> f64 {
    let density = |a: f64| dist.iter().map(|d| logistic(a - scale * d)).sum::<f64>() / dist.len() as f64;
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if density(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Barabasi-Albert growth from a single edge between nodes 0 and 1. Node
/// `v` attaches to `min(m, v)` distinct earlier nodes chosen with
/// probability proportional to degree.
fn preferential_attachment<R: Rng>(n: usize, m: usize, r: &mut R) -> Vec<(usize, usize, f64)> {
    let mut edges = vec![(0, 1, 1.0)];
    // Each node appears once per incident edge end.
    let mut ends: Vec<usize> = vec![0, 1];
    for v in 2..n {
        let want = m.min(v);
        let mut targets: Vec<usize> = Vec::with_capacity(want);
        while targets.len() < want {
            let t = ends[r.random_range(0..ends.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for t in targets {
            edges.push((t, v, 1.0));
            ends.push(t);
            ends.push(v);
        }
    }
    edges
}

// ----------------------------------------------------- coefficient paths

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseJumps {
    /// Coordinates that receive jumps.
    pub coords: Vec<usize>,
    /// Per-step Bernoulli rate.
    pub rate: f64,
    /// Jump magnitude is uniform on `[min_size, max_size]`.
    pub min_size: f64,
    pub max_size: f64,
    pub random_sign: bool,
}

impl SparseJumps {
    pub fn new(coords: Vec<usize>) -> Self {
        Self { coords, rate: DEFAULT_JUMP_RATE, min_size: DEFAULT_JUMP_SIZE.0, max_size: DEFAULT_JUMP_SIZE.1, random_sign: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffPathSpec {
    pub init: Vec<f64>,
    pub rw_sd: Vec<f64>,
    #[serde(default)]
    pub jumps: Option<SparseJumps>,
    /// Optional `(lower, upper)` bounds applied after every step.
    #[serde(default)]
    pub clamp: Option<(Vec<f64>, Vec<f64>)>,
    pub stability_multiplier: f64,
    /// Coordinates scaled by the stability multiplier.
    #[serde(default)]
    pub scaled: Vec<usize>,
}

impl CoeffPathSpec {
    pub fn constant(init: Vec<f64>) -> Self {
        let k = init.len();
        Self { init, rw_sd: vec![0.0; k], jumps: None, clamp: None, stability_multiplier: 1.0, scaled: Vec::new() }
    }

    /// Three coefficients (intercept, network lag, own lag) with jumps in
    /// the network coefficient and the multiplier on both lag coefficients.
    pub fn network_var1(init: [f64; 3], rw_sd: f64, c: f64) -> Self {
        Self {
            init: init.to_vec(),
            rw_sd: vec![rw_sd; 3],
            jumps: Some(SparseJumps::new(vec![1])),
            clamp: None,
            stability_multiplier: c,
            scaled: vec![1, 2],
        }
    }

    pub fn dim(&self) -> usize {
        self.init.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        ensure!(k > 0, InvalidInput, "coefficient path needs at least one coordinate");
        ensure!(self.rw_sd.len() == k, Dimension, "rw_sd has length {}, expected {k}", self.rw_sd.len());
        ensure!(self.init.iter().all(|v| v.is_finite()), InvalidInput, "initial coefficients must be finite");
        ensure!(self.rw_sd.iter().all(|&s| s.is_finite() && s >= 0.0), InvalidInput, "rw_sd must be nonnegative");
        ensure!(self.stability_multiplier.is_finite() && self.stability_multiplier > 0.0, InvalidInput,
            "stability multiplier {} must be positive", self.stability_multiplier);
        ensure!(self.scaled.iter().all(|&j| j < k), InvalidInput, "scaled coordinate out of range");
        if let Some(j) = &self.jumps {
            ensure!((0.0..=1.0).contains(&j.rate), InvalidInput, "jump rate {} not in [0,1]", j.rate);
            ensure!(j.min_size >= 0.0 && j.min_size <= j.max_size && j.max_size.is_finite(), InvalidInput,
                "jump size bounds [{}, {}] are invalid", j.min_size, j.max_size);
            ensure!(j.coords.iter().all(|&c| c < k), InvalidInput, "jump coordinate out of range");
        }
        if let Some((lo, hi)) = &self.clamp {
            ensure!(lo.len() == k && hi.len() == k, Dimension, "clamp bounds must have length {k}");
            ensure!(lo.iter().zip(hi).all(|(a, b)| a <= b), InvalidInput, "clamp lower bound exceeds upper bound");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jump {
    pub time: usize,
    pub coord: usize,
    pub size: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoeffPaths {
    /// `T x K`, row 0 is the (scaled) initial value.
    pub paths: Matrix,
    pub jumps: Vec<Jump>,
}

impl CoeffPaths {
    pub fn jump_times(&self) -> Vec<usize> {
        let mut t: Vec<usize> = self.jumps.iter().map(|j| j.time).collect();
        t.dedup();
        t
    }
}

pub fn gen_coeff_paths(spec: &CoeffPathSpec, t_len: usize, seed: u64) -> Result<CoeffPaths> {
    spec.validate()?;
    ensure!(t_len > 0, InvalidInput, "path length must be positive");
    let k = spec.dim();
    let mut noise = rng::stream(seed, "coeff-rw", 0);
    let mut jr = rng::stream(seed, "coeff-jumps", 0);
    let mut paths = Matrix::zeros(t_len, k);
    paths.row_mut(0).copy_from_slice(&spec.init);
    let mut jumps = Vec::new();
    for t in 1..t_len {
        let mut row: Vec<f64> = paths.row(t - 1).to_vec();
        for (v, &sd) in row.iter_mut().zip(&spec.rw_sd) {
            let z: f64 = StandardNormal.sample(&mut noise);
            *v += sd * z;
        }
        if let Some(j) = &spec.jumps {
            for &c in &j.coords {
                if jr.random::<f64>() < j.rate {
                    let mag = j.min_size + (j.max_size - j.min_size) * jr.random::<f64>();
                    let size = if j.random_sign && jr.random::<bool>() { -mag } else { mag };
                    row[c] += size;
                    jumps.push(Jump { time: t, coord: c, size });
                }
            }
        }
        if let Some((lo, hi)) = &spec.clamp {
            for ((v, &a), &b) in row.iter_mut().zip(lo).zip(hi) {
                *v = v.clamp(a, b);
            }
        }
        paths.row_mut(t).copy_from_slice(&row);
    }
    let c = spec.stability_multiplier;
    for &j in &spec.scaled {
        for t in 0..t_len {
            paths[(t, j)] *= c;
        }
        for jump in jumps.iter_mut().filter(|x| x.coord == j) {
            jump.size *= c;
        }
    }
    Ok(CoeffPaths { paths, jumps })
}

// ---------------------------------------------------------------- panels

fn check_panel_inputs(
    networks: &NetworkSeq,
    paths: &Matrix,
    recipe: &DesignRecipe,
    y0: Option<&Matrix>,
    covariates: Option<&[Matrix]>,
) -> Result<(usize, usize)> {
    recipe.validate()?;
    let n = networks.n_nodes();
    let t_len = paths.rows();
    let p = recipe.lag_order;
    ensure!(paths.cols() == recipe.n_columns(), Dimension,
        "coefficient paths have {} columns, design has {}", paths.cols(), recipe.n_columns());
    ensure!(t_len > p, InvalidInput, "need more than {p} rows, got {t_len}");
    networks.validate(n, t_len)?;
    if let Some(y0) = y0 {
        ensure!(y0.rows() == p && y0.cols() == n, Dimension,
            "initial values are {}x{}, expected {p}x{n}", y0.rows(), y0.cols());
    }
    if recipe.covariate_count > 0 {
        let z = covariates.ok_or_else(|| Error::Missing(format!("{} covariates", recipe.covariate_count)))?;
        ensure!(z.len() == 1 || z.len() == t_len, Dimension, "covariates have {} snapshots, panel has {t_len} rows", z.len());
    }
    Ok((n, t_len))
}

fn lag_rows(y: &Matrix, t: usize, p: usize) -> Vec<Vec<f64>> {
    (1..=p).map(|l| y.row(t - l).to_vec()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPanelSpec {
    pub recipe: DesignRecipe,
    pub sigma2: f64,
    /// `p x N` starting rows; zero when absent.
    #[serde(default)]
    pub y0: Option<Matrix>,
    #[serde(default)]
    pub covariates: Option<Vec<Matrix>>,
    /// Computes `max_t sum_l ||B_(t,l)||_op`. Costly for large `N`.
    pub check_stability: bool,
}

impl GaussianPanelSpec {
    pub fn new(recipe: DesignRecipe, sigma2: f64) -> Self {
        Self { recipe, sigma2, y0: None, covariates: None, check_stability: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPanel {
    /// `T x N`; the first `p` rows are the starting values.
    pub y: Matrix,
    /// Realized innovations, zero on the starting rows.
    pub innovations: Matrix,
    pub max_spillover_norm: Option<f64>,
    /// Set when the spillover norm exceeds one somewhere.
    pub unstable: bool,
}

/// `Y_t = X_t theta_t + eps_t` with `theta_t` the row `t` of `paths`.
pub fn gen_gaussian_panel(networks: &NetworkSeq, paths: &Matrix, spec: &GaussianPanelSpec, seed: u64) -> Result<GaussianPanel> {
    let (n, t_len) = check_panel_inputs(networks, paths, &spec.recipe, spec.y0.as_ref(), spec.covariates.as_deref())?;
    ensure!(spec.sigma2.is_finite() && spec.sigma2 >= 0.0, InvalidInput, "sigma2 {} must be nonnegative", spec.sigma2);
    let p = spec.recipe.lag_order;
    let sd = libm::sqrt(spec.sigma2);
    let mut y = Matrix::zeros(t_len, n);
    if let Some(y0) = &spec.y0 {
        y.set_block(0, 0, y0);
    }
    let mut innovations = Matrix::zeros(t_len, n);
    let mut r = rng::stream(seed, "gaussian-panel", 0);
    let z = spec.covariates.as_deref();
    let mut max_norm: Option<f64> = None;
    for t in p..t_len {
        let w = networks.at(t);
        let theta = paths.row(t);
        let zt = if spec.recipe.covariate_count > 0 { covariates_at(z, t) } else { None };
        let x = build_design(w, &lag_rows(&y, t, p), zt, &spec.recipe)?;
        let mean = x.matrix().mul_vec(theta);
        for i in 0..n {
            let e: f64 = StandardNormal.sample(&mut r);
            innovations[(t, i)] = sd * e;
            y[(t, i)] = mean[i] + sd * e;
        }
        if spec.check_stability {
            let norm = lag_operators(theta, w, &spec.recipe)
                .iter()
                .map(|b| operator_norm(b, STABILITY_TOL, STABILITY_MAX_ITER))
                .sum::<Result<f64>>()?;
            max_norm = Some(max_norm.map_or(norm, |m| m.max(norm)));
        }
    }
    ensure!(y.is_finite(), InvalidInput, "generated panel overflowed; reduce the coefficients");
    Ok(GaussianPanel { y, innovations, unstable: max_norm.is_some_and(|m| m > 1.0), max_spillover_norm: max_norm })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonPanelSpec {
    pub recipe: DesignRecipe,
    #[serde(default)]
    pub y0: Option<Matrix>,
    #[serde(default)]
    pub covariates: Option<Vec<Matrix>>,
    pub eta_cap: f64,
}

impl PoissonPanelSpec {
    pub fn new(recipe: DesignRecipe) -> Self {
        Self { recipe, y0: None, covariates: None, eta_cap: DEFAULT_ETA_CAP }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonPanel {
    /// `T x N` counts; the first `p` rows are the starting values.
    pub y: Matrix,
    /// Linear predictors, zero on the starting rows.
    pub eta: Matrix,
}

/// Counts `y_(t,i) ~ Poisson(exp(eta_(t,i)))` with `eta_t = X_t theta_t`
/// built from lagged counts.
pub fn gen_poisson_panel(networks: &NetworkSeq, paths: &Matrix, spec: &PoissonPanelSpec, seed: u64) -> Result<PoissonPanel> {
    let (n, t_len) = check_panel_inputs(networks, paths, &spec.recipe, spec.y0.as_ref(), spec.covariates.as_deref())?;
    ensure!(spec.eta_cap.is_finite(), InvalidInput, "eta cap must be finite");
    let p = spec.recipe.lag_order;
    let mut y = Matrix::zeros(t_len, n);
    if let Some(y0) = &spec.y0 {
        crate::poissonmodel::check_counts(y0)?;
        y.set_block(0, 0, y0);
    }
    let mut eta = Matrix::zeros(t_len, n);
    let mut r = rng::stream(seed, "poisson-panel", 0);
    let z = spec.covariates.as_deref();
    for t in p..t_len {
        let zt = if spec.recipe.covariate_count > 0 { covariates_at(z, t) } else { None };
        let x = build_design(networks.at(t), &lag_rows(&y, t, p), zt, &spec.recipe)?;
        let e = x.matrix().mul_vec(paths.row(t));
        for i in 0..n {
            if !(e[i] <= spec.eta_cap) {
                return Err(Error::GenerationCap { eta: e[i], cap: spec.eta_cap });
            }
            eta[(t, i)] = e[i];
            let dist = Poisson::new(libm::exp(e[i]))
                .map_err(|err| Error::InvalidInput(format!("Poisson rate at row {t}, node {i}: {err}")))?;
            y[(t, i)] = dist.sample(&mut r);
        }
    }
    Ok(PoissonPanel { y, eta })
}

/// Drops the first `n` rows.
pub fn burn_in(m: &Matrix, n: usize) -> Result<Matrix> {
    ensure!(n < m.rows(), InvalidInput, "burn-in {n} leaves no rows of {}", m.rows());
    Ok(m.block(n, 0, m.rows() - n, m.cols()))
}

// ---------------------------------------------------------- dynamic edges

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeFeatures {
    /// `x_ij = (1)`.
    Intercept,
    /// `x_(ij,t) = (1, z_1, ..., z_extra)` with fresh standard normals per
    /// pair and time.
    InterceptNormal { extra: usize },
}

impl EdgeFeatures {
    pub fn dim(&self) -> usize {
        match self {
            EdgeFeatures::Intercept => 1,
            EdgeFeatures::InterceptNormal { extra } => 1 + extra,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePathSpec {
    pub eta0: Vec<f64>,
    pub s: Matrix,
    pub features: EdgeFeatures,
    pub directed: bool,
}

impl EdgePathSpec {
    pub fn validate(&self) -> Result<()> {
        let p = self.eta0.len();
        ensure!(p == self.features.dim(), Dimension, "eta0 has length {p}, features have dimension {}", self.features.dim());
        ensure!(self.s.rows() == p && self.s.cols() == p, Dimension, "S is {}x{}, expected {p}x{p}", self.s.rows(), self.s.cols());
        crate::linalg::check_psd(&self.s, 1e-10)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicEdges {
    pub adjacency: Vec<Adjacency>,
    /// `T x p` edge-parameter path.
    pub eta: Matrix,
}

/// `eta_t = eta_(t-1) + N(0, S)`, `a_(ij,t) ~ Bernoulli(logistic(x_(ij,t)' eta_t))`.
pub fn gen_dynamic_edges(spec: &EdgePathSpec, t_len: usize, n: usize, seed: u64) -> Result<DynamicEdges> {
    spec.validate()?;
    ensure!(t_len > 0 && n >= 2, InvalidInput, "need T >= 1 and N >= 2, got T = {t_len}, N = {n}");
    let p = spec.eta0.len();
    let factor = psd_factor(&spec.s)?;
    let mut sr = rng::stream(seed, "edge-state", 0);
    let mut er = rng::stream(seed, "edge-draws", 0);
    let mut eta = Matrix::zeros(t_len, p);
    let mut adjacency = Vec::with_capacity(t_len);
    let mut cur = spec.eta0.clone();
    let mut x = vec![1.0; p];
    for t in 0..t_len {
        if t > 0 {
            cur = rng::correlated_normal(&mut sr, &cur, &factor);
        }
        eta.row_mut(t).copy_from_slice(&cur);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            let start = if spec.directed { 0 } else { i + 1 };
            for j in start..n {
                if i == j {
                    continue;
                }
                for v in x.iter_mut().skip(1) {
                    *v = StandardNormal.sample(&mut er);
                }
                let lin: f64 = x.iter().zip(&cur).map(|(a, b)| a * b).sum();
                if er.random::<f64>() < logistic(lin) {
                    m[(i, j)] = 1.0;
                    if !spec.directed {
                        m[(j, i)] = 1.0;
                    }
                }
            }
        }
        adjacency.push(Adjacency::new(m, spec.directed, Some(t as i64))?);
    }
    Ok(DynamicEdges { adjacency, eta })
}

/// Row-normalized snapshots of a dynamic edge path.
pub fn dynamic_networks(edges: &DynamicEdges) -> Result<NetworkSeq> {
    let ws = edges
        .adjacency
        .iter()
        .map(|a| WeightMatrix::new(row_normalize(a).matrix().clone(), Provenance::Simulated))
        .collect::<Result<Vec<_>>>()?;
    Ok(NetworkSeq::Dynamic(ws))
}
