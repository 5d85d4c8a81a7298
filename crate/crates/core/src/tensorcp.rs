//! Rank-`R` CP factor state for TVP-VAR(`p`) coefficient tensors.
//!
//! The lag tensor is `sum_r b1_r (x) b2_r (x) b3_r` with `b1_r, b2_r` of
//! length `N` and `b3_r` of length `p`. The conditional mean is trilinear in
//! the three factor blocks, so holding two blocks fixed leaves a linear
//! Gaussian observation in the third. The filter here exploits that by
//! sweeping conditional Kalman updates over the blocks. It approximates the
//! joint posterior with a block-diagonal covariance.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Result};
use crate::lgss::{update, Belief, ObsBlock, ObsLabel};
use crate::linalg::{dot, norm2, Matrix};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Row,
    Column,
    Lag,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Row, Mode::Column, Mode::Lag];

    fn index(self) -> usize {
        match self {
            Mode::Row => 0,
            Mode::Column => 1,
            Mode::Lag => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpFactors {
    n: usize,
    p: usize,
    mode1: Vec<Vec<f64>>,
    mode2: Vec<Vec<f64>>,
    mode3: Vec<Vec<f64>>,
}

impl CpFactors {
    pub fn new(mode1: Vec<Vec<f64>>, mode2: Vec<Vec<f64>>, mode3: Vec<Vec<f64>>, n: usize, p: usize) -> Result<Self> {
        let r = mode1.len();
        ensure!(mode2.len() == r && mode3.len() == r, Dimension,
            "rank mismatch across modes: {}, {}, {}", r, mode2.len(), mode3.len());
        ensure!(p >= 1, InvalidInput, "lag order must be at least 1");
        ensure!(mode1.iter().chain(&mode2).all(|v| v.len() == n), Dimension, "mode-1 and mode-2 vectors must have length {n}");
        ensure!(mode3.iter().all(|v| v.len() == p), Dimension, "mode-3 vectors must have length {p}");
        Ok(Self { n, p, mode1, mode2, mode3 })
    }

    pub fn zeros(rank: usize, n: usize, p: usize) -> Self {
        Self { n, p, mode1: vec![vec![0.0; n]; rank], mode2: vec![vec![0.0; n]; rank], mode3: vec![vec![0.0; p]; rank] }
    }

    pub fn rank(&self) -> usize {
        self.mode1.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn lag_order(&self) -> usize {
        self.p
    }

    pub fn mode1(&self) -> &[Vec<f64>] {
        &self.mode1
    }

    pub fn mode2(&self) -> &[Vec<f64>] {
        &self.mode2
    }

    pub fn mode3(&self) -> &[Vec<f64>] {
        &self.mode3
    }

    /// `R (2N + p)`.
    pub fn state_dim(&self) -> usize {
        state_dim(self.rank(), self.n, self.p)
    }

    fn vectors(&self, mode: Mode) -> &[Vec<f64>] {
        match mode {
            Mode::Row => &self.mode1,
            Mode::Column => &self.mode2,
            Mode::Lag => &self.mode3,
        }
    }

    fn vectors_mut(&mut self, mode: Mode) -> &mut Vec<Vec<f64>> {
        match mode {
            Mode::Row => &mut self.mode1,
            Mode::Column => &mut self.mode2,
            Mode::Lag => &mut self.mode3,
        }
    }

    /// Components of one mode concatenated.
    pub fn block(&self, mode: Mode) -> Vec<f64> {
        self.vectors(mode).concat()
    }

    pub fn set_block(&mut self, mode: Mode, v: &[f64]) -> Result<()> {
        let len = if mode == Mode::Lag { self.p } else { self.n };
        ensure!(v.len() == len * self.rank(), Dimension, "block has length {}, expected {}", v.len(), len * self.rank());
        for (dst, src) in self.vectors_mut(mode).iter_mut().zip(v.chunks(len.max(1))) {
            dst.copy_from_slice(src);
        }
        Ok(())
    }

    /// All mode-1 components, then mode-2, then mode-3.
    pub fn stack(&self) -> Vec<f64> {
        let mut out = self.block(Mode::Row);
        out.extend(self.block(Mode::Column));
        out.extend(self.block(Mode::Lag));
        out
    }

    pub fn unstack(xi: &[f64], rank: usize, n: usize, p: usize) -> Result<Self> {
        ensure!(xi.len() == state_dim(rank, n, p), Dimension,
            "stacked state has length {}, expected {}", xi.len(), state_dim(rank, n, p));
        let mut f = Self::zeros(rank, n, p);
        let (a, rest) = xi.split_at(rank * n);
        let (b, c) = rest.split_at(rank * n);
        f.set_block(Mode::Row, a)?;
        f.set_block(Mode::Column, b)?;
        f.set_block(Mode::Lag, c)?;
        Ok(f)
    }
}

pub fn state_dim(rank: usize, n: usize, p: usize) -> usize {
    rank * (2 * n + p)
}

/// `Y_(t-1), ..., Y_(t-p)`, most recent first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LagWindow {
    lags: Vec<Vec<f64>>,
}

impl LagWindow {
    pub fn new(lags: Vec<Vec<f64>>) -> Result<Self> {
        ensure!(!lags.is_empty(), InvalidInput, "lag window is empty");
        let n = lags[0].len();
        ensure!(lags.iter().all(|l| l.len() == n), Dimension, "lag vectors differ in length");
        Ok(Self { lags })
    }

    /// Rows `t-1, ..., t-p` of a `T x N` panel.
    pub fn from_panel(panel: &Matrix, t: usize, p: usize) -> Result<Self> {
        ensure!(p >= 1 && t >= p && t <= panel.rows(), InvalidInput, "row {t} lacks {p} lags");
        Self::new((1..=p).map(|l| panel.row(t - l).to_vec()).collect())
    }

    pub fn lag_order(&self) -> usize {
        self.lags.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.lags[0].len()
    }

    pub fn lag(&self, l: usize) -> &[f64] {
        &self.lags[l - 1]
    }
}

fn check_window(f: &CpFactors, lags: &LagWindow) -> Result<()> {
    ensure!(lags.lag_order() == f.p && lags.n_nodes() == f.n, Dimension,
        "lag window is {}x{}, factors expect {}x{}", lags.lag_order(), lags.n_nodes(), f.p, f.n);
    Ok(())
}

/// `s_r = sum_l b3_r(l) Y_(t-l)`.
fn lag_weighted(f: &CpFactors, lags: &LagWindow) -> Vec<Vec<f64>> {
    f.mode3
        .iter()
        .map(|b3| {
            let mut s = vec![0.0; f.n];
            for (l, &w) in b3.iter().enumerate() {
                for (si, yi) in s.iter_mut().zip(lags.lag(l + 1)) {
                    *si += w * yi;
                }
            }
            s
        })
        .collect()
}

/// Lag slices `B_l = sum_r b3_r(l) b1_r b2_r^T`.
pub fn cp_reconstruct(f: &CpFactors) -> Vec<Matrix> {
    (0..f.p)
        .map(|l| {
            let mut b = Matrix::zeros(f.n, f.n);
            for r in 0..f.rank() {
                let w = f.mode3[r][l];
                for i in 0..f.n {
                    let a = w * f.mode1[r][i];
                    for (bij, &c) in b.row_mut(i).iter_mut().zip(&f.mode2[r]) {
                        *bij += a * c;
                    }
                }
            }
            b
        })
        .collect()
}

/// `g = sum_r b1_r (b2_r' s_r)` without forming the slices.
pub fn cp_mean(f: &CpFactors, lags: &LagWindow) -> Result<Vec<f64>> {
    check_window(f, lags)?;
    let mut g = vec![0.0; f.n];
    for (r, s) in lag_weighted(f, lags).iter().enumerate() {
        let alpha = dot(&f.mode2[r], s);
        for (gi, b) in g.iter_mut().zip(&f.mode1[r]) {
            *gi += alpha * b;
        }
    }
    Ok(g)
}

/// Design `H` with `H * block(mode) = cp_mean` when the other two modes
/// are held at `f`.
pub fn conditional_design(f: &CpFactors, mode: Mode, lags: &LagWindow) -> Result<Matrix> {
    check_window(f, lags)?;
    let (n, p, rank) = (f.n, f.p, f.rank());
    let s = lag_weighted(f, lags);
    Ok(match mode {
        Mode::Row => {
            let mut h = Matrix::zeros(n, rank * n);
            for r in 0..rank {
                let alpha = dot(&f.mode2[r], &s[r]);
                for i in 0..n {
                    h[(i, r * n + i)] = alpha;
                }
            }
            h
        }
        Mode::Column => {
            let mut h = Matrix::zeros(n, rank * n);
            for r in 0..rank {
                for i in 0..n {
                    let b = f.mode1[r][i];
                    for j in 0..n {
                        h[(i, r * n + j)] = b * s[r][j];
                    }
                }
            }
            h
        }
        Mode::Lag => {
            let mut h = Matrix::zeros(n, rank * p);
            for r in 0..rank {
                let m: Vec<f64> = (1..=p).map(|l| dot(&f.mode2[r], lags.lag(l))).collect();
                for i in 0..n {
                    let b = f.mode1[r][i];
                    for l in 0..p {
                        h[(i, r * p + l)] = b * m[l];
                    }
                }
            }
            h
        }
    })
}

/// Balances `||b1_r|| = ||b2_r||`, makes the first nonzero entry of `b1_r`
/// positive and sorts components by descending norm product.
pub fn sign_fix(f: &CpFactors) -> CpFactors {
    let mut comps: Vec<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = (0..f.rank())
        .map(|r| {
            let (mut b1, mut b2) = (f.mode1[r].clone(), f.mode2[r].clone());
            let (n1, n2) = (norm2(&b1), norm2(&b2));
            if n1 > 0.0 && n2 > 0.0 && n1 != n2 {
                let a = libm::sqrt(n2 / n1);
                b1.iter_mut().for_each(|x| *x *= a);
                b2.iter_mut().for_each(|x| *x /= a);
            }
            if b1.iter().find(|x| **x != 0.0).is_some_and(|x| *x < 0.0) {
                b1.iter_mut().for_each(|x| *x = -*x);
                b2.iter_mut().for_each(|x| *x = -*x);
            }
            let weight = norm2(&b1) * norm2(&b2) * norm2(&f.mode3[r]);
            (weight, b1, b2, f.mode3[r].clone())
        })
        .collect();
    comps.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut out = CpFactors::zeros(0, f.n, f.p);
    for (_, b1, b2, b3) in comps {
        out.mode1.push(b1);
        out.mode2.push(b2);
        out.mode3.push(b3);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpFilterSpec {
    pub rank: usize,
    pub lag_order: usize,
    pub obs_var: f64,
    /// Per-mode random-walk variance (times identity).
    pub state_var: [f64; 3],
    /// Per-mode initial variance (times identity).
    pub init_var: [f64; 3],
    pub sweeps: usize,
    pub schedule: Vec<Mode>,
    /// Spread of the seeded mode-1 and mode-2 starting means.
    pub init_scale: f64,
    pub seed: u64,
}

impl CpFilterSpec {
    pub fn new(rank: usize, lag_order: usize, obs_var: f64) -> Self {
        Self {
            rank,
            lag_order,
            obs_var,
            state_var: [1e-4; 3],
            init_var: [1.0; 3],
            sweeps: 2,
            schedule: Mode::ALL.to_vec(),
            init_scale: 0.1,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.rank >= 1, InvalidInput, "CP rank must be at least 1");
        ensure!(self.lag_order >= 1, InvalidInput, "lag order must be at least 1");
        ensure!(self.obs_var > 0.0 && self.obs_var.is_finite(), InvalidInput, "observation variance must be positive");
        ensure!(self.state_var.iter().chain(&self.init_var).all(|v| *v >= 0.0 && v.is_finite()), InvalidInput,
            "state and initial variances must be nonnegative");
        ensure!(self.sweeps >= 1 && !self.schedule.is_empty(), InvalidInput, "need at least one sweep over one mode");
        ensure!(self.init_scale >= 0.0, InvalidInput, "init scale must be nonnegative");
        Ok(())
    }

    /// Starting means: seeded small values for modes 1 and 2, `e_1 / sqrt(p)`
    /// for mode 3. All-zero starts are a fixed point of the sweeps.
    pub fn initial_factors(&self, n: usize) -> CpFactors {
        let mut r = rng::stream(self.seed, "cp-init", 0);
        let mut f = CpFactors::zeros(self.rank, n, self.lag_order);
        for k in 0..self.rank {
            f.mode1[k] = rng::standard_normals(&mut r, n).iter().map(|z| self.init_scale * z).collect();
            f.mode2[k] = rng::standard_normals(&mut r, n).iter().map(|z| self.init_scale * z).collect();
            f.mode3[k][0] = 1.0 / libm::sqrt(self.lag_order as f64);
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpFilterRun {
    /// Filtered beliefs per mode block, one per panel row from `p` on.
    pub modes: [Vec<Belief>; 3],
    /// One-step predictive means at the predicted factor means (`rows - p` rows).
    pub predictions: Matrix,
    pub loglik: f64,
    pub per_step_loglik: Vec<f64>,
    /// Conditional updates skipped because the design was all zero.
    pub skipped_updates: usize,
}

impl CpFilterRun {
    pub fn factors_at(&self, i: usize, n: usize, p: usize) -> CpFactors {
        let mut f = CpFactors::zeros(self.modes[0][i].dim() / n.max(1), n, p);
        for mode in Mode::ALL {
            f.set_block(mode, &self.modes[mode.index()][i].mean).expect("block sizes are fixed by the run");
        }
        f
    }

    pub fn last_factors(&self, n: usize, p: usize) -> CpFactors {
        self.factors_at(self.modes[0].len() - 1, n, p)
    }
}

fn with_block(f: &CpFactors, mode: Mode, v: &[f64]) -> CpFactors {
    let mut g = f.clone();
    g.set_block(mode, v).expect("block length checked by caller");
    g
}

/// Alternating conditional filter over rows `p..T` of a `T x N` panel.
///
/// Each step predicts the three blocks as independent random walks, then
/// for every sweep and mode recomputes that block's posterior from its
/// predicted belief, conditioning on the other blocks' current means.
/// The recorded likelihood is that of the first conditional update.
pub fn cp_filter_alternating(panel: &Matrix, spec: &CpFilterSpec) -> Result<CpFilterRun> {
    spec.validate()?;
    let (t_len, n) = (panel.rows(), panel.cols());
    let p = spec.lag_order;
    ensure!(t_len > p, InvalidInput, "panel has {t_len} rows, needs more than p = {p}");
    ensure!(panel.is_finite(), InvalidInput, "panel has non-finite values");
    let init = spec.initial_factors(n);
    let r_mat = Matrix::identity(n).scale(spec.obs_var);
    let mut beliefs: Vec<Belief> = Mode::ALL
        .iter()
        .map(|&m| {
            let mean = init.block(m);
            let k = mean.len();
            Belief::new(mean, Matrix::identity(k).scale(spec.init_var[m.index()]), p as i64 - 1)
        })
        .collect::<Result<_>>()?;
    let mut modes: [Vec<Belief>; 3] = [Vec::new(), Vec::new(), Vec::new()];
    let mut predictions = Matrix::zeros(t_len - p, n);
    let mut per_step = Vec::with_capacity(t_len - p);
    let mut skipped = 0;
    for t in p..t_len {
        let lags = LagWindow::from_panel(panel, t, p)?;
        let y = panel.row(t).to_vec();
        let predicted: Vec<Belief> = beliefs
            .iter()
            .zip(Mode::ALL)
            .map(|(b, m)| {
                let mut cov = b.cov.clone();
                cov.add_diag(spec.state_var[m.index()]);
                Belief { mean: b.mean.clone(), cov, time_index: b.time_index + 1 }
            })
            .collect();
        let mut current = init.clone();
        for m in Mode::ALL {
            current.set_block(m, &predicted[m.index()].mean)?;
        }
        predictions.row_mut(t - p).copy_from_slice(&cp_mean(&current, &lags)?);
        let mut posts = predicted.clone();
        let mut step_ll = None;
        for _ in 0..spec.sweeps {
            for &m in &spec.schedule {
                let h = conditional_design(&current, m, &lags)?;
                if h.max_abs() == 0.0 {
                    skipped += 1;
                    continue;
                }
                let blk = ObsBlock::new(h, r_mat.clone(), y.clone(), ObsLabel::Node)?;
                let (post, ll) = update(&predicted[m.index()], &blk)?;
                step_ll.get_or_insert(ll);
                current = with_block(&current, m, &post.mean);
                posts[m.index()] = post;
            }
        }
        let ll = match step_ll {
            Some(ll) => ll,
            None => {
                // No informative design: score y against the plug-in mean.
                let g = cp_mean(&current, &lags)?;
                y.iter().zip(&g).map(|(a, b)| crate::stats::normal_log_pdf(*a, *b, spec.obs_var)).sum()
            }
        };
        per_step.push(ll);
        for (i, b) in posts.into_iter().enumerate() {
            modes[i].push(b.clone());
            beliefs[i] = b;
        }
    }
    Ok(CpFilterRun { modes, predictions, loglik: per_step.iter().sum(), per_step_loglik: per_step, skipped_updates: skipped })
}
