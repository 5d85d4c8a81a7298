//! Linear-Gaussian state-space engine.
//!
//! State `theta_t = F theta_{t-1} + w_t`, `w_t ~ N(0, Q_t)`, observed through
//! one or more blocks `y = H theta + e`, `e ~ N(0, R)`. Provides prediction,
//! block updates, the innovations log-likelihood, RTS smoothing and the
//! latent-threshold rule for `Q_t`.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::{check_psd, dot, psd_factor, Cholesky, Matrix};
use crate::stats::LN_2PI;

/// Eigenvalue floor for covariances, relative to their scale.
pub const PSD_TOL: f64 = 1e-10;
/// Innovation covariances with a larger condition estimate are rejected.
pub const MAX_INNOVATION_CONDITION: f64 = 1e14;
pub const DEFAULT_PRIOR_SCALE: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub time_index: i64,
}

impl Belief {
    pub fn new(mean: Vec<f64>, mut cov: Matrix, time_index: i64) -> Result<Self> {
        ensure!(cov.is_square() && cov.rows() == mean.len(), Dimension,
            "belief mean has length {}, covariance is {}x{}", mean.len(), cov.rows(), cov.cols());
        ensure!(mean.iter().all(|v| v.is_finite()) && cov.is_finite(), InvalidInput, "belief has non-finite entries");
        cov.symmetrize();
        check_cov(&cov)?;
        Ok(Self { mean, cov, time_index })
    }

    /// `N(0, scale * I)`.
    pub fn diffuse(k: usize, scale: f64) -> Self {
        Self { mean: vec![0.0; k], cov: Matrix::identity(k).scale(scale), time_index: 0 }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn variances(&self) -> Vec<f64> {
        self.cov.diag()
    }
}

fn check_cov(p: &Matrix) -> Result<()> {
    let scale = p.diag().iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    check_psd(p, PSD_TOL * scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseMode {
    Constant(Matrix),
    Threshold { q0: Vec<f64>, q1: Vec<f64>, d: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateNoiseSpec {
    pub mode: NoiseMode,
    pub transition: Matrix,
}

impl StateNoiseSpec {
    /// Random walk with constant `Q`.
    pub fn random_walk(q: Matrix) -> Result<Self> {
        let k = q.rows();
        let spec = Self { mode: NoiseMode::Constant(q), transition: Matrix::identity(k) };
        spec.validate()?;
        Ok(spec)
    }

    /// Random walk with diagonal threshold-switched variances.
    pub fn threshold(q0: Vec<f64>, q1: Vec<f64>, d: Vec<f64>) -> Result<Self> {
        let k = q0.len();
        let spec = Self { mode: NoiseMode::Threshold { q0, q1, d }, transition: Matrix::identity(k) };
        spec.validate()?;
        Ok(spec)
    }

    pub fn dim(&self) -> usize {
        self.transition.rows()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.transition.rows();
        ensure!(self.transition.is_square(), Dimension, "transition must be square");
        match &self.mode {
            NoiseMode::Constant(q) => {
                ensure!(q.rows() == k && q.cols() == k, Dimension, "Q is {}x{}, state dimension {k}", q.rows(), q.cols());
                ensure!(q.max_abs_diff(&q.transpose()) <= 1e-12 * q.max_abs().max(1.0), InvalidInput, "Q is not symmetric");
                check_cov(q)?;
            }
            NoiseMode::Threshold { q0, q1, d } => {
                ensure!(q0.len() == k && q1.len() == k && d.len() == k, Dimension,
                    "threshold vectors must have length {k}");
                for j in 0..k {
                    ensure!(q0[j] > 0.0 && q1[j] > 0.0 && d[j] > 0.0, InvalidInput,
                        "threshold parameters for coordinate {j} must be positive");
                    ensure!(q0[j] < q1[j], InvalidInput, "q0[{j}] = {} must be below q1[{j}] = {}", q0[j], q1[j]);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObsLabel {
    Node,
    Edge,
    Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsBlock {
    pub h: Matrix,
    pub r: Matrix,
    pub y: Vec<f64>,
    pub label: ObsLabel,
}

impl ObsBlock {
    pub fn new(h: Matrix, mut r: Matrix, y: Vec<f64>, label: ObsLabel) -> Result<Self> {
        let m = y.len();
        ensure!(h.rows() == m, Dimension, "{label:?} block: H has {} rows, y has length {m}", h.rows());
        ensure!(r.rows() == m && r.cols() == m, Dimension, "{label:?} block: R is {}x{}, expected {m}x{m}", r.rows(), r.cols());
        ensure!(h.is_finite() && r.is_finite() && y.iter().all(|v| v.is_finite()), InvalidInput,
            "{label:?} block has non-finite entries");
        r.symmetrize();
        if r.is_diagonal() {
            ensure!(r.diag().iter().all(|&v| v > 0.0), NotPositiveDefinite, "{label:?} block R");
        } else if m > 0 {
            r.cholesky().map_err(|_| Error::NotPositiveDefinite(format!("{label:?} block R")))?;
        }
        Ok(Self { h, r, y, label })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }
}

/// `m <- F m`, `P <- F P F^T + Q`.
pub fn predict(b: &Belief, spec: &StateNoiseSpec, q: &Matrix) -> Result<Belief> {
    let k = b.dim();
    ensure!(spec.dim() == k && q.rows() == k && q.cols() == k, Dimension,
        "predict: state dimension {k}, transition {}x{}, Q {}x{}", spec.dim(), spec.dim(), q.rows(), q.cols());
    let f = &spec.transition;
    let identity = is_identity(f);
    let mean = if identity { b.mean.clone() } else { f.mul_vec(&b.mean) };
    let mut cov = if identity { b.cov.add(q) } else { f.mul(&b.cov).mul_t(f).add(q) };
    cov.symmetrize();
    Ok(Belief { mean, cov, time_index: b.time_index + 1 })
}

fn is_identity(f: &Matrix) -> bool {
    (0..f.rows()).all(|i| f.row(i).iter().enumerate().all(|(j, &v)| v == if i == j { 1.0 } else { 0.0 }))
}

/// Conditions `b` on one observation block; returns the posterior and
/// `log N(y - H m; 0, S)`.
pub fn update(b: &Belief, obs: &ObsBlock) -> Result<(Belief, f64)> {
    let k = b.dim();
    ensure!(obs.h.cols() == k, Dimension, "{:?} block: H has {} columns, state has {k}", obs.label, obs.h.cols());
    if obs.is_empty() {
        return Ok((b.clone(), 0.0));
    }
    let out = if obs.r.is_diagonal() && obs.len() > k {
        update_information(b, obs)?
    } else {
        update_gain(b, obs)?
    };
    check_cov(&out.0.cov)?;
    Ok(out)
}

fn innovation(b: &Belief, obs: &ObsBlock) -> Vec<f64> {
    let hm = obs.h.mul_vec(&b.mean);
    obs.y.iter().zip(hm).map(|(y, p)| y - p).collect()
}

/// Gain form with Joseph-stabilized covariance.
fn update_gain(b: &Belief, obs: &ObsBlock) -> Result<(Belief, f64)> {
    let m = obs.len();
    let k = b.dim();
    let v = innovation(b, obs);
    let ph = b.cov.mul_t(&obs.h);
    let mut s = obs.h.mul(&ph).add(&obs.r);
    s.symmetrize();
    let chol = match Cholesky::new(&s) {
        Ok(c) => c,
        Err(_) => return Err(Error::SingularInnovation { condition: f64::INFINITY }),
    };
    let condition = chol.condition_estimate();
    if !(condition <= MAX_INNOVATION_CONDITION) {
        return Err(Error::SingularInnovation { condition });
    }
    // K = P H^T S^{-1}, solved row by row via S K^T = H P.
    let gain = chol.solve_mat(&ph.transpose()).transpose();
    let sinv_v = chol.solve_vec(&v);
    let mut mean = b.mean.clone();
    for (mi, gi) in mean.iter_mut().zip(0..k) {
        *mi += dot(gain.row(gi), &v);
    }
    let mut i_kh = gain.mul(&obs.h).scale(-1.0);
    i_kh.add_diag(1.0);
    let mut cov = i_kh.mul(&b.cov).mul_t(&i_kh).add(&gain.mul(&obs.r).mul_t(&gain));
    cov.symmetrize();
    let ll = -0.5 * (m as f64 * LN_2PI + chol.log_det() + dot(&v, &sinv_v));
    Ok((Belief { mean, cov, time_index: b.time_index }, ll))
}

/// Factored information form for diagonal `R` and tall `H`.
///
/// With `P = L L^T` and `G = H^T R^{-1} H`, the posterior is
/// `P' = L (I + L^T G L)^{-1} L^T`, so only `K x K` systems are solved and
/// `P` may be singular. The log-likelihood uses the determinant lemma.
fn update_information(b: &Belief, obs: &ObsBlock) -> Result<(Belief, f64)> {
    let m = obs.len();
    let k = b.dim();
    let rinv: Vec<f64> = obs.r.diag().iter().map(|r| 1.0 / r).collect();
    let v = innovation(b, obs);
    let mut hw = obs.h.clone();
    for i in 0..m {
        hw.row_mut(i).iter_mut().for_each(|x| *x *= rinv[i]);
    }
    let g = obs.h.t_mul(&hw);
    let l = psd_factor(&b.cov)?;
    let mut core = l.t_mul(&g).mul(&l);
    core.add_diag(1.0);
    core.symmetrize();
    let chol = Cholesky::new(&core).map_err(|_| Error::SingularInnovation { condition: f64::INFINITY })?;
    let rinv_v: Vec<f64> = v.iter().zip(&rinv).map(|(a, r)| a * r).collect();
    let bvec = obs.h.t_mul_vec(&rinv_v);
    let lt_b = l.t_mul_vec(&bvec);
    let z = chol.solve_vec(&lt_b);
    let step = l.mul_vec(&z);
    let mean: Vec<f64> = b.mean.iter().zip(&step).map(|(a, s)| a + s).collect();
    let mut cov = l.mul(&chol.solve_mat(&l.transpose()));
    cov.symmetrize();
    debug_assert_eq!(cov.rows(), k);
    let log_det_r: f64 = obs.r.diag().iter().map(|r| libm::log(*r)).sum();
    let quad = dot(&v, &rinv_v) - dot(&lt_b, &z);
    let ll = -0.5 * (m as f64 * LN_2PI + log_det_r + chol.log_det() + quad);
    Ok((Belief { mean, cov, time_index: b.time_index }, ll))
}

/// Edge block first, then the node block built after seeing the edges.
pub fn two_block_update(b: &Belief, edge: &ObsBlock, node: &ObsBlock) -> Result<(Belief, f64, f64)> {
    let (mid, ll_edge) = update(b, edge)?;
    let (post, ll_node) = update(&mid, node)?;
    Ok((post, ll_edge, ll_node))
}

/// Stacks blocks into one with block-diagonal noise.
pub fn stack_blocks(blocks: &[ObsBlock], label: ObsLabel) -> Result<ObsBlock> {
    ensure!(!blocks.is_empty(), InvalidInput, "no blocks to stack");
    let k = blocks[0].h.cols();
    let mut h = Matrix::zeros(0, k);
    let mut r = Matrix::zeros(0, 0);
    let mut y = Vec::new();
    for blk in blocks {
        h = Matrix::vstack(&h, &blk.h)?;
        r = Matrix::block_diag(&r, &blk.r);
        y.extend_from_slice(&blk.y);
    }
    ObsBlock::new(h, r, y, label)
}

/// `Q_t = diag(q0 + s (q1 - q0))` with `s_j = |theta_prev_j - theta_prev2_j| > d_j`.
pub fn threshold_q(theta_prev: &[f64], theta_prev2: &[f64], spec: &StateNoiseSpec) -> Result<(Matrix, Vec<bool>)> {
    let NoiseMode::Threshold { q0, q1, d } = &spec.mode else {
        return Err(Error::InvalidInput(String::from("threshold_q needs a threshold-mode noise spec")));
    };
    let k = q0.len();
    ensure!(theta_prev.len() == k && theta_prev2.len() == k, Dimension,
        "threshold_q: state vectors must have length {k}");
    let s: Vec<bool> = (0..k).map(|j| (theta_prev[j] - theta_prev2[j]).abs() > d[j]).collect();
    let q: Vec<f64> = (0..k).map(|j| if s[j] { q1[j] } else { q0[j] }).collect();
    Ok((Matrix::from_diag(&q), s))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterRun {
    pub initial: Belief,
    pub filtered: Vec<Belief>,
    pub predicted: Vec<Belief>,
    pub loglik: f64,
    pub per_step_loglik: Vec<f64>,
    pub threshold_states: Option<Vec<Vec<bool>>>,
    /// `Q_t` used in the transition into step `t`.
    pub state_noise: Vec<Matrix>,
    pub transition: Matrix,
}

impl FilterRun {
    pub fn len(&self) -> usize {
        self.filtered.len()
    }

    pub fn is_empty(&self) -> bool {
        self.filtered.is_empty()
    }

    pub fn last(&self) -> &Belief {
        self.filtered.last().unwrap_or(&self.initial)
    }

    /// The run as it stood after its first `steps` updates. Filtering is
    /// causal, so this equals a fresh run on the shortened sample.
    pub fn truncated(&self, steps: usize) -> Result<FilterRun> {
        ensure!(steps <= self.len(), InvalidInput, "cannot truncate a run of {} steps to {steps}", self.len());
        Ok(FilterRun {
            initial: self.initial.clone(),
            filtered: self.filtered[..steps].to_vec(),
            predicted: self.predicted[..steps].to_vec(),
            loglik: self.per_step_loglik[..steps].iter().sum(),
            per_step_loglik: self.per_step_loglik[..steps].to_vec(),
            threshold_states: self.threshold_states.as_ref().map(|s| s[..steps].to_vec()),
            state_noise: self.state_noise[..steps].to_vec(),
            transition: self.transition.clone(),
        })
    }

    /// Filtered belief after `t` steps; `t = 0` is the initial law.
    pub fn belief_after(&self, t: usize) -> &Belief {
        if t == 0 {
            &self.initial
        } else {
            &self.filtered[t - 1]
        }
    }
}

/// Incremental filter that tracks the threshold plug-in means.
#[derive(Debug, Clone)]
pub struct Filter {
    spec: StateNoiseSpec,
    run: FilterRun,
}

impl Filter {
    pub fn new(initial: Belief, spec: StateNoiseSpec) -> Result<Self> {
        spec.validate()?;
        ensure!(spec.dim() == initial.dim(), Dimension,
            "noise spec has dimension {}, initial belief {}", spec.dim(), initial.dim());
        let threshold = matches!(spec.mode, NoiseMode::Threshold { .. });
        let run = FilterRun {
            initial,
            filtered: Vec::new(),
            predicted: Vec::new(),
            loglik: 0.0,
            per_step_loglik: Vec::new(),
            threshold_states: threshold.then(Vec::new),
            state_noise: Vec::new(),
            transition: spec.transition.clone(),
        };
        Ok(Self { spec, run })
    }

    pub fn spec(&self) -> &StateNoiseSpec {
        &self.spec
    }

    pub fn current(&self) -> &Belief {
        self.run.last()
    }

    /// `Q` for the next transition; threshold mode compares the two most
    /// recent filtered means (no switching before two steps exist).
    pub fn next_q(&self) -> Result<(Matrix, Option<Vec<bool>>)> {
        match &self.spec.mode {
            NoiseMode::Constant(q) => Ok((q.clone(), None)),
            NoiseMode::Threshold { .. } => {
                let t = self.run.len();
                let prev = &self.run.belief_after(t).mean;
                let prev2 = if t >= 1 { &self.run.belief_after(t - 1).mean } else { prev };
                let (q, s) = threshold_q(prev, prev2, &self.spec)?;
                Ok((q, Some(s)))
            }
        }
    }

    pub fn predict_next(&self) -> Result<(Belief, Matrix, Option<Vec<bool>>)> {
        let (q, s) = self.next_q()?;
        let pred = predict(self.current(), &self.spec, &q)?;
        Ok((pred, q, s))
    }

    /// Records a completed step computed by the caller.
    pub fn push(&mut self, predicted: Belief, filtered: Belief, q: Matrix, s: Option<Vec<bool>>, loglik: f64) {
        if let (Some(states), Some(s)) = (self.run.threshold_states.as_mut(), s) {
            states.push(s);
        }
        self.run.predicted.push(predicted);
        self.run.filtered.push(filtered);
        self.run.state_noise.push(q);
        self.run.per_step_loglik.push(loglik);
        self.run.loglik += loglik;
    }

    /// Predict, then condition sequentially on `blocks`.
    pub fn step(&mut self, blocks: &[ObsBlock]) -> Result<()> {
        let (pred, q, s) = self.predict_next()?;
        let mut post = pred.clone();
        let mut ll = 0.0;
        for blk in blocks {
            let (next, l) = update(&post, blk)?;
            post = next;
            ll += l;
        }
        self.push(pred, post, q, s, ll);
        Ok(())
    }

    pub fn run(&self) -> &FilterRun {
        &self.run
    }

    pub fn finish(self) -> FilterRun {
        self.run
    }
}

/// Filters `t_len` steps; `obs_at(t)` supplies the blocks for step `t`
/// (0-based), in processing order.
pub fn run_filter<F>(initial: Belief, spec: StateNoiseSpec, t_len: usize, mut obs_at: F) -> Result<FilterRun>
where
    F: FnMut(usize) -> Result<Vec<ObsBlock>>,
{
    let mut filter = Filter::new(initial, spec)?;
    for t in 0..t_len {
        let blocks = obs_at(t)?;
        filter.step(&blocks)?;
    }
    Ok(filter.finish())
}

/// Rauch-Tung-Striebel smoother using the transitions recorded in `run`.
pub fn rts_smooth(run: &FilterRun) -> Result<Vec<Belief>> {
    let t_len = run.len();
    if t_len == 0 {
        return Ok(Vec::new());
    }
    let f = &run.transition;
    let mut out = vec![run.filtered[t_len - 1].clone(); t_len];
    for t in (0..t_len - 1).rev() {
        let filt = &run.filtered[t];
        let pred = &run.predicted[t + 1];
        let chol = Cholesky::new(&pred.cov).map_err(|_| {
            Error::NotPositiveDefinite(format!("predicted covariance at step {} is singular", t + 1))
        })?;
        // J = P_t F^T P_{t+1|t}^{-1}, from P_{t+1|t} J^T = F P_t.
        let j = chol.solve_mat(&f.mul(&filt.cov)).transpose();
        let next = &out[t + 1];
        let dm: Vec<f64> = next.mean.iter().zip(&pred.mean).map(|(a, b)| a - b).collect();
        let mut mean = filt.mean.clone();
        for (i, mi) in mean.iter_mut().enumerate() {
            *mi += dot(j.row(i), &dm);
        }
        let mut cov = filt.cov.add(&j.mul(&next.cov.sub(&pred.cov)).mul_t(&j));
        cov.symmetrize();
        check_cov(&cov)?;
        out[t] = Belief { mean, cov, time_index: filt.time_index };
    }
    Ok(out)
}
