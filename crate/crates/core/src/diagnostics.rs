//! Diagnostics for network VAR(1) coefficient paths: stability, hop-by-hop
//! impulse responses, aggregation and community reductions, sensitivity
//! bounds and break detection.
//!
//! Coefficient paths are indexed by time. Horizon-`h` quantities anchored
//! at `t` use the coefficients at `t + 1, ..., t + h`.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::design::spillover_matrix;
use crate::error::{ensure, Error, Result};
use crate::graph::{
    operator_norm, quotient_operator, spectral_radius, InvariantVector, NetworkSeq, Partition, WeightMatrix,
    DEFAULT_MAX_ITER, DEFAULT_TOL,
};
use crate::linalg::{norm2, Matrix};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityRow {
    pub t: usize,
    pub op_norm: f64,
    pub spectral_radius: f64,
    /// Induced infinity norm (maximum absolute row sum).
    pub inf_norm: f64,
    /// `beta1 + beta2`.
    pub proxy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub rows: Vec<StabilityRow>,
    pub max_op_norm: f64,
    pub max_spectral_radius: f64,
    pub max_inf_norm: f64,
    pub max_proxy: f64,
    /// `max_t ||B_t||_op < 1`.
    pub contractive: bool,
}

fn check_paths(beta1: &[f64], beta2: &[f64]) -> Result<()> {
    ensure!(beta1.len() == beta2.len(), Dimension, "beta1 has {} entries, beta2 has {}", beta1.len(), beta2.len());
    ensure!(beta1.iter().chain(beta2).all(|v| v.is_finite()), InvalidInput, "coefficient paths must be finite");
    Ok(())
}

fn check_horizon(len: usize, t: usize, h: usize) -> Result<()> {
    ensure!(h >= 1, InvalidInput, "horizon must be at least 1");
    ensure!(t + h < len, InvalidInput, "paths of length {len} do not cover times {}..={}", t + 1, t + h);
    Ok(())
}

/// Per-time norms of `B_t = beta1_t W_t + beta2_t I`.
pub fn stability_report(beta1: &[f64], beta2: &[f64], networks: &NetworkSeq) -> Result<StabilityReport> {
    check_paths(beta1, beta2)?;
    ensure!(!beta1.is_empty(), InvalidInput, "empty coefficient paths");
    if let NetworkSeq::Dynamic(ws) = networks {
        ensure!(ws.len() >= beta1.len(), Dimension, "{} network snapshots for {} times", ws.len(), beta1.len());
    }
    let mut rows = Vec::with_capacity(beta1.len());
    for t in 0..beta1.len() {
        let b = spillover_matrix(beta1[t], beta2[t], networks.at(t));
        rows.push(StabilityRow {
            t,
            op_norm: operator_norm(&b, DEFAULT_TOL, DEFAULT_MAX_ITER)?,
            spectral_radius: spectral_radius(&b, DEFAULT_TOL, DEFAULT_MAX_ITER)?.value,
            inf_norm: b.norm_inf(),
            proxy: beta1[t] + beta2[t],
        });
    }
    let max = |f: fn(&StabilityRow) -> f64| rows.iter().map(f).fold(f64::NEG_INFINITY, f64::max);
    let max_op_norm = max(|r| r.op_norm);
    Ok(StabilityReport {
        max_spectral_radius: max(|r| r.spectral_radius),
        max_inf_norm: max(|r| r.inf_norm),
        max_proxy: max(|r| r.proxy),
        contractive: max_op_norm < 1.0,
        max_op_norm,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HopDecomp {
    pub anchor: usize,
    pub horizon: usize,
    /// `c[r]` weights the `r`-step walks, `r = 0..=h`.
    pub coefficients: Vec<f64>,
}

impl HopDecomp {
    /// `sum_r c_r W^r`.
    pub fn propagation_matrix(&self, w: &WeightMatrix) -> Matrix {
        let n = w.n_nodes();
        let mut out = Matrix::zeros(n, n);
        let mut wr = Matrix::identity(n);
        for (r, &c) in self.coefficients.iter().enumerate() {
            if r > 0 {
                wr = wr.mul(w.matrix());
            }
            out.add_assign(&wr.scale(c));
        }
        out
    }
}

/// Elementary-symmetric recursion: multiplying by `beta2 + beta1 x` at each
/// step shifts the walk-length polynomial.
pub fn hop_coefficients(beta1: &[f64], beta2: &[f64], t: usize, h: usize) -> Result<HopDecomp> {
    check_paths(beta1, beta2)?;
    check_horizon(beta1.len(), t, h)?;
    let mut c = vec![0.0; h + 1];
    c[0] = 1.0;
    for (k, (&b1, &b2)) in beta1[t + 1..=t + h].iter().zip(&beta2[t + 1..=t + h]).enumerate() {
        for r in (0..=k + 1).rev() {
            let walk = if r > 0 { c[r - 1] * b1 } else { 0.0 };
            c[r] = c[r] * b2 + walk;
        }
    }
    Ok(HopDecomp { anchor: t, horizon: h, coefficients: c })
}

/// `Phi_(t,h) = B_(t+h) ... B_(t+1)` by direct multiplication.
pub fn propagation_matrix(beta1: &[f64], beta2: &[f64], w: &WeightMatrix, t: usize, h: usize) -> Result<Matrix> {
    check_paths(beta1, beta2)?;
    check_horizon(beta1.len(), t, h)?;
    let mut phi = Matrix::identity(w.n_nodes());
    for k in t + 1..=t + h {
        phi = spillover_matrix(beta1[k], beta2[k], w).mul(&phi);
    }
    Ok(phi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Irf {
    pub shock_node: usize,
    pub total: Vec<f64>,
    /// `contributions[r] = c_r W^r e_j`.
    pub contributions: Vec<Vec<f64>>,
}

/// Response to a unit shock at node `j`, split by walk length. Requires a
/// single network over the horizon.
pub fn irf(networks: &NetworkSeq, decomp: &HopDecomp, j: usize) -> Result<Irf> {
    let w = match networks {
        NetworkSeq::Static(w) => w,
        NetworkSeq::Dynamic(ws) => {
            let first = networks.at(decomp.anchor + 1);
            let varies = (decomp.anchor + 2..=decomp.anchor + decomp.horizon).any(|k| networks.at(k) != first);
            if varies || ws.is_empty() {
                return Err(Error::Unsupported(String::from(
                    "hop decomposition needs one network over the horizon; time-varying networks do not commute",
                )));
            }
            first
        }
    };
    let n = w.n_nodes();
    ensure!(j < n, InvalidInput, "shock node {j} out of range for {n} nodes");
    let mut v = vec![0.0; n];
    v[j] = 1.0;
    let mut total = vec![0.0; n];
    let mut contributions = Vec::with_capacity(decomp.coefficients.len());
    for (r, &c) in decomp.coefficients.iter().enumerate() {
        if r > 0 {
            v = w.apply(&v);
        }
        let contrib: Vec<f64> = v.iter().map(|x| c * x).collect();
        for (t, x) in total.iter_mut().zip(&contrib) {
            *t += x;
        }
        contributions.push(contrib);
    }
    Ok(Irf { shock_node: j, total, contributions })
}

/// `pi_j prod_k (beta1 + beta2)` over `t + 1..=t + h`.
pub fn macro_irf(pi: &InvariantVector, beta1: &[f64], beta2: &[f64], t: usize, h: usize, j: usize) -> Result<f64> {
    check_paths(beta1, beta2)?;
    check_horizon(beta1.len(), t, h)?;
    ensure!(j < pi.as_slice().len(), InvalidInput, "shock node {j} out of range");
    let prod: f64 = (t + 1..=t + h).map(|k| beta1[k] + beta2[k]).product();
    Ok(pi.weight(j) * prod)
}

fn growth_factor(beta1: &[f64], beta2: &[f64], c_w: f64, t: usize, h: usize) -> f64 {
    (t + 1..=t + h).map(|k| beta1[k].abs() * c_w + beta2[k].abs()).fold(0.0, f64::max)
}

/// `M^(h-1) (sum_k |beta1_(t+k)|) delta_w` with
/// `M = max_k (|beta1| C_W + |beta2|)`.
pub fn counterfactual_bound(beta1: &[f64], beta2: &[f64], c_w: f64, delta_w: f64, t: usize, h: usize) -> Result<f64> {
    check_paths(beta1, beta2)?;
    check_horizon(beta1.len(), t, h)?;
    ensure!(c_w >= 0.0 && delta_w >= 0.0, InvalidInput, "C_W and delta_W must be nonnegative");
    let m = growth_factor(beta1, beta2, c_w, t, h);
    let s: f64 = (t + 1..=t + h).map(|k| beta1[k].abs()).sum();
    Ok(libm::pow(m, (h - 1) as f64) * s * delta_w)
}

/// Bound on `||Phi_hat - Phi||_op` from coefficient errors and a network
/// error `delta_w`, given user-supplied estimates.
pub fn irf_error_bound(
    beta: (&[f64], &[f64]),
    beta_hat: (&[f64], &[f64]),
    c_w: f64,
    delta_w: f64,
    t: usize,
    h: usize,
) -> Result<f64> {
    check_paths(beta.0, beta.1)?;
    check_paths(beta_hat.0, beta_hat.1)?;
    ensure!(beta.0.len() == beta_hat.0.len(), Dimension, "true and estimated paths differ in length");
    check_horizon(beta.0.len(), t, h)?;
    ensure!(c_w >= 0.0 && delta_w >= 0.0, InvalidInput, "C_W and delta_W must be nonnegative");
    let m = growth_factor(beta.0, beta.1, c_w, t, h).max(growth_factor(beta_hat.0, beta_hat.1, c_w, t, h));
    let s: f64 = (t + 1..=t + h)
        .map(|k| {
            c_w * (beta_hat.0[k] - beta.0[k]).abs() + (beta_hat.1[k] - beta.1[k]).abs() + beta_hat.0[k].abs() * delta_w
        })
        .sum();
    Ok(libm::pow(m, (h - 1) as f64) * s)
}

/// `B1^2 delta_w^2 ||Y||^2`.
pub fn sensitivity_bound(b1: f64, delta_w: f64, y_norm_sq: f64) -> Result<f64> {
    ensure!(b1 >= 0.0 && delta_w >= 0.0 && y_norm_sq >= 0.0, InvalidInput,
        "sensitivity bound inputs must be nonnegative, got B1 = {b1}, delta = {delta_w}, |Y|^2 = {y_norm_sq}");
    Ok(b1 * b1 * delta_w * delta_w * y_norm_sq)
}

/// Scalar path `ybar_t = beta0 + (beta1 + beta2) ybar_(t-1) + zterm_t + pi' eps_t`.
///
/// `paths` is `T x 3` (intercept, network lag, own lag); `zterm[t]` is
/// `pi' Z_t gamma_t`. Without innovations the conditional-mean path is
/// returned. Row 0 holds `ybar0`.
pub fn aggregate_recursion(
    pi: &InvariantVector,
    paths: &Matrix,
    zterm: Option<&[f64]>,
    ybar0: f64,
    innovations: Option<&Matrix>,
) -> Result<Vec<f64>> {
    let t_len = paths.rows();
    ensure!(paths.cols() == 3, Dimension, "expected intercept, network and own-lag columns, got {}", paths.cols());
    if let Some(z) = zterm {
        ensure!(z.len() == t_len, Dimension, "covariate term has {} entries, expected {t_len}", z.len());
    }
    if let Some(e) = innovations {
        ensure!(e.rows() == t_len && e.cols() == pi.as_slice().len(), Dimension,
            "innovations are {}x{}, expected {t_len}x{}", e.rows(), e.cols(), pi.as_slice().len());
    }
    let mut out = vec![0.0; t_len];
    if t_len == 0 {
        return Ok(out);
    }
    out[0] = ybar0;
    for t in 1..t_len {
        let th = paths.row(t);
        let mut v = th[0] + (th[1] + th[2]) * out[t - 1];
        if let Some(z) = zterm {
            v += z[t];
        }
        if let Some(e) = innovations {
            v += pi.aggregate(e.row(t));
        }
        out[t] = v;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MesoReduction {
    /// `T x C` community means `Pi Y_t`.
    pub community_means: Matrix,
    pub omega: Vec<Matrix>,
    /// `||Pi W_t - Omega_t Pi||_op`.
    pub delta: Vec<f64>,
    /// `||beta1_t (Pi W_t - Omega_t Pi) Y_(t-1)||`, zero at `t = 0`.
    pub remainder_norms: Vec<f64>,
    /// `|beta1_t| delta_t ||Y_(t-1)||`.
    pub remainder_bounds: Vec<f64>,
    /// Norm of `Pi Y_t` minus the reduced recursion driven by the realized
    /// `Pi eps_t`; present when innovations are supplied.
    pub residuals: Option<Vec<f64>>,
}

/// Community-level recursion on the quotient networks.
///
/// `zterm` holds `Z_t gamma_t` as a `T x N` matrix.
pub fn meso_reduce(
    networks: &NetworkSeq,
    part: &Partition,
    panel: &Matrix,
    paths: &Matrix,
    zterm: Option<&Matrix>,
    innovations: Option<&Matrix>,
) -> Result<MesoReduction> {
    let (t_len, n) = (panel.rows(), panel.cols());
    ensure!(part.n_nodes() == n, Dimension, "partition covers {} nodes, panel has {n}", part.n_nodes());
    ensure!(paths.rows() == t_len && paths.cols() == 3, Dimension,
        "paths are {}x{}, expected {t_len}x3", paths.rows(), paths.cols());
    networks.validate(n, t_len)?;
    for (name, m) in [("covariate term", zterm), ("innovations", innovations)] {
        if let Some(m) = m {
            ensure!(m.rows() == t_len && m.cols() == n, Dimension, "{name} is {}x{}, expected {t_len}x{n}", m.rows(), m.cols());
        }
    }
    let avg = part.averaging_operator();
    let c = part.n_communities();
    let mut community_means = Matrix::zeros(t_len, c);
    for t in 0..t_len {
        community_means.row_mut(t).copy_from_slice(&avg.mul_vec(panel.row(t)));
    }
    let mut omega = Vec::with_capacity(t_len);
    let mut delta = Vec::with_capacity(t_len);
    let mut remainder_norms = vec![0.0; t_len];
    let mut remainder_bounds = vec![0.0; t_len];
    let mut residuals = innovations.map(|_| vec![0.0; t_len]);
    for t in 0..t_len {
        let w = networks.at(t);
        let q = quotient_operator(w, part)?;
        if t > 0 {
            let th = paths.row(t);
            let prev = panel.row(t - 1);
            let defect = avg.mul(w.matrix()).sub(&q.omega.mul(&avg));
            remainder_norms[t] = th[1].abs() * norm2(&defect.mul_vec(prev));
            remainder_bounds[t] = th[1].abs() * q.delta * norm2(prev);
            if let (Some(res), Some(e)) = (residuals.as_mut(), innovations) {
                let ybar_prev = community_means.row(t - 1);
                let oy = q.omega.mul_vec(ybar_prev);
                let eps = avg.mul_vec(e.row(t));
                let zbar = zterm.map(|z| avg.mul_vec(z.row(t)));
                let gap: Vec<f64> = (0..c)
                    .map(|k| {
                        let mut pred = th[0] + th[1] * oy[k] + th[2] * ybar_prev[k] + eps[k];
                        if let Some(zb) = &zbar {
                            pred += zb[k];
                        }
                        community_means[(t, k)] - pred
                    })
                    .collect();
                res[t] = norm2(&gap);
            }
        }
        omega.push(q.omega);
        delta.push(q.delta);
    }
    Ok(MesoReduction { community_means, omega, delta, remainder_norms, remainder_bounds, residuals })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BreakSet {
    /// Per coefficient, times `t` in `2..=T` with
    /// `|theta_(t-1) - theta_(t-2)| > d`.
    pub activations: Vec<Vec<usize>>,
    pub thresholds: Vec<f64>,
}

impl BreakSet {
    /// Jump times `t` with `theta_t != theta_(t-1)` implied by the
    /// activations.
    pub fn jump_times(&self, j: usize) -> Vec<usize> {
        self.activations[j].iter().map(|t| t - 1).collect()
    }
}

/// Plug-in threshold indicators on a `(T+1) x K` path `theta_0..theta_T`.
pub fn detect_breaks(theta: &Matrix, d: &[f64]) -> Result<BreakSet> {
    ensure!(theta.rows() >= 3, InvalidInput, "break detection needs T >= 2, got {} rows", theta.rows());
    ensure!(d.len() == theta.cols(), Dimension, "{} thresholds for {} coefficients", d.len(), theta.cols());
    ensure!(d.iter().all(|&x| x > 0.0 && x.is_finite()), InvalidInput, "thresholds must be positive");
    let t_max = theta.rows() - 1;
    let activations = (0..theta.cols())
        .map(|j| (2..=t_max).filter(|&t| (theta[(t - 1, j)] - theta[(t - 2, j)]).abs() > d[j]).collect())
        .collect();
    Ok(BreakSet { activations, thresholds: d.to_vec() })
}

/// `c sqrt(log T / T)`.
pub fn rate_threshold(c: f64, t: usize) -> f64 {
    let tf = t as f64;
    c * libm::sqrt(libm::log(tf) / tf)
}

/// Smallest threshold used when a path has no increments at all.
pub const MIN_THRESHOLD: f64 = 1e-12;

/// Data-scaled default: four times the median absolute increment of each
/// coefficient path.
pub fn default_thresholds(theta: &Matrix) -> Result<Vec<f64>> {
    ensure!(theta.rows() >= 2, InvalidInput, "need at least two rows, got {}", theta.rows());
    Ok((0..theta.cols())
        .map(|j| {
            let inc: Vec<f64> = (1..theta.rows()).map(|t| (theta[(t, j)] - theta[(t - 1, j)]).abs()).collect();
            (4.0 * stats::median(&inc)).max(MIN_THRESHOLD)
        })
        .collect())
}

/// Mean absolute gap between a scalar path and the realized aggregate
/// `pi' Y_t`, over rows `from..`.
pub fn aggregation_mae(pi: &InvariantVector, panel: &Matrix, path: &[f64], from: usize) -> Result<f64> {
    ensure!(path.len() == panel.rows(), Dimension, "path has {} entries, panel {} rows", path.len(), panel.rows());
    ensure!(from < panel.rows(), InvalidInput, "start row {from} beyond panel");
    let gaps: Vec<f64> = (from..panel.rows()).map(|t| (pi.aggregate(panel.row(t)) - path[t]).abs()).collect();
    Ok(stats::mean(&gaps))
}
