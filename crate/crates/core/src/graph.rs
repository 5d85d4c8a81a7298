//! Network weight matrices and the operators derived from them.
//!
//! Adjacencies are normalized by out-degree (zero-degree rows stay zero),
//! norms and spectral radii come from deterministic power iteration, and the
//! stress-test perturbations (edge deletion, uniform mixing, label
//! permutation, degree-preserving rewiring) always return row-normalized
//! matrices.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::linalg::{dot, norm2, Matrix};
use crate::rng;

/// Tolerance on row sums of a row-normalized matrix.
pub const ROW_SUM_TOL: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_ITER: usize = 20_000;
const INVARIANT_MAX_ITER: usize = 100_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adjacency {
    entries: Matrix,
    directed: bool,
    time_index: Option<i64>,
}

impl Adjacency {
    pub fn new(entries: Matrix, directed: bool, time_index: Option<i64>) -> Result<Self> {
        ensure!(entries.is_square() && entries.rows() > 0, Dimension,
            "adjacency must be a nonempty square matrix, got {}x{}", entries.rows(), entries.cols());
        for i in 0..entries.rows() {
            ensure!(entries[(i, i)] == 0.0, InvalidInput, "adjacency diagonal entry {i} is nonzero");
            for (j, &v) in entries.row(i).iter().enumerate() {
                ensure!(v.is_finite() && v >= 0.0, InvalidInput,
                    "adjacency entry ({i},{j}) = {v} must be finite and nonnegative");
            }
        }
        Ok(Self { entries, directed, time_index })
    }

    /// Builds an adjacency from `(src, dst, weight)` triples. Undirected
    /// graphs get both orientations.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)], directed: bool) -> Result<Self> {
        let mut m = Matrix::zeros(n, n);
        for &(s, d, w) in edges {
            ensure!(s < n && d < n, InvalidInput, "edge ({s},{d}) out of range for {n} nodes");
            ensure!(s != d, InvalidInput, "self-loop at node {s}");
            m[(s, d)] += w;
            if !directed {
                m[(d, s)] += w;
            }
        }
        Self::new(m, directed, None)
    }

    pub fn n_nodes(&self) -> usize {
        self.entries.rows()
    }

    pub fn entries(&self) -> &Matrix {
        &self.entries
    }

    pub fn directed(&self) -> bool {
        self.directed
    }

    pub fn time_index(&self) -> Option<i64> {
        self.time_index
    }

    pub fn with_time_index(mut self, t: Option<i64>) -> Self {
        self.time_index = t;
        self
    }

    pub fn out_degrees(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.entries.row(i).iter().sum()).collect()
    }

    /// Number of nonzero off-diagonal entries.
    pub fn edge_count(&self) -> usize {
        self.entries.data().iter().filter(|&&v| v > 0.0).count()
    }

    pub fn density(&self) -> f64 {
        let n = self.n_nodes();
        if n < 2 {
            return 0.0;
        }
        self.edge_count() as f64 / (n * (n - 1)) as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PerturbKind {
    EdgeDelete { frac: f64 },
    MixUniform { alpha: f64 },
    PermuteLabels,
    RewireDegseq { iters: usize },
}

impl PerturbKind {
    pub fn label(&self) -> String {
        match self {
            PerturbKind::EdgeDelete { frac } => format!("edge_delete({frac})"),
            PerturbKind::MixUniform { alpha } => format!("mix_uniform({alpha})"),
            PerturbKind::PermuteLabels => String::from("permute_labels"),
            PerturbKind::RewireDegseq { iters } => format!("rewire_degseq({iters})"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Observed,
    RowNormalized,
    Perturbed(PerturbKind),
    Simulated,
}

/// Nonnegative `N x N` network operator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    entries: Matrix,
    provenance: Provenance,
}

impl WeightMatrix {
    pub fn new(entries: Matrix, provenance: Provenance) -> Result<Self> {
        ensure!(entries.is_square() && entries.rows() > 0, Dimension,
            "weight matrix must be a nonempty square matrix, got {}x{}", entries.rows(), entries.cols());
        for (k, &v) in entries.data().iter().enumerate() {
            ensure!(v.is_finite() && v >= 0.0, InvalidInput,
                "weight entry {k} = {v} must be finite and nonnegative");
        }
        let w = Self { entries, provenance };
        if provenance != Provenance::Observed {
            for (i, s) in w.row_sums().into_iter().enumerate() {
                ensure!(s == 0.0 || (s - 1.0).abs() <= ROW_SUM_TOL, InvalidInput,
                    "row {i} sums to {s}, not in {{0}} or 1 +- {ROW_SUM_TOL}");
            }
        }
        Ok(w)
    }

    /// Wraps an arbitrary nonnegative matrix without row-sum checks.
    pub fn observed(entries: Matrix) -> Result<Self> {
        Self::new(entries, Provenance::Observed)
    }

    pub fn n_nodes(&self) -> usize {
        self.entries.rows()
    }

    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_nodes()).map(|i| self.entries.row(i).iter().sum()).collect()
    }

    pub fn is_row_stochastic(&self, tol: f64) -> bool {
        self.row_sums().iter().all(|s| (s - 1.0).abs() <= tol)
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        self.entries.mul_vec(v)
    }

    /// `W^r v` by repeated multiplication.
    pub fn apply_power(&self, v: &[f64], r: usize) -> Vec<f64> {
        let mut out = v.to_vec();
        for _ in 0..r {
            out = self.apply(&out);
        }
        out
    }

    pub fn power(&self, r: usize) -> Matrix {
        let mut out = Matrix::identity(self.n_nodes());
        for _ in 0..r {
            out = out.mul(&self.entries);
        }
        out
    }

    /// Out-degree sequence of the support (count of positive entries per row).
    pub fn out_degree_counts(&self) -> Vec<usize> {
        (0..self.n_nodes())
            .map(|i| self.entries.row(i).iter().filter(|&&v| v > 0.0).count())
            .collect()
    }

    pub fn in_degree_counts(&self) -> Vec<usize> {
        let n = self.n_nodes();
        (0..n)
            .map(|j| (0..n).filter(|&i| self.entries[(i, j)] > 0.0).count())
            .collect()
    }
}

/// Row-compressed copy of a weight matrix for fast repeated products.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseWeights {
    n: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseWeights {
    pub fn new(w: &WeightMatrix) -> Self {
        let n = w.n_nodes();
        let mut offsets = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        offsets.push(0);
        for i in 0..n {
            for (j, &v) in w.matrix().row(i).iter().enumerate() {
                if v != 0.0 {
                    cols.push(j);
                    vals.push(v);
                }
            }
            offsets.push(cols.len());
        }
        Self { n, offsets, cols, vals }
    }

    pub fn n_nodes(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        for i in 0..self.n {
            let (a, b) = (self.offsets[i], self.offsets[i + 1]);
            out[i] = self.cols[a..b].iter().zip(&self.vals[a..b]).map(|(&j, &w)| w * v[j]).sum();
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        self.apply_into(v, &mut out);
        out
    }

    pub fn apply_power(&self, v: &[f64], r: usize) -> Vec<f64> {
        let mut out = v.to_vec();
        for _ in 0..r {
            out = self.apply(&out);
        }
        out
    }
}

/// Networks indexed by panel row: one static matrix or one per row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetworkSeq {
    Static(WeightMatrix),
    Dynamic(Vec<WeightMatrix>),
}

impl NetworkSeq {
    pub fn n_nodes(&self) -> usize {
        match self {
            NetworkSeq::Static(w) => w.n_nodes(),
            NetworkSeq::Dynamic(ws) => ws.first().map_or(0, WeightMatrix::n_nodes),
        }
    }

    /// Number of distinct snapshots (1 when static).
    pub fn len(&self) -> usize {
        match self {
            NetworkSeq::Static(_) => 1,
            NetworkSeq::Dynamic(ws) => ws.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_static(&self) -> bool {
        matches!(self, NetworkSeq::Static(_))
    }

    /// Network at row `t`; a dynamic sequence shorter than `t + 1` repeats
    /// its last snapshot.
    pub fn at(&self, t: usize) -> &WeightMatrix {
        match self {
            NetworkSeq::Static(w) => w,
            NetworkSeq::Dynamic(ws) => &ws[t.min(ws.len() - 1)],
        }
    }

    pub fn validate(&self, n: usize, rows: usize) -> Result<()> {
        ensure!(!self.is_empty(), InvalidInput, "network sequence is empty");
        if let NetworkSeq::Dynamic(ws) = self {
            ensure!(ws.len() == rows, Dimension, "network sequence has {} snapshots, panel has {rows} rows", ws.len());
            for (t, w) in ws.iter().enumerate() {
                ensure!(w.n_nodes() == n, Dimension, "network at row {t} has {} nodes, panel has {n}", w.n_nodes());
            }
        } else {
            ensure!(self.n_nodes() == n, Dimension, "network has {} nodes, panel has {n}", self.n_nodes());
        }
        Ok(())
    }

    /// Keeps the first `rows` snapshots.
    pub fn truncate(&self, rows: usize) -> NetworkSeq {
        match self {
            NetworkSeq::Static(w) => NetworkSeq::Static(w.clone()),
            NetworkSeq::Dynamic(ws) => NetworkSeq::Dynamic(ws[..rows.min(ws.len())].to_vec()),
        }
    }
}

/// `w_ij = a_ij / n_i` when the out-degree `n_i > 0`, zero rows otherwise.
pub fn row_normalize(a: &Adjacency) -> WeightMatrix {
    normalize_rows(a.entries(), Provenance::RowNormalized)
}

fn normalize_rows(m: &Matrix, provenance: Provenance) -> WeightMatrix {
    let n = m.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        let s: f64 = m.row(i).iter().sum();
        if s > 0.0 {
            for (o, &v) in out.row_mut(i).iter_mut().zip(m.row(i)) {
                *o = v / s;
            }
        }
    }
    WeightMatrix { entries: out, provenance }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PowerStatus {
    Converged,
    /// The iterate collapsed to zero (nilpotent or zero matrix).
    ConvergedToZero,
    /// Power iteration stalled; value from normalized repeated squaring.
    GelfandFallback,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub value: f64,
    pub iterations: usize,
    pub status: PowerStatus,
}

/// The two fixed start vectors: normalized all-ones, then a fixed
/// pseudo-random vector that catches starts orthogonal to the dominant
/// direction.
fn start_vectors(n: usize) -> [Vec<f64>; 2] {
    let ones = vec![1.0 / libm::sqrt(n as f64); n];
    let mut r = rng::stream(0x5eed, "power-iteration-start", n as u64);
    let mut alt: Vec<f64> = (0..n).map(|_| r.random::<f64>() - 0.25).collect();
    let s = norm2(&alt);
    alt.iter_mut().for_each(|v| *v /= s);
    [ones, alt]
}

fn check_power_inputs(m: &Matrix, tol: f64, square: bool) -> Result<()> {
    ensure!(!square || m.is_square(), Dimension, "expected a square matrix, got {}x{}", m.rows(), m.cols());
    ensure!(m.is_finite(), InvalidInput, "matrix has non-finite entries");
    ensure!(tol > 0.0, InvalidInput, "tolerance must be positive");
    Ok(())
}

/// Largest singular value by power iteration on `M^T M`.
pub fn operator_norm(m: &Matrix, tol: f64, max_iter: usize) -> Result<f64> {
    Ok(operator_norm_estimate(m, tol, max_iter)?.value)
}

pub fn operator_norm_estimate(m: &Matrix, tol: f64, max_iter: usize) -> Result<PowerEstimate> {
    check_power_inputs(m, tol, false)?;
    let n = m.cols();
    if n == 0 || m.rows() == 0 || m.max_abs() == 0.0 {
        return Ok(PowerEstimate { value: 0.0, iterations: 0, status: PowerStatus::ConvergedToZero });
    }
    let mut best: Option<PowerEstimate> = None;
    for start in start_vectors(n) {
        let est = gram_power(m, start, tol, max_iter)?;
        if best.map_or(true, |b| est.value > b.value) {
            best = Some(est);
        }
    }
    Ok(best.expect("two starts"))
}

fn gram_power(m: &Matrix, mut v: Vec<f64>, tol: f64, max_iter: usize) -> Result<PowerEstimate> {
    let mut lambda_prev = f64::NAN;
    let mut lambda = 0.0;
    for it in 1..=max_iter {
        let mv = m.mul_vec(&v);
        let w = m.t_mul_vec(&mv);
        lambda = dot(&mv, &mv);
        let wn = norm2(&w);
        if wn == 0.0 || lambda == 0.0 {
            return Ok(PowerEstimate { value: 0.0, iterations: it, status: PowerStatus::ConvergedToZero });
        }
        let resid = libm::sqrt(w.iter().zip(&v).map(|(a, b)| (a - lambda * b) * (a - lambda * b)).sum::<f64>());
        let stable = (lambda - lambda_prev).abs() <= tol * lambda * 1e-2;
        if resid <= libm::sqrt(tol) * lambda || (it > 50 && stable) {
            return Ok(PowerEstimate { value: libm::sqrt(lambda), iterations: it, status: PowerStatus::Converged });
        }
        lambda_prev = lambda;
        v = w.into_iter().map(|x| x / wn).collect();
    }
    Err(Error::NonConvergence { routine: "operator_norm", iterations: max_iter, last: libm::sqrt(lambda) })
}

/// Modulus of the dominant eigenvalue.
///
/// Power iteration from the two fixed starts, accepting an iterate once its
/// eigen-residual is small. When the dominant eigenvalues share a modulus
/// without coinciding (complex pairs, `+-lambda`), the iteration cannot
/// settle and the radius is taken from Gelfand's formula via normalized
/// repeated squaring instead.
pub fn spectral_radius(m: &Matrix, tol: f64, max_iter: usize) -> Result<PowerEstimate> {
    check_power_inputs(m, tol, true)?;
    let n = m.rows();
    if n == 0 || m.max_abs() == 0.0 {
        return Ok(PowerEstimate { value: 0.0, iterations: 0, status: PowerStatus::ConvergedToZero });
    }
    let mut best: Option<PowerEstimate> = None;
    let mut stalled = false;
    for start in start_vectors(n) {
        match eigen_power(m, start, tol, max_iter) {
            Some(est) => {
                if best.map_or(true, |b| est.value > b.value) {
                    best = Some(est);
                }
            }
            None => stalled = true,
        }
    }
    match best {
        Some(b) if !stalled => Ok(b),
        _ => gelfand_radius(m, tol),
    }
}

fn eigen_power(m: &Matrix, mut v: Vec<f64>, tol: f64, max_iter: usize) -> Option<PowerEstimate> {
    let scale = m.max_abs();
    for it in 1..=max_iter {
        let w = m.mul_vec(&v);
        let r = norm2(&w);
        if r <= 1e-300 * scale {
            return Some(PowerEstimate { value: 0.0, iterations: it, status: PowerStatus::ConvergedToZero });
        }
        let rayleigh = dot(&v, &w);
        let resid = libm::sqrt(w.iter().zip(&v).map(|(a, b)| (a - rayleigh * b) * (a - rayleigh * b)).sum::<f64>());
        if resid <= tol * rayleigh.abs().max(f64::MIN_POSITIVE) {
            return Some(PowerEstimate { value: rayleigh.abs(), iterations: it, status: PowerStatus::Converged });
        }
        v = w.into_iter().map(|x| x / r).collect();
    }
    None
}

fn gelfand_radius(m: &Matrix, tol: f64) -> Result<PowerEstimate> {
    let s0 = m.frobenius_norm();
    let mut a = m.scale(1.0 / s0);
    let mut log_scale = libm::log(s0);
    let mut power = 1.0_f64;
    let mut prev = libm::exp(log_scale);
    for it in 1..=64 {
        let sq = a.mul(&a);
        let s = sq.frobenius_norm();
        if s == 0.0 || !s.is_finite() {
            return Ok(PowerEstimate { value: 0.0, iterations: it, status: PowerStatus::ConvergedToZero });
        }
        log_scale = 2.0 * log_scale + libm::log(s);
        power *= 2.0;
        a = sq.scale(1.0 / s);
        let est = libm::exp(log_scale / power);
        if est < 1e-300 {
            return Ok(PowerEstimate { value: 0.0, iterations: it, status: PowerStatus::ConvergedToZero });
        }
        if (est - prev).abs() <= 0.5 * tol * est {
            return Ok(PowerEstimate { value: est, iterations: it, status: PowerStatus::GelfandFallback });
        }
        prev = est;
    }
    Err(Error::NonConvergence { routine: "spectral_radius", iterations: 64, last: prev })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantVector {
    pi: Vec<f64>,
}

impl InvariantVector {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        ensure!(pi.iter().all(|&p| p >= 0.0 && p.is_finite()), InvalidInput, "invariant vector must be nonnegative");
        let s: f64 = pi.iter().sum();
        ensure!((s - 1.0).abs() <= 1e-9, InvalidInput, "invariant vector sums to {s}, not 1");
        Ok(Self { pi })
    }

    /// Uniform `1/N` vector, invariant for doubly stochastic matrices.
    pub fn uniform(n: usize) -> Self {
        Self { pi: vec![1.0 / n as f64; n] }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.pi
    }

    pub fn weight(&self, j: usize) -> f64 {
        self.pi[j]
    }

    /// `pi^T v`.
    pub fn aggregate(&self, v: &[f64]) -> f64 {
        dot(&self.pi, v)
    }

    /// `||pi^T W - pi^T||_inf`.
    pub fn residual(&self, w: &WeightMatrix) -> f64 {
        let piw = w.matrix().t_mul_vec(&self.pi);
        piw.iter().zip(&self.pi).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()))
    }
}

/// Power iteration on `W^T` from the uniform vector.
pub fn invariant_vector(w: &WeightMatrix, tol: f64) -> Result<InvariantVector> {
    for (i, s) in w.row_sums().into_iter().enumerate() {
        ensure!((s - 1.0).abs() <= 1e-9, InvalidInput,
            "invariant vector needs a row-stochastic matrix; row {i} sums to {s}");
    }
    ensure!(tol > 0.0, InvalidInput, "tolerance must be positive");
    let n = w.n_nodes();
    let mut pi = vec![1.0 / n as f64; n];
    let mut residual = f64::INFINITY;
    for _ in 0..INVARIANT_MAX_ITER {
        let mut next = w.matrix().t_mul_vec(&pi);
        let s: f64 = next.iter().sum();
        next.iter_mut().for_each(|p| *p /= s);
        residual = next.iter().zip(&pi).fold(0.0, |m, (a, b)| f64::max(m, (a - b).abs()));
        pi = next;
        if residual <= tol {
            let out = InvariantVector { pi };
            let r = out.residual(w);
            if r <= tol {
                return Ok(out);
            }
            pi = out.pi;
        }
    }
    Err(Error::PeriodicChain { iterations: INVARIANT_MAX_ITER, residual })
}

/// Applies a stress-test perturbation; every output is row-normalized.
pub fn perturb(w: &WeightMatrix, kind: &PerturbKind, seed: u64) -> Result<WeightMatrix> {
    let n = w.n_nodes();
    let provenance = Provenance::Perturbed(*kind);
    match *kind {
        PerturbKind::EdgeDelete { frac } => {
            ensure!((0.0..1.0).contains(&frac), InvalidInput, "edge_delete fraction {frac} not in [0,1)");
            let edges = support(w);
            let k = libm::floor(frac * edges.len() as f64) as usize;
            let mut r = rng::stream(seed, "perturb-edge-delete", 0);
            let mut m = w.matrix().clone();
            for idx in rand::seq::index::sample(&mut r, edges.len(), k) {
                let (i, j) = edges[idx];
                m[(i, j)] = 0.0;
            }
            Ok(normalize_rows(&m, provenance))
        }
        PerturbKind::MixUniform { alpha } => {
            ensure!((0.0..=1.0).contains(&alpha), InvalidInput, "mix_uniform alpha {alpha} not in [0,1]");
            let u = if n > 1 { 1.0 / (n - 1) as f64 } else { 0.0 };
            let m = Matrix::from_fn(n, n, |i, j| {
                let uij = if i == j { 0.0 } else { u };
                (1.0 - alpha) * w.matrix()[(i, j)] + alpha * uij
            });
            Ok(normalize_rows(&m, provenance))
        }
        PerturbKind::PermuteLabels => {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng::stream(seed, "perturb-permute", 0));
            Ok(normalize_rows(&permute(w.matrix(), &perm), provenance))
        }
        PerturbKind::RewireDegseq { iters } => {
            let m = rewire(w.matrix(), iters, seed)?;
            Ok(normalize_rows(&m, provenance))
        }
    }
}

/// `P W P^T` where node `i` is relabeled `perm[i]`.
pub fn permute(m: &Matrix, perm: &[usize]) -> Matrix {
    let n = m.rows();
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(perm[i], perm[j])] = m[(i, j)];
        }
    }
    out
}

fn support(w: &WeightMatrix) -> Vec<(usize, usize)> {
    let n = w.n_nodes();
    let mut e = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && w.matrix()[(i, j)] > 0.0 {
                e.push((i, j));
            }
        }
    }
    e
}

/// `iters` successful double-edge swaps `(a->b, c->d) => (a->d, c->b)`.
/// Weights travel with their source row, so out- and in-degree counts and
/// row sums are preserved.
fn rewire(m: &Matrix, iters: usize, seed: u64) -> Result<Matrix> {
    let mut m = m.clone();
    let n = m.rows();
    let mut edges: Vec<(usize, usize)> = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && m[(i, j)] > 0.0 {
                edges.push((i, j));
            }
        }
    }
    let max_failed = iters.saturating_mul(10).max(10);
    if edges.len() < 2 {
        if iters == 0 {
            return Ok(m);
        }
        return Err(Error::RewireInfeasible { failed: 0 });
    }
    let mut r = rng::stream(seed, "perturb-rewire", 0);
    let (mut done, mut failed) = (0, 0);
    while done < iters {
        let e1 = r.random_range(0..edges.len());
        let e2 = r.random_range(0..edges.len());
        let (a, b) = edges[e1];
        let (c, d) = edges[e2];
        let ok = e1 != e2 && a != c && b != d && a != d && c != b && m[(a, d)] == 0.0 && m[(c, b)] == 0.0;
        if !ok {
            failed += 1;
            if failed >= max_failed {
                return Err(Error::RewireInfeasible { failed });
            }
            continue;
        }
        m[(a, d)] = m[(a, b)];
        m[(a, b)] = 0.0;
        m[(c, b)] = m[(c, d)];
        m[(c, d)] = 0.0;
        edges[e1] = (a, d);
        edges[e2] = (c, b);
        done += 1;
    }
    Ok(m)
}

/// Assignment of nodes to nonempty communities `0..C`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    pub fn new(assignment: Vec<usize>) -> Result<Self> {
        ensure!(!assignment.is_empty(), InvalidInput, "partition of zero nodes");
        let c = assignment.iter().max().copied().unwrap_or(0) + 1;
        let mut sizes = vec![0usize; c];
        for &a in &assignment {
            sizes[a] += 1;
        }
        if let Some(empty) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidInput(format!("community {empty} is empty")));
        }
        Ok(Self { assignment, sizes })
    }

    pub fn singletons(n: usize) -> Self {
        Self { assignment: (0..n).collect(), sizes: vec![1; n] }
    }

    pub fn n_nodes(&self) -> usize {
        self.assignment.len()
    }

    pub fn n_communities(&self) -> usize {
        self.sizes.len()
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Community-averaging operator `Pi` (`C x N`).
    pub fn averaging_operator(&self) -> Matrix {
        let mut pi = Matrix::zeros(self.n_communities(), self.n_nodes());
        for (i, &c) in self.assignment.iter().enumerate() {
            pi[(c, i)] = 1.0 / self.sizes[c] as f64;
        }
        pi
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotientMap {
    pub omega: Matrix,
    /// `||Pi W - Omega Pi||_op`.
    pub delta: f64,
}

pub fn quotient_operator(w: &WeightMatrix, part: &Partition) -> Result<QuotientMap> {
    ensure!(part.n_nodes() == w.n_nodes(), Dimension,
        "partition covers {} nodes, network has {}", part.n_nodes(), w.n_nodes());
    let omega = quotient_matrix(w, part);
    let pi = part.averaging_operator();
    let defect = pi.mul(w.matrix()).sub(&omega.mul(&pi));
    let delta = operator_norm(&defect, DEFAULT_TOL, DEFAULT_MAX_ITER)?;
    Ok(QuotientMap { omega, delta })
}

fn quotient_matrix(w: &WeightMatrix, part: &Partition) -> Matrix {
    let c = part.n_communities();
    let mut omega = Matrix::zeros(c, c);
    let a = part.assignment();
    for i in 0..w.n_nodes() {
        for (j, &v) in w.matrix().row(i).iter().enumerate() {
            omega[(a[i], a[j])] += v;
        }
    }
    for ci in 0..c {
        let s = part.sizes()[ci] as f64;
        omega.row_mut(ci).iter_mut().for_each(|v| *v /= s);
    }
    omega
}

/// Entrywise balance: `(1/|K_c|) sum_{i in K_c} w_ij = omega_cc' / |K_c'|`
/// for every community pair and every `j in K_c'`.
pub fn balance_holds(w: &WeightMatrix, part: &Partition, tol: f64) -> bool {
    let omega = quotient_matrix(w, part);
    let pi = part.averaging_operator();
    let piw = pi.mul(w.matrix());
    let a = part.assignment();
    (0..part.n_communities()).all(|c| {
        (0..w.n_nodes()).all(|j| {
            let target = omega[(c, a[j])] / part.sizes()[a[j]] as f64;
            (piw[(c, j)] - target).abs() <= tol
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn adj(rows: &[&[f64]]) -> Adjacency {
        Adjacency::new(Matrix::from_rows(rows).unwrap(), true, None).unwrap()
    }

    #[test]
    fn row_normalize_examples() {
        let w = row_normalize(&adj(&[&[0.0, 1.0], &[1.0, 0.0]]));
        assert_eq!(w.matrix(), &Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap());
        let w = row_normalize(&adj(&[&[0.0, 1.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 0.0, 0.0]]));
        assert_eq!(w.matrix().row(0), &[0.0, 0.5, 0.5]);
        assert_eq!(w.matrix().row(1), &[1.0, 0.0, 0.0]);
        assert_eq!(w.matrix().row(2), &[0.0, 0.0, 0.0]);
        let w = row_normalize(&Adjacency::new(Matrix::zeros(3, 3), true, None).unwrap());
        assert_eq!(w.matrix().max_abs(), 0.0);
        assert_eq!(w.provenance(), Provenance::RowNormalized);
    }

    #[test]
    fn adjacency_validation() {
        assert!(Adjacency::new(Matrix::from_rows(&[[1.0, 0.0], [0.0, 0.0]]).unwrap(), true, None).is_err());
        assert!(Adjacency::new(Matrix::from_rows(&[[0.0, -1.0], [0.0, 0.0]]).unwrap(), true, None).is_err());
        assert!(Adjacency::from_edges(2, &[(0, 0, 1.0)], true).is_err());
        let a = Adjacency::from_edges(3, &[(0, 1, 2.0)], false).unwrap();
        assert_eq!(a.entries()[(1, 0)], 2.0);
    }

    #[test]
    fn operator_norm_examples() {
        let v = operator_norm(&Matrix::identity(3), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = operator_norm(&Matrix::from_diag(&[0.3, -0.9]), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((v - 0.9).abs() < 1e-12);
        // All-ones start is orthogonal to the top right-singular vector here.
        let m = Matrix::from_rows(&[[1.0, -1.0], [1.0, -1.0]]).unwrap();
        let v = operator_norm(&m, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((v - 2.0).abs() < 1e-10);
    }

    #[test]
    fn operator_norm_reports_nonconvergence() {
        let m = Matrix::from_rows(&[[1.0, 0.2], [0.3, 0.999]]).unwrap();
        match operator_norm(&m, 1e-15, 1) {
            Err(Error::NonConvergence { iterations: 1, last, .. }) => assert!(last > 0.0),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn spectral_radius_examples() {
        let r = spectral_radius(&Matrix::from_diag(&[0.5, -0.8]), DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((r.value - 0.8).abs() < 1e-12);
        let nil = Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let r = spectral_radius(&nil, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert_eq!(r.value, 0.0);
        assert_eq!(r.status, PowerStatus::ConvergedToZero);
        // Rotation: complex pair, handled by the fallback.
        let rot = Matrix::from_rows(&[[0.0, -0.7], [0.7, 0.0]]).unwrap();
        let r = spectral_radius(&rot, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((r.value - 0.7).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn spectral_radius_sees_past_an_all_ones_eigenvector() {
        // Bipartite 2-ring: ones has eigenvalue b1 + b2, the dominant one is b2 - b1.
        let w = WeightMatrix::new(Matrix::from_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap(), Provenance::RowNormalized).unwrap();
        let b = w.matrix().scale(0.5).add(&Matrix::identity(2).scale(-0.3));
        let r = spectral_radius(&b, DEFAULT_TOL, DEFAULT_MAX_ITER).unwrap();
        assert!((r.value - 0.8).abs() < 1e-10);
    }

    #[test]
    fn invariant_vector_examples() {
        let ring = WeightMatrix::new(
            Matrix::from_rows(&[[0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]]).unwrap(),
            Provenance::RowNormalized,
        )
        .unwrap();
        let pi = invariant_vector(&ring, 1e-12).unwrap();
        assert!(pi.as_slice().iter().all(|p| (p - 1.0 / 3.0).abs() < 1e-15));
        let id = WeightMatrix::new(Matrix::identity(4), Provenance::RowNormalized).unwrap();
        assert_eq!(invariant_vector(&id, 1e-12).unwrap().as_slice(), &[0.25; 4]);
    }

    #[test]
    fn invariant_vector_errors() {
        let zero_row = WeightMatrix::observed(Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap()).unwrap();
        assert!(matches!(invariant_vector(&zero_row, 1e-12), Err(Error::InvalidInput(_))));
        // Star on three nodes: periodic, non-uniform stationary law.
        let star = WeightMatrix::new(
            Matrix::from_rows(&[[0.0, 0.5, 0.5], [1.0, 0.0, 0.0], [1.0, 0.0, 0.0]]).unwrap(),
            Provenance::RowNormalized,
        )
        .unwrap();
        assert!(matches!(invariant_vector(&star, 1e-12), Err(Error::PeriodicChain { .. })));
        let damped = perturb(&star, &PerturbKind::MixUniform { alpha: 0.1 }, 0).unwrap();
        let pi = invariant_vector(&damped, 1e-12).unwrap();
        assert!(pi.residual(&damped) <= 1e-12);
    }

    fn ring(n: usize) -> WeightMatrix {
        let mut edges = Vec::new();
        for i in 0..n {
            edges.push((i, (i + 1) % n, 1.0));
        }
        row_normalize(&Adjacency::from_edges(n, &edges, false).unwrap())
    }

    #[test]
    fn perturb_examples() {
        let w = ring(6);
        let same = perturb(&w, &PerturbKind::MixUniform { alpha: 0.0 }, 1).unwrap();
        assert_eq!(same.matrix(), w.matrix());

        let p = perturb(&w, &PerturbKind::PermuteLabels, 9).unwrap();
        let mut d1 = w.out_degree_counts();
        let mut d2 = p.out_degree_counts();
        d1.sort();
        d2.sort();
        assert_eq!(d1, d2);

        let w3 = WeightMatrix::new(
            Matrix::from_rows(&[[0.0, 1.0, 0.0], [0.5, 0.0, 0.5], [0.0, 1.0, 0.0]]).unwrap(),
            Provenance::RowNormalized,
        )
        .unwrap();
        let mixed = perturb(&w3, &PerturbKind::MixUniform { alpha: 0.5 }, 0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let expect = if i == j { 0.0 } else { 0.5 * w3.matrix()[(i, j)] + 0.25 };
                assert!((mixed.matrix()[(i, j)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn edge_delete_removes_floor_fraction() {
        let w = ring(10);
        let d = perturb(&w, &PerturbKind::EdgeDelete { frac: 0.25 }, 3).unwrap();
        let before = support(&w).len();
        let after = support(&d).len();
        assert_eq!(before - after, 5);
        for s in d.row_sums() {
            assert!(s == 0.0 || (s - 1.0).abs() < 1e-12);
        }
        assert!(perturb(&w, &PerturbKind::EdgeDelete { frac: 1.0 }, 0).is_err());
    }

    #[test]
    fn rewire_preserves_degrees() {
        let mut edges = Vec::new();
        for i in 0..12 {
            edges.push((i, (i + 1) % 12, 1.0));
            edges.push((i, (i + 5) % 12, 1.0));
        }
        let w = row_normalize(&Adjacency::from_edges(12, &edges, true).unwrap());
        let r = perturb(&w, &PerturbKind::RewireDegseq { iters: 10 }, 4).unwrap();
        assert_eq!(w.out_degree_counts(), r.out_degree_counts());
        assert_eq!(w.in_degree_counts(), r.in_degree_counts());
        assert_ne!(w.matrix(), r.matrix());
        let tiny = row_normalize(&Adjacency::from_edges(2, &[(0, 1, 1.0)], true).unwrap());
        assert!(matches!(
            perturb(&tiny, &PerturbKind::RewireDegseq { iters: 3 }, 0),
            Err(Error::RewireInfeasible { .. })
        ));
    }

    #[test]
    fn sparse_apply_matches_dense() {
        let w = perturb(&ring(7), &PerturbKind::EdgeDelete { frac: 0.3 }, 2).unwrap();
        let sp = SparseWeights::new(&w);
        let v: Vec<f64> = (0..7).map(|i| (i as f64).sin()).collect();
        assert!(crate::linalg::max_abs_diff(&sp.apply_power(&v, 3), &w.apply_power(&v, 3)) < 1e-15);
        assert_eq!(sp.nnz(), support(&w).len());
    }

    #[test]
    fn quotient_examples() {
        let w = WeightMatrix::observed(Matrix::from_fn(4, 4, |_, _| 0.25)).unwrap();
        let part = Partition::new(vec![0, 0, 1, 1]).unwrap();
        let q = quotient_operator(&w, &part).unwrap();
        assert!(q.omega.max_abs_diff(&Matrix::from_fn(2, 2, |_, _| 0.5)) < 1e-15);
        assert_eq!(q.delta, 0.0);

        let r = ring(5);
        let q = quotient_operator(&r, &Partition::singletons(5)).unwrap();
        assert_eq!(&q.omega, r.matrix());
        assert_eq!(q.delta, 0.0);
        assert!(Partition::new(vec![0, 2]).is_err());
    }
}
