//! Network design matrices `X_t = [1, W^r y_{t-l}, y_{t-l}, Z_t]` and
//! pseudo-observation augmentation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ensure, Error, Result};
use crate::graph::WeightMatrix;
use crate::linalg::{axpy, Matrix};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DesignRecipe {
    pub lag_order: usize,
    pub include_intercept: bool,
    pub include_network_lags: bool,
    pub include_own_lags: bool,
    pub network_powers: Vec<usize>,
    pub covariate_count: usize,
}

impl Default for DesignRecipe {
    fn default() -> Self {
        Self {
            lag_order: 1,
            include_intercept: true,
            include_network_lags: true,
            include_own_lags: true,
            network_powers: vec![1],
            covariate_count: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnLabel {
    Intercept,
    NetworkLag { power: usize, lag: usize },
    OwnLag { lag: usize },
    Covariate { index: usize },
}

impl fmt::Display for ColumnLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            ColumnLabel::Intercept => f.write_str("intercept"),
            ColumnLabel::NetworkLag { power: 1, lag } => write!(f, "WY_lag_{lag}"),
            ColumnLabel::NetworkLag { power, lag } => write!(f, "W{power}Y_lag_{lag}"),
            ColumnLabel::OwnLag { lag } => write!(f, "Y_lag_{lag}"),
            ColumnLabel::Covariate { index } => write!(f, "Z_col_{index}"),
        }
    }
}

impl DesignRecipe {
    /// Intercept plus one network and one own-lag column per lag.
    pub fn full(lag_order: usize, covariate_count: usize) -> Self {
        Self { lag_order, covariate_count, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.lag_order >= 1, InvalidInput, "lag order must be at least 1");
        ensure!(self.network_powers.iter().all(|&r| r >= 1), InvalidInput, "network powers must be positive");
        if self.n_columns() == 0 {
            return Err(Error::EmptyDesign);
        }
        Ok(())
    }

    fn network_terms(&self) -> usize {
        if self.include_network_lags {
            self.network_powers.len()
        } else {
            0
        }
    }

    /// Number of columns `K`.
    pub fn n_columns(&self) -> usize {
        usize::from(self.include_intercept)
            + self.network_terms() * self.lag_order
            + usize::from(self.include_own_lags) * self.lag_order
            + self.covariate_count
    }

    pub fn labels(&self) -> Vec<ColumnLabel> {
        let mut out = Vec::with_capacity(self.n_columns());
        if self.include_intercept {
            out.push(ColumnLabel::Intercept);
        }
        if self.include_network_lags {
            for &power in &self.network_powers {
                for lag in 1..=self.lag_order {
                    out.push(ColumnLabel::NetworkLag { power, lag });
                }
            }
        }
        if self.include_own_lags {
            for lag in 1..=self.lag_order {
                out.push(ColumnLabel::OwnLag { lag });
            }
        }
        for index in 1..=self.covariate_count {
            out.push(ColumnLabel::Covariate { index });
        }
        out
    }

    pub fn column_of(&self, label: ColumnLabel) -> Option<usize> {
        self.labels().iter().position(|&l| l == label)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignMatrix {
    entries: Matrix,
    labels: Vec<ColumnLabel>,
}

impl DesignMatrix {
    pub fn matrix(&self) -> &Matrix {
        &self.entries
    }

    pub fn into_matrix(self) -> Matrix {
        self.entries
    }

    pub fn labels(&self) -> &[ColumnLabel] {
        &self.labels
    }

    pub fn label_names(&self) -> Vec<String> {
        self.labels.iter().map(|l| format!("{l}")).collect()
    }

    pub fn rows(&self) -> usize {
        self.entries.rows()
    }

    pub fn cols(&self) -> usize {
        self.entries.cols()
    }
}

/// `y_lags[l - 1]` holds `y_{t-l}`. `z` may be `None` when the recipe has no
/// covariates.
pub fn build_design(
    w: &WeightMatrix,
    y_lags: &[Vec<f64>],
    z: Option<&Matrix>,
    recipe: &DesignRecipe,
) -> Result<DesignMatrix> {
    recipe.validate()?;
    let n = w.n_nodes();
    let p = recipe.lag_order;
    ensure!(y_lags.len() == p, Dimension, "lag block: expected {p} lagged vectors, got {}", y_lags.len());
    for (l, y) in y_lags.iter().enumerate() {
        ensure!(y.len() == n, Dimension, "lag block: y_(t-{}) has length {}, network has {n} nodes", l + 1, y.len());
    }
    let q = recipe.covariate_count;
    match z {
        Some(z) => ensure!(z.rows() == n && z.cols() == q, Dimension,
            "covariate block: expected {n}x{q}, got {}x{}", z.rows(), z.cols()),
        None => ensure!(q == 0, Dimension, "covariate block: recipe expects {q} covariates, none supplied"),
    }
    let k = recipe.n_columns();
    let mut x = Matrix::zeros(n, k);
    let mut col = 0;
    if recipe.include_intercept {
        x.set_col(col, &vec![1.0; n]);
        col += 1;
    }
    if recipe.include_network_lags {
        for &r in &recipe.network_powers {
            for y in y_lags {
                x.set_col(col, &w.apply_power(y, r));
                col += 1;
            }
        }
    }
    if recipe.include_own_lags {
        for y in y_lags {
            x.set_col(col, y);
            col += 1;
        }
    }
    if let Some(z) = z {
        for m in 0..q {
            x.set_col(col, &z.col(m));
            col += 1;
        }
    }
    ensure!(x.is_finite(), InvalidInput, "design has non-finite entries");
    Ok(DesignMatrix { entries: x, labels: recipe.labels() })
}

/// `X theta` for the design [`build_design`] would produce, without forming
/// `X`. `w_apply` computes `W v`.
pub fn design_times(
    w_apply: impl Fn(&[f64]) -> Vec<f64>,
    y_lags: &[Vec<f64>],
    z: Option<&Matrix>,
    recipe: &DesignRecipe,
    theta: &[f64],
) -> Vec<f64> {
    let n = y_lags[0].len();
    let mut col = 0;
    let mut out = vec![0.0; n];
    if recipe.include_intercept {
        out.iter_mut().for_each(|o| *o = theta[0]);
        col += 1;
    }
    if recipe.include_network_lags {
        for &r in &recipe.network_powers {
            for y in y_lags {
                let mut v = y.clone();
                for _ in 0..r {
                    v = w_apply(&v);
                }
                axpy(theta[col], &v, &mut out);
                col += 1;
            }
        }
    }
    if recipe.include_own_lags {
        for y in y_lags {
            axpy(theta[col], y, &mut out);
            col += 1;
        }
    }
    if let Some(z) = z {
        let zg = z.mul_vec(&theta[col..col + recipe.covariate_count]);
        axpy(1.0, &zg, &mut out);
    }
    out
}

/// `B = beta1 W + beta2 I`.
pub fn spillover_matrix(beta1: f64, beta2: f64, w: &WeightMatrix) -> Matrix {
    let mut b = w.matrix().scale(beta1);
    b.add_diag(beta2);
    b
}

/// Linear summaries `S Y_t` observed with covariance `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryAugment {
    s: Matrix,
    v: Matrix,
}

impl SummaryAugment {
    pub fn new(s: Matrix, v: Matrix) -> Result<Self> {
        ensure!(v.is_square() && v.rows() == s.rows(), Dimension,
            "summary covariance is {}x{}, expected {m}x{m}", v.rows(), v.cols(), m = s.rows());
        v.cholesky().map_err(|_| Error::NotPositiveDefinite(String::from("summary covariance V")))?;
        Ok(Self { s, v })
    }

    pub fn s(&self) -> &Matrix {
        &self.s
    }

    pub fn v(&self) -> &Matrix {
        &self.v
    }
}

/// `H = [X; S X]`, `R = blockdiag(R, V)`, node rows first.
pub fn augment_summaries(x: &DesignMatrix, r: &Matrix, aug: &SummaryAugment) -> Result<(Matrix, Matrix)> {
    let n = x.rows();
    ensure!(aug.s.cols() == n, Dimension, "summary operator has {} columns, design has {n} rows", aug.s.cols());
    ensure!(r.rows() == n && r.cols() == n, Dimension, "node covariance is {}x{}, expected {n}x{n}", r.rows(), r.cols());
    let h = Matrix::vstack(x.matrix(), &aug.s.mul(x.matrix()))?;
    Ok((h, Matrix::block_diag(r, &aug.v)))
}
