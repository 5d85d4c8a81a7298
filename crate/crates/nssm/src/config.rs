//! JSON run configuration.
//!
//! Unknown keys are rejected, and every validation message names the
//! offending key by its dotted path.

use std::path::Path;

use nssm_core::design::DesignRecipe;
use nssm_core::evalharness::{BootstrapConfig, DEFAULT_COVERAGE, DEFAULT_HORIZONS, QUARTERLY_BLOCK};
use nssm_core::gaussmodel::{GaussianSpec, NetworkPolicy, ObsNoise};
use nssm_core::graph::PerturbKind;
use nssm_core::lgss::{Belief, StateNoiseSpec};
use nssm_core::linalg::Matrix;
use nssm_core::poissonmodel::{PoissonSpec, StabilizerConfig};
use nssm_core::simulate::{CoeffPathSpec, EdgePathSpec, GraphKind, LatentIntercept, DEFAULT_BURN_IN, DEFAULT_TARGET_DENSITY};
use nssm_core::tensorcp::CpFilterSpec;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Gaussian,
    Poisson,
    CpTvpvar,
}

fn yes() -> bool {
    true
}
fn one() -> usize {
    1
}
fn two() -> usize {
    2
}
fn first_power() -> Vec<usize> {
    vec![1]
}
fn default_q0() -> f64 {
    1e-4
}
fn default_p0() -> f64 {
    10.0
}
fn default_draws() -> usize {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub model: ModelKind,
    #[serde(default = "one")]
    pub p: usize,
    #[serde(default = "first_power")]
    pub network_powers: Vec<usize>,
    #[serde(default = "yes")]
    pub intercept: bool,
    #[serde(default = "yes")]
    pub network_lags: bool,
    #[serde(default = "yes")]
    pub own_lags: bool,
    #[serde(default)]
    pub covariates: usize,
    /// State-noise variance; the quiet regime when `q1` and `d` are set.
    #[serde(default = "default_q0")]
    pub q0: f64,
    #[serde(default)]
    pub q1: Option<f64>,
    #[serde(default)]
    pub d: Option<f64>,
    #[serde(default)]
    pub sigma2: Option<f64>,
    /// Every coordinate of the initial state mean.
    #[serde(default)]
    pub m0_scale: f64,
    #[serde(rename = "P0_scale", default = "default_p0")]
    pub p0_scale: f64,
    #[serde(default)]
    pub network_policy: NetworkPolicy,
    #[serde(rename = "S", default = "default_draws")]
    pub draws: usize,
    #[serde(default)]
    pub stabilizer: StabilizerConfig,
    #[serde(default)]
    pub rank: Option<usize>,
    #[serde(default = "two")]
    pub sweeps: usize,
}

impl ModelConfig {
    pub fn recipe(&self) -> DesignRecipe {
        DesignRecipe {
            lag_order: self.p,
            include_intercept: self.intercept,
            include_network_lags: self.network_lags,
            include_own_lags: self.own_lags,
            network_powers: self.network_powers.clone(),
            covariate_count: self.covariates,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        let f = |k: &str| format!("model.{k}");
        if self.p == 0 {
            return Err(CliError::config(f("p"), "lag order must be at least 1"));
        }
        if !(self.q0 >= 0.0 && self.q0.is_finite()) {
            return Err(CliError::config(f("q0"), "must be a nonnegative number"));
        }
        match (self.q1, self.d) {
            (Some(q1), Some(d)) => {
                if !(q1 >= self.q0 && q1.is_finite()) {
                    return Err(CliError::config(f("q1"), "must be finite and at least q0"));
                }
                if !(d > 0.0 && d.is_finite()) {
                    return Err(CliError::config(f("d"), "threshold must be positive"));
                }
            }
            (Some(_), None) => return Err(CliError::config(f("d"), "required when q1 is set")),
            (None, Some(_)) => return Err(CliError::config(f("q1"), "required when d is set")),
            (None, None) => {}
        }
        if !(self.p0_scale > 0.0 && self.p0_scale.is_finite()) {
            return Err(CliError::config(f("P0_scale"), "must be positive"));
        }
        if !self.m0_scale.is_finite() {
            return Err(CliError::config(f("m0_scale"), "must be finite"));
        }
        if self.model != ModelKind::Poisson {
            match self.sigma2 {
                None => return Err(CliError::config(f("sigma2"), format!("required for model {:?}", self.model))),
                Some(s) if !(s > 0.0 && s.is_finite()) => return Err(CliError::config(f("sigma2"), "must be positive")),
                _ => {}
            }
        }
        match self.model {
            ModelKind::Poisson => {
                if self.draws == 0 {
                    return Err(CliError::config(f("S"), "need at least one draw"));
                }
                self.stabilizer.validate().map_err(|e| CliError::config(f("stabilizer"), e.to_string()))?;
            }
            ModelKind::CpTvpvar => {
                if self.rank.unwrap_or(0) == 0 {
                    return Err(CliError::config(f("rank"), "required and must be positive for model cp_tvpvar"));
                }
                if self.sweeps == 0 {
                    return Err(CliError::config(f("sweeps"), "must be at least 1"));
                }
            }
            ModelKind::Gaussian => {}
        }
        self.recipe().validate().map_err(|e| CliError::config("model", e.to_string()))
    }

    fn state_noise(&self, k: usize) -> CliResult<StateNoiseSpec> {
        let spec = match (self.q1, self.d) {
            (Some(q1), Some(d)) => StateNoiseSpec::threshold(vec![self.q0; k], vec![q1; k], vec![d; k]),
            _ => StateNoiseSpec::random_walk(Matrix::identity(k).scale(self.q0)),
        };
        spec.map_err(|e| CliError::config("model.q0", e.to_string()))
    }

    fn init(&self, k: usize) -> CliResult<Belief> {
        let b = Belief::new(vec![self.m0_scale; k], Matrix::identity(k).scale(self.p0_scale), self.p as i64 - 1)?;
        Ok(b)
    }

    pub fn gaussian_spec(&self) -> CliResult<GaussianSpec> {
        self.gaussian_spec_with(self.recipe())
    }

    /// Same settings with another design recipe.
    pub fn gaussian_spec_with(&self, recipe: DesignRecipe) -> CliResult<GaussianSpec> {
        let k = recipe.n_columns();
        Ok(GaussianSpec {
            recipe,
            state_noise: self.state_noise(k)?,
            obs_noise: ObsNoise::Scalar(self.sigma2.unwrap_or(1.0)),
            init: self.init(k)?,
            edge: None,
        })
    }

    pub fn poisson_spec(&self) -> CliResult<PoissonSpec> {
        self.poisson_spec_with(self.recipe())
    }

    pub fn poisson_spec_with(&self, recipe: DesignRecipe) -> CliResult<PoissonSpec> {
        let k = recipe.n_columns();
        Ok(PoissonSpec { recipe, state_noise: self.state_noise(k)?, init: self.init(k)? })
    }

    pub fn cp_spec(&self, seed: u64) -> CpFilterSpec {
        let mut spec = CpFilterSpec::new(self.rank.unwrap_or(1), self.p, self.sigma2.unwrap_or(1.0));
        spec.sweeps = self.sweeps;
        spec.state_var = [self.q0; 3];
        spec.seed = seed;
        spec
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Baseline {
    /// The same model without network lag columns.
    #[default]
    NoNetwork,
    /// Constant-coefficient least squares on the full design.
    StaticOls,
    None,
}

fn default_horizons() -> Vec<usize> {
    DEFAULT_HORIZONS.to_vec()
}
fn default_coverage() -> f64 {
    DEFAULT_COVERAGE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapSection {
    #[serde(default)]
    pub block_len: Option<usize>,
    #[serde(default = "bootstrap_reps")]
    pub replicates: usize,
    #[serde(default = "bootstrap_level")]
    pub level: f64,
}

fn bootstrap_reps() -> usize {
    2000
}
fn bootstrap_level() -> f64 {
    0.95
}

impl Default for BootstrapSection {
    fn default() -> Self {
        Self { block_len: None, replicates: bootstrap_reps(), level: bootstrap_level() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    /// Explicit origins; overrides `first_origin`.
    #[serde(default)]
    pub origins: Option<Vec<usize>>,
    /// First origin of an expanding window. Defaults to half the sample.
    #[serde(default)]
    pub first_origin: Option<usize>,
    #[serde(default = "default_coverage")]
    pub coverage: f64,
    #[serde(default)]
    pub bootstrap: BootstrapSection,
    #[serde(default)]
    pub baseline: Baseline,
    #[serde(default)]
    pub stress: Vec<PerturbKind>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            horizons: default_horizons(),
            origins: None,
            first_origin: None,
            coverage: default_coverage(),
            bootstrap: BootstrapSection::default(),
            baseline: Baseline::default(),
            stress: Vec::new(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> CliResult<()> {
        if self.horizons.is_empty() || self.horizons[0] == 0 || self.horizons.windows(2).any(|w| w[0] >= w[1]) {
            return Err(CliError::config("evaluation.horizons", "must be positive and strictly ascending"));
        }
        if !(self.coverage > 0.0 && self.coverage < 1.0) {
            return Err(CliError::config("evaluation.coverage", "must be in (0, 1)"));
        }
        self.bootstrap_config(0)
            .validate()
            .map_err(|e| CliError::config("evaluation.bootstrap", e.to_string()))
    }

    pub fn bootstrap_config(&self, seed: u64) -> BootstrapConfig {
        BootstrapConfig {
            block_len: self.bootstrap.block_len.unwrap_or(QUARTERLY_BLOCK),
            replicates: self.bootstrap.replicates,
            seed,
            level: self.bootstrap.level,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Gaussian,
    Poisson,
}

fn default_graph() -> GraphKind {
    GraphKind::LatentDistance { dim: 2, scale: 1.0, intercept: LatentIntercept::TargetDensity(DEFAULT_TARGET_DENSITY) }
}
fn default_nodes() -> usize {
    20
}
fn default_len() -> usize {
    200
}
fn default_burn() -> usize {
    DEFAULT_BURN_IN
}
fn default_sim_sigma2() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub family: Family,
    #[serde(default = "default_nodes")]
    pub n_nodes: usize,
    /// Rows kept after burn-in.
    #[serde(default = "default_len")]
    pub t: usize,
    #[serde(default = "default_burn")]
    pub burn_in: usize,
    #[serde(default = "default_graph")]
    pub graph: GraphKind,
    /// Coefficient path generator; dimension must match the model design.
    #[serde(default)]
    pub coefficients: Option<CoeffPathSpec>,
    #[serde(default = "default_sim_sigma2")]
    pub sigma2: f64,
    /// Time-varying edges; the graph section is ignored when set.
    #[serde(default)]
    pub dynamic_edges: Option<EdgePathSpec>,
    #[serde(default)]
    pub eta_cap: Option<f64>,
}

impl SimConfig {
    pub fn validate(&self, recipe: &DesignRecipe) -> CliResult<()> {
        if self.n_nodes < 2 {
            return Err(CliError::config("simulation.n_nodes", "need at least 2 nodes"));
        }
        if self.t <= recipe.lag_order {
            return Err(CliError::config("simulation.t", "must exceed the lag order"));
        }
        if !(self.sigma2 > 0.0 && self.sigma2.is_finite()) {
            return Err(CliError::config("simulation.sigma2", "must be positive"));
        }
        if recipe.covariate_count > 0 {
            return Err(CliError::config("model.covariates", "simulation does not generate covariates"));
        }
        let k = recipe.n_columns();
        let coeffs = self.coefficient_spec(k)?;
        if coeffs.dim() != k {
            return Err(CliError::config("simulation.coefficients.init", format!("has {} entries, the design has {k} columns", coeffs.dim())));
        }
        coeffs.validate().map_err(|e| CliError::config("simulation.coefficients", e.to_string()))
    }

    /// Configured paths, or defaults for the three-column design.
    pub fn coefficient_spec(&self, k: usize) -> CliResult<CoeffPathSpec> {
        if let Some(c) = &self.coefficients {
            return Ok(c.clone());
        }
        if k != 3 {
            return Err(CliError::config("simulation.coefficients", format!("required for a design with {k} columns")));
        }
        // Clamps keep |beta1| + |beta2| below one so default panels stay
        // bounded over long samples.
        Ok(match self.family {
            Family::Gaussian => {
                let mut c = CoeffPathSpec::network_var1([0.0, 0.35, 0.25], 0.005, 1.0);
                c.clamp = Some((vec![-1e3, -0.6, -0.35], vec![1e3, 0.6, 0.35]));
                c
            }
            Family::Poisson => {
                let mut c = CoeffPathSpec::constant(vec![1.0, 0.03, 0.03]);
                c.rw_sd = vec![0.001; 3];
                c.clamp = Some((vec![0.5, 0.0, 0.0], vec![1.5, 0.04, 0.04]));
                c
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    /// Break threshold `c sqrt(log T / T)`; data-scaled default when absent.
    #[serde(default)]
    pub break_c: Option<f64>,
}

fn default_irf_h() -> usize {
    8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IrfConfig {
    /// Anchor row; defaults to the last row that leaves room for `horizon`.
    #[serde(default)]
    pub time: Option<usize>,
    #[serde(default = "default_irf_h")]
    pub horizon: usize,
    #[serde(default)]
    pub shock: usize,
}

impl Default for IrfConfig {
    fn default() -> Self {
        Self { time: None, horizon: default_irf_h(), shock: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub evaluation: Option<EvalConfig>,
    #[serde(default)]
    pub simulation: Option<SimConfig>,
    #[serde(default)]
    pub diagnostics: Option<DiagnoseConfig>,
    #[serde(default)]
    pub irf: Option<IrfConfig>,
    #[serde(default)]
    pub perturb: Option<PerturbKind>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub threads: Option<usize>,
}

impl RunConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let field = if path.is_empty() || path == "." { String::from("<root>") } else { path };
            CliError::config(field, e.inner().to_string())
        })
    }

    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        Self::parse(&text)
    }

    pub fn model(&self) -> CliResult<&ModelConfig> {
        let m = self.model.as_ref().ok_or_else(|| CliError::config("model", "section is required for this command"))?;
        m.validate()?;
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let e = RunConfig::parse(r#"{"model": {"model": "gaussian", "sigma2": 1.0, "sigmaa": 2}}"#).unwrap_err();
        match e {
            CliError::Config { field, message } => {
                assert_eq!(field, "model.sigmaa");
                assert!(message.contains("unknown field"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn type_error_carries_path() {
        let e = RunConfig::parse(r#"{"model": {"model": "gaussian", "p": "two"}}"#).unwrap_err();
        assert!(matches!(e, CliError::Config { ref field, .. } if field == "model.p"), "{e:?}");
    }

    #[test]
    fn missing_sigma2_is_reported() {
        let c = RunConfig::parse(r#"{"model": {"model": "gaussian"}}"#).unwrap();
        let e = c.model().unwrap_err();
        assert!(matches!(e, CliError::Config { ref field, .. } if field == "model.sigma2"));
    }

    #[test]
    fn spec_keys_round_trip() {
        let c = RunConfig::parse(
            r#"{"model": {"model": "poisson", "p": 2, "q0": 1e-5, "q1": 1e-2, "d": 0.1, "m0_scale": 0.0,
                "P0_scale": 4.0, "network_policy": "oracle", "S": 50,
                "stabilizer": {"phi": 0.9, "eta_max": 10.0, "lambda_max": 1e4, "enabled": true}}}"#,
        )
        .unwrap();
        let m = c.model().unwrap();
        assert_eq!((m.p, m.draws, m.network_policy), (2, 50, NetworkPolicy::Oracle));
        let spec = m.poisson_spec().unwrap();
        assert_eq!(spec.init.cov[(0, 0)], 4.0);
        assert_eq!(spec.recipe.n_columns(), 5);
    }

    #[test]
    fn threshold_needs_both_keys() {
        let c = RunConfig::parse(r#"{"model": {"model": "gaussian", "sigma2": 1.0, "q1": 0.1}}"#).unwrap();
        assert!(matches!(c.model().unwrap_err(), CliError::Config { ref field, .. } if field == "model.d"));
    }
}
