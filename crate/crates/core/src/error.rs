use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("design recipe produces an empty design")]
    EmptyDesign,
    #[error("matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),
    #[error("innovation covariance is numerically singular (condition estimate {condition:.3e})")]
    SingularInnovation { condition: f64 },
    #[error("covariance has eigenvalue {value:.3e} below the -1e-10 tolerance")]
    NegativeEigenvalue { value: f64 },
    #[error("{routine} did not converge after {iterations} iterations (last estimate {last})")]
    NonConvergence {
        routine: &'static str,
        iterations: usize,
        last: f64,
    },
    #[error("invariant vector iteration did not converge after {iterations} iterations (residual {residual:.3e}); the chain may be periodic, apply damping such as mix_uniform")]
    PeriodicChain { iterations: usize, residual: f64 },
    #[error("degree-preserving rewiring infeasible: {failed} failed swap attempts")]
    RewireInfeasible { failed: usize },
    #[error("linear predictor {eta:.3} exceeds the generation cap {cap}; use smaller coefficients")]
    GenerationCap { eta: f64, cap: f64 },
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("missing input: {0}")]
    Missing(String),
    #[error("all candidates failed: {0}")]
    AllCandidatesFailed(String),
}

pub type Result<T> = core::result::Result<T, Error>;

macro_rules! ensure {
    ($cond:expr, $variant:ident, $($fmt:tt)+) => {
        if !$cond {
            return Err($crate::Error::$variant(alloc::format!($($fmt)+)));
        }
    };
}
pub(crate) use ensure;
