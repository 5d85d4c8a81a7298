use std::path::Path;

use nssm_core::Error as CoreError;
use serde_json::json;

/// Exit status for configuration and input-data errors.
pub const EXIT_CONFIG: i32 = 2;
/// Exit status for numerical failures inside a model.
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_IO: i32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },
    #[error("invalid input {path}: {message}")]
    Input { path: String, message: String },
    #[error("{0}")]
    Model(#[from] CoreError),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Config { field: field.into(), message: message.into() }
    }

    pub fn input(path: &Path, message: impl Into<String>) -> Self {
        CliError::Input { path: path.display().to_string(), message: message.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } | CliError::Input { .. } => EXIT_CONFIG,
            CliError::Model(e) if is_numerical(e) => EXIT_NUMERICAL,
            CliError::Model(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
        }
    }

    /// Structured payload written to stderr on failure.
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            CliError::Config { field, message } => json!({"error": "config", "field": field, "message": message}),
            CliError::Input { path, message } => json!({"error": "input", "path": path, "message": message}),
            CliError::Model(e) => json!({
                "error": if is_numerical(e) { "numerical" } else { "model_input" },
                "kind": kind_name(e),
                "message": e.to_string(),
            }),
            CliError::Io { path, source } => json!({"error": "io", "path": path, "message": source.to_string()}),
        }
    }
}

fn is_numerical(e: &CoreError) -> bool {
    matches!(
        e,
        CoreError::NotPositiveDefinite(_)
            | CoreError::SingularInnovation { .. }
            | CoreError::NegativeEigenvalue { .. }
            | CoreError::NonConvergence { .. }
            | CoreError::PeriodicChain { .. }
            | CoreError::RewireInfeasible { .. }
            | CoreError::GenerationCap { .. }
            | CoreError::AllCandidatesFailed(_)
    )
}

fn kind_name(e: &CoreError) -> &'static str {
    match e {
        CoreError::Dimension(_) => "dimension",
        CoreError::InvalidInput(_) => "invalid_input",
        CoreError::EmptyDesign => "empty_design",
        CoreError::NotPositiveDefinite(_) => "not_positive_definite",
        CoreError::SingularInnovation { .. } => "singular_innovation",
        CoreError::NegativeEigenvalue { .. } => "negative_eigenvalue",
        CoreError::NonConvergence { .. } => "non_convergence",
        CoreError::PeriodicChain { .. } => "periodic_chain",
        CoreError::RewireInfeasible { .. } => "rewire_infeasible",
        CoreError::GenerationCap { .. } => "generation_cap",
        CoreError::Unsupported(_) => "unsupported",
        CoreError::Missing(_) => "missing",
        CoreError::AllCandidatesFailed(_) => "all_candidates_failed",
    }
}
