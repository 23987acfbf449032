//! Command-line experiments over the fedfence simulator: protocol runs,
//! parameter sweeps, and the secure-aggregation, CLT and estimator checks.

pub mod commands;
pub mod config;
pub mod presets;

use fedfence_core::Error;

/// Errors carry the process exit code they map to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Schema(String),
    #[error("estimator precondition: {0}")]
    Precondition(String),
    #[error("check failed: {0}")]
    Check(String),
    #[error("io error: {0}")]
    Io(String),
    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Schema(_) => 2,
            CliError::Precondition(_) => 3,
            CliError::Check(_) | CliError::Io(_) | CliError::Core(_) => 1,
        }
    }

    /// Classifies a validation failure raised before any round runs.
    pub fn from_validation(e: Error) -> Self {
        match e {
            Error::TooFewRows { .. }
            | Error::InvalidSections { .. }
            | Error::InvalidFilter(_)
            | Error::InvalidTrim(_) => CliError::Precondition(format!("estimator: {e}")),
            other => CliError::Schema(other.to_string()),
        }
    }
}

/// Seed precedence: explicit flag, then the config file, then
/// `FEDFENCE_SEED`, then 0.
pub fn resolve_seed(flag: Option<u64>, config: Option<u64>) -> Result<u64, CliError> {
    if let Some(s) = flag.or(config) {
        return Ok(s);
    }
    match std::env::var("FEDFENCE_SEED") {
        Ok(v) => v.trim().parse().map_err(|_| {
            CliError::Schema(format!("FEDFENCE_SEED: not an unsigned integer: {v:?}"))
        }),
        Err(_) => Ok(0),
    }
}

/// CSV float: shortest round-trip form, with exponents for tiny values.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

/// CSV cell for an optional float; missing values are empty.
pub fn cell(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Writes `text` to `path`, or stdout when `path` is `None` or `-`.
pub fn emit(path: Option<&std::path::Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))
        }
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}
