use fracsource_core::Error as CoreError;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Invalid invocation or configuration; exit code 1.
    #[error("invalid config at `{key}`: {message}")]
    Config { key: String, message: String },
    /// Numerical failure; exit code 2.
    #[error("numerical failure: {0}")]
    Numerical(CoreError),
    /// A result that exists but cannot be trusted; exit code 2.
    #[error("numerical failure: {0}")]
    Untrusted(String),
    #[error("cannot write {path}: {source}")]
    Output { path: String, source: std::io::Error },
}

impl CliError {
    pub fn config(key: &str, message: impl Into<String>) -> Self {
        CliError::Config {
            key: key.to_string(),
            message: message.into(),
        }
    }

    /// Parameter errors become configuration errors under `section`, the
    /// rest are numerical failures.
    pub fn from_core_at(section: &str, e: CoreError) -> Self {
        match e {
            CoreError::InvalidParameter { name, reason } => CliError::Config {
                key: format!("{section}.{name}"),
                message: reason,
            },
            CoreError::CoefficientViolation { .. } => CliError::Config {
                key: section.to_string(),
                message: e.to_string(),
            },
            other => CliError::Numerical(other),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 1,
            _ => 2,
        }
    }

    /// Machine-readable form written next to the outputs of a failed run.
    pub fn diagnostic(&self) -> Diagnostic {
        let kind = match self {
            CliError::Config { .. } => "invalid-config",
            CliError::Numerical(e) => match e {
                CoreError::QuadratureFailure { .. } => "quadrature-failure",
                CoreError::InsufficientData(_) => "insufficient-data",
                CoreError::IllConditioned { .. } => "ill-conditioned",
                CoreError::BlindSpot(_) => "blind-spot",
                CoreError::Divergent(_) => "divergent",
                _ => "numerical",
            },
            CliError::Untrusted(_) => "untrusted",
            CliError::Output { .. } => "output",
        };
        Diagnostic {
            error: kind,
            exit_code: self.exit_code(),
            message: self.to_string(),
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        CliError::Numerical(e)
    }
}

#[derive(Debug, Serialize)]
pub struct Diagnostic {
    pub error: &'static str,
    pub exit_code: i32,
    pub message: String,
}
