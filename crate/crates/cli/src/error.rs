use serde_json::json;
use thiserror::Error;

use loose_decoy::Error as CoreError;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("malformed input {path}: {message}")]
    MalformedInput { path: String, message: String },

    /// The estimate admits no solution, or no key exists where one was
    /// required.
    #[error("infeasible: {message}")]
    Infeasible {
        message: String,
        violation: Option<f64>,
    },

    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },

    #[error("internal error: {0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Config(_) | CliError::MalformedInput { .. } => 1,
            CliError::Infeasible { .. } => 2,
            CliError::Io { .. } | CliError::Internal(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Config(_) => "config",
            CliError::MalformedInput { .. } => "malformed-input",
            CliError::Infeasible { .. } => "infeasible",
            CliError::Io { .. } => "io",
            CliError::Internal(_) => "internal",
        }
    }

    /// Single-line JSON error object for the error stream.
    pub fn to_json(&self) -> String {
        let mut body = json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let CliError::Infeasible {
            violation: Some(v), ..
        } = self
        {
            body["violation"] = json!(v);
        }
        json!({ "error": body }).to_string()
    }

    /// Wraps a library error raised while evaluating `context`.
    pub fn from_core(context: &str, err: CoreError) -> Self {
        let message = format!("{context}: {err}");
        match err {
            CoreError::Infeasible { violation } => CliError::Infeasible {
                message,
                violation: Some(violation),
            },
            CoreError::NoSecureDistance | CoreError::NoKeyAtAnyIntensity => CliError::Infeasible {
                message,
                violation: None,
            },
            CoreError::MissingVacuumData => CliError::Usage(message),
            CoreError::Config(_)
            | CoreError::Domain(_)
            | CoreError::IntensityOrdering { .. }
            | CoreError::InsufficientStatistics { .. } => CliError::Config(message),
            CoreError::ZeroYield | CoreError::NoSinglePhotonBound => CliError::Internal(message),
        }
    }
}
