use thiserror::Error;

use crate::nn::NnError;
use crate::safety::SafetyError;

/// Domain violations raised by the closed-form radio and channel mathematics.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MathError {
    #[error("{name} = {value} is outside its domain ({expected})")]
    Domain {
        name: &'static str,
        value: f64,
        expected: &'static str,
    },
    #[error("blocklength {m} leaves no PAoI budget: m/B = {delay_s} s >= alpha = {alpha_s} s")]
    NoPaoiBudget { m: u32, delay_s: f64, alpha_s: f64 },
    #[error("channel gain {gain} of node {node} is degenerate")]
    DegenerateChannel { node: usize, gain: f64 },
}

impl MathError {
    pub(crate) fn domain(name: &'static str, value: f64, expected: &'static str) -> Self {
        MathError::Domain {
            name,
            value,
            expected,
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to parse config: {0}")]
    Parse(String),
    #[error("invalid config value for `{key}`: {reason}")]
    Invalid { key: String, reason: String },
}

impl ConfigError {
    pub fn invalid(key: &str, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            key: key.to_string(),
            reason: reason.into(),
        }
    }
}

/// Crate-wide error.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Math(#[from] MathError),
    #[error(transparent)]
    Safety(#[from] SafetyError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("oracle validation failed: {0}")]
    OracleFailure(String),
}

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::OracleFailure(_) => 3,
            Error::Io { .. } => 4,
            Error::Nn(NnError::Io { .. }) => 4,
            _ => 1,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
