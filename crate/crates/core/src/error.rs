use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("state {0} lies outside the truncated state space")]
    StateOutOfRange(String),

    #[error("state index {index} out of range for {len} states")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("relative value iteration did not converge in {iterations} sweeps (residual {residual:e})")]
    RviNotConverged { iterations: usize, residual: f64 },

    #[error("stationary distribution did not converge in {iterations} steps (change {change:e})")]
    EvaluationNotConverged { iterations: usize, change: f64 },

    #[error("no feasible multiplier found: D(lambda={lambda}) = {avg_transmissions} exceeds budget {gamma_max}")]
    MultiplierCapExhausted {
        lambda: f64,
        avg_transmissions: f64,
        gamma_max: f64,
    },

    #[error("policy shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("unsupported policy file version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("malformed policy file at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("invalid slice: {0}")]
    InvalidSlice(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
