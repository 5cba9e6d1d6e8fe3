use std::path::PathBuf;

use thiserror::Error;

/// A declared looser-than relation that brute-force subset checking does not support.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OrderViolation {
    /// The restriction that declares the looser one.
    pub tighter: String,
    /// The restriction declared to be strictly less restricted.
    pub looser: String,
}

impl std::fmt::Display for OrderViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} < {} declared but not a strict subset", self.tighter, self.looser)
    }
}

#[derive(Debug, Error)]
pub enum CsrlError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("construction failed: {0}")]
    Construction(String),

    #[error("order verification failed: {}", join_violations(.0))]
    Verification(Vec<OrderViolation>),

    #[error("config error: {0}")]
    Config(String),

    #[error("load error at `{field}`: {reason}")]
    Load { field: String, reason: String },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[OrderViolation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

impl CsrlError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CsrlError::Io { path: path.into(), source }
    }

    pub(crate) fn load(field: impl Into<String>, reason: impl Into<String>) -> Self {
        CsrlError::Load { field: field.into(), reason: reason.into() }
    }
}

pub type Result<T, E = CsrlError> = std::result::Result<T, E>;
