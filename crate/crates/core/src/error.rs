use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Shape {
        op: &'static str,
        lhs: (usize, usize),
        rhs: (usize, usize),
    },

    #[error("rank deficient input: row {row} has residual norm {residual:.3e}")]
    RankDeficient { row: usize, residual: f64 },

    #[error("svd did not converge after {sweeps} sweeps (off-diagonal residual {residual:.3e})")]
    SvdNoConvergence { sweeps: usize, residual: f64 },

    #[error("basis exhausted: requested {requested} vectors, {available} available")]
    BasisExhausted { requested: usize, available: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("label {label} out of range (num classes {classes})")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("stale activation cache (cache generation {cache}, model generation {model})")]
    StaleCache { cache: u64, model: u64 },

    #[error("config error at `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: malformed result file: {msg}")]
    MalformedResult { path: PathBuf, msg: String },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by bad user input (config, CSV, result files,
    /// a rank budget larger than the basis).
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Config { .. } | Error::Parse { .. } | Error::MalformedResult { .. } | Error::BasisExhausted { .. }
        )
    }
}
