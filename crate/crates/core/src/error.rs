use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("no convergence in {what}: last change {last_change:e} above tolerance {tolerance:e}")]
    Convergence { what: String, last_change: f64, tolerance: f64 },

    #[error("internal consistency check failed: {0}")]
    InternalConsistency(String),

    #[error("imaginary residue {residue:e} exceeds tolerance {tolerance:e}")]
    ImaginaryResidue { residue: f64, tolerance: f64 },

    #[error("size {size} exceeds cap {cap} ({what})")]
    Size { what: String, size: usize, cap: usize },

    #[error("fit error: {0}")]
    Fit(String),

    #[error("eigensolve error: {0}")]
    Eigensolve(String),

    #[error("basis cutoff {cutoff} leaves tail norm {tail:e} above tolerance {tolerance:e}")]
    Cutoff { cutoff: u32, tail: f64, tolerance: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
