//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the simulator and its solvers.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A precondition on the inputs was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A numerical routine could not complete (rank deficiency, loss of
    /// positive definiteness, ...).
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// Bisection could not bracket the requested target value.
    #[error("bisection bracket failure: {0}")]
    BracketFailure(String),

    /// The experiment configuration is inconsistent.
    #[error("config error: {0}")]
    Config(String),

    /// Filesystem I/O failed.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
