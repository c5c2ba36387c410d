use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("normalization error: {0}")]
    Normalization(String),

    /// Adaptive quadrature ran out of subdivisions. The best estimate is kept
    /// so callers can decide whether it is still usable.
    #[error("quadrature did not converge: estimate {estimate:e}, error {error:e}")]
    Quadrature { estimate: f64, error: f64 },

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("unsupported for this model: {0}")]
    Unsupported(String),

    #[error("inversion error: {0}")]
    Inversion(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("posterior error: {0}")]
    Posterior(String),

    #[error("degenerate fit: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("expression error: {0}")]
    Expr(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
