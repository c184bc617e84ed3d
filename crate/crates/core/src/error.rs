use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("non-finite input: {0}")]
    NonFinite(String),
    #[error("quadrature error estimate {estimate:.3e} exceeds target {target:.3e}")]
    QuadratureTolerance { estimate: f64, target: f64 },
    #[error("normalization calibration failed: relative mismatch {0:.3e}")]
    Calibration(f64),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
