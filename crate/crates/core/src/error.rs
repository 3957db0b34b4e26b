use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the blockage-sensing pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid {what}: {reason}")]
    InvalidInput { what: &'static str, reason: String },

    #[error("band mismatch: {0}")]
    BandMismatch(String),

    #[error("baseline coefficient is zero at frequency index {index}")]
    ZeroBaseline { index: usize },

    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },

    #[error("degenerate geometry: {0}")]
    Geometry(String),

    #[error("all {count} samples fall outside the bin range [{lo}, {hi}] dB")]
    EmptyHistogram { count: usize, lo: f64, hi: f64 },

    #[error("distributions do not share bin edges")]
    EdgeMismatch,

    #[error("no PDP peak satisfies the extraction thresholds")]
    NoPeaks,

    #[error("path length {length_m} m is shorter than the line-of-sight length {los_m} m")]
    UnphysicalPathLength { length_m: f64, los_m: f64 },

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(
        "{path}: row count mismatch: header declares n_points = {expected}, found {found} rows"
    )]
    RowCount {
        path: String,
        expected: usize,
        found: usize,
    },

    #[error("session config: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidInput {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the numerical model rather than by malformed
    /// input data (the CLI maps these to a distinct exit code).
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Geometry(_)
                | Error::EmptyHistogram { .. }
                | Error::EdgeMismatch
                | Error::NoPeaks
                | Error::UnphysicalPathLength { .. }
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
