use thiserror::Error;

/// Errors produced by estimation, fitting, and simulation routines.
///
/// Variants split into two classes. [`Error::is_input_error`] returns true
/// for problems with the caller's data or configuration; everything else is
/// a numerical failure encountered during computation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{0}")]
    Invalid(String),

    #[error("unknown area {0}")]
    UnknownArea(u32),

    #[error("area {0} has no sampled units")]
    NoSampledUnits(u32),

    #[error("robust scale is zero: {0}")]
    ZeroScale(&'static str),

    #[error("design matrix is rank deficient or numerically singular")]
    RankDeficient,

    #[error("no convergence after {iterations} iterations (last update {delta:.3e})")]
    NoConvergence { iterations: usize, delta: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    /// True when the error stems from caller-provided data or configuration
    /// rather than from a numerical breakdown.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Empty(_) | Error::Invalid(_) | Error::UnknownArea(_) | Error::NoSampledUnits(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Invalid(msg.into())
}
