//! Error type shared by all modules.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("singular input: {0}")]
    SingularInput(String),
    #[error("matrix assembly did not converge under quadrature refinement: {0}")]
    AssemblyFailure(String),
    #[error("numerical failure: {0}")]
    NumericFailure(String),
    #[error("eigenpair rejected for (m={m}, n={n}): residual {residual:e}")]
    EigenpairRejected { m: usize, n: usize, residual: f64 },
    #[error("basis caps too small: retained mode (m={m}, n={n}) touches a cap")]
    CapTooSmall { m: usize, n: usize },
    #[error("Born recursion diverged at node {node} (frequency {frequency})")]
    DivergenceDetected { node: usize, frequency: f64 },
    #[error("measure undefined: {0}")]
    MeasureUndefined(String),
    #[error("hypothesis violated: {0}")]
    OutOfHypothesis(String),
    #[error("malformed input: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// True for errors caused by numerical breakdown rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::AssemblyFailure(_)
                | Error::NumericFailure(_)
                | Error::EigenpairRejected { .. }
                | Error::CapTooSmall { .. }
                | Error::DivergenceDetected { .. }
                | Error::MeasureUndefined(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
