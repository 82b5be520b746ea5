use crate::measure::MeasureError;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Measure(#[from] MeasureError),
    #[error("invalid input: {0}")]
    Invalid(String),
    /// Requested depth needs more precision than 64-bit integers and `f64`
    /// provide.
    #[error("precision exhausted: {0}")]
    Precision(String),
    #[error("level {level} is infeasible: {reason}")]
    Infeasible { level: usize, reason: String },
    #[error("quadrature did not converge (achieved {achieved:e})")]
    Accuracy { achieved: f64 },
}

impl From<crate::quadrature::NotConverged> for Error {
    fn from(e: crate::quadrature::NotConverged) -> Self {
        Error::Accuracy { achieved: e.achieved }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
