use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("point outside domain: {0}")]
    OutsideDomain(String),
    #[error("empirical measure has no particles")]
    EmptyMeasure,
    #[error("controllability Gramian is singular: target unreachable")]
    SingularGramian,
    #[error("event is infeasible: {0}")]
    Infeasible(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    /// True for errors that stem from numerics (unreachable targets, non-converging solves)
    /// rather than from malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::SingularGramian | Error::Infeasible(_) | Error::Numerical(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
