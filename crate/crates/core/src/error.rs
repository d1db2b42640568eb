use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeomError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("unsupported input: {0}")]
    Unsupported(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    /// The direction used for the cone-control constant lies on the relative
    /// boundary of the cone, so no finite constant exists.
    #[error("unbounded cone-control constant: {0}")]
    UnboundedGamma(String),

    #[error("hypotheses are contradictory: {0}")]
    Contradiction(String),

    #[error("insufficient sample: {0}")]
    InsufficientSample(String),

    /// A proved inequality or conclusion failed. Always a bug in an oracle.
    #[error("theorem violation: {0}")]
    TheoremViolation(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(GeomError::DimensionMismatch { expected, got })
    }
}
