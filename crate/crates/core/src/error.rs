use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("grid size must be at least 1")]
    EmptyGrid,
    #[error("scan geometry needs at least one angle")]
    NoAngles,
    #[error("scan geometry needs at least one beamlet")]
    NoBeamlets,
    #[error("{what}: expected {expected}, got {actual}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("elastic-net mix parameter must lie in [1, 2], got {0}")]
    InvalidLambda(f64),
    #[error("penalty weight must be non-negative, got {0}")]
    InvalidRho(f64),
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("phantom grid size {0} is below the minimum of 16")]
    PhantomTooSmall(usize),
    #[error("lsqr breakdown at iteration {0}: non-finite recurrence")]
    LsqrBreakdown(usize),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            actual,
        })
    }
}
