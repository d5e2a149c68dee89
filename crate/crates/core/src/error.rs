use crate::RobotId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid regressor configuration: {0}")]
    InvalidRegressor(String),

    #[error("estimator not ready: the sample window is empty")]
    EstimatorNotReady,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("no active robots")]
    NoActiveRobots,

    #[error("unknown robot id {0}")]
    UnknownRobot(RobotId),

    #[error("constraint violation at iteration {k}: {detail}")]
    ConstraintViolation { k: usize, detail: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Errors that mean the algorithm broke one of its own guarantees, as
    /// opposed to the user handing in something malformed.
    pub fn is_invariant_breach(&self) -> bool {
        matches!(
            self,
            Error::ConstraintViolation { .. } | Error::Protocol(_) | Error::NonFinite(_)
        )
    }
}
