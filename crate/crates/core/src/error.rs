use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A quantity left its admissible range by more than roundoff.
    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("optimization failed: {message} ({starts} starts, {converged} converged)")]
    OptimizationFailure {
        message: String,
        starts: usize,
        converged: usize,
    },

    #[error("no violation at the reference point ({value:.6e}); threshold undefined")]
    NoViolation { value: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
