use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid range: a = {a} exceeds b = {b}")]
    InvalidRange { a: u64, b: u64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("solver did not converge: {0}")]
    NoConvergence(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("expression used outside its regime: {0}")]
    InvalidRegime(String),

    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),

    #[error("transmitter and receiver coincide")]
    CoincidentPoints,

    #[error("need at least {need} points, got {got}")]
    InsufficientPoints { need: usize, got: usize },

    #[error("invalid config field `{field}`: {reason}")]
    ConfigInvalid { field: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the caller's input rather than a broken invariant.
    pub fn is_user_error(&self) -> bool {
        !matches!(self, Error::NoConvergence(_))
    }
}
