use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("matrix is not positive semidefinite (smallest eigenvalue {eig_min:e})")]
    NotPsd { eig_min: f64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("geometry error: {0}")]
    Geometry(String),

    #[error("degenerate channel: {0}")]
    DegenerateChannel(String),

    #[error("degenerate power coefficient: {0}")]
    DegenerateCoefficient(String),

    #[error("SDP solve failed at phase iteration {iteration}: {reason}")]
    Sdp { iteration: usize, reason: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
