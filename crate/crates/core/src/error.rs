use thiserror::Error;

/// Errors produced by circuit construction, simulation, plan building and
/// device-data ingestion.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("invalid noise parameter: {0}")]
    InvalidNoise(String),

    #[error("invalid replication vector: {0}")]
    InvalidReplication(String),

    #[error("invalid plan request: {0}")]
    InvalidPlan(String),

    #[error("invalid estimator input: {0}")]
    InvalidEstimate(String),

    #[error("invalid ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("singular extrapolation system: {0}")]
    Singular(String),

    /// A density matrix or probability vector failed a numerical sanity check.
    #[error("numerical integrity failure: {0}")]
    Integrity(String),

    #[error("parse error in record `{record}`, field `{field}`: {message}")]
    Parse {
        record: String,
        field: String,
        message: String,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(record: impl Into<String>, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            record: record.into(),
            field: field.into(),
            message: message.into(),
        }
    }

    /// True for failures of the numerical sanity checks rather than bad input.
    pub fn is_integrity(&self) -> bool {
        matches!(self, Error::Integrity(_))
    }
}
