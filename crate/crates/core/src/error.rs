use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A column or key named by a schema/config is missing or malformed.
    #[error("schema error: {0}")]
    Schema(String),
    /// A value is outside its admissible domain (unknown label, NaN, ...).
    #[error("value error: {0}")]
    Value(String),
    /// The data violate a structural requirement (too few units per arm, ...).
    #[error("validity error: {0}")]
    Validity(String),
    /// A caller-supplied parameter is out of range.
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numerical(String),
    #[error("learner error: {0}")]
    Learner(String),
    /// An input artifact no longer matches the hash recorded by the stage that produced it.
    #[error("stale artifact: {0}")]
    StaleArtifact(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether the error stems from configuration rather than from the data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::Parameter(_) | Error::Schema(_))
    }
}
