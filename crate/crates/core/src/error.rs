use thiserror::Error;

/// Failure modes shared by every module of the lab.
#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("structural mismatch: {0}")]
    Structure(String),
    #[error("kernel piece is singular on the diagonal t = r = {0}")]
    Singularity(f64),
    #[error("infeasible geometry: {0}")]
    Geometry(String),
    #[error("fit rejected: {0}")]
    Fit(String),
    #[error("reports are not comparable: {0}")]
    Comparison(String),
    #[error("malformed input: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;

pub(crate) fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(LabError::Parameter(msg.into()))
}
