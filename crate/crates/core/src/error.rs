use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("invalid transition kernel: {0}")]
    InvalidKernel(String),
    #[error("invalid perturbation law: {0}")]
    InvalidLaw(String),
    #[error("invalid environment: {0}")]
    InvalidEnvironment(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("point {0} lies outside the computed table")]
    OutOfTable(String),
    #[error("window too small: {0}")]
    WindowTooSmall(String),
    #[error("missing Green function row from source {0}")]
    MissingRow(String),
    #[error("perturbation rejected: {0}")]
    InvalidPerturbation(String),
    #[error("manifest error: {0}")]
    Manifest(String),
    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
