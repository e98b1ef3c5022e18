use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("config error: {0}")]
    Config(String),
    #[error("degenerate fit: {0}")]
    DegenerateFit(String),
    #[error(transparent)]
    Core(#[from] nls_lab::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl LabError {
    /// Process exit status: 2 config, 3 numerical failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            LabError::Config(_) | LabError::DegenerateFit(_) => 2,
            LabError::Core(e) if e.is_numerical() => 3,
            LabError::Core(_) => 2,
            LabError::Io(_) | LabError::Csv(_) | LabError::Json(_) => 4,
        }
    }
}

pub type LabResult<T> = Result<T, LabError>;
