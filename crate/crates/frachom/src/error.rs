use frachom_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    /// The configuration does not satisfy the schema or a parameter range.
    #[error("invalid configuration: {0}")]
    Schema(String),
    #[error("solver failure: {0}")]
    Solver(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    /// Process exit status: 2 for schema errors, 3 for solver and filesystem failures.
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Schema(_) => 2,
            RunError::Solver(_) | RunError::Io(_) => 3,
        }
    }
}

impl From<CoreError> for RunError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_)
            | CoreError::DimensionMismatch { .. }
            | CoreError::Ellipticity(_)
            | CoreError::SizeOverCap { .. }
            | CoreError::Unsupported(_) => RunError::Schema(e.to_string()),
            CoreError::NotConverged { .. }
            | CoreError::Quadrature { .. }
            | CoreError::NotSymmetric { .. }
            | CoreError::Singular(_)
            | CoreError::NonFinite(_) => RunError::Solver(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for RunError {
    fn from(e: serde_json::Error) -> Self {
        RunError::Schema(e.to_string())
    }
}

impl From<csv::Error> for RunError {
    fn from(e: csv::Error) -> Self {
        RunError::Io(std::io::Error::other(e))
    }
}
