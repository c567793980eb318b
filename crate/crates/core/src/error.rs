use thiserror::Error;

/// Errors raised by the projection pipeline and its supporting tools.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MmlsError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("insufficient data: {required} points required, {available} available")]
    InsufficientData { required: usize, available: usize },

    /// A matrix that should have rank `required` only reached `rank`.
    #[error("degenerate data: rank {rank} achieved, {required} required")]
    DegenerateData { rank: usize, required: usize },

    /// The weighted neighborhood of a query cannot support the local fit.
    #[error("degenerate neighborhood: rank {rank} achieved, {required} required")]
    DegenerateNeighborhood { rank: usize, required: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl MmlsError {
    /// Stable machine-readable code, used by the CLI's `error:` lines.
    pub fn code(&self) -> &'static str {
        match self {
            MmlsError::Domain(_) => "E_DOMAIN",
            MmlsError::InvalidInput(_) => "E_INPUT",
            MmlsError::InsufficientData { .. } => "E_INSUFFICIENT_DATA",
            MmlsError::DegenerateData { .. } => "E_DEGENERATE_DATA",
            MmlsError::DegenerateNeighborhood { .. } => "E_DEGENERATE_NEIGHBORHOOD",
            MmlsError::Unsupported(_) => "E_UNSUPPORTED",
            MmlsError::Config(_) => "E_CONFIG",
            MmlsError::Parse { .. } => "E_PARSE",
            MmlsError::Io(_) => "E_IO",
        }
    }
}

impl From<std::io::Error> for MmlsError {
    fn from(e: std::io::Error) -> Self {
        MmlsError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, MmlsError>;
