use thiserror::Error;

/// Errors produced anywhere in the benchmarking pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("unsupported combination: {0}")]
    UnsupportedCombination(String),

    #[error("division domain error: {0}")]
    DivisionDomain(String),

    #[error("incomplete data: {0}")]
    IncompleteData(String),

    #[error("fit failure: {reason}")]
    FitFailure { reason: String, residuals: Vec<f64> },

    #[error("inconsistent measurements: {0}")]
    InconsistentMeasurements(String),

    #[error("no leading Kraus operator: largest Choi eigenvalue {0:.4} is not above 0.5")]
    NoLeadingKraus(f64),

    #[error("simulation integrity: {0}")]
    SimulationIntegrity(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("input error at line {line}: {message}")]
    InputLine { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. }
            | Error::InputLine { .. }
            | Error::InvalidInput(_)
            | Error::UnsupportedCombination(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::FitFailure { .. } => 4,
            _ => 3,
        }
    }
}
