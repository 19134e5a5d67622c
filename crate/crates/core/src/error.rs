use thiserror::Error;

/// Errors raised by state construction, optical maps and the analysis chain.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input outside the map's domain subspace: {0}")]
    InvalidInputSubspace(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("factor index {index} out of range for {len} factors")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("state is not normalized (norm {0})")]
    NotNormalized(f64),

    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("fit failure: {0}")]
    FitFailure(String),

    #[error("undefined correlation: all outcome counts are zero")]
    UndefinedCorrelation,

    #[error("negative rate {0}")]
    NegativeRate(f64),

    #[error("too many bootstrap resamples failed ({failed} of {total})")]
    BootstrapFailure { failed: usize, total: usize },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable machine-readable tag, used in CLI error records.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArgument(_) => "invalid-argument",
            Error::InvalidInputSubspace(_) => "invalid-input-subspace",
            Error::Unsupported(_) => "unsupported",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::DimensionMismatch { .. } => "dimension-mismatch",
            Error::IndexOutOfRange { .. } => "index-out-of-range",
            Error::NotNormalized(_) => "not-normalized",
            Error::ParameterOutOfRange(_) => "parameter-out-of-range",
            Error::InsufficientData(_) => "insufficient-data",
            Error::FitFailure(_) => "fit-failure",
            Error::UndefinedCorrelation => "undefined-correlation",
            Error::NegativeRate(_) => "negative-rate",
            Error::BootstrapFailure { .. } => "bootstrap-failure",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
            Error::Io(_) => "io",
        }
    }
}
