use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation (t ≤ 0, p ∉ (0,1), ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A distribution or model parameter violates its constraints.
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("numerical failure at observation {index}: {reason}")]
    Numerical { index: usize, reason: String },

    #[error("fit failed: {0}")]
    Fit(String),

    /// The data do not identify the requested model (collapsed component,
    /// zero-variance sample, parameter running off to a boundary).
    #[error("degenerate model: {0}")]
    Degenerate(String),

    #[error("no unique cut-point: {0}")]
    NoUniqueCutPoint(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("data error at row {row}: {reason}")]
    Data { row: usize, reason: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("unsupported schema version {found} (expected {expected})")]
    Version { found: u32, expected: u32 },

    #[error("validation error: {0}")]
    Validation(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::Domain(_) | Error::Parameter(_) => 1,
            Error::Data { .. }
            | Error::Format(_)
            | Error::Version { .. }
            | Error::Validation(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => 2,
            Error::Numerical { .. }
            | Error::Fit(_)
            | Error::Degenerate(_)
            | Error::NoUniqueCutPoint(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
