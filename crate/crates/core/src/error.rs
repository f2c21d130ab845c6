use thiserror::Error;

/// Errors raised by the research pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("tick stream rejected: {rejected} of {total} lines malformed (limit 1%)")]
    TooManyRejects { rejected: usize, total: usize },

    #[error("tick at {timestamp} lies outside the day starting at {day_start}")]
    TickOutsideDay { timestamp: i64, day_start: i64 },

    #[error("no trades and no seed price: cannot establish a price basis")]
    NoPriceBasis,

    #[error("minute bars already treated for wash trading")]
    AlreadyTreated,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("series too short: need at least {needed}, got {got}")]
    SeriesTooShort { needed: usize, got: usize },

    #[error("zero variance series")]
    ZeroVariance,

    #[error("model fit failed: {0}")]
    FitFailed(String),

    #[error("covariance matrix is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPsd { min_eigenvalue: f64 },

    #[error("infeasible weight constraints: {0}")]
    Infeasible(String),

    #[error("brute-force oracle supports at most {max} assets, got {got}")]
    TooManyAssets { max: usize, got: usize },

    #[error("missing data for day {day}: {what}")]
    MissingDay { day: usize, what: String },

    #[error("{path}: {source}")]
    InFile { path: String, source: Box<Error> },
}

impl Error {
    /// The error with file context removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::InFile { source, .. } => source.root(),
            other => other,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
