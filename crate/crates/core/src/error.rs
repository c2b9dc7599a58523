use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is rank deficient: smallest singular value {smallest:e} below tolerance {tolerance:e}")]
    RankDeficient { smallest: f64, tolerance: f64 },

    #[error("sketched matrix is ill-conditioned: condition number {0:e} exceeds 1e12")]
    IllConditioned(f64),

    #[error("sketch kept {kept} rows, fewer than the {p} columns")]
    TooFewRows { kept: usize, p: usize },

    #[error("sketch draw failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: usize, last: Box<Error> },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("length {0} is not a power of two")]
    NotPowerOfTwo(usize),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: usize,
        message: String,
    },

    #[error("missing value at row {row}, column {column}")]
    MissingValue { row: usize, column: usize },

    #[error("column `{0}` is constant and cannot be standardized")]
    ConstantColumn(String),

    #[error("value {value} is outside the invertible range ({lower}, 1)")]
    OutOfRange { value: f64, lower: f64 },

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-finite result: {0}")]
    NonFinite(String),

    #[error("another timing session is active in this process")]
    TimingBusy,

    #[error("linear algebra failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Failures caused by an unlucky sketch draw; a fresh seed may succeed.
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            Error::RankDeficient { .. } | Error::IllConditioned(_) | Error::TooFewRows { .. }
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
