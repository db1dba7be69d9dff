//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("delay pattern must have at least 2 coefficients")]
    PatternTooShort,
    #[error("delay coefficients must be strictly ascending")]
    NotAscending,
    #[error("first delay coefficient must be 0")]
    FirstNotZero,
    #[error("difference coarray is not contiguous: lag {missing_lag} is missing")]
    NonContiguousCoarray { missing_lag: i64 },
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("synthesis mode unavailable: {0}")]
    ModeUnavailable(String),
    #[error("snapshot matrix has no snapshots")]
    DegenerateSnapshots,
    #[error("matrix is not Hermitian (max asymmetry {max_asym:.3e})")]
    NotHermitian { max_asym: f64 },
    #[error("matrix has non-finite entries")]
    NonFinite,
    #[error("K = {k} too large for subspace dimension {dim}")]
    KTooLarge { k: usize, dim: usize },
    #[error("found {found} local maxima, need {needed}")]
    TooFewPeaks { found: usize, needed: usize },
    #[error("scan grid is empty")]
    GridEmpty,
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("config: {0}")]
    Config(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// CLI exit code category: 2 validation, 3 estimation, 4 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::PatternTooShort
            | Error::NotAscending
            | Error::FirstNotZero
            | Error::NonContiguousCoarray { .. }
            | Error::InvalidScenario(_)
            | Error::Config(_) => 2,
            Error::ModeUnavailable(_)
            | Error::DegenerateSnapshots
            | Error::NotHermitian { .. }
            | Error::NonFinite
            | Error::KTooLarge { .. }
            | Error::TooFewPeaks { .. }
            | Error::GridEmpty
            | Error::DimensionMismatch { .. } => 3,
            Error::Io(_) => 4,
        }
    }
}
