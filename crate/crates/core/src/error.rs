use thiserror::Error;

use crate::data::Stratum;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dataset is empty")]
    EmptyDataset,

    #[error("row {row}: treatment must be 0 or 1, found {value}")]
    NonBinaryTreatment { row: usize, value: f64 },

    #[error("row {row}: intermediate variable must be 0 or 1, found {value}")]
    NonBinaryIntermediate { row: usize, value: f64 },

    #[error("row {row}: expected {expected} covariates, found {found}")]
    InconsistentCovariateDim { row: usize, expected: usize, found: usize },

    #[error("row {row}, column '{column}': {message}")]
    Parse { row: usize, column: String, message: String },

    #[error("{0}")]
    Io(String),

    #[error("response is degenerate (all {0})")]
    DegenerateResponse(u8),

    #[error("design matrix is rank deficient")]
    RankDeficientDesign,

    #[error("observed cell (Z={z}, S={s}) has {count} units, need at least {needed}")]
    EmptyCell { z: u8, s: u8, count: usize, needed: usize },

    #[error("unit {unit}: treatment probability {value} outside (0, 1)")]
    PositivityViolation { unit: usize, value: f64 },

    #[error("stratum {0}: estimated proportion is not positive")]
    DegenerateStratum(Stratum),

    #[error("unit {unit}: division by a vanishing principal score")]
    DivisionByZero { unit: usize },

    #[error("unit {unit}: non-positive denominator in tilting weight")]
    NonPositiveDenominator { unit: usize },

    #[error("{failed} of {total} bootstrap replicates failed")]
    TooManyFailures { failed: usize, total: usize },

    #[error("row {row}: control unit has S = 1, violating strong monotonicity (S_0 = 0)")]
    StrongMonotonicityViolation { row: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True for errors caused by malformed input rather than numerical failure.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::EmptyDataset
                | Error::NonBinaryTreatment { .. }
                | Error::NonBinaryIntermediate { .. }
                | Error::InconsistentCovariateDim { .. }
                | Error::Parse { .. }
                | Error::Io(_)
                | Error::StrongMonotonicityViolation { .. }
                | Error::InvalidConfig(_)
        )
    }
}
