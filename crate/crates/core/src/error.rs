use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure class, used by front ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Estimation,
    Config,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed delimited file {path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("schema/header mismatch: {0}")]
    Schema(String),

    #[error("invalid sampling weight {value} in data row {row}")]
    InvalidWeight { row: usize, value: String },

    #[error("column `{0}` not found")]
    MissingColumn(String),

    #[error("column `{column}` has the wrong type: expected {expected}")]
    ColumnType {
        column: String,
        expected: &'static str,
    },

    #[error("invalid restriction: {0}")]
    Restriction(String),

    #[error("taxonomy `{taxonomy}` references substance column `{column}` which is absent")]
    MissingSubstance { taxonomy: String, column: String },

    #[error("variable `{0}` has no nonmissing observations")]
    NoObservations(String),

    #[error("design error: {0}")]
    Design(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("too few observations: n = {n} with k = {k} regressors")]
    TooFewObservations { n: usize, k: usize },

    #[error("design is rank deficient: column(s) {0:?} are collinear")]
    RankDeficient(Vec<String>),

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("degenerate instruments: {0}")]
    DegenerateInstruments(String),

    #[error("coefficient `{0}` not present in fit")]
    MissingCoefficient(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{failed} of {reps} replications failed (limit 5%); first error: {first}")]
    TooManyFailures {
        failed: usize,
        reps: usize,
        first: String,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Io { .. }
            | Error::Parse { .. }
            | Error::Schema(_)
            | Error::InvalidWeight { .. }
            | Error::MissingColumn(_)
            | Error::ColumnType { .. }
            | Error::Restriction(_)
            | Error::MissingSubstance { .. }
            | Error::NoObservations(_) => ErrorClass::Data,
            Error::Config(_) => ErrorClass::Config,
            Error::Design(_)
            | Error::Dimension(_)
            | Error::TooFewObservations { .. }
            | Error::RankDeficient(_)
            | Error::Singular(_)
            | Error::DegenerateInstruments(_)
            | Error::MissingCoefficient(_)
            | Error::TooManyFailures { .. } => ErrorClass::Estimation,
        }
    }
}
