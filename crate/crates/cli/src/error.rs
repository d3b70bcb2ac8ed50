use std::path::PathBuf;

use hetiv::ErrorClass;
use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] hetiv::Error),

    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{failed} of {total} table cells failed, above the tolerated share of {tolerance}")]
    TooManyFailedCells {
        failed: usize,
        total: usize,
        tolerance: f64,
    },
}

impl CliError {
    /// 2 config, 3 data, 4 estimation.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Write { .. } => 2,
            CliError::Core(e) => match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Estimation => 4,
            },
            CliError::TooManyFailedCells { .. } => 4,
        }
    }
}
