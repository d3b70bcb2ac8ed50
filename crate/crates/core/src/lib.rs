//! Heteroskedasticity-based instrumental-variable estimation for binary
//! outcomes and binary treatments in survey microdata.
//!
//! The numeric core ([`linalg`], [`regression`], [`lewbel`], [`iv`]) is
//! generic over [`Scalar`]; the aliases below fix it to `f64`.

pub mod dist;
pub mod error;
pub mod iv;
pub mod lewbel;
pub mod linalg;
pub mod montecarlo;
pub mod regression;
pub mod report;
pub mod scalar;
pub mod survey;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Scalar;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub type Matrix64 = linalg::Matrix<f64>;
pub type DesignMatrix64 = regression::DesignMatrix<f64>;
pub type FitResult64 = regression::FitResult<f64>;
pub type IvFitResult64 = iv::IvFitResult<f64>;
pub type InstrumentSet64 = lewbel::InstrumentSet<f64>;
pub type ModelFrame64 = regression::ModelFrame<f64>;
