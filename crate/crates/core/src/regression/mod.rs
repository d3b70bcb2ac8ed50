//! Least squares with robust covariance, joint Wald tests and design building.

mod design;
mod ols;
mod vcov;
mod wald;

pub use design::{build_design, ColumnRole, DesignMatrix, DroppedColumn, ModelFrame, ModelSpec};
pub use ols::{ols_fit, FitResult};
pub use vcov::{hc_vcov, VceKind};
pub use wald::{wald_joint, WaldTest};

pub(crate) use ols::{check_weights, goodness, inference};
pub(crate) use vcov::sandwich;
