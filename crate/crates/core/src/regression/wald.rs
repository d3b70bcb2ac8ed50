use crate::dist;
use crate::error::{Error, Result};
use crate::linalg::spd_quadratic_form;
use crate::scalar::Scalar;

use super::ols::FitResult;

/// Joint Wald test in F form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldTest {
    /// `W / q`.
    pub statistic: f64,
    /// `W = b' V⁻¹ b`.
    pub chi2: f64,
    pub df1: usize,
    pub df2: usize,
    /// From `F(df1, df2)`.
    pub p_value: f64,
}

/// Robust Wald test that the coefficients at `subset` are jointly zero.
pub fn wald_joint<T: Scalar>(fit: &FitResult<T>, subset: &[usize]) -> Result<WaldTest> {
    if subset.is_empty() {
        return Err(Error::Dimension("empty coefficient subset".into()));
    }
    if let Some(&j) = subset.iter().find(|&&j| j >= fit.k) {
        return Err(Error::Dimension(format!("coefficient index {j} out of range (k = {})", fit.k)));
    }
    let b: Vec<T> = subset.iter().map(|&j| fit.coefficients[j]).collect();
    let v = fit.vcov.submatrix(subset);
    let w = spd_quadratic_form(&v, &b, T::rank_tolerance(), "Wald sub-covariance")?.to_f64_lossy();
    let q = subset.len();
    let df2 = fit.n - fit.k;
    let statistic = w / q as f64;
    Ok(WaldTest {
        statistic,
        chi2: w,
        df1: q,
        df2,
        p_value: dist::f_sf(statistic, q as f64, df2 as f64),
    })
}
