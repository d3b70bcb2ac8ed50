//! Two-stage least squares with one endogenous regressor.

use log::{info, warn};

use crate::dist;
use crate::error::{Error, Result};
use crate::lewbel::{lewbel_instruments, InstrumentSet};
use crate::linalg::{dot, spd_inverse, Matrix, Qr};
use crate::regression::{
    check_weights, goodness, inference, ols_fit, sandwich, wald_joint, ColumnRole, DesignMatrix,
    FitResult, VceKind, WaldTest,
};
use crate::scalar::Scalar;

/// Conventional weak-instrument cutoff for the first-stage F.
pub const DEFAULT_WEAK_FLOOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct IvOptions {
    pub vce: VceKind,
    /// First-stage F below this raises the weak flag (never an error).
    pub weak_floor: f64,
    /// Let fixed-effect dummies generate Lewbel instruments too.
    pub include_fixed_effects: bool,
}

impl Default for IvOptions {
    fn default() -> Self {
        Self {
            vce: VceKind::Hc1,
            weak_floor: DEFAULT_WEAK_FLOOR,
            include_fixed_effects: false,
        }
    }
}

/// Overidentification test outcome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum HansenJ {
    /// One excluded instrument: J is identically zero and has no p-value.
    ExactlyIdentified,
    Test { statistic: f64, df: usize, p_value: f64 },
}

impl HansenJ {
    pub fn statistic(&self) -> f64 {
        match self {
            HansenJ::ExactlyIdentified => 0.0,
            HansenJ::Test { statistic, .. } => *statistic,
        }
    }

    pub fn df(&self) -> usize {
        match self {
            HansenJ::ExactlyIdentified => 0,
            HansenJ::Test { df, .. } => *df,
        }
    }

    pub fn p_value(&self) -> Option<f64> {
        match self {
            HansenJ::ExactlyIdentified => None,
            HansenJ::Test { p_value, .. } => Some(*p_value),
        }
    }
}

/// Second-stage estimates plus first-stage and overidentification diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct IvFitResult<T> {
    /// Second stage; the endogenous regressor is the last coefficient.
    pub fit: FitResult<T>,
    pub first_stage: FitResult<T>,
    pub first_stage_f: WaldTest,
    pub hansen_j: HansenJ,
    /// Excluded instruments actually used (after pruning).
    pub instrument_count: usize,
    pub instrument_labels: Vec<String>,
    /// Instruments pruned as collinear with the design or each other.
    pub dropped_instruments: Vec<String>,
    pub endogenous_name: String,
    pub weak: bool,
    /// Binary external instrument: the estimate is a local average effect.
    pub late: bool,
    /// First-stage coefficient and SE of an external instrument.
    pub instrument_first_stage: Option<(T, T)>,
    pub warnings: Vec<String>,
}

impl<T: Scalar> IvFitResult<T> {
    pub fn coef(&self, name: &str) -> Result<T> {
        self.fit.coef(name)
    }

    pub fn se(&self, name: &str) -> Result<T> {
        self.fit.se(name)
    }

    /// Estimate of the endogenous coefficient.
    pub fn beta(&self) -> T {
        *self.fit.coefficients.last().expect("nonempty")
    }

    pub fn beta_se(&self) -> T {
        *self.fit.std_errors.last().expect("nonempty")
    }

    pub fn beta_p(&self) -> f64 {
        *self.fit.p_values.last().expect("nonempty")
    }
}

fn sqrt_weights<T: Scalar>(w: Option<&[T]>) -> Option<Vec<T>> {
    w.map(|w| w.iter().map(|v| v.sqrt()).collect())
}

fn scaled_vec<T: Scalar>(v: &[T], s: Option<&Vec<T>>) -> Vec<T> {
    match s {
        Some(s) => v.iter().zip(s).map(|(&a, &b)| a * b).collect(),
        None => v.to_vec(),
    }
}

fn scaled_mat<T: Scalar>(m: &Matrix<T>, s: Option<&Vec<T>>) -> Matrix<T> {
    match s {
        Some(s) => m.scale_rows(s),
        None => m.clone(),
    }
}

/// 2SLS of `y` on `[x_exog, d]` instrumenting `d` with the excluded columns
/// in `instruments`.
///
/// `D̂` is the projection of `d` on `[x_exog, Z]`; the robust sandwich uses
/// the bread from `[x_exog, D̂]` and residuals computed with the actual `d`.
/// Instruments in the span of `x_exog` or of earlier instruments are pruned
/// and listed in `dropped_instruments`.
pub fn tsls_fit<T: Scalar>(
    y: &[T],
    x_exog: &DesignMatrix<T>,
    d: &[T],
    endogenous_name: &str,
    instruments: &InstrumentSet<T>,
    weights: Option<&[T]>,
    opts: &IvOptions,
) -> Result<IvFitResult<T>> {
    let n = x_exog.nrows();
    let kx = x_exog.ncols();
    for (what, len) in [
        ("outcome", y.len()),
        ("treatment", d.len()),
        ("instrument", instruments.instruments.nrows()),
    ] {
        if len != n {
            return Err(Error::Dimension(format!("{what} has {len} rows, design has {n}")));
        }
    }
    if let Some(w) = weights {
        check_weights(w, n)?;
    }

    // First stage on [X, Z], pruning instruments that add nothing.
    let mut fm = x_exog.matrix().clone();
    let mut labels = x_exog.labels().to_vec();
    let mut roles = x_exog.roles().to_vec();
    for (j, l) in instruments.labels.iter().enumerate() {
        fm.push_column(instruments.instruments.column(j))?;
        labels.push(l.clone());
        roles.push(ColumnRole::Regressor);
    }
    let first_design = DesignMatrix::new(fm, labels, roles)?;
    let dropped_instruments: Vec<String> = first_design
        .dropped()
        .iter()
        .map(|c| c.label.clone())
        .filter(|l| instruments.labels.contains(l))
        .collect();
    if first_design.dropped().len() != dropped_instruments.len() {
        return Err(Error::RankDeficient(
            first_design
                .dropped()
                .iter()
                .map(|c| c.label.clone())
                .filter(|l| !instruments.labels.contains(l))
                .collect(),
        ));
    }
    for l in &dropped_instruments {
        info!("instrument `{l}` is collinear with the design and is dropped");
    }
    let excluded: Vec<usize> = (kx..first_design.ncols()).collect();
    let big_l = excluded.len();
    if big_l == 0 {
        return Err(Error::DegenerateInstruments(
            "every instrument lies in the span of the exogenous regressors".into(),
        ));
    }
    let k = kx + 1;
    if n <= k + big_l {
        return Err(Error::TooFewObservations { n, k: k + big_l });
    }

    let first_stage = ols_fit(&first_design, d, weights, opts.vce)?;
    let first_stage_f = first_stage_f(&first_stage, &excluded)?;
    let d_hat: Vec<T> = d
        .iter()
        .zip(&first_stage.residuals)
        .map(|(&a, &r)| a - r)
        .collect();

    // Second stage on [X, D̂].
    let sw = sqrt_weights(weights);
    let mut xhat = x_exog.matrix().clone();
    xhat.push_column(&d_hat)?;
    let xhat_s = scaled_mat(&xhat, sw.as_ref());
    let qr = Qr::decompose(&xhat_s, T::rank_tolerance());
    if qr.rank() < k {
        return Err(Error::RankDeficient(vec![endogenous_name.to_string()]));
    }
    let b = qr.solve(&scaled_vec(y, sw.as_ref()));
    let mut xd = x_exog.matrix().clone();
    xd.push_column(d)?;
    let fitted = xd.mul_vec(&b);
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(&a, &f)| a - f).collect();
    let es = scaled_vec(&residuals, sw.as_ref());
    let vcov = sandwich(&qr.gram_inverse(), &xhat_s, &es).scale(opts.vce.factor(n, k));
    let (std_errors, p_values) = inference(&b, &vcov, n - k);
    let g = goodness(y, &residuals, weights, k, x_exog.has_intercept());
    let mut out_labels = x_exog.labels().to_vec();
    out_labels.push(endogenous_name.to_string());
    let fit = FitResult {
        labels: out_labels,
        coefficients: b,
        vcov,
        std_errors,
        p_values,
        residuals,
        n,
        k,
        r_squared: g.r_squared,
        adj_r_squared: g.adj_r_squared,
        dep_mean: g.dep_mean,
        vce: opts.vce,
        weighted: weights.is_some(),
    };

    let zs = first_design.matrix().select_columns(&excluded);
    let hansen_j = if big_l == 1 {
        HansenJ::ExactlyIdentified
    } else {
        hansen_j_scaled(
            &scaled_vec(y, sw.as_ref()),
            &scaled_mat(&xd, sw.as_ref()),
            &scaled_mat(&x_exog.matrix().hstack(&zs)?, sw.as_ref()),
            &es,
        )?
    };

    let mut warnings = Vec::new();
    let weak = !(first_stage_f.statistic >= opts.weak_floor);
    if weak {
        let msg = format!(
            "weak instruments: first-stage F = {:.3} below {}",
            first_stage_f.statistic, opts.weak_floor
        );
        warn!("{msg}");
        warnings.push(msg);
    }
    for l in &dropped_instruments {
        warnings.push(format!("instrument `{l}` dropped as collinear"));
    }
    Ok(IvFitResult {
        fit,
        first_stage,
        first_stage_f,
        hansen_j,
        instrument_count: big_l,
        instrument_labels: excluded
            .iter()
            .map(|&j| first_design.labels()[j].clone())
            .collect(),
        dropped_instruments,
        endogenous_name: endogenous_name.to_string(),
        weak,
        late: false,
        instrument_first_stage: None,
        warnings,
    })
}

/// Robust Wald F that the excluded instruments are jointly irrelevant in the
/// first stage (`df1 = L`).
///
/// A first stage that fits the treatment exactly has zero robust variance;
/// that case reports an infinite F instead of a singular-matrix error.
pub fn first_stage_f<T: Scalar>(first: &FitResult<T>, excluded: &[usize]) -> Result<WaldTest> {
    match wald_joint(first, excluded) {
        Err(Error::Singular(_))
            if first
                .residuals
                .iter()
                .all(|r| r.abs() <= T::of(1e3) * T::epsilon()) =>
        {
            Ok(WaldTest {
                statistic: f64::INFINITY,
                chi2: f64::INFINITY,
                df1: excluded.len(),
                df2: first.n - first.k,
                p_value: 0.0,
            })
        }
        other => other,
    }
}

/// Two-step efficient GMM J on pre-weighted data: `S` from the 2SLS
/// residuals, then `J = n ḡ' S⁻¹ ḡ` at the efficient-GMM estimate.
fn hansen_j_scaled<T: Scalar>(y: &[T], x: &Matrix<T>, w: &Matrix<T>, e: &[T]) -> Result<HansenJ> {
    let n = T::of(y.len() as f64);
    let l = w.ncols();
    let k = x.ncols();
    let s = w.scale_rows(e).gram().scale(T::one() / n);
    let s_inv = spd_inverse(&s, T::rank_tolerance(), "moment covariance")?;
    let wx = w.tr_matmul(x)?; // L x k
    let wy = w.tr_mul_vec(y); // L
    // (X'W S⁻¹ W'X) b = X'W S⁻¹ W'y
    let sw_x = s_inv.matmul(&wx)?;
    let a = wx.tr_matmul(&sw_x)?;
    let rhs = sw_x.tr_mul_vec(&wy);
    let a_inv = spd_inverse(&a, T::rank_tolerance(), "GMM normal matrix")?;
    let b = a_inv.mul_vec(&rhs);
    let fitted = x.mul_vec(&b);
    let e2: Vec<T> = y.iter().zip(&fitted).map(|(&a, &f)| a - f).collect();
    let gbar: Vec<T> = w.tr_mul_vec(&e2).into_iter().map(|g| g / n).collect();
    let j = (n * dot(&gbar, &s_inv.mul_vec(&gbar))).to_f64_lossy().max(0.0);
    let df = l - k;
    Ok(HansenJ::Test {
        statistic: j,
        df,
        p_value: dist::chi2_sf(j, df as f64),
    })
}

/// Hansen J for a 2SLS fit with excluded instruments `z_excl`, taken as given
/// (no collinearity pruning, so redundant moments surface as a singular
/// weight matrix).
pub fn hansen_j<T: Scalar>(
    y: &[T],
    x_exog: &DesignMatrix<T>,
    d: &[T],
    z_excl: &Matrix<T>,
    weights: Option<&[T]>,
    fit: &IvFitResult<T>,
) -> Result<HansenJ> {
    if z_excl.ncols() < 2 {
        return Ok(HansenJ::ExactlyIdentified);
    }
    let sw = sqrt_weights(weights);
    let mut xd = x_exog.matrix().clone();
    xd.push_column(d)?;
    let w = x_exog.matrix().hstack(z_excl)?;
    hansen_j_scaled(
        &scaled_vec(y, sw.as_ref()),
        &scaled_mat(&xd, sw.as_ref()),
        &scaled_mat(&w, sw.as_ref()),
        &scaled_vec(&fit.fit.residuals, sw.as_ref()),
    )
}

/// 2SLS with heteroskedasticity-based instruments built from `x_exog`.
pub fn lewbel_fit<T: Scalar>(
    y: &[T],
    x_exog: &DesignMatrix<T>,
    d: &[T],
    endogenous_name: &str,
    weights: Option<&[T]>,
    opts: &IvOptions,
) -> Result<IvFitResult<T>> {
    let set = lewbel_instruments(x_exog, d, weights, opts.include_fixed_effects)?;
    let mut fit = tsls_fit(y, x_exog, d, endogenous_name, &set, weights, opts)?;
    if let Some(h) = set.diagnostics {
        if h.p_value > 0.05 {
            fit.warnings.push(format!(
                "heteroskedasticity diagnostic p = {:.3}: identification is doubtful",
                h.p_value
            ));
        }
    }
    Ok(fit)
}

#[allow(clippy::too_many_arguments)]
/// Exactly identified 2SLS with one binary external instrument `w`.
///
/// The estimate is flagged as a local average treatment effect and the
/// first-stage coefficient of `w` is reported.
pub fn external_iv_fit<T: Scalar>(
    y: &[T],
    x_exog: &DesignMatrix<T>,
    d: &[T],
    endogenous_name: &str,
    instrument_name: &str,
    w: &[T],
    weights: Option<&[T]>,
    opts: &IvOptions,
) -> Result<IvFitResult<T>> {
    if w.iter().any(|&v| v != T::zero() && v != T::one()) {
        return Err(Error::Design(format!("instrument `{instrument_name}` must be binary")));
    }
    if w.iter().all(|&v| v == w[0]) {
        return Err(Error::DegenerateInstruments(format!(
            "instrument `{instrument_name}` is constant in the estimation sample"
        )));
    }
    let set = InstrumentSet::external(
        vec![instrument_name.to_string()],
        Matrix::from_columns(&[w])?,
    )?;
    let mut fit = tsls_fit(y, x_exog, d, endogenous_name, &set, weights, opts)?;
    fit.late = true;
    let j = fit.first_stage.index_of(instrument_name)?;
    fit.instrument_first_stage = Some((
        fit.first_stage.coefficients[j],
        fit.first_stage.std_errors[j],
    ));
    Ok(fit)
}

/// A point estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub coef: f64,
    pub se: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DifferenceTest {
    pub difference: f64,
    pub se: f64,
    pub z: f64,
    /// Two-sided, standard normal.
    pub p_value: f64,
}

/// `a - b` with `se = sqrt(se_a² + se_b²)` (independent samples).
pub fn difference_test(a: Estimate, b: Estimate) -> DifferenceTest {
    let difference = a.coef - b.coef;
    let se = a.se.hypot(b.se);
    let z = if difference == 0.0 { 0.0 } else { difference / se };
    DifferenceTest {
        difference,
        se,
        z,
        p_value: dist::normal_two_sided(z),
    }
}

/// Difference of the coefficient `coef` between two subgroup fits.
pub fn subgroup_difference<T: Scalar>(
    a: &IvFitResult<T>,
    b: &IvFitResult<T>,
    coef: &str,
) -> Result<DifferenceTest> {
    let get = |f: &IvFitResult<T>| -> Result<Estimate> {
        Ok(Estimate {
            coef: f.coef(coef)?.to_f64_lossy(),
            se: f.se(coef)?.to_f64_lossy(),
        })
    };
    Ok(difference_test(get(a)?, get(b)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn difference_row_from_published_inputs() {
        let t = difference_test(
            Estimate { coef: -0.054, se: 0.019 },
            Estimate { coef: 0.015, se: 0.013 },
        );
        assert!((t.difference + 0.069).abs() < 1e-12);
        assert!((t.se - 0.023).abs() < 5e-4);
        assert!(t.p_value < 0.01);
    }

    #[test]
    fn overlapping_sample_example_uses_independence_formula() {
        let t = difference_test(
            Estimate { coef: -0.025, se: 0.014 },
            Estimate { coef: -0.052, se: 0.021 },
        );
        assert!((t.difference.abs() - 0.027).abs() < 1e-12);
        assert!((t.se - 0.0252).abs() < 5e-5);
    }

    #[test]
    fn self_comparison() {
        let e = Estimate { coef: -0.04, se: 0.01 };
        let t = difference_test(e, e);
        assert_eq!(t.difference, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn hansen_j_accessors() {
        assert_eq!(HansenJ::ExactlyIdentified.statistic(), 0.0);
        assert_eq!(HansenJ::ExactlyIdentified.p_value(), None);
    }
}
