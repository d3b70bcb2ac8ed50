//! Heteroskedasticity-based generated instruments.
//!
//! Two steps: regress the treatment on the exogenous design to get
//! residuals `v̂`, then multiply each mean-centered regressor in `Z` by `v̂`.
//! The products are valid instruments when the first-stage error variance
//! depends on `Z` while its covariance with the outcome error does not.

use log::{info, warn};

use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix, Qr};
use crate::regression::{check_weights, ols_fit, wald_joint, ColumnRole, DesignMatrix, VceKind};
use crate::scalar::Scalar;

/// Relative variance below which a generated column counts as dead.
pub const DEGENERATE_VARIANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InstrumentSource {
    Lewbel,
    External,
}

/// Robust joint test that `v̂²` does not vary with `Z`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeteroDiagnostic {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Excluded instruments plus how they were built.
#[derive(Debug, Clone, PartialEq)]
pub struct InstrumentSet<T> {
    pub source: InstrumentSource,
    /// First-stage residuals (Lewbel only).
    pub residuals: Option<Vec<T>>,
    /// Means of the `Z` columns that produced the kept instruments.
    pub z_bar: Vec<T>,
    pub instruments: Matrix<T>,
    pub labels: Vec<String>,
    /// Labels of generated columns dropped as numerically dead.
    pub dropped: Vec<String>,
    pub diagnostics: Option<HeteroDiagnostic>,
}

impl<T: Scalar> InstrumentSet<T> {
    /// Wraps user-supplied instrument columns.
    pub fn external(labels: Vec<String>, instruments: Matrix<T>) -> Result<Self> {
        if labels.len() != instruments.ncols() {
            return Err(Error::Dimension(format!(
                "{} labels for {} instrument columns",
                labels.len(),
                instruments.ncols()
            )));
        }
        if instruments.ncols() == 0 {
            return Err(Error::DegenerateInstruments("no instruments supplied".into()));
        }
        Ok(Self {
            source: InstrumentSource::External,
            residuals: None,
            z_bar: Vec::new(),
            instruments,
            labels,
            dropped: Vec::new(),
            diagnostics: None,
        })
    }

    pub fn len(&self) -> usize {
        self.instruments.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// First-stage regression of the treatment on the exogenous design.
#[derive(Debug, Clone, PartialEq)]
pub struct FirstStage<T> {
    pub gamma: Vec<T>,
    pub residuals: Vec<T>,
    /// `v̂` is identically zero up to rounding: the design predicts D exactly.
    pub degenerate: bool,
}

/// `γ̂` from regressing `d` (0/1) on `x`, and `v̂ = d - xγ̂`.
pub fn first_stage_residuals<T: Scalar>(
    x: &DesignMatrix<T>,
    d: &[T],
    weights: Option<&[T]>,
) -> Result<FirstStage<T>> {
    if let Some(i) = d.iter().position(|&v| v != T::zero() && v != T::one()) {
        return Err(Error::Design(format!(
            "treatment must be binary; row {} holds {}",
            i + 1,
            d[i]
        )));
    }
    let (n, k) = (x.nrows(), x.ncols());
    if d.len() != n {
        return Err(Error::Dimension(format!("{} treatment values for {n} rows", d.len())));
    }
    if n <= k {
        return Err(Error::TooFewObservations { n, k });
    }
    if let Some(w) = weights {
        check_weights(w, n)?;
    }
    let (xs, ds) = match weights {
        Some(w) => {
            let s: Vec<T> = w.iter().map(|v| v.sqrt()).collect();
            (
                x.matrix().scale_rows(&s),
                d.iter().zip(&s).map(|(&a, &b)| a * b).collect::<Vec<_>>(),
            )
        }
        None => (x.matrix().clone(), d.to_vec()),
    };
    let qr = Qr::decompose(&xs, T::rank_tolerance());
    if qr.rank() < k {
        return Err(Error::RankDeficient(
            qr.dropped().iter().map(|&j| x.labels()[j].clone()).collect(),
        ));
    }
    let gamma = qr.solve(&ds);
    let fitted = x.matrix().mul_vec(&gamma);
    let residuals: Vec<T> = d.iter().zip(&fitted).map(|(&a, &f)| a - f).collect();
    // D is 0/1, so an absolute cutoff is scale-free here.
    let max_v = residuals.iter().fold(T::zero(), |m, r| m.max(r.abs()));
    let degenerate = max_v <= T::of(1e3) * T::epsilon();
    if degenerate {
        warn!("first-stage residuals vanish: the design predicts the treatment exactly");
    }
    Ok(FirstStage {
        gamma,
        residuals,
        degenerate,
    })
}

fn column_mean<T: Scalar>(c: &[T], w: Option<&[T]>) -> T {
    match w {
        Some(w) => dot(c, w) / w.iter().copied().sum(),
        None => c.iter().copied().sum::<T>() / T::of(c.len() as f64),
    }
}

fn variance<T: Scalar>(c: &[T]) -> T {
    let m = column_mean(c, None);
    c.iter().map(|&v| (v - m).powi(2)).sum::<T>() / T::of(c.len() as f64)
}

/// Builds `(Zⱼ - mean(Zⱼ)) ⊙ v̂` for every column of `z`.
///
/// Means are taken over the rows given (weighted when `weights` is set), so
/// when `Z` lies in the span of a design with an intercept each instrument
/// sums to zero exactly. Columns whose variance is below
/// [`DEGENERATE_VARIANCE`] times the largest are dropped.
pub fn make_lewbel_instruments<T: Scalar>(
    z: &DesignMatrix<T>,
    residuals: &[T],
    weights: Option<&[T]>,
) -> Result<InstrumentSet<T>> {
    let n = z.nrows();
    if residuals.len() != n {
        return Err(Error::Dimension(format!("{} residuals for {n} rows", residuals.len())));
    }
    if z.roles().contains(&ColumnRole::Intercept) {
        return Err(Error::Design("heteroskedasticity regressors must exclude the intercept".into()));
    }
    if z.ncols() == 0 {
        return Err(Error::DegenerateInstruments("no regressors to build instruments from".into()));
    }
    let mut cols = Vec::with_capacity(z.ncols());
    let mut means = Vec::with_capacity(z.ncols());
    for j in 0..z.ncols() {
        let c = z.column(j);
        let m = column_mean(c, weights);
        cols.push(c.iter().zip(residuals).map(|(&zi, &v)| (zi - m) * v).collect::<Vec<T>>());
        means.push(m);
    }
    let vars: Vec<T> = cols.iter().map(|c| variance(c)).collect();
    let vmax = vars.iter().fold(T::zero(), |a, &b| a.max(b));
    if !(vmax > T::zero()) {
        return Err(Error::DegenerateInstruments(
            "all generated instruments are constant (no heteroskedasticity signal)".into(),
        ));
    }
    let cut = T::of(DEGENERATE_VARIANCE) * vmax;
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for (j, v) in vars.iter().enumerate() {
        let label = format!("lewbel_{}", z.labels()[j]);
        if *v < cut {
            info!("dropping degenerate generated instrument `{label}`");
            dropped.push(label);
        } else {
            keep.push(j);
        }
    }
    let kept_cols: Vec<&Vec<T>> = keep.iter().map(|&j| &cols[j]).collect();
    let instruments = Matrix::from_columns(&kept_cols)?;
    let diagnostics = hetero_diagnostic(z.matrix(), residuals).ok();
    Ok(InstrumentSet {
        source: InstrumentSource::Lewbel,
        residuals: Some(residuals.to_vec()),
        z_bar: keep.iter().map(|&j| means[j]).collect(),
        instruments,
        labels: keep.iter().map(|&j| format!("lewbel_{}", z.labels()[j])).collect(),
        dropped,
        diagnostics,
    })
}

/// Regresses `v̂²` on `[1, Z]` and tests all slopes jointly with an HC1 Wald F.
///
/// A constant `v̂²` returns statistic 0 and p = 1.
pub fn hetero_diagnostic<T: Scalar>(z: &Matrix<T>, residuals: &[T]) -> Result<HeteroDiagnostic> {
    let n = z.nrows();
    if residuals.len() != n {
        return Err(Error::Dimension(format!("{} residuals for {n} rows", residuals.len())));
    }
    let v2: Vec<T> = residuals.iter().map(|&v| v * v).collect();
    let m = column_mean(&v2, None);
    let spread = v2.iter().fold(T::zero(), |a, &v| a.max((v - m).abs()));
    if spread <= T::of(1e3) * T::epsilon() * m.abs().max(T::min_positive_value()) {
        return Ok(HeteroDiagnostic {
            statistic: 0.0,
            df: z.ncols(),
            p_value: 1.0,
        });
    }
    let labels: Vec<String> = (0..z.ncols()).map(|j| format!("z{j}")).collect();
    let label_refs: Vec<&str> = labels.iter().map(String::as_str).collect();
    let cols: Vec<&[T]> = z.columns().collect();
    let design = DesignMatrix::from_columns(&label_refs, &cols, true)?;
    if design.ncols() < 2 {
        return Err(Error::DegenerateInstruments("Z has no variation".into()));
    }
    let fit = ols_fit(&design, &v2, None, VceKind::Hc1)?;
    let slopes: Vec<usize> = (1..fit.k).collect();
    let w = wald_joint(&fit, &slopes)?;
    Ok(HeteroDiagnostic {
        statistic: w.statistic,
        df: w.df1,
        p_value: w.p_value,
    })
}

/// Full construction from an exogenous design: `v̂` from `x`, then
/// instruments from its non-intercept columns (fixed-effect dummies only when
/// `include_fixed_effects`).
pub fn lewbel_instruments<T: Scalar>(
    x: &DesignMatrix<T>,
    d: &[T],
    weights: Option<&[T]>,
    include_fixed_effects: bool,
) -> Result<InstrumentSet<T>> {
    let fs = first_stage_residuals(x, d, weights)?;
    if fs.degenerate {
        return Err(Error::DegenerateInstruments(
            "first-stage residuals are identically zero".into(),
        ));
    }
    let z = x.subset(&x.instrument_candidates(include_fixed_effects));
    make_lewbel_instruments(&z, &fs.residuals, weights)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn z_design(cols: &[Vec<f64>]) -> DesignMatrix<f64> {
        let labels: Vec<String> = (0..cols.len()).map(|j| format!("z{j}")).collect();
        let refs: Vec<&str> = labels.iter().map(String::as_str).collect();
        DesignMatrix::from_columns(&refs, cols, false).unwrap()
    }

    #[test]
    fn two_point_hand_computation() {
        let (a, b) = (0.3, -0.7);
        let s = make_lewbel_instruments(&z_design(&[vec![1.0, -1.0]]), &[a, b], None).unwrap();
        assert_eq!(s.instruments.column(0), &[a, -b]);
        assert_eq!(s.labels, vec!["lewbel_z0"]);
    }

    #[test]
    fn zero_residuals_are_degenerate() {
        let z = z_design(&[vec![1.0, 2.0, 3.0]]);
        assert!(matches!(
            make_lewbel_instruments(&z, &[0.0; 3], None),
            Err(Error::DegenerateInstruments(_))
        ));
    }

    #[test]
    fn constant_treatment_gives_zero_residuals() {
        let x = DesignMatrix::from_columns(&["x"], &[vec![0.5, 1.0, -2.0, 3.0]], true).unwrap();
        let fs = first_stage_residuals(&x, &[0.0; 4], None).unwrap();
        assert!(fs.gamma.iter().all(|&g| g == 0.0));
        assert!(fs.residuals.iter().all(|&v| v == 0.0));
        assert!(fs.degenerate);
    }

    #[test]
    fn treatment_equal_to_regressor_is_flagged() {
        let dcol = vec![0.0, 1.0, 1.0, 0.0, 1.0];
        let x = DesignMatrix::from_columns(
            &["x", "d"],
            &[vec![0.3, -1.0, 2.0, 0.0, 1.5], dcol.clone()],
            true,
        )
        .unwrap();
        let fs = first_stage_residuals(&x, &dcol, None).unwrap();
        assert!(fs.degenerate);
        assert!(fs.residuals.iter().all(|v: &f64| v.abs() < 1e-12));
    }

    #[test]
    fn non_binary_treatment_rejected() {
        let x = DesignMatrix::from_columns(&["x"], &[vec![0.0, 1.0, 2.0]], true).unwrap();
        assert!(matches!(
            first_stage_residuals(&x, &[0.0, 0.5, 1.0], None),
            Err(Error::Design(_))
        ));
    }

    #[test]
    fn intercept_in_z_rejected() {
        let x = DesignMatrix::from_columns(&["x"], &[vec![0.0, 1.0, 2.0]], true).unwrap();
        assert!(matches!(
            make_lewbel_instruments(&x, &[0.1, -0.2, 0.1], None),
            Err(Error::Design(_))
        ));
    }

    #[test]
    fn constant_squared_residuals() {
        let z = Matrix::from_columns(&[vec![1.0, 2.0, 3.0, 4.0]]).unwrap();
        let h = hetero_diagnostic(&z, &[0.5, -0.5, 0.5, -0.5]).unwrap();
        assert_eq!((h.statistic, h.p_value), (0.0, 1.0));
    }

    #[test]
    fn dead_column_dropped() {
        // second column is constant, so its centered product vanishes
        let z = DesignMatrix::unpruned(
            Matrix::from_columns(&[vec![1.0, 2.0, 4.0, 0.0], vec![3.0; 4]]).unwrap(),
            vec!["a".into(), "b".into()],
            vec![ColumnRole::Regressor; 2],
        )
        .unwrap();
        let s = make_lewbel_instruments(&z, &[0.2, -0.1, 0.3, -0.4], None).unwrap();
        assert_eq!(s.labels, vec!["lewbel_a"]);
        assert_eq!(s.dropped, vec!["lewbel_b"]);
    }
}
