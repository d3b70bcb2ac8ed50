use crate::dist;
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix, Qr};
use crate::scalar::Scalar;

use super::design::DesignMatrix;
use super::vcov::{sandwich, VceKind};

/// Estimates, robust covariance and fit statistics of a least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult<T> {
    pub labels: Vec<String>,
    pub coefficients: Vec<T>,
    pub vcov: Matrix<T>,
    pub std_errors: Vec<T>,
    /// Two-sided p-values from Student t with `n - k` degrees of freedom.
    pub p_values: Vec<f64>,
    /// `y - Xb` on the original (unweighted) scale.
    pub residuals: Vec<T>,
    pub n: usize,
    pub k: usize,
    pub r_squared: T,
    pub adj_r_squared: T,
    /// Weighted when the fit is weighted.
    pub dep_mean: T,
    pub vce: VceKind,
    pub weighted: bool,
}

impl<T: Scalar> FitResult<T> {
    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == name)
            .ok_or_else(|| Error::MissingCoefficient(name.to_string()))
    }

    pub fn coef(&self, name: &str) -> Result<T> {
        Ok(self.coefficients[self.index_of(name)?])
    }

    pub fn se(&self, name: &str) -> Result<T> {
        Ok(self.std_errors[self.index_of(name)?])
    }

    pub fn p_value(&self, name: &str) -> Result<f64> {
        Ok(self.p_values[self.index_of(name)?])
    }

    pub fn df_resid(&self) -> usize {
        self.n - self.k
    }
}

pub(crate) fn check_weights<T: Scalar>(w: &[T], n: usize) -> Result<()> {
    if w.len() != n {
        return Err(Error::Dimension(format!("{} weights for {n} rows", w.len())));
    }
    if let Some(i) = w.iter().position(|&v| !(v > T::zero() && v.is_finite())) {
        return Err(Error::InvalidWeight {
            row: i + 1,
            value: w[i].to_string(),
        });
    }
    Ok(())
}

/// Residual-based fit statistics shared by OLS and 2SLS.
pub(crate) struct Goodness<T> {
    pub r_squared: T,
    pub adj_r_squared: T,
    pub dep_mean: T,
}

/// Centered R² when `centered`, uncentered otherwise.
pub(crate) fn goodness<T: Scalar>(
    y: &[T],
    e: &[T],
    w: Option<&[T]>,
    k: usize,
    centered: bool,
) -> Goodness<T> {
    let n = y.len();
    let one = vec![T::one(); n];
    let w = w.unwrap_or(&one);
    let sw: T = w.iter().copied().sum();
    let dep_mean = dot(y, w) / sw;
    let centre = if centered { dep_mean } else { T::zero() };
    let tss: T = y.iter().zip(w).map(|(&v, &wi)| wi * (v - centre).powi(2)).sum();
    let rss: T = e.iter().zip(w).map(|(&r, &wi)| wi * r * r).sum();
    let r_squared = T::one() - rss / tss;
    let df_total = if centered { n - 1 } else { n };
    let adj_r_squared =
        T::one() - (T::one() - r_squared) * T::of(df_total as f64) / T::of((n - k) as f64);
    Goodness {
        r_squared,
        adj_r_squared,
        dep_mean,
    }
}

pub(crate) fn inference<T: Scalar>(b: &[T], v: &Matrix<T>, df: usize) -> (Vec<T>, Vec<f64>) {
    let se: Vec<T> = v.diagonal().into_iter().map(|d| d.max(T::zero()).sqrt()).collect();
    let p = b
        .iter()
        .zip(&se)
        .map(|(&bj, &sj)| dist::t_two_sided((bj / sj).to_f64_lossy(), df as f64))
        .collect();
    (se, p)
}

/// Least squares via Householder QR with a robust sandwich covariance.
///
/// Weights are analytic: the fit minimizes `Σ wᵢeᵢ²` and the meat uses
/// `wᵢ²eᵢ²`. Adjusted R² is `1 - (1 - R²)(n - 1)/(n - k)`.
pub fn ols_fit<T: Scalar>(
    x: &DesignMatrix<T>,
    y: &[T],
    weights: Option<&[T]>,
    vce: VceKind,
) -> Result<FitResult<T>> {
    let (n, k) = (x.nrows(), x.ncols());
    if y.len() != n {
        return Err(Error::Dimension(format!("{} outcomes for a {n}-row design", y.len())));
    }
    if n <= k {
        return Err(Error::TooFewObservations { n, k });
    }
    if let Some(w) = weights {
        check_weights(w, n)?;
    }
    let sw: Option<Vec<T>> = weights.map(|w| w.iter().map(|v| v.sqrt()).collect());
    let (xs, ys) = match &sw {
        Some(s) => (
            x.matrix().scale_rows(s),
            y.iter().zip(s).map(|(&a, &b)| a * b).collect(),
        ),
        None => (x.matrix().clone(), y.to_vec()),
    };
    let qr = Qr::decompose(&xs, T::rank_tolerance());
    if qr.rank() < k {
        return Err(Error::RankDeficient(
            qr.dropped().iter().map(|&j| x.labels()[j].clone()).collect(),
        ));
    }
    let b = qr.solve(&ys);
    let fitted = x.matrix().mul_vec(&b);
    let residuals: Vec<T> = y.iter().zip(&fitted).map(|(&a, &f)| a - f).collect();
    let es: Vec<T> = match &sw {
        Some(s) => residuals.iter().zip(s).map(|(&e, &si)| e * si).collect(),
        None => residuals.clone(),
    };
    let vcov = sandwich(&qr.gram_inverse(), &xs, &es).scale(vce.factor(n, k));
    let (std_errors, p_values) = inference(&b, &vcov, n - k);
    let g = goodness(y, &residuals, weights, k, x.has_intercept());
    Ok(FitResult {
        labels: x.labels().to_vec(),
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
        vce,
        weighted: weights.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn design(cols: &[Vec<f64>], labels: &[&str]) -> DesignMatrix<f64> {
        DesignMatrix::from_columns(labels, cols, true).unwrap()
    }

    #[test]
    fn intercept_only_gives_mean() {
        let y = [1.0f64, 0.0, 1.0, 1.0, 0.0];
        let x = DesignMatrix::new(
            Matrix::from_columns(&[vec![1.0; 5]]).unwrap(),
            vec!["_cons".into()],
            vec![super::super::ColumnRole::Intercept],
        )
        .unwrap();
        let f = ols_fit(&x, &y, None, VceKind::Hc1).unwrap();
        assert!((f.coefficients[0] - 0.6).abs() < 1e-15);
        for (e, v) in f.residuals.iter().zip(y) {
            assert!((e - (v - 0.6)).abs() < 1e-15);
        }
    }

    #[test]
    fn exact_line() {
        let xs = vec![0.0, 1.0, 2.0];
        let y: Vec<f64> = xs.iter().map(|v| 2.0 * v + 1.0).collect();
        let f = ols_fit(&design(&[xs], &["x"]), &y, None, VceKind::Hc1).unwrap();
        assert!((f.coefficients[0] - 1.0).abs() < 1e-12);
        assert!((f.coefficients[1] - 2.0).abs() < 1e-12);
        assert!(f.residuals.iter().all(|e| e.abs() < 1e-12));
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weights_match_row_duplication() {
        let x1 = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let y = vec![0.3, 0.9, 2.2, 2.8, 4.4];
        let w = vec![1.0, 2.0, 1.0, 3.0, 1.0];
        let fw = ols_fit(&design(&[x1.clone()], &["x"]), &y, Some(&w), VceKind::Hc0).unwrap();
        let mut xd = Vec::new();
        let mut yd = Vec::new();
        for i in 0..5 {
            for _ in 0..w[i] as usize {
                xd.push(x1[i]);
                yd.push(y[i]);
            }
        }
        let fd = ols_fit(&design(&[xd], &["x"]), &yd, None, VceKind::Hc0).unwrap();
        for j in 0..2 {
            assert!((fw.coefficients[j] - fd.coefficients[j]).abs() < 1e-12);
        }
        assert!((fw.r_squared - fd.r_squared).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        let x = design(&[vec![1.0, 2.0]], &["x"]);
        assert!(matches!(
            ols_fit(&x, &[1.0, 2.0], None, VceKind::Hc1),
            Err(Error::TooFewObservations { n: 2, k: 2 })
        ));
        let x = design(&[vec![1.0, 2.0, 4.0]], &["x"]);
        assert!(matches!(
            ols_fit(&x, &[1.0, 2.0], None, VceKind::Hc1),
            Err(Error::Dimension(_))
        ));
        assert!(matches!(
            ols_fit(&x, &[1.0, 2.0, 0.0], Some(&[1.0, 0.0, 1.0]), VceKind::Hc1),
            Err(Error::InvalidWeight { row: 2, .. })
        ));
        let m = Matrix::from_columns(&[vec![1.0; 4], vec![2.0; 4]]).unwrap();
        let unpruned = DesignMatrix::unpruned(
            m,
            vec!["a".into(), "b".into()],
            vec![super::super::ColumnRole::Regressor; 2],
        )
        .unwrap();
        assert!(matches!(
            ols_fit(&unpruned, &[1.0, 2.0, 0.0, 1.0], None, VceKind::Hc1),
            Err(Error::RankDeficient(v)) if v == vec!["b".to_string()]
        ));
    }

    #[test]
    fn hc1_over_hc0_ratio() {
        let x1 = vec![0.1, 1.3, 2.0, 2.9, 4.4, 5.0, 6.2];
        let y = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0];
        let d = design(&[x1], &["x"]);
        let f0 = ols_fit(&d, &y, None, VceKind::Hc0).unwrap();
        let f1 = ols_fit(&d, &y, None, VceKind::Hc1).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let r = f1.vcov.get(i, j) / f0.vcov.get(i, j);
                assert!((r - 7.0 / 5.0).abs() < 1e-13);
            }
        }
    }
}
