use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Qr};
use crate::scalar::Scalar;

/// Heteroskedasticity-robust covariance flavor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VceKind {
    Hc0,
    #[default]
    Hc1,
}

impl VceKind {
    /// Small-sample factor applied to the HC0 sandwich.
    pub fn factor<T: Scalar>(self, n: usize, k: usize) -> T {
        match self {
            VceKind::Hc0 => T::one(),
            VceKind::Hc1 => T::of(n as f64) / T::of((n - k) as f64),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VceKind::Hc0 => "HC0",
            VceKind::Hc1 => "HC1",
        }
    }
}

impl std::str::FromStr for VceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "hc0" => Ok(VceKind::Hc0),
            "hc1" => Ok(VceKind::Hc1),
            _ => Err(Error::Config(format!("unknown robust kind `{s}` (expected hc0 or hc1)"))),
        }
    }
}

/// `B (Σ xᵢxᵢ'eᵢ²) B` for a given bread `B`.
pub(crate) fn sandwich<T: Scalar>(bread: &Matrix<T>, x: &Matrix<T>, e: &[T]) -> Matrix<T> {
    let meat = x.scale_rows(e).gram();
    let mut v = bread
        .matmul(&meat)
        .and_then(|bm| bm.matmul(bread))
        .expect("conformable by construction");
    v.symmetrize();
    v
}

/// Robust sandwich `(X'X)⁻¹ (Σ xᵢxᵢ'eᵢ²) (X'X)⁻¹`, times `n/(n-k)` for HC1.
///
/// For weighted fits pass the `sqrt(w)`-scaled design and residuals.
pub fn hc_vcov<T: Scalar>(x: &Matrix<T>, residuals: &[T], kind: VceKind) -> Result<Matrix<T>> {
    let (n, k) = (x.nrows(), x.ncols());
    if residuals.len() != n {
        return Err(Error::Dimension(format!(
            "{} residuals for a {n}-row design",
            residuals.len()
        )));
    }
    if n <= k {
        return Err(Error::TooFewObservations { n, k });
    }
    let qr = Qr::decompose(x, T::rank_tolerance());
    if qr.rank() < k {
        return Err(Error::RankDeficient(
            qr.dropped().iter().map(|j| format!("#{j}")).collect(),
        ));
    }
    let v = sandwich(&qr.gram_inverse(), x, residuals);
    Ok(v.scale(kind.factor(n, k)))
}
