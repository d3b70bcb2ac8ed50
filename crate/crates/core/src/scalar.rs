//! Floating-point scalar bound shared by the numeric core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real scalar used by the linear algebra, regression and IV code.
///
/// Implemented for `f32` and `f64`. Reference distributions (F, chi-square,
/// normal) are always evaluated in `f64`.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Debug + Display + Sum + Send + Sync + 'static
{
    /// Lossy conversion from `f64`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 converts to every Scalar")
    }

    /// Widening conversion to `f64`.
    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Relative pivot tolerance for collinearity pruning.
    ///
    /// `1e-10` for `f64`; for narrower types the floor is a few hundred ulps
    /// so exact duplicates are still caught.
    fn rank_tolerance() -> Self {
        let floor = Self::epsilon() * Self::of(256.0);
        Self::of(1e-10).max(floor)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
