//! Scalar abstraction for the numerical core.
//!
//! Everything downstream (fields, solvers, steppers, ODE integrators) is
//! written against [`Real`] so the same code runs in `f32` or `f64`.
//! Concrete `f64` aliases live at the crate root; the harness and the
//! acceptance suite pin `f64`.

use std::fmt::{Debug, Display};
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
    + rustfft::FftNum
{
    /// Convert an `f64` literal into this scalar type.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal not representable")
    }

    /// Lossy view as `f64`, for reporting and error messages.
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Kahan compensated sum over a slice. Deterministic (strictly sequential)
/// and accurate to O(eps) independent of length.
pub fn kahan_sum<R: Real>(values: &[R]) -> R {
    let mut sum = R::zero();
    let mut comp = R::zero();
    for &x in values {
        let y = x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Kahan sum of `f(x)` over a slice, same guarantees as [`kahan_sum`].
pub fn kahan_sum_by<R: Real, F: FnMut(R) -> R>(values: &[R], mut f: F) -> R {
    let mut sum = R::zero();
    let mut comp = R::zero();
    for &x in values {
        let y = f(x) - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}
