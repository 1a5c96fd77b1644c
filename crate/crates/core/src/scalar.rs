//! Scalar abstraction shared by every numerical routine in the crate.
//!
//! All grids, matrices and solvers are generic over [`Scalar`], which is
//! implemented for `f32` and `f64`. Tolerances and literal constants are
//! written as `f64` and converted through [`lit`].

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating point type usable by the solvers.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + LowerExp
    + Default
    + Sum
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Send
    + Sync
    + 'static
{
    /// Largest argument accepted by `exp` before evaluation is reported as
    /// saturated instead of returning an infinity.
    fn exp_ceiling() -> Self;
}

impl Scalar for f64 {
    fn exp_ceiling() -> Self {
        700.0
    }
}

impl Scalar for f32 {
    fn exp_ceiling() -> Self {
        88.0
    }
}

/// Converts an `f64` literal into the working precision.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in working precision")
}

/// Converts an index or count into the working precision.
#[inline]
pub fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in working precision")
}

/// Widens a working-precision value to `f64` (for reports and I/O).
#[inline]
pub fn to_f64<T: Scalar>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Maximum absolute value of a slice (0 for an empty slice).
pub fn sup_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |acc, x| acc.max(x.abs()))
}

/// `max_i |a_i - b_i|`.
pub fn sup_dist<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter()
        .zip(b)
        .fold(T::zero(), |acc, (x, y)| acc.max((*x - *y).abs()))
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(x, y)| *x * *y).sum()
}
