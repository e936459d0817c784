//! Scalar abstraction for the numeric core: `f32` or `f64`.
//!
//! Everything downstream of the matrix layer is generic over [`Scalar`];
//! the crate root exports `f64` aliases, which is what the experiments use.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point scalar usable throughout the numeric core.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an `f64` literal into the active scalar type.
#[inline]
pub fn fl<F: Scalar>(x: f64) -> F {
    F::from_f64(x).expect("f64 literal representable in scalar type")
}
