//! Scalar abstraction for the numeric kernels.
//!
//! All core math (polynomial arithmetic, the SDP solver, trajectory
//! integration) is generic over a floating-point scalar. `f64` is the type
//! everything is tuned for; `f32` compiles and works for small problems but
//! is too coarse for tight certificate tolerances.

use num_traits::{Float, FromPrimitive};

/// Floating-point scalar usable throughout the crate: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + std::fmt::Debug + std::fmt::Display + std::fmt::LowerExp + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand for pulling an `f64` literal into the scalar type.
#[inline]
pub fn real<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}
