//! Scalar abstraction for the numeric core.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign};

/// Floating-point scalar the numeric modules are generic over.
///
/// Implemented for `f32` and `f64`. All algorithms keep summation order
/// fixed, so results are bit-reproducible for a given `Scalar` type.
pub trait Scalar: Float + NumAssign + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static {
    /// Lossless conversion from `f64` literals used for algorithm constants.
    fn c(v: f64) -> Self {
        Self::from_f64(v).expect("constant representable")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
