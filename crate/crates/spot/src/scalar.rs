//! Floating-point scalar abstraction for grid and distance math.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Scalar type the descriptor/distance/matching math is generic over.
///
/// `f32` and `f64` are the intended instantiations; the pipeline runs in
/// `f64` and reference databases store `f32`.
pub trait Scalar:
    Float + NumAssign + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossless-enough conversion from `f64` for parameters and geometry.
    fn from_f64_lossy(value: f64) -> Self {
        Self::from(value).expect("finite f64 converts to any Scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
