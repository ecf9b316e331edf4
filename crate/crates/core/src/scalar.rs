//! Floating-point abstraction for the scoring and loss code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// A real scalar usable for log-probabilities and losses: `f32` or `f64`.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Converts a count or other `f64` constant into this scalar.
    fn of(value: f64) -> Self {
        Self::from_f64(value).expect("f64 constant representable in scalar")
    }

    /// Converts a length or count into this scalar.
    fn of_usize(value: usize) -> Self {
        Self::from_usize(value).expect("usize representable in scalar")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}
