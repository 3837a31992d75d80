//! Floating-point abstraction shared by every algorithm in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the scaling algorithms are generic over.
///
/// Everything here needs `exp`/`ln`, so only IEEE floating types qualify.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Default + Debug + Display + Send + Sync + 'static
{
    /// Largest `x` such that `exp(x)` is finite, with a small safety margin.
    fn max_exponent() -> Self;

    /// Converts a literal; panics only for values the type cannot represent at all.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }
}

impl Scalar for f64 {
    fn max_exponent() -> Self {
        f64::MAX.ln() - 1.0
    }
}

impl Scalar for f32 {
    fn max_exponent() -> Self {
        f32::MAX.ln() - 1.0
    }
}
