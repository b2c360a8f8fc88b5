//! Floating-point scalar abstraction for the real-valued layer.
//!
//! Everything combinatorial in this crate (cells, index sets, domain
//! hierarchies) is exact integer arithmetic. The scalar type only enters
//! where geometry or analysis does: midpoint distances, B-spline values,
//! truncation coefficients and the complexity constants. Those paths are
//! generic over [`Real`] so they can run in `f32` or `f64`; the crate-root
//! aliases fix `f64`, which is what the CLI and the test suite use.

use std::fmt;
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive};

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + AddAssign + Sum<Self> + fmt::Debug + fmt::Display + 'static
{
    /// Exact conversion from a small unsigned integer.
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count representable in scalar type")
    }

    /// Conversion from a small signed integer.
    fn from_int(n: i64) -> Self {
        Self::from_i64(n).expect("integer representable in scalar type")
    }

    /// 2^k for signed k.
    fn exp2i(k: i32) -> Self {
        (Self::one() + Self::one()).powi(k)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + AddAssign + Sum<T> + fmt::Debug + fmt::Display + 'static
{
}
