use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar used by the geometry and projection code.
///
/// Implemented for `f32` and `f64`. The served wire types are all `f64`;
/// `f32` exists for memory-bound batch work where centimetre-level
/// projection error is acceptable.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal into this scalar.
    #[inline]
    fn lit(value: f64) -> Self {
        Self::from_f64(value).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }

    /// Convergence threshold for iterative solvers.
    fn solver_tolerance() -> Self;
}

impl Real for f32 {
    fn solver_tolerance() -> Self {
        1e-6
    }
}

impl Real for f64 {
    fn solver_tolerance() -> Self {
        1e-14
    }
}
