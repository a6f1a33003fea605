//! Scalar abstraction shared by the numeric modules.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Real field used by the loss, solver, tuning and evaluation code.
///
/// Implemented for `f32` and `f64`. Simulation and the batch harness are
/// `f64`-only; everything underneath is generic.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Default duality-gap tolerance for the interior-point solver.
    fn default_gap_tol() -> Self;

    /// Literal conversion; panics only if `v` is not representable, which
    /// never happens for the constants used in this crate.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("usize representable in scalar type")
    }
}

impl Scalar for f64 {
    fn default_gap_tol() -> Self {
        1e-8
    }
}

impl Scalar for f32 {
    fn default_gap_tol() -> Self {
        1e-4
    }
}
