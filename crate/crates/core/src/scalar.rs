//! Scalar abstractions.
//!
//! The numerical kernels are written once against [`Real`] and instantiated
//! for `f64` (the default everywhere) and `f32`. The exact LP baseline works
//! over any ordered field implementing [`LpScalar`], which covers `f64` with
//! a tolerance and `BigRational` with exact comparisons.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Float, FromPrimitive, One, Signed, ToPrimitive, Zero};

/// Floating-point scalar used by tensors, dual objectives and solvers.
pub trait Real:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; constants in the kernels go through here.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Real for T where
    T: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
}

/// Ordered field for the simplex baseline.
///
/// Comparisons go through `is_pos`/`is_neg` so floating-point instances can
/// apply a tolerance while exact instances compare exactly.
pub trait LpScalar: Clone + Debug + PartialOrd + Zero + One + Signed {
    fn is_pos(&self) -> bool;
    fn is_neg(&self) -> bool;
    fn is_nonzero(&self) -> bool {
        self.is_pos() || self.is_neg()
    }
    fn from_f64_exact(x: f64) -> Option<Self>;
    fn approx_f64(&self) -> f64;
}

/// Pivot tolerance used by the floating-point simplex.
pub const LP_F64_TOL: f64 = 1e-10;

impl LpScalar for f64 {
    fn is_pos(&self) -> bool {
        *self > LP_F64_TOL
    }
    fn is_neg(&self) -> bool {
        *self < -LP_F64_TOL
    }
    fn from_f64_exact(x: f64) -> Option<Self> {
        x.is_finite().then_some(x)
    }
    fn approx_f64(&self) -> f64 {
        *self
    }
}

impl LpScalar for BigRational {
    fn is_pos(&self) -> bool {
        Signed::is_positive(self)
    }
    fn is_neg(&self) -> bool {
        Signed::is_negative(self)
    }
    fn from_f64_exact(x: f64) -> Option<Self> {
        BigRational::from_float(x)
    }
    fn approx_f64(&self) -> f64 {
        let num = self.numer().to_f64();
        let den = self.denom().to_f64();
        match (num, den) {
            (Some(n), Some(d)) if d.is_finite() && n.is_finite() => n / d,
            _ => rational_to_f64_scaled(self),
        }
    }
}

// Handles numerators/denominators that overflow f64 on their own.
fn rational_to_f64_scaled(q: &BigRational) -> f64 {
    let shift = q.numer().bits().max(q.denom().bits()) as i64 - 60;
    if shift <= 0 {
        return f64::NAN;
    }
    let n = q.numer() >> shift as usize;
    let d = q.denom() >> shift as usize;
    let d = if d.is_zero() { BigInt::one() } else { d };
    n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
}
