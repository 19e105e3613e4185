//! Floating-point abstraction shared by the geometry, channel and allocation code.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Real scalar the simulator can run on: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or config value.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(v: usize) -> Self {
        Self::from_usize(v).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Tolerance used when checking that a quantity is integral (e.g. beams per sector).
    fn integrality_tol() -> Self;
}

impl Real for f32 {
    fn integrality_tol() -> Self {
        1e-4
    }
}

impl Real for f64 {
    fn integrality_tol() -> Self {
        1e-9
    }
}

/// dB to linear power ratio.
#[inline]
pub fn db_to_linear<T: Real>(db: T) -> T {
    T::lit(10.0).powf(db / T::lit(10.0))
}

/// Linear power ratio to dB.
#[inline]
pub fn linear_to_db<T: Real>(lin: T) -> T {
    T::lit(10.0) * lin.log10()
}

/// dBm to milliwatts.
#[inline]
pub fn dbm_to_mw<T: Real>(dbm: T) -> T {
    db_to_linear(dbm)
}

/// Radians to degrees, rounded to the scalar's integrality tolerance so that 10° prints as `10`.
pub fn clean_degrees<T: Real>(rad: T) -> f64 {
    let q = (1.0 / T::integrality_tol().as_f64()).round();
    (rad.to_degrees().as_f64() * q).round() / q
}
