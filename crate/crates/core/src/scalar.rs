//! Floating point abstraction shared by every numerical routine in the crate.

use std::fmt;

use nalgebra as na;
use num_traits as nt;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Real scalar usable by the decomposition and moment routines.
///
/// Implemented for `f32` and `f64`. Tolerances in the crate are written as
/// `f64` literals and lifted with [`Scalar::tol`], which floors them at a
/// small multiple of machine epsilon so the same code path stays meaningful
/// in single precision.
pub trait Scalar:
    na::RealField
    + Copy
    + nt::FromPrimitive
    + nt::ToPrimitive
    + Serialize
    + DeserializeOwned
    + fmt::Debug
    + fmt::Display
    + Send
    + Sync
    + 'static
{
    const EPSILON: Self;

    /// Converts an `f64` literal. Panics only on values the type cannot hold.
    fn lit(x: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
    }

    /// Tolerance `x`, floored at `100 * EPSILON`.
    fn tol(x: f64) -> Self {
        let floor = Self::EPSILON * Self::lit(100.0);
        let t = Self::lit(x);
        if t > floor {
            t
        } else {
            floor
        }
    }

    fn to_f64_lossy(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }

    fn from_count(n: usize) -> Self {
        Self::lit(n as f64)
    }

    #[allow(clippy::eq_op)]
    fn is_nan(self) -> bool {
        self != self
    }
}

impl Scalar for f32 {
    const EPSILON: Self = f32::EPSILON;
}

impl Scalar for f64 {
    const EPSILON: Self = f64::EPSILON;
}
