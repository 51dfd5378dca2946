//! Scalar traits the simulator is generic over.
//!
//! The allocation rule only needs field arithmetic and an ordering, so it is
//! written against [`Probability`] and works with `f32`, `f64` or exact
//! rationals. Geometry needs square roots and trigonometry and is written
//! against [`Scalar`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};
use rand::Rng;

/// Anything the variable delta rule can run on.
pub trait Probability: Copy + PartialOrd + Num + FromPrimitive + Debug {}

impl<T> Probability for T where T: Copy + PartialOrd + Num + FromPrimitive + Debug {}

/// Floating point scalar used for positions, headings and probabilities in
/// the simulation.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the target cannot represent
    /// finite `f64` values, which no float type does.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().expect("float to f64")
    }

    #[inline]
    fn two_pi() -> Self {
        Self::TAU()
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Uniform draw in `[0, 1)`.
///
/// Always consumes exactly one `f64` from the stream so that `f32` and `f64`
/// simulations see the same draw sequence.
#[inline]
pub fn unit_draw<S: Scalar, R: Rng + ?Sized>(rng: &mut R) -> S {
    let u = S::lit(rng.gen::<f64>());
    if u >= S::one() {
        S::one() - S::epsilon()
    } else {
        u
    }
}

/// Uniform draw in `[lo, hi)`.
#[inline]
pub fn uniform<S: Scalar, R: Rng + ?Sized>(rng: &mut R, lo: S, hi: S) -> S {
    lo + (hi - lo) * unit_draw::<S, R>(rng)
}

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_angle<S: Scalar>(a: S) -> S {
    let tau = S::two_pi();
    let w = a % tau;
    let w = if w < S::zero() { w + tau } else { w };
    if w >= tau {
        S::zero()
    } else {
        w
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_angle_range() {
        for a in [-7.0f64, -0.1, 0.0, 3.0, 6.5, 100.0] {
            let w = wrap_angle(a);
            assert!((0.0..std::f64::consts::TAU).contains(&w), "{a} -> {w}");
            assert!(
                ((w - a) / std::f64::consts::TAU).fract().abs() < 1e-9
                    || (1.0 - ((w - a) / std::f64::consts::TAU).fract().abs()) < 1e-9
            );
        }
    }

    #[test]
    fn unit_draw_stays_below_one_for_f32() {
        struct Max;
        impl rand::RngCore for Max {
            fn next_u32(&mut self) -> u32 {
                u32::MAX
            }
            fn next_u64(&mut self) -> u64 {
                u64::MAX
            }
            fn fill_bytes(&mut self, dest: &mut [u8]) {
                dest.fill(0xff)
            }
            fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
                dest.fill(0xff);
                Ok(())
            }
        }
        let u: f32 = unit_draw(&mut Max);
        assert!(u < 1.0);
    }
}
