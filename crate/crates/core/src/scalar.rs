//! Scalar abstraction: all core math is generic over a floating-point type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign};

/// Floating-point scalar used throughout the planner: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + NumAssign + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` literal or config value.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    /// Exact integer-valued scalar.
    #[inline]
    fn of_usize(v: usize) -> Self {
        Self::from_usize(v).expect("representable count")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Wrap an angle to (-pi, pi].
pub fn wrap_angle<R: Real>(a: R) -> R {
    let two_pi = R::PI() + R::PI();
    let mut a = a % two_pi;
    if a > R::PI() {
        a -= two_pi;
    } else if a <= -R::PI() {
        a += two_pi;
    }
    a
}

/// Smallest signed difference `a - b` wrapped to (-pi, pi].
pub fn angle_diff<R: Real>(a: R, b: R) -> R {
    wrap_angle(a - b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wrap_stays_in_range() {
        for i in -100..100 {
            let a = 0.37 * i as f64;
            let w = wrap_angle(a);
            assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
            // same angle modulo 2*pi
            assert!(((a - w) / (2.0 * std::f64::consts::PI)).round() * 2.0 * std::f64::consts::PI
                - (a - w)
                < 1e-9);
        }
    }

    #[test]
    fn heading_wrap_example() {
        // 3.1 rad to -3.1 rad is a small step across the branch cut, not 6.2 rad.
        let d: f64 = angle_diff(-3.1, 3.1);
        assert!((d.abs() - (2.0 * std::f64::consts::PI - 6.2)).abs() < 1e-12);
    }
}
