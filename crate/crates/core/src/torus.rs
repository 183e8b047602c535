//! Angle arithmetic on the circle `[0, 2π)` and the scalar value types used
//! throughout the simulator.

use std::f64::consts::TAU;
use std::fmt;

use crate::error::TorusError;

/// Absolute tolerance used wherever two angles must be treated as logically
/// equal (simultaneous firing, duplicate headings).
pub const EPS_ANGLE: f64 = 1e-9;

/// A point on the circle, stored as radians in `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Angle(f64);

impl Angle {
    pub const ZERO: Angle = Angle(0.0);

    /// Wraps an arbitrary finite value onto the circle.
    pub fn wrap(x: f64) -> Result<Angle, TorusError> {
        if !x.is_finite() {
            return Err(TorusError::NonFinite(x));
        }
        Ok(Angle(wrap_radians(x)))
    }

    /// Radians in `[0, 2π)`.
    #[inline]
    pub fn radians(self) -> f64 {
        self.0
    }

    /// Clockwise-positive gap from `self` to `to`, in `[0, 2π)`.
    #[inline]
    pub fn gap_to(self, to: Angle) -> f64 {
        cw_gap(self, to)
    }

    /// Shortest distance between two angles, in `[0, π]`.
    pub fn distance(self, other: Angle) -> f64 {
        let g = cw_gap(self, other);
        g.min(TAU - g)
    }
}

impl fmt::Display for Angle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl TryFrom<f64> for Angle {
    type Error = TorusError;

    fn try_from(x: f64) -> Result<Self, Self::Error> {
        Angle::wrap(x)
    }
}

impl From<Angle> for f64 {
    fn from(a: Angle) -> f64 {
        a.0
    }
}

/// Signed angular rate in radians per second.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct AngularRate(f64);

impl AngularRate {
    pub fn new(value: f64) -> Result<Self, TorusError> {
        if value.is_finite() {
            Ok(AngularRate(value))
        } else {
            Err(TorusError::NonFinite(value))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// Non-negative span of simulated time in seconds.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct Duration(f64);

impl Duration {
    pub const ZERO: Duration = Duration(0.0);

    pub fn new(seconds: f64) -> Result<Self, TorusError> {
        if !seconds.is_finite() {
            Err(TorusError::NonFinite(seconds))
        } else if seconds < 0.0 {
            Err(TorusError::NegativeDuration(seconds))
        } else {
            Ok(Duration(seconds))
        }
    }

    #[inline]
    pub fn seconds(self) -> f64 {
        self.0
    }
}

/// Reduces a finite value into `[0, 2π)`.
///
/// Values that are already within one turn of the interval use a single
/// conditional add/subtract so that bounded updates stay exact; anything
/// further away falls back to `rem_euclid`.
#[inline]
pub fn wrap_radians(x: f64) -> f64 {
    let y = if (0.0..TAU).contains(&x) {
        x
    } else if (-TAU..0.0).contains(&x) {
        x + TAU
    } else if (TAU..2.0 * TAU).contains(&x) {
        x - TAU
    } else {
        x.rem_euclid(TAU)
    };
    // x + TAU can round up to exactly TAU for tiny negative x.
    if y >= TAU {
        0.0
    } else {
        y
    }
}

/// Wraps a finite value onto the circle.
pub fn wrap(x: f64) -> Result<Angle, TorusError> {
    Angle::wrap(x)
}

/// Clockwise gap from `from` to `to`: `to - from` when `to >= from`,
/// otherwise `2π - (from - to)`.
#[inline]
pub fn cw_gap(from: Angle, to: Angle) -> f64 {
    let (a, b) = (from.0, to.0);
    if b >= a {
        b - a
    } else {
        TAU - (a - b)
    }
}

/// Heading implied by an oscillator phase at time `t`: `(φ - ω₀ t) mod 2π`.
pub fn heading_from_phase(phase: Angle, t: Duration, omega0: AngularRate) -> Angle {
    Angle(wrap_radians(phase.0 - omega0.0 * t.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn a(x: f64) -> Angle {
        Angle::wrap(x).unwrap()
    }

    #[test]
    fn wrap_examples() {
        assert_eq!(a(0.0).radians(), 0.0);
        assert_abs_diff_eq!(a(5.0 * PI / 2.0).radians(), PI / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(a(-PI / 2.0).radians(), 3.0 * PI / 2.0, epsilon = 1e-15);
    }

    #[test]
    fn wrap_rejects_non_finite() {
        assert!(matches!(wrap(f64::NAN), Err(TorusError::NonFinite(_))));
        assert!(wrap(f64::INFINITY).is_err());
        assert!(wrap(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn wrap_tiny_negative_is_in_range() {
        let w = wrap_radians(-1e-300);
        assert!((0.0..TAU).contains(&w));
    }

    #[test]
    fn cw_gap_examples() {
        assert_abs_diff_eq!(cw_gap(a(PI / 4.0), a(PI / 2.0)), PI / 4.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            cw_gap(a(3.0 * PI / 2.0), a(PI / 4.0)),
            3.0 * PI / 4.0,
            epsilon = 1e-15
        );
        assert_eq!(cw_gap(a(PI), a(PI)), 0.0);
    }

    #[test]
    fn heading_from_phase_examples() {
        let w0 = AngularRate::new(PI / 5.0).unwrap();
        let zero = Duration::ZERO;
        assert_eq!(
            heading_from_phase(a(PI / 2.0), zero, w0).radians(),
            PI / 2.0
        );
        // π - (π/5)·10 = -π ≡ π
        let h = heading_from_phase(a(PI), Duration::new(10.0).unwrap(), w0);
        assert_abs_diff_eq!(h.radians(), PI, epsilon = 1e-12);
        // 0 - (π/5)·5 = -π ≡ π
        let h = heading_from_phase(a(0.0), Duration::new(5.0).unwrap(), w0);
        assert_abs_diff_eq!(h.radians(), PI, epsilon = 1e-12);
    }

    #[test]
    fn duration_rejects_negative() {
        assert!(Duration::new(-1.0).is_err());
        assert!(Duration::new(f64::NAN).is_err());
        assert!(AngularRate::new(f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn wrap_in_range_and_idempotent(x in -1e6f64..1e6) {
            let w = wrap_radians(x);
            prop_assert!((0.0..TAU).contains(&w));
            prop_assert_eq!(wrap_radians(w), w);
        }

        #[test]
        fn wrap_is_periodic(x in 0.0f64..TAU, k in -50i32..50) {
            let shifted = wrap_radians(x + TAU * f64::from(k));
            let d = a(shifted).distance(a(x));
            prop_assert!(d < 1e-9, "x={x} k={k} d={d}");
        }

        #[test]
        fn gaps_close_the_circle(x in 0.0f64..TAU, y in 0.0f64..TAU) {
            let (p, q) = (a(x), a(y));
            let s = cw_gap(p, q) + cw_gap(q, p);
            if x == y {
                prop_assert_eq!(s, 0.0);
            } else {
                prop_assert!((s - TAU).abs() < 1e-12);
            }
        }

        #[test]
        fn heading_at_time_zero_is_phase(x in 0.0f64..TAU, w in 0.01f64..10.0) {
            let h = heading_from_phase(a(x), Duration::ZERO, AngularRate::new(w).unwrap());
            prop_assert_eq!(h.radians(), a(x).radians());
        }
    }
}
