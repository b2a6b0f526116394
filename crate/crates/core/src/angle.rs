//! Wrapping helpers for phases on the circle.

use std::f64::consts::{PI, TAU};

/// Reduces `x` into `[0, 2 pi)`.
pub fn wrap_2pi(x: f64) -> f64 {
    let r = x.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduces `x` into `(-pi, pi]`.
pub fn wrap_pm_pi(x: f64) -> f64 {
    let r = PI - (PI - x).rem_euclid(TAU);
    if r <= -PI {
        r + TAU
    } else {
        r
    }
}

/// Distance on the circle, in `[0, pi]`.
pub fn circular_distance(x: f64, y: f64) -> f64 {
    wrap_pm_pi(x - y).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn half_open_ends() {
        assert_eq!(wrap_pm_pi(PI), PI);
        assert_eq!(wrap_pm_pi(-PI), PI);
        assert_eq!(wrap_2pi(TAU), 0.0);
        assert_eq!(wrap_2pi(-1e-300), 0.0);
    }

    proptest! {
        #[test]
        fn ranges(x in -100.0..100.0f64) {
            let a = wrap_2pi(x);
            prop_assert!((0.0..TAU).contains(&a));
            let b = wrap_pm_pi(x);
            prop_assert!(b > -PI && b <= PI);
            prop_assert!(circular_distance(a, x) < 1e-12);
            prop_assert!(circular_distance(b, x) < 1e-12);
        }
    }
}
