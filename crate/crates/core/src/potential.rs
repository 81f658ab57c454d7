//! The quartic double-well potential `W(r) = (1 - r^2)^2 / 4`, its
//! primitive `G`, the surface tension and the one-dimensional optimal profile.

use crate::error::{Error, Result};

/// `c0 = ∫_{-1}^{1} sqrt(2 W(s)) ds = 2 sqrt(2) / 3`.
pub const SURFACE_TENSION: f64 = 2.0 * core::f64::consts::SQRT_2 / 3.0;

/// Marker for the standard quartic double well. Kept as a type so other
/// wells can be added behind the same interface.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct QuarticWell;

impl QuarticWell {
    #[inline]
    pub fn value(self, r: f64) -> f64 {
        let a = 1.0 - r * r;
        0.25 * a * a
    }

    #[inline]
    pub fn derivative(self, r: f64) -> f64 {
        r * r * r - r
    }

    #[inline]
    pub fn second_derivative(self, r: f64) -> f64 {
        3.0 * r * r - 1.0
    }

    /// Divided difference `(W(b) - W(a)) / (b - a)`, continued by `W'(a)`
    /// on the diagonal. Polynomial, so no division is performed.
    #[inline]
    pub fn slope(self, a: f64, b: f64) -> f64 {
        0.25 * (a + b) * (a * a + b * b - 2.0)
    }

    /// Partial derivative of [`Self::slope`] with respect to its first argument.
    #[inline]
    pub fn slope_partial(self, a: f64, b: f64) -> f64 {
        0.25 * (3.0 * a * a + 2.0 * a * b + b * b - 2.0)
    }

    /// Signed primitive of `sqrt(2 W)`, using `|1 - s^2| / sqrt(2)` as the
    /// integrand so the result is monotone on the whole line.
    pub fn primitive(self, r: f64) -> f64 {
        let a = libm::fabs(r);
        let g = if a <= 1.0 {
            a - a * a * a / 3.0
        } else {
            // G(1) + ∫_1^a (s^2 - 1) ds, before the 1/sqrt(2) factor
            2.0 / 3.0 + (a * a * a / 3.0 - a + 2.0 / 3.0)
        };
        libm::copysign(g * core::f64::consts::FRAC_1_SQRT_2, r)
    }
}

fn check_finite(r: f64) -> Result<f64> {
    if r.is_finite() {
        Ok(r)
    } else {
        Err(Error::invalid("potential argument must be finite"))
    }
}

pub fn well_value(r: f64) -> Result<f64> {
    check_finite(r).map(|r| QuarticWell.value(r))
}

pub fn well_derivative(r: f64) -> Result<f64> {
    check_finite(r).map(|r| QuarticWell.derivative(r))
}

pub fn well_primitive(r: f64) -> Result<f64> {
    check_finite(r).map(|r| QuarticWell.primitive(r))
}

/// Closed form of `∫_{-1}^{1} sqrt(2 W)`; equals [`SURFACE_TENSION`].
pub fn surface_tension() -> f64 {
    QuarticWell.primitive(1.0) - QuarticWell.primitive(-1.0)
}

/// Heteroclinic profile `q(s) = tanh(s / sqrt(2))` with `q'' = W'(q)`.
#[inline]
pub fn optimal_profile(s: f64) -> f64 {
    libm::tanh(s * core::f64::consts::FRAC_1_SQRT_2)
}

/// `q'(s) = (1 - q^2) / sqrt(2)`.
#[inline]
pub fn optimal_profile_slope(s: f64) -> f64 {
    let q = optimal_profile(s);
    (1.0 - q * q) * core::f64::consts::FRAC_1_SQRT_2
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // Adaptive Simpson; independent of the closed forms above.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> f64 {
        fn rec<F: Fn(f64) -> f64>(
            f: &F,
            a: f64,
            b: f64,
            fa: f64,
            fm: f64,
            fb: f64,
            whole: f64,
            tol: f64,
            depth: u32,
        ) -> f64 {
            let m = 0.5 * (a + b);
            let lm = 0.5 * (a + m);
            let rm = 0.5 * (m + b);
            let flm = f(lm);
            let frm = f(rm);
            let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
            let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
            if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
                left + right + (left + right - whole) / 15.0
            } else {
                rec(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
                    + rec(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
            }
        }
        let fa = f(a);
        let fb = f(b);
        let fm = f(0.5 * (a + b));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        rec(f, a, b, fa, fm, fb, whole, tol, 50)
    }

    fn sqrt_2w(s: f64) -> f64 {
        (2.0 * (1.0 - s * s).powi(2) / 4.0).sqrt()
    }

    #[test]
    fn well_examples() {
        assert_eq!(well_value(1.0).unwrap(), 0.0);
        assert_eq!(well_value(0.0).unwrap(), 0.25);
        assert_eq!(well_value(3.0).unwrap(), 16.0);
        assert_eq!(well_derivative(1.0).unwrap(), 0.0);
        assert_eq!(well_derivative(0.0).unwrap(), 0.0);
        assert_eq!(well_derivative(2.0).unwrap(), 6.0);
    }

    #[test]
    fn non_finite_rejected() {
        assert!(well_value(f64::NAN).is_err());
        assert!(well_derivative(f64::INFINITY).is_err());
        assert!(well_primitive(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn surface_tension_matches_quadrature() {
        let quad = simpson(&sqrt_2w, -1.0, 1.0, 1e-14);
        assert_abs_diff_eq!(quad, 0.9428090416, epsilon = 1e-10);
        assert_abs_diff_eq!(surface_tension(), quad, epsilon = 1e-12);
        assert_abs_diff_eq!(SURFACE_TENSION, quad, epsilon = 1e-12);
        assert_abs_diff_eq!(surface_tension(), 2.0 * QuarticWell.primitive(1.0), epsilon = 1e-15);
    }

    #[test]
    fn primitive_examples() {
        let g1 = simpson(&sqrt_2w, 0.0, 1.0, 1e-14);
        assert_abs_diff_eq!(g1, 0.4714045208, epsilon = 1e-10);
        assert_eq!(well_primitive(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(well_primitive(1.0).unwrap(), g1, epsilon = 1e-12);
        assert_abs_diff_eq!(well_primitive(-1.0).unwrap(), -g1, epsilon = 1e-12);
        // outside [-1, 1] the integrand is |1 - s^2| / sqrt(2)
        let g2 = simpson(&sqrt_2w, 0.0, 2.0, 1e-13);
        assert_abs_diff_eq!(well_primitive(2.0).unwrap(), g2, epsilon = 1e-10);
        assert_abs_diff_eq!(
            well_primitive(-2.5).unwrap(),
            -simpson(&sqrt_2w, 0.0, 2.5, 1e-13),
            epsilon = 1e-10
        );
    }

    #[test]
    fn primitive_derivative_is_sqrt_2w() {
        let h = 1e-6;
        for k in 0..199 {
            let r = -0.99 + 0.01 * k as f64;
            let fd = (QuarticWell.primitive(r + h) - QuarticWell.primitive(r - h)) / (2.0 * h);
            let exact = sqrt_2w(r);
            assert!((fd - exact).abs() / exact < 1e-8, "r = {r}");
        }
    }

    #[test]
    fn derivative_is_exact() {
        let h = 1e-6;
        for k in 0..=60 {
            let r = -3.0 + 0.1 * k as f64;
            let fd = (QuarticWell.value(r + h) - QuarticWell.value(r - h)) / (2.0 * h);
            assert_abs_diff_eq!(fd, QuarticWell.derivative(r), epsilon = 1e-7 * (1.0 + r.abs().powi(3)));
        }
    }

    #[test]
    fn slope_is_divided_difference() {
        let w = QuarticWell;
        for &(a, b) in &[(-1.0, 1.0), (0.3, -0.7), (2.0, 0.5), (-1.5, -1.2)] {
            let dd = (w.value(b) - w.value(a)) / (b - a);
            assert_abs_diff_eq!(w.slope(a, b), dd, epsilon = 1e-14);
            assert_eq!(w.slope(a, b), w.slope(b, a));
            let h = 1e-6;
            let fd = (w.slope(a + h, b) - w.slope(a - h, b)) / (2.0 * h);
            assert_abs_diff_eq!(w.slope_partial(a, b), fd, epsilon = 1e-8);
        }
        assert_abs_diff_eq!(w.slope(0.4, 0.4), w.derivative(0.4), epsilon = 1e-15);
    }

    #[test]
    fn profile_examples() {
        assert_eq!(optimal_profile(0.0), 0.0);
        assert_eq!(optimal_profile(100.0), 1.0);
        assert_eq!(optimal_profile(-100.0), -1.0);
        // q'' from the closed form q'' = -sqrt(2) q q'
        let s = 0.7;
        let q = optimal_profile(s);
        let qp = optimal_profile_slope(s);
        let qpp = -core::f64::consts::SQRT_2 * q * qp;
        assert!((qpp - QuarticWell.derivative(q)).abs() < 1e-12);
        // and by finite differences
        let h = 1e-4;
        let fd = (optimal_profile(s + h) - 2.0 * q + optimal_profile(s - h)) / (h * h);
        assert!((fd - QuarticWell.derivative(q)).abs() < 1e-7);
    }

    #[test]
    fn profile_equipartition() {
        for k in 0..100 {
            let s = -5.0 + 0.1 * k as f64;
            let qp = optimal_profile_slope(s);
            let lhs = 0.5 * qp * qp;
            let rhs = QuarticWell.value(optimal_profile(s));
            assert!((lhs - rhs).abs() < 1e-12, "s = {s}");
        }
    }

    proptest::proptest! {
        #[test]
        fn well_nonnegative_and_even(r in -10.0f64..10.0) {
            let w = QuarticWell;
            proptest::prop_assert!(w.value(r) >= 0.0);
            proptest::prop_assert_eq!(w.value(r), w.value(-r));
            proptest::prop_assert_eq!(w.primitive(r), -w.primitive(-r));
        }
    }
}
