//! The quartic double-well potential and the split nonlinearities used by the
//! implicit steppers.
//!
//! Everything here is a pure scalar kernel applied nodewise or at quadrature
//! points; finite-element integration of these maps lives in `energies` and
//! the steppers.

/// Double-well potential `F(u) = (u^2 - 1)^2 / 4`.
pub fn well(u: f64) -> f64 {
    let s = u * u - 1.0;
    0.25 * s * s
}

/// `f(u) = F'(u) = u^3 - u`.
pub fn well_prime(u: f64) -> f64 {
    u * u * u - u
}

/// `f'(u) = 3u^2 - 1`.
pub fn well_second(u: f64) -> f64 {
    3.0 * u * u - 1.0
}

/// Convex part `F_+(u) = (u^4 + 1) / 4` of the splitting `F = F_+ - F_-`.
pub fn well_plus(u: f64) -> f64 {
    0.25 * (u * u * u * u + 1.0)
}

/// Concave remainder `F_-(u) = u^2 / 2`.
pub fn well_minus(u: f64) -> f64 {
    0.5 * u * u
}

/// Derivative pair of the convex splitting, evaluated as the splitting
/// schemes use it: the implicit `F_+'(u) = u^3` and the explicit
/// `F_-'(uprev) = uprev`.
pub fn css_splits(u: f64, uprev: f64) -> (f64, f64) {
    (u * u * u, uprev)
}

/// Secant slope of the double well in factored closed form,
/// `(F(a) - F(b)) / (a - b) = (a + b)(a^2 + b^2 - 2) / 4`,
/// which removes the singularity at `a = b` (value `f(a)` there) and avoids
/// cancellation near it.
pub fn secant_slope(a: f64, b: f64) -> f64 {
    0.25 * (a + b) * (a * a + b * b - 2.0)
}

/// Partial derivative of [`secant_slope`] in its first argument:
/// `(3a^2 + 2ab + b^2 - 2) / 4`.
pub fn secant_slope_prime(a: f64, b: f64) -> f64 {
    0.25 * (3.0 * a * a + 2.0 * a * b + b * b - 2.0)
}

/// Split of the secant nonlinearity into a part convex in `a` and a linear
/// remainder: `g_+(a; b) = (a^3 + a^2 b + a b^2 + b^3) / 4` and
/// `g_-(a; b) = (a + b) / 2`, with `secant_slope = g_+ - g_-`.
pub fn midpoint_split(a: f64, b: f64) -> (f64, f64) {
    let g_plus = 0.25 * (a * a * a + a * a * b + a * b * b + b * b * b);
    let g_minus = 0.5 * (a + b);
    (g_plus, g_minus)
}

/// `d g_+ / d a = (3a^2 + 2ab + b^2) / 4 = (2a^2 + (a + b)^2) / 4 >= 0`.
pub fn midpoint_split_prime(a: f64, b: f64) -> f64 {
    0.25 * (3.0 * a * a + 2.0 * a * b + b * b)
}

/// Primitives of the split: `G_+(a; b)` with `d G_+ / d a = g_+`, and
/// `G_-(a; b) = a^2/4 + ab/2` with `d G_- / d a = g_-`.
pub fn midpoint_primitive(a: f64, b: f64) -> (f64, f64) {
    let g_plus = 0.25 * (0.25 * a * a * a * a + b * a * a * a / 3.0 + 0.5 * b * b * a * a + b * b * b * a);
    let g_minus = 0.25 * a * a + 0.5 * a * b;
    (g_plus, g_minus)
}

/// `G(a; b) = G_+ - G_-`, the primitive of the secant slope.
pub fn midpoint_primitive_diff(a: f64, b: f64) -> f64 {
    let (p, m) = midpoint_primitive(a, b);
    p - m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn well_prime_values() {
        assert_eq!(well_prime(0.0), 0.0);
        assert_eq!(well_prime(1.0), 0.0);
        assert_eq!(well_prime(2.0), 6.0);
        assert_eq!(well(1.0), 0.0);
        assert_eq!(well(-1.0), 0.0);
        assert!(well(0.3) >= 0.0);
    }

    #[test]
    fn secant_slope_values() {
        assert_eq!(secant_slope(1.0, 1.0), well_prime(1.0));
        assert_eq!(secant_slope(1.0, -1.0), 0.0);
        // Difference-quotient oracle: (F(2) - F(0)) / 2 = (9/4 - 1/4) / 2.
        let oracle = (well(2.0) - well(0.0)) / 2.0;
        assert_relative_eq!(secant_slope(2.0, 0.0), oracle, epsilon = 1e-15);
        assert_relative_eq!(secant_slope(2.0, 0.0), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn css_splits_consistency() {
        assert_eq!(css_splits(1.0, 0.7), (1.0, 0.7));
        assert_eq!(css_splits(0.0, -0.2).0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let u = rng.random_range(-2.0..2.0);
            let (plus, minus) = css_splits(u, u);
            assert_relative_eq!(plus - minus, well_prime(u), epsilon = 1e-14);
        }
    }

    #[test]
    fn midpoint_split_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let a = rng.random_range(-2.0..2.0);
            let b = rng.random_range(-2.0..2.0);
            let (gp, gm) = midpoint_split(a, b);
            assert_relative_eq!(gp - gm, secant_slope(a, b), epsilon = 1e-13);
            // Convexity of the implicit part.
            assert!(midpoint_split_prime(a, b) >= 0.0);
        }
        let a = 0.37;
        let (gp, gm) = midpoint_split(a, a);
        assert_relative_eq!(gp - gm, well_prime(a), epsilon = 1e-15);
    }

    #[test]
    fn secant_slope_derivative_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let h = 1e-6;
        for _ in 0..50 {
            let a = rng.random_range(-2.0..2.0);
            let b = rng.random_range(-2.0..2.0);
            let fd = (secant_slope(a + h, b) - secant_slope(a - h, b)) / (2.0 * h);
            assert_relative_eq!(
                secant_slope_prime(a, b),
                fd,
                max_relative = 1e-6,
                epsilon = 1e-8
            );
        }
    }

    #[test]
    fn primitives_differentiate_to_splits() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = 1e-6;
        for _ in 0..50 {
            let a = rng.random_range(-2.0..2.0);
            let b = rng.random_range(-2.0..2.0);
            let (gp, gm) = midpoint_split(a, b);
            let fd_p = (midpoint_primitive(a + h, b).0 - midpoint_primitive(a - h, b).0) / (2.0 * h);
            let fd_m = (midpoint_primitive(a + h, b).1 - midpoint_primitive(a - h, b).1) / (2.0 * h);
            assert_relative_eq!(gp, fd_p, max_relative = 1e-6, epsilon = 1e-8);
            assert_relative_eq!(gm, fd_m, max_relative = 1e-6, epsilon = 1e-8);
        }
    }
}
