//! Triangle quadrature exact for the quartic nonlinearities.
//!
//! The seven-point rule below integrates polynomials of total degree up to
//! five exactly, which covers every integrand assembled in this crate: the
//! double-well terms are quartic in a P1 function and the weighted-mass
//! integrands are quartic times quadratic basis products truncated at degree
//! four.

/// Barycentric coordinates and weights of the degree-5 seven-point rule.
/// Weights sum to one; multiply by the element area.
pub fn degree5_rule() -> [([f64; 3], f64); 7] {
    let sqrt15 = 15.0_f64.sqrt();
    let a1 = (6.0 - sqrt15) / 21.0;
    let b1 = 1.0 - 2.0 * a1;
    let w1 = (155.0 - sqrt15) / 1200.0;
    let a2 = (6.0 + sqrt15) / 21.0;
    let b2 = 1.0 - 2.0 * a2;
    let w2 = (155.0 + sqrt15) / 1200.0;
    [
        ([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 9.0 / 40.0),
        ([a1, a1, b1], w1),
        ([a1, b1, a1], w1),
        ([b1, a1, a1], w1),
        ([a2, a2, b2], w2),
        ([a2, b2, a2], w2),
        ([b2, a2, a2], w2),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Exact integral of a barycentric monomial over a triangle of area `t`:
    /// `int l1^a l2^b l3^c = 2 t a! b! c! / (a + b + c + 2)!`.
    fn exact_monomial(t: f64, a: u32, b: u32, c: u32) -> f64 {
        let fact = |m: u32| (1..=m).map(|x| x as f64).product::<f64>().max(1.0);
        2.0 * t * fact(a) * fact(b) * fact(c) / fact(a + b + c + 2)
    }

    #[test]
    fn weights_sum_to_one() {
        let s: f64 = degree5_rule().iter().map(|(_, w)| w).sum();
        assert_relative_eq!(s, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_through_degree_five() {
        let rule = degree5_rule();
        let area = 0.735;
        for a in 0..=5u32 {
            for b in 0..=(5 - a) {
                for c in 0..=(5 - a - b) {
                    let quad: f64 = rule
                        .iter()
                        .map(|(l, w)| {
                            w * area
                                * l[0].powi(a as i32)
                                * l[1].powi(b as i32)
                                * l[2].powi(c as i32)
                        })
                        .sum();
                    let exact = exact_monomial(area, a, b, c);
                    assert_relative_eq!(quad, exact, max_relative = 1e-13);
                }
            }
        }
    }
}
