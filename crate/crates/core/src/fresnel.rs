//! Fresnel integrals and the knife-edge diffraction field.
//!
//! `C(x) = ∫₀ˣ cos(πt²/2) dt`, `S(x) = ∫₀ˣ sin(πt²/2) dt`. Small arguments use
//! the power series, large ones the complex continued fraction of the
//! complementary error function, evaluated with the modified Lentz method.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

const EPS: f64 = 1e-16;
const FPMIN: f64 = 1e-300;
const MAX_ITER: usize = 200;
const SERIES_LIMIT: f64 = 1.5;

/// Returns `(C(x), S(x))`.
pub fn fresnel_cs(x: f64) -> (f64, f64) {
    let ax = x.abs();
    let (c, s) = if ax < FPMIN.sqrt() {
        (ax, 0.0)
    } else if ax <= SERIES_LIMIT {
        series(ax)
    } else {
        continued_fraction(ax)
    };
    if x < 0.0 {
        (-c, -s)
    } else {
        (c, s)
    }
}

fn series(ax: f64) -> (f64, f64) {
    // Alternating terms are routed to C (even powers) and S (odd powers).
    let fact = FRAC_PI_2 * ax * ax;
    let mut sum = 0.0;
    let mut sum_s = 0.0;
    let mut sum_c = ax;
    let mut sign = 1.0;
    let mut odd = true;
    let mut term = ax;
    let mut n = 3.0;
    for k in 1..=MAX_ITER {
        term *= fact / k as f64;
        sum += sign * term / n;
        let test = sum.abs() * EPS;
        if odd {
            sign = -sign;
            sum_s = sum;
            sum = sum_c;
        } else {
            sum_c = sum;
            sum = sum_s;
        }
        if term < test {
            break;
        }
        odd = !odd;
        n += 2.0;
    }
    (sum_c, sum_s)
}

fn continued_fraction(ax: f64) -> (f64, f64) {
    let pix2 = PI * ax * ax;
    let mut b = Complex64::new(1.0, -pix2);
    let mut cc = Complex64::new(1.0 / FPMIN, 0.0);
    let mut d = b.inv();
    let mut h = d;
    let mut n = -1.0;
    for _ in 2..=MAX_ITER {
        n += 2.0;
        let a = -n * (n + 1.0);
        b += Complex64::new(4.0, 0.0);
        d = (d * a + b).inv();
        cc = b + cc.inv() * a;
        let del = cc * d;
        h *= del;
        if (del.re - 1.0).abs() + del.im.abs() < EPS {
            break;
        }
    }
    h *= Complex64::new(ax, -ax);
    let phase = Complex64::new((0.5 * pix2).cos(), (0.5 * pix2).sin());
    let cs = Complex64::new(0.5, 0.5) * (Complex64::new(1.0, 0.0) - phase * h);
    (cs.re, cs.im)
}

/// Normalized field behind an absorbing half-plane,
/// `F(ν) = ((1+j)/2)·∫_ν^∞ exp(−jπt²/2) dt`.
///
/// `F(−∞) = 1` (unobstructed), `F(0) = 1/2`, and `F(ν) + F(−ν) = 1`.
pub fn knife_edge_field(nu: f64) -> Complex64 {
    let (c, s) = fresnel_cs(nu);
    Complex64::new(0.5, 0.5) * Complex64::new(0.5 - c, -(0.5 - s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn known_values() {
        // Abramowitz & Stegun table 7.7
        let (c, s) = fresnel_cs(1.0);
        assert_relative_eq!(c, 0.779_893_400_376_823, epsilon = 1e-14);
        assert_relative_eq!(s, 0.438_259_147_390_355, epsilon = 1e-14);
        let (c, s) = fresnel_cs(2.0);
        assert_relative_eq!(c, 0.488_253_406_075_341, epsilon = 1e-14);
        assert_relative_eq!(s, 0.343_415_678_363_698, epsilon = 1e-14);
    }

    #[test]
    fn odd_symmetry_and_limits() {
        for x in [0.3, 1.4, 1.6, 7.0] {
            let (c, s) = fresnel_cs(x);
            let (cn, sn) = fresnel_cs(-x);
            assert_eq!(c, -cn);
            assert_eq!(s, -sn);
        }
        let (c, s) = fresnel_cs(1e4);
        assert_relative_eq!(c, 0.5, epsilon = 1e-4);
        assert_relative_eq!(s, 0.5, epsilon = 1e-4);
    }

    #[test]
    fn series_and_fraction_agree_at_switch() {
        let below = series(SERIES_LIMIT);
        let above = continued_fraction(SERIES_LIMIT);
        assert_relative_eq!(below.0, above.0, epsilon = 1e-13);
        assert_relative_eq!(below.1, above.1, epsilon = 1e-13);
    }

    #[test]
    fn field_properties() {
        assert_relative_eq!(knife_edge_field(0.0).norm(), 0.5, epsilon = 1e-15);
        for nu in [0.2, 1.0, 3.7] {
            let sum = knife_edge_field(nu) + knife_edge_field(-nu);
            assert_relative_eq!(sum.re, 1.0, epsilon = 1e-13);
            assert_relative_eq!(sum.im, 0.0, epsilon = 1e-13);
        }
        assert!((knife_edge_field(-50.0).norm() - 1.0).abs() < 0.01);
    }
}
