//! Independent Taylor-coefficient oracle for the truncation built by
//! `build_loud_unfolding`: coefficients are extracted from values of the
//! closed-form factor on a complex polydisc circle (trapezoid rule on the
//! Cauchy integral, the circle form of numerical differentiation), which is
//! immune to the cancellation that kills high-order real difference stencils.

use num_complex::Complex64;

use dulac_core::fields::build_loud_unfolding;
use dulac_core::LoudParams;

fn closed_form_u(a: LoudParams, x: Complex64, y: Complex64) -> Complex64 {
    let (d, f) = (a.d(), a.f());
    let radicand = x * y * ((2.0 * d + 1.0) / (2.0 * (2.0 * f - 1.0)))
        + y * y * (-d / (4.0 * (f - 1.0)))
        + (d + 1.0) / 2.0;
    // Principal branch; the radicand stays near its positive center on the
    // sampling polydisc.
    1.0 / radicand.sqrt()
}

fn taylor_coefficient(a: LoudParams, i: u32, j: u32, rho: f64, n: usize) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for p in 0..n {
        let tp = 2.0 * std::f64::consts::PI * p as f64 / n as f64;
        let x = rho * Complex64::new(0.0, tp).exp();
        for q in 0..n {
            let tq = 2.0 * std::f64::consts::PI * q as f64 / n as f64;
            let y = rho * Complex64::new(0.0, tq).exp();
            let phase = Complex64::new(0.0, -(tp * i as f64 + tq * j as f64)).exp();
            acc += closed_form_u(a, x, y) * phase;
        }
    }
    (acc / (n * n) as f64 / rho.powi((i + j) as i32)).re
}

#[test]
fn truncation_matches_circle_method_coefficients() {
    let a = LoudParams::new(-0.5, 0.1).unwrap();
    let degree = 6;
    let unf = build_loud_unfolding(a, degree).unwrap();
    for i in 0..=degree {
        for j in 0..=(degree - i) {
            let expected = taylor_coefficient(a, i, j, 0.3, 32);
            let got = unf.u().coefficient(i, j);
            assert!(
                (got - expected).abs() <= 1e-8,
                "coefficient ({i},{j}): {got} vs {expected}"
            );
        }
    }
}

#[test]
fn coefficients_beyond_the_truncation_degree_are_absent() {
    let a = LoudParams::new(-0.37, -0.21).unwrap();
    let unf = build_loud_unfolding(a, 4).unwrap();
    assert!(unf.u().total_degree().unwrap() <= 4);
    // But the function itself has nonzero higher coefficients.
    assert!(taylor_coefficient(a, 2, 4, 0.3, 32).abs() > 1e-12);
}
