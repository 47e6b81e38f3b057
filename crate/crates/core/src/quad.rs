//! Globally adaptive Gauss-Kronrod quadrature (G7-K15) with bisection of the
//! worst interval, in the QUADPACK style. The Dulac-time integrands are steep
//! near the left endpoint, which the subdivision absorbs.

use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-14,
            max_intervals: 4096,
        }
    }
}

// 15-point Kronrod abscissae (positive half) and weights, with the embedded
// 7-point Gauss weights.
const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7-K15 panel: returns (estimate, error bound).
fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_gauss = WG[3] * f_center;
    let mut res_kronrod = WGK[7] * f_center;
    let mut res_abs = res_kronrod.abs();

    let mut fv = [0.0; 15];
    fv[7] = f_center;
    for k in 0..7 {
        let x = half * XGK[k];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv[k] = f1;
        fv[14 - k] = f2;
        res_kronrod += WGK[k] * (f1 + f2);
        res_abs += WGK[k] * (f1.abs() + f2.abs());
        if k % 2 == 1 {
            res_gauss += WG[k / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_kronrod;
    let mut res_asc = WGK[7] * (f_center - mean).abs();
    for k in 0..7 {
        res_asc += WGK[k] * ((fv[k] - mean).abs() + (fv[14 - k] - mean).abs());
    }

    let result = res_kronrod * half;
    let res_abs = res_abs * half.abs();
    let res_asc = res_asc * half.abs();
    let mut err = ((res_kronrod - res_gauss) * half).abs();
    if res_asc != 0.0 && err != 0.0 {
        err = res_asc * 1.0f64.min((200.0 * err / res_asc).powf(1.5));
    }
    let underflow_guard = 50.0 * f64::EPSILON * res_abs;
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        err = err.max(underflow_guard);
    }
    (result, err)
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    id: usize,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error && self.id == other.id
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Worst error first; ties broken by insertion id for determinism.
        self.error
            .total_cmp(&other.error)
            .then(self.id.cmp(&other.id))
    }
}

/// Adaptive integral of `f` over [a, b].
pub fn integrate<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, cfg: &QuadConfig) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::NonFinite { context: "quadrature bounds" });
    }
    if a == b {
        return Ok(0.0);
    }
    let (value, error) = qk15(f, a, b);
    if !value.is_finite() {
        return Err(Error::NonFinite { context: "quadrature panel" });
    }
    let mut heap = BinaryHeap::new();
    let mut total_value = value;
    let mut total_error = error;
    let mut next_id = 1usize;
    heap.push(Segment { a, b, value, error, id: 0 });

    loop {
        if total_error <= cfg.abs_tol.max(cfg.rel_tol * total_value.abs()) {
            return Ok(total_value);
        }
        if heap.len() >= cfg.max_intervals {
            return Err(Error::QuadratureDidNotConverge {
                estimate: total_value,
                error: total_error,
            });
        }
        let worst = heap.pop().expect("heap cannot be empty here");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a.min(worst.b) || mid >= worst.a.max(worst.b) {
            // Interval no longer splittable in f64.
            return Err(Error::QuadratureDidNotConverge {
                estimate: total_value,
                error: total_error,
            });
        }
        let (v1, e1) = qk15(f, worst.a, mid);
        let (v2, e2) = qk15(f, mid, worst.b);
        if !(v1.is_finite() && v2.is_finite()) {
            return Err(Error::NonFinite { context: "quadrature panel" });
        }
        total_value += v1 + v2 - worst.value;
        total_error += e1 + e2 - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: v1, error: e1, id: next_id });
        heap.push(Segment { a: mid, b: worst.b, value: v2, error: e2, id: next_id + 1 });
        next_id += 2;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(&|x: f64| 3.0 * x * x, 0.0, 2.0, &QuadConfig::default()).unwrap();
        assert!((v - 8.0).abs() < 1e-13);
    }

    #[test]
    fn steep_inverse_square() {
        let v = integrate(&|x: f64| x.powi(-2), 0.001, 1.0, &QuadConfig::default()).unwrap();
        assert!((v - 999.0).abs() < 1e-7 * 999.0);
    }

    #[test]
    fn oscillatory_integrand() {
        let v = integrate(&|x: f64| (20.0 * x).sin(), 0.0, 1.0, &QuadConfig::default()).unwrap();
        let exact = (1.0 - (20.0f64).cos()) / 20.0;
        assert!((v - exact).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported() {
        let cfg = QuadConfig {
            rel_tol: 1e-15,
            abs_tol: 1e-300,
            max_intervals: 4,
        };
        let r = integrate(&|x: f64| 1.0 / (1e-8 + x * x), -1.0, 1.0, &cfg);
        assert!(matches!(r, Err(Error::QuadratureDidNotConverge { .. })));
    }
}
