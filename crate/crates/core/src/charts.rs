//! The projective chart (z, w) = (1/v, (1-u)/v), the normalizing change
//! Psi(z, w) = (z, w)/sqrt(g) with its analytic Jacobian, first integrals on
//! both sides, and the numerical conjugacy residual between the projective
//! extension of the reversed Loud field and the saddle-node normal form.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{
    eval_bar_field, eval_normal_field_closed, BivariatePoly, LoudParams, Vec2,
};
use crate::integrator::{integrate_for_time, IntegratorConfig};

/// Coordinate systems used by the toolkit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Chart {
    AffineUv,
    ProjectiveZw,
    NormalXy,
}

/// A point tagged with its chart.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartPoint {
    pub coords: Vec2,
    pub chart: Chart,
}

/// Default sampling box for conjugacy and first-integral checks in the
/// projective chart.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct SampleBox {
    pub z_max: f64,
    pub w_max: f64,
}

impl Default for SampleBox {
    fn default() -> Self {
        Self { z_max: 0.2, w_max: 0.2 }
    }
}

/// 2x2 real matrix in row-major order.
pub type Mat2 = [[f64; 2]; 2];

pub fn mat2_apply(m: &Mat2, v: Vec2) -> Vec2 {
    Vec2::new(
        m[0][0] * v.x + m[0][1] * v.y,
        m[1][0] * v.x + m[1][1] * v.y,
    )
}

/// (u, v) -> (z, w) = (1/v, (1-u)/v); singular on v = 0.
pub fn to_projective(p: Vec2) -> Result<Vec2> {
    let (u, v) = (p.x, p.y);
    if v == 0.0 {
        return Err(Error::SingularChart { context: "to_projective at v = 0" });
    }
    Ok(Vec2::new(1.0 / v, (1.0 - u) / v))
}

/// (z, w) -> (u, v) = (1 - w/z, 1/z); singular on the line at infinity z = 0.
pub fn from_projective(p: Vec2) -> Result<Vec2> {
    let (z, w) = (p.x, p.y);
    if z == 0.0 {
        return Err(Error::SingularChart { context: "from_projective at z = 0" });
    }
    Ok(Vec2::new(1.0 - w / z, 1.0 / z))
}

/// The quadratic factor
/// g(z, w) = D w^2 / (2(F-1)(D+1)) - (2D+1) wz / ((2F-1)(D+1)) + 1/(2(D+1)).
/// Denominators are nonzero on the admissible box, so evaluation is total.
pub fn g_eval(a: LoudParams, p: Vec2) -> f64 {
    let (d, f) = (a.d(), a.f());
    let (z, w) = (p.x, p.y);
    d * w * w / (2.0 * (f - 1.0) * (d + 1.0))
        - (2.0 * d + 1.0) * w * z / ((2.0 * f - 1.0) * (d + 1.0))
        + 1.0 / (2.0 * (d + 1.0))
}

fn g_partials(a: LoudParams, p: Vec2) -> (f64, f64) {
    let (d, f) = (a.d(), a.f());
    let (z, w) = (p.x, p.y);
    let gz = -(2.0 * d + 1.0) * w / ((2.0 * f - 1.0) * (d + 1.0));
    let gw = d * w / ((f - 1.0) * (d + 1.0)) - (2.0 * d + 1.0) * z / ((2.0 * f - 1.0) * (d + 1.0));
    (gz, gw)
}

/// Normalizing change Psi(z, w) = (z/sqrt(g), w/sqrt(g)), positive branch.
pub fn psi(a: LoudParams, p: Vec2) -> Result<Vec2> {
    let g = g_eval(a, p);
    if !(g > 0.0) {
        return Err(Error::Domain { context: "psi requires g > 0", value: g });
    }
    let s = g.sqrt();
    Ok(Vec2::new(p.x / s, p.y / s))
}

/// Analytic Jacobian of Psi.
pub fn psi_jacobian(a: LoudParams, p: Vec2) -> Result<Mat2> {
    let g = g_eval(a, p);
    if !(g > 0.0) {
        return Err(Error::Domain { context: "psi_jacobian requires g > 0", value: g });
    }
    let (gz, gw) = g_partials(a, p);
    let s = g.sqrt();
    let (z, w) = (p.x, p.y);
    Ok([
        [(1.0 - z * gz / (2.0 * g)) / s, -z * gw / (2.0 * g * s)],
        [-w * gz / (2.0 * g * s), (1.0 - w * gw / (2.0 * g)) / s],
    ])
}

/// Invert Psi by Newton iteration with the analytic Jacobian, starting from
/// `guess`. Converges to a sup-norm residual of 1e-12 or reports failure.
pub fn psi_inverse(a: LoudParams, q: Vec2, guess: Vec2) -> Result<Vec2> {
    const MAX_ITER: usize = 50;
    const TOL: f64 = 1e-12;
    let mut p = guess;
    let mut residual = f64::INFINITY;
    for _ in 0..MAX_ITER {
        let value = psi(a, p)?;
        let r = value - q;
        residual = r.norm_inf();
        if residual <= TOL {
            return Ok(p);
        }
        let jac = psi_jacobian(a, p)?;
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        let scale = jac[0][0].abs().max(jac[0][1].abs()).max(jac[1][0].abs()).max(jac[1][1].abs());
        if det.abs() <= f64::EPSILON * scale * scale {
            return Err(Error::SingularJacobian { det });
        }
        let dz = (jac[1][1] * r.x - jac[0][1] * r.y) / det;
        let dw = (jac[0][0] * r.y - jac[1][0] * r.x) / det;
        p = Vec2::new(p.x - dz, p.y - dw);
        if !p.is_finite() {
            return Err(Error::NonFinite { context: "Newton iterate for psi_inverse" });
        }
    }
    Err(Error::NewtonDidNotConverge { iterations: MAX_ITER, residual })
}

/// Conjugacy residual || DPsi(p) barX(p) - X(Psi(p)) || / (1 + ||X(Psi(p))||)
/// with both fields carrying their polar factors and the closed-form U.
pub fn pullback_residual(a: LoudParams, p: Vec2) -> Result<f64> {
    let bar = eval_bar_field(a, p, true)?;
    let jac = psi_jacobian(a, p)?;
    let q = psi(a, p)?;
    let normal = eval_normal_field_closed(a, q, true)?;
    Ok((mat2_apply(&jac, bar) - normal).norm() / (1.0 + normal.norm()))
}

/// Same residual with the stored polynomial truncation in place of the
/// closed-form factor.
pub fn pullback_residual_truncated(a: LoudParams, p: Vec2, u: &BivariatePoly) -> Result<f64> {
    let bar = eval_bar_field(a, p, true)?;
    let jac = psi_jacobian(a, p)?;
    let q = psi(a, p)?;
    let (x, y) = (q.x, q.y);
    if x == 0.0 {
        return Err(Error::PolarLocus { context: "normal field at x = 0" });
    }
    let s = x * x + 2.0 * a.f();
    let denom = x * u.eval(x, y);
    if denom == 0.0 {
        return Err(Error::PolarLocus { context: "normal field at x U(x,y) = 0" });
    }
    let normal = Vec2::new(x * s, y * (s - 2.0)) * (1.0 / denom);
    Ok((mat2_apply(&jac, bar) - normal).norm() / (1.0 + normal.norm()))
}

/// First integral of the projective extension for F != 0:
/// Ibar(z, w) = (w/z) (1 + 2F g(z,w)/z^2)^(-1/(2F)).
pub fn first_integral_bar(a: LoudParams, p: Vec2) -> Result<f64> {
    if a.f() == 0.0 {
        return Err(Error::Domain { context: "first integral needs F != 0", value: 0.0 });
    }
    let (z, w) = (p.x, p.y);
    if z == 0.0 {
        return Err(Error::SingularChart { context: "first_integral_bar at z = 0" });
    }
    let base = 1.0 + 2.0 * a.f() * g_eval(a, p) / (z * z);
    if !(base > 0.0) {
        return Err(Error::Domain { context: "nonpositive base in first_integral_bar", value: base });
    }
    Ok(w / z * base.powf(-1.0 / (2.0 * a.f())))
}

/// First integral of the normal form for F != 0:
/// I(x, y) = (y/x) (1 + 2F/x^2)^(-1/(2F)).
pub fn first_integral_normal(a: LoudParams, q: Vec2) -> Result<f64> {
    if a.f() == 0.0 {
        return Err(Error::Domain { context: "first integral needs F != 0", value: 0.0 });
    }
    let (x, y) = (q.x, q.y);
    if x == 0.0 {
        return Err(Error::SingularChart { context: "first_integral_normal at x = 0" });
    }
    let base = 1.0 + 2.0 * a.f() / (x * x);
    if !(base > 0.0) {
        return Err(Error::Domain { context: "nonpositive base in first_integral_normal", value: base });
    }
    Ok(y / x * base.powf(-1.0 / (2.0 * a.f())))
}

/// Relative drift of Ibar along an arc of the full projective field.
/// Errors propagate if the arc leaves the integral's domain.
pub fn integral_drift_bar(
    a: LoudParams,
    start: Vec2,
    t_span: f64,
    config: &IntegratorConfig,
) -> Result<f64> {
    let reference = first_integral_bar(a, start)?;
    let field = |p: Vec2| {
        eval_bar_field(a, p, true).unwrap_or(Vec2::new(f64::NAN, f64::NAN))
    };
    let path = integrate_for_time(field, start, t_span, config)?;
    let mut drift: f64 = 0.0;
    for state in &path.states {
        let value = first_integral_bar(a, *state)?;
        drift = drift.max((value - reference).abs());
    }
    Ok(drift / reference.abs().max(f64::MIN_POSITIVE))
}

/// Relative drift of I along an arc of the polynomial part of the normal
/// form, x(x^2+2F) d/dx + y(x^2+2F-2) d/dy.
pub fn integral_drift_normal(
    a: LoudParams,
    start: Vec2,
    t_span: f64,
    config: &IntegratorConfig,
) -> Result<f64> {
    let reference = first_integral_normal(a, start)?;
    let field = move |p: Vec2| {
        let s = p.x * p.x + 2.0 * a.f();
        Vec2::new(p.x * s, p.y * (s - 2.0))
    };
    let path = integrate_for_time(field, start, t_span, config)?;
    let mut drift: f64 = 0.0;
    for state in &path.states {
        let value = first_integral_normal(a, *state)?;
        drift = drift.max((value - reference).abs());
    }
    Ok(drift / reference.abs().max(f64::MIN_POSITIVE))
}
