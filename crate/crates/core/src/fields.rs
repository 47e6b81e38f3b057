//! Vector fields of the Loud family and its saddle-node normal form,
//! together with the polynomial algebra they need: sparse bivariate
//! polynomials, the Weierstrass split x·U(x,y) = x·U(x,0) + y·Û(x,y),
//! and the binomial-series truncation of the normal-form factor U.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// A plain planar point or tangent vector.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn zero() -> Self {
        Self { x: 0.0, y: 0.0 }
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn norm_inf(self) -> f64 {
        self.x.abs().max(self.y.abs())
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x + rhs.x, self.y + rhs.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, rhs: Vec2) -> Vec2 {
        Vec2::new(self.x - rhs.x, self.y - rhs.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, rhs: f64) -> Vec2 {
        Vec2::new(self.x * rhs, self.y * rhs)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

impl Serialize for Vec2 {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        (self.x, self.y).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Vec2 {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let (x, y) = <(f64, f64)>::deserialize(deserializer)?;
        Ok(Vec2::new(x, y))
    }
}

/// Open parameter box for the family parameter a = (D, F).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamBox {
    pub d: (f64, f64),
    pub f: (f64, f64),
}

impl Default for ParamBox {
    fn default() -> Self {
        Self {
            d: (-1.0, 0.0),
            f: (-0.5, 0.5),
        }
    }
}

impl ParamBox {
    /// Strict interior membership.
    pub fn contains(&self, d: f64, f: f64) -> bool {
        d.is_finite()
            && f.is_finite()
            && d > self.d.0
            && d < self.d.1
            && f > self.f.0
            && f < self.f.1
    }
}

impl fmt::Display for ParamBox {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            out,
            "({}, {}) x ({}, {})",
            self.d.0, self.d.1, self.f.0, self.f.1
        )
    }
}

/// Parameter a = (D, F) of the dehomogenized Loud family, validated against
/// an admissible box at construction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LoudParams {
    #[serde(rename = "D")]
    d: f64,
    #[serde(rename = "F")]
    f: f64,
}

impl LoudParams {
    /// Construct inside the default box (-1, 0) x (-1/2, 1/2).
    pub fn new(d: f64, f: f64) -> Result<Self> {
        Self::new_in(d, f, &ParamBox::default())
    }

    /// Construct inside a caller-supplied box.
    pub fn new_in(d: f64, f: f64, bounds: &ParamBox) -> Result<Self> {
        if !bounds.contains(d, f) {
            return Err(Error::ParamOutsideBox {
                d,
                f,
                bounds: bounds.to_string(),
            });
        }
        Ok(Self { d, f })
    }

    pub fn d(&self) -> f64 {
        self.d
    }

    pub fn f(&self) -> f64 {
        self.f
    }
}

/// Dense univariate polynomial, constant term first.
#[derive(Clone, Debug, PartialEq)]
pub struct UnivariatePoly {
    coeffs: Vec<f64>,
}

impl UnivariatePoly {
    /// Build from coefficients (constant term first); trailing zeros are trimmed.
    pub fn new(mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { coeffs }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(vec![c])
    }

    pub fn zero() -> Self {
        Self { coeffs: Vec::new() }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    /// Horner evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        self.coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
    }

    /// Bound on |p'(x)| for |x| <= r.
    pub fn derivative_bound(&self, r: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| i as f64 * c.abs() * r.powi(i as i32 - 1))
            .sum()
    }

    /// Coefficient substitution x -> r*x followed by division by `scale`.
    fn substituted(&self, r: f64, scale: f64) -> Self {
        Self::new(
            self.coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c * r.powi(i as i32) / scale)
                .collect(),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct UniTerm {
    i: usize,
    c: f64,
}

impl Serialize for UnivariatePoly {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            terms: Vec<UniTerm>,
        }
        let terms = self
            .coeffs
            .iter()
            .enumerate()
            .filter(|(_, c)| **c != 0.0)
            .map(|(i, c)| UniTerm { i, c: *c })
            .collect();
        Repr { terms }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for UnivariatePoly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            terms: Vec<UniTerm>,
        }
        let repr = Repr::deserialize(deserializer)?;
        let degree = repr.terms.iter().map(|t| t.i).max().unwrap_or(0);
        let mut coeffs = vec![0.0; degree + 1];
        for t in repr.terms {
            coeffs[t.i] += t.c;
        }
        Ok(Self::new(coeffs))
    }
}

/// Sparse bivariate polynomial keyed by the exponent pair (i, j) of x^i y^j.
/// Exact zeros are removed on construction so coefficient-level identities
/// can be checked bit-exactly.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct BivariatePoly {
    terms: BTreeMap<(u32, u32), f64>,
}

impl BivariatePoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self::from_terms([((0, 0), c)])
    }

    /// Build from (exponents, coefficient) pairs; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_terms<I: IntoIterator<Item = ((u32, u32), f64)>>(iter: I) -> Self {
        let mut terms: BTreeMap<(u32, u32), f64> = BTreeMap::new();
        for (key, c) in iter {
            *terms.entry(key).or_insert(0.0) += c;
        }
        terms.retain(|_, c| *c != 0.0);
        Self { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = ((u32, u32), f64)> + '_ {
        self.terms.iter().map(|(k, c)| (*k, *c))
    }

    pub fn coefficient(&self, i: u32, j: u32) -> f64 {
        self.terms.get(&(i, j)).copied().unwrap_or(0.0)
    }

    pub fn total_degree(&self) -> Option<u32> {
        self.terms.keys().map(|(i, j)| i + j).max()
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|(&(i, j), &c)| c * x.powi(i as i32) * y.powi(j as i32))
            .sum()
    }

    /// The section U(x, 0) as a univariate polynomial in x.
    pub fn section_y0(&self) -> UnivariatePoly {
        let degree = self
            .terms
            .keys()
            .filter(|(_, j)| *j == 0)
            .map(|(i, _)| *i as usize)
            .max();
        let mut coeffs = vec![0.0; degree.map_or(0, |d| d + 1)];
        for (&(i, j), &c) in &self.terms {
            if j == 0 {
                coeffs[i as usize] = c;
            }
        }
        UnivariatePoly::new(coeffs)
    }

    /// Multiply by x (exponent shift, exact on coefficients).
    pub fn mul_x(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(&(i, j), &c)| ((i + 1, j), c)).collect(),
        }
    }

    /// Multiply by y (exponent shift, exact on coefficients).
    pub fn mul_y(&self) -> Self {
        Self {
            terms: self.terms.iter().map(|(&(i, j), &c)| ((i, j + 1), c)).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self::from_terms(self.terms().chain(other.terms()))
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self::from_terms(self.terms().flat_map(|((i1, j1), c1)| {
            other
                .terms()
                .map(move |((i2, j2), c2)| (((i1 + i2), (j1 + j2)), c1 * c2))
        }))
    }

    /// Coefficient substitution (x, y) -> (r x, r y) followed by division by `scale`.
    fn substituted(&self, r: f64, scale: f64) -> Self {
        Self::from_terms(
            self.terms()
                .map(|((i, j), c)| (((i, j)), c * r.powi((i + j) as i32) / scale)),
        )
    }
}

#[derive(Serialize, Deserialize)]
struct BiTerm {
    i: u32,
    j: u32,
    c: f64,
}

impl Serialize for BivariatePoly {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Repr {
            terms: Vec<BiTerm>,
        }
        let terms = self
            .terms()
            .map(|((i, j), c)| BiTerm { i, j, c })
            .collect();
        Repr { terms }.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for BivariatePoly {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Repr {
            terms: Vec<BiTerm>,
        }
        let repr = Repr::deserialize(deserializer)?;
        Ok(Self::from_terms(
            repr.terms.into_iter().map(|t| ((t.i, t.j), t.c)),
        ))
    }
}

/// Normal-form data of the saddle-node unfolding
/// (x(x^mu - eps) d/dx - V(x) y d/dy) / (x U(x, y)).
///
/// `u` stores a polynomial truncation of the analytic factor; closed-form
/// evaluation for cross-checks goes through [`USource::ClosedForm`].
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Unfolding {
    mu: u32,
    eps: f64,
    #[serde(rename = "U")]
    u: BivariatePoly,
    #[serde(rename = "V")]
    v: UnivariatePoly,
    radius: f64,
}

impl Unfolding {
    /// Validates U(0,0) > 0, V > 0 on [-radius, radius] (sampling plus a
    /// derivative bound) and |eps| < radius^mu.
    pub fn new(mu: u32, eps: f64, u: BivariatePoly, v: UnivariatePoly, radius: f64) -> Result<Self> {
        if mu == 0 {
            return Err(Error::InvalidUnfolding("mu must be a positive integer".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidUnfolding(format!("radius {radius} must be positive")));
        }
        if !eps.is_finite() {
            return Err(Error::NonFinite { context: "eps" });
        }
        let u00 = u.coefficient(0, 0);
        if !(u00 > 0.0) {
            return Err(Error::NonPositiveU0 { value: u00 });
        }
        let bound = radius.powi(mu as i32);
        if !(eps.abs() < bound) {
            return Err(Error::EpsOutOfRange { eps, bound });
        }
        check_positive_on_interval(&v, radius)?;
        Ok(Self { mu, eps, u, v, radius })
    }

    pub fn mu(&self) -> u32 {
        self.mu
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn u(&self) -> &BivariatePoly {
        &self.u
    }

    pub fn v(&self) -> &UnivariatePoly {
        &self.v
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Linear domain substitution x -> r x, y -> r y with eps -> eps / r^mu.
    /// The time unit is preserved by absorbing the factor r^(mu-1) into U,
    /// so the full vector field satisfies
    /// rescaled(x, y) = original(r x, r y) / r componentwise.
    pub fn rescaled(&self, r: f64) -> Result<Self> {
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidUnfolding(format!("rescale factor {r} must be positive")));
        }
        let rmu = r.powi(self.mu as i32);
        Self::new(
            self.mu,
            self.eps / rmu,
            self.u.substituted(r, rmu / r),
            self.v.substituted(r, rmu),
            self.radius / r,
        )
    }
}

/// Positivity of V on [-r, r]: sample on a uniform grid and certify with the
/// derivative bound |V'| <= M, which makes values > M h / 2 conclusive.
fn check_positive_on_interval(v: &UnivariatePoly, r: f64) -> Result<()> {
    const SAMPLES: usize = 1024;
    let m = v.derivative_bound(r);
    let h = 2.0 * r / SAMPLES as f64;
    let margin = m * h / 2.0;
    for k in 0..=SAMPLES {
        let x = -r + k as f64 * h;
        let value = v.eval(x);
        if !(value > margin) {
            return Err(Error::NonPositiveV { x, value });
        }
    }
    Ok(())
}

/// Evaluation route for the normal-form factor U.
#[derive(Clone, Copy)]
pub enum USource<'a> {
    /// The polynomial truncation stored in an [`Unfolding`].
    Truncated(&'a BivariatePoly),
    /// Closed-form inverse square root of the quadratic radicand from the
    /// Loud normalization.
    ClosedForm(LoudParams),
}

impl USource<'_> {
    pub fn eval(&self, x: f64, y: f64) -> Result<f64> {
        match self {
            USource::Truncated(poly) => Ok(poly.eval(x, y)),
            USource::ClosedForm(a) => loud_normal_u(*a, Vec2::new(x, y)),
        }
    }
}

/// The dehomogenized Loud vector field
/// L_a = (-v + u v) d/du + (u + D u^2 + F v^2) d/dv,
/// negated when `reversed` is set.
pub fn eval_loud(a: LoudParams, p: Vec2, reversed: bool) -> Vec2 {
    let (u, v) = (p.x, p.y);
    let field = Vec2::new(-v + u * v, u + a.d() * u * u + a.f() * v * v);
    if reversed {
        -field
    } else {
        field
    }
}

/// Meromorphic extension of -L_a in the projective chart (z, w) = (1/v, (1-u)/v).
/// Without the polar factor this is the bracketed polynomial field; with it,
/// the bracket divided by z.
pub fn eval_bar_field(a: LoudParams, p: Vec2, include_polar_factor: bool) -> Result<Vec2> {
    let (z, w) = (p.x, p.y);
    let q = a.f() + (a.d() + 1.0) * z * z - (2.0 * a.d() + 1.0) * z * w + a.d() * w * w;
    let bracket = Vec2::new(z * q, w * (q - 1.0));
    if include_polar_factor {
        if z == 0.0 {
            return Err(Error::PolarLocus { context: "bar field at z = 0" });
        }
        Ok(bracket * (1.0 / z))
    } else {
        Ok(bracket)
    }
}

/// Normal-form field of an unfolding: (x(x^mu - eps), -V(x) y), divided by
/// x U(x, y) when the polar factor is requested. U is the stored truncation.
pub fn eval_normal_field(unf: &Unfolding, p: Vec2, include_polar_factor: bool) -> Result<Vec2> {
    let (x, y) = (p.x, p.y);
    let poly = Vec2::new(x * (x.powi(unf.mu as i32) - unf.eps), -unf.v.eval(x) * y);
    if include_polar_factor {
        let denom = x * unf.u.eval(x, y);
        if denom == 0.0 {
            return Err(Error::PolarLocus { context: "normal field at x U(x,y) = 0" });
        }
        Ok(poly * (1.0 / denom))
    } else {
        Ok(poly)
    }
}

/// Normal-form field of the Loud normalization with the closed-form U, i.e.
/// (x(x^2 + 2F), y(x^2 + 2F - 2)) divided by x U_a(x, y) when requested.
pub fn eval_normal_field_closed(a: LoudParams, p: Vec2, include_polar_factor: bool) -> Result<Vec2> {
    let (x, y) = (p.x, p.y);
    let s = x * x + 2.0 * a.f();
    let poly = Vec2::new(x * s, y * (s - 2.0));
    if include_polar_factor {
        if x == 0.0 {
            return Err(Error::PolarLocus { context: "normal field at x = 0" });
        }
        let u = loud_normal_u(a, p)?;
        Ok(poly * (1.0 / (x * u)))
    } else {
        Ok(poly)
    }
}

/// Radicand of the closed-form normal-form factor U_a.
fn loud_radicand(a: LoudParams, x: f64, y: f64) -> f64 {
    let (d, f) = (a.d(), a.f());
    (2.0 * d + 1.0) * x * y / (2.0 * (2.0 * f - 1.0)) - d * y * y / (4.0 * (f - 1.0)) + (d + 1.0) / 2.0
}

/// Closed-form normal-form factor
/// U_a(x,y) = ((2D+1)xy/(2(2F-1)) - D y^2/(4(F-1)) + (D+1)/2)^(-1/2).
pub fn loud_normal_u(a: LoudParams, p: Vec2) -> Result<f64> {
    let r = loud_radicand(a, p.x, p.y);
    if !(r > 0.0) {
        return Err(Error::Domain { context: "nonpositive radicand of U_a", value: r });
    }
    Ok(1.0 / r.sqrt())
}

/// Default truncation degree for [`build_loud_unfolding`].
pub const DEFAULT_U_DEGREE: u32 = 8;

/// Saddle-node normal form of the Loud family at parameter a:
/// mu = 2, eps = -2F, V(x) = 2 - 2F - x^2, and U the Taylor truncation of
/// the closed-form factor to the requested total degree, computed by exact
/// binomial-series expansion of the inverse square root.
pub fn build_loud_unfolding(a: LoudParams, degree: u32) -> Result<Unfolding> {
    if degree < 2 {
        return Err(Error::DegreeTooSmall { degree, min: 2 });
    }
    let (d, f) = (a.d(), a.f());
    let gamma = (d + 1.0) / 2.0;
    let alpha = (2.0 * d + 1.0) / (2.0 * (2.0 * f - 1.0));
    let beta = -d / (4.0 * (f - 1.0));

    // (gamma + alpha x y + beta y^2)^(-1/2)
    //   = gamma^(-1/2) sum_k c_k ((alpha x y + beta y^2)/gamma)^k,
    // with c_k the binomial coefficients of (1+q)^(-1/2); the k-th term is
    // homogeneous of total degree 2k.
    let inv_sqrt_gamma = 1.0 / gamma.sqrt();
    let mut terms = Vec::new();
    let mut ck = 1.0;
    for k in 0..=(degree / 2) {
        let scale = ck * inv_sqrt_gamma / gamma.powi(k as i32);
        let mut binom = 1.0;
        for m in 0..=k {
            let coeff = scale * binom * alpha.powi(m as i32) * beta.powi((k - m) as i32);
            terms.push(((m, 2 * k - m), coeff));
            binom *= (k - m) as f64 / (m + 1) as f64;
        }
        ck *= -(2.0 * k as f64 + 1.0) / (2.0 * k as f64 + 2.0);
    }

    Unfolding::new(
        2,
        -2.0 * f,
        BivariatePoly::from_terms(terms),
        UnivariatePoly::new(vec![2.0 - 2.0 * f, 0.0, -1.0]),
        1.0,
    )
}

/// Weierstrass split of the factor: x U(x,y) = x U0(x) + y Uhat(x,y) with
/// U0(x) = U(x, 0). Both outputs are produced by exponent shifts only, so the
/// identity holds bit-exactly on coefficients.
pub fn weierstrass_split(u: &BivariatePoly) -> (UnivariatePoly, BivariatePoly) {
    let u0 = u.section_y0();
    let uhat = BivariatePoly::from_terms(
        u.terms()
            .filter(|((_, j), _)| *j >= 1)
            .map(|((i, j), c)| ((i + 1, j - 1), c)),
    );
    (u0, uhat)
}
