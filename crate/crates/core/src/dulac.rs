//! Dulac time and Dulac map of the saddle-node unfolding between the
//! sections {y = 1} and {x = 1}: transit computation along the x-parametrized
//! trajectory, the T0/T1 decomposition through the Weierstrass split,
//! first-order coefficient extraction, and slope scans over parameter grids.

use serde::Serialize;

use crate::deriv::{central_richardson, DerivEstimate};
use crate::error::{Error, Result};
use crate::fields::{weierstrass_split, LoudParams, Unfolding, USource};
use crate::integrator::{integrate_ode_in_x, IntegratorConfig};
use crate::quad::{self, QuadConfig};

/// Smallest section parameter the default tolerances resolve honestly. The
/// integrand scales like s^(-mu) at the left endpoint; below this floor the
/// derivative estimates could not meet their certificates.
pub const S_FLOOR: f64 = 1e-3;

/// Scan-configuration bounds. The underlying statements hold for
/// "s and eps small enough" without quantification; these defaults make no
/// claim of maximality.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ScanBounds {
    pub s_max: f64,
    pub eps_max: f64,
}

impl Default for ScanBounds {
    fn default() -> Self {
        Self { s_max: 0.25, eps_max: 0.1 }
    }
}

/// Largest real root of x(x^mu - eps) = 0.
pub fn theta(eps: f64, mu: u32) -> f64 {
    if eps <= 0.0 {
        0.0
    } else {
        match mu {
            1 => eps,
            2 => eps.sqrt(),
            3 => eps.cbrt(),
            _ => eps.powf(1.0 / mu as f64),
        }
    }
}

/// One Dulac-time evaluation at a section parameter s.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct DulacSample {
    pub s: f64,
    pub eps: f64,
    /// Transit time T between {y = 1} and {x = 1}.
    #[serde(rename = "T")]
    pub t: f64,
    /// Dulac map value, the y-coordinate of arrival on {x = 1}.
    #[serde(rename = "Dmap")]
    pub dmap: f64,
    #[serde(rename = "dT_ds")]
    pub dt_ds: f64,
    #[serde(rename = "T0")]
    pub t0: f64,
    #[serde(rename = "T1")]
    pub t1: f64,
}

/// Coefficients of the first-order expansion T1(s) = c0 + c1 s + s h(s).
#[derive(Clone, Debug, Serialize)]
pub struct CoeffFit {
    pub c0: f64,
    pub c1: f64,
    /// (s, h(s)) along the grid, s strictly decreasing.
    pub remainder_profile: Vec<(f64, f64)>,
    /// The two finest grid refinements moved (c0, c1) by less than 1%.
    pub stable: bool,
}

fn check_section_param(unf: &Unfolding, s: f64, enforce_floor: bool) -> Result<f64> {
    if !s.is_finite() {
        return Err(Error::NonFinite { context: "section parameter s" });
    }
    let th = theta(unf.eps(), unf.mu());
    if !(s > 0.0 && s + th < 1.0) {
        return Err(Error::SectionOutOfRange { s, theta: th });
    }
    if enforce_floor && s < S_FLOOR {
        return Err(Error::SectionBelowFloor { s, floor: S_FLOOR });
    }
    Ok(th)
}

/// Transit of the augmented system in x from s + theta to 1:
///   dy/dx = -V(x) y / (x (x^mu - eps)),   y(s + theta) = 1,
///   dt/dx =  U(x, y) / (x^mu - eps),      t(s + theta) = 0.
/// Returns (T, D) = (t(1), y(1)).
fn transit(unf: &Unfolding, s: f64, config: &IntegratorConfig, u: &USource<'_>) -> Result<(f64, f64)> {
    let th = check_section_param(unf, s, true)?;
    let mu = unf.mu() as i32;
    let eps = unf.eps();
    let domain_error = std::cell::Cell::new(false);
    let rhs = |x: f64, state: [f64; 2]| {
        let [y, _t] = state;
        let denom = x.powi(mu) - eps;
        let u_val = match u.eval(x, y) {
            Ok(v) => v,
            Err(_) => {
                domain_error.set(true);
                f64::NAN
            }
        };
        [-unf.v().eval(x) * y / (x * denom), u_val / denom]
    };
    match integrate_ode_in_x(rhs, s + th, 1.0, [1.0, 0.0], config) {
        Ok([y1, t1]) => Ok((t1, y1)),
        Err(e) => {
            if domain_error.get() {
                Err(Error::Domain {
                    context: "closed-form U undefined along the Dulac trajectory",
                    value: s,
                })
            } else {
                Err(e)
            }
        }
    }
}

/// Dulac time with the stored truncation of U; fills the whole sample
/// (map value, T0/T1 decomposition, derivative estimate).
pub fn dulac_time(unf: &Unfolding, s: f64, config: &IntegratorConfig) -> Result<DulacSample> {
    dulac_time_with(unf, s, config, &USource::Truncated(unf.u()))
}

/// Dulac time with an explicit U evaluation route (truncation or closed form).
pub fn dulac_time_with(
    unf: &Unfolding,
    s: f64,
    config: &IntegratorConfig,
    u: &USource<'_>,
) -> Result<DulacSample> {
    let (t, dmap_ode) = transit(unf, s, config, u)?;
    // The y endpoint shares the ODE noise floor of dulac_map.
    let dmap = if dmap_ode.abs() < ode_map_floor(config) {
        map_by_quadrature(unf, s, config)?
    } else {
        dmap_ode
    };
    let t0 = t0_time(unf, s, config)?;
    let dt = dt_ds_with(unf, s, config, u)?;
    Ok(DulacSample {
        s,
        eps: unf.eps(),
        t,
        dmap,
        dt_ds: dt.value,
        t0,
        t1: t - t0,
    })
}

/// The Dulac map in closed quadrature form, exp(-int V(x)/(x(x^mu-eps)) dx).
fn map_by_quadrature(unf: &Unfolding, s: f64, config: &IntegratorConfig) -> Result<f64> {
    let th = check_section_param(unf, s, false)?;
    let mu = unf.mu() as i32;
    let eps = unf.eps();
    let quad_cfg = QuadConfig {
        rel_tol: config.rel_tol.min(1e-11),
        ..QuadConfig::default()
    };
    let exponent = quad::integrate(
        &|x: f64| unf.v().eval(x) / (x * (x.powi(mu) - eps)),
        s + th,
        1.0,
        &quad_cfg,
    )?;
    Ok((-exponent).exp())
}

/// Values the y-integration can resolve: below roughly abs_tol times the
/// accumulated step count, the ODE route returns noise and the quadrature
/// route (which computes the log of the map) is authoritative.
fn ode_map_floor(config: &IntegratorConfig) -> f64 {
    (config.abs_tol * 1e3).max(1e-12)
}

/// Dulac map by y-only integration, cross-checked against the closed
/// quadrature form exp(-int V(x)/(x(x^mu - eps)) dx) to 1e-8 relative.
/// For strongly contracting transits whose map value is below the ODE noise
/// floor the quadrature value is returned directly.
pub fn dulac_map(unf: &Unfolding, s: f64, config: &IntegratorConfig) -> Result<f64> {
    const CROSS_TOL: f64 = 1e-8;
    let th = check_section_param(unf, s, true)?;
    let mu = unf.mu() as i32;
    let eps = unf.eps();
    let rhs = |x: f64, [y]: [f64; 1]| [-unf.v().eval(x) * y / (x * (x.powi(mu) - eps))];
    let [ode_value] = integrate_ode_in_x(rhs, s + th, 1.0, [1.0], config)?;
    let quad_value = map_by_quadrature(unf, s, config)?;

    let floor = ode_map_floor(config);
    if ode_value.abs() < floor && quad_value < floor {
        return Ok(quad_value);
    }
    let scale = ode_value.abs().max(quad_value.abs());
    if (ode_value - quad_value).abs() > CROSS_TOL * scale {
        return Err(Error::CrossCheckFailed {
            context: "Dulac map ODE vs quadrature",
            lhs: ode_value,
            rhs: quad_value,
            tol: CROSS_TOL,
        });
    }
    Ok(ode_value)
}

/// T0(s) = int_{s+theta}^{1} U(x, 0) / (x^mu - eps) dx by adaptive
/// quadrature on the Weierstrass section U(x, 0).
pub fn t0_time(unf: &Unfolding, s: f64, config: &IntegratorConfig) -> Result<f64> {
    let th = check_section_param(unf, s, false)?;
    let (u0, _) = weierstrass_split(unf.u());
    let mu = unf.mu() as i32;
    let eps = unf.eps();
    let quad_cfg = QuadConfig {
        rel_tol: config.rel_tol.min(1e-10),
        ..QuadConfig::default()
    };
    quad::integrate(
        &|x: f64| u0.eval(x) / (x.powi(mu) - eps),
        s + th,
        1.0,
        &quad_cfg,
    )
}

/// Closed form of dT0/ds: -U(s + theta, 0) / ((s + theta)^mu - eps).
/// The denominator is positive throughout the valid range.
pub fn dt0_ds(unf: &Unfolding, s: f64) -> f64 {
    let th = theta(unf.eps(), unf.mu());
    let x = s + th;
    let (u0, _) = weierstrass_split(unf.u());
    -u0.eval(x) / (x.powi(unf.mu() as i32) - unf.eps())
}

/// Direct T1 integral along the same trajectory,
/// int y Uhat(x, y) / (x (x^mu - eps)) dx; used by the decomposition
/// cross-check T ~ T0 + T1.
pub fn t1_direct(unf: &Unfolding, s: f64, config: &IntegratorConfig) -> Result<f64> {
    let th = check_section_param(unf, s, true)?;
    let (_, uhat) = weierstrass_split(unf.u());
    let mu = unf.mu() as i32;
    let eps = unf.eps();
    let rhs = |x: f64, [y, _t1]: [f64; 2]| {
        let denom = x * (x.powi(mu) - eps);
        [-unf.v().eval(x) * y / denom, y * uhat.eval(x, y) / denom]
    };
    let [_, t1] = integrate_ode_in_x(rhs, s + th, 1.0, [1.0, 0.0], config)?;
    Ok(t1)
}

/// Richardson-certified derivative of the Dulac time in s, with steps
/// {h, h/2}, h = min(s/20, 1e-3).
pub fn dt_ds(unf: &Unfolding, s: f64, config: &IntegratorConfig) -> Result<DerivEstimate> {
    dt_ds_with(unf, s, config, &USource::Truncated(unf.u()))
}

fn dt_ds_with(
    unf: &Unfolding,
    s: f64,
    config: &IntegratorConfig,
    u: &USource<'_>,
) -> Result<DerivEstimate> {
    let h = (s / 20.0).min(1e-3);
    if s - h < S_FLOOR {
        return Err(Error::SectionBelowFloor { s, floor: S_FLOOR * (1.0 + 1.0 / 20.0) });
    }
    central_richardson(|sp| transit(unf, sp, config, u).map(|(t, _)| t), s, h)
}

fn neville_to_zero(points: &[(f64, f64)]) -> f64 {
    // Polynomial extrapolation of (s, value) samples to s = 0.
    let mut work: Vec<f64> = points.iter().map(|(_, v)| *v).collect();
    let xs: Vec<f64> = points.iter().map(|(s, _)| *s).collect();
    let n = work.len();
    for level in 1..n {
        for i in 0..n - level {
            let (x0, x1) = (xs[i], xs[i + level]);
            work[i] = (x0 * work[i + 1] - x1 * work[i]) / (x0 - x1);
        }
    }
    work[0]
}

fn fit_on_grid(samples: &[(f64, f64)]) -> (f64, f64) {
    let n = samples.len();
    // c0 from quadratic extrapolation through the three finest points,
    // c1 from the extrapolated divided difference on the two finest.
    let c0 = neville_to_zero(&samples[n - 3..]);
    let (s_coarse, t_coarse) = samples[n - 2];
    let (s_fine, t_fine) = samples[n - 1];
    let d_coarse = (t_coarse - c0) / s_coarse;
    let d_fine = (t_fine - c0) / s_fine;
    let c1 = (d_fine * s_coarse - d_coarse * s_fine) / (s_coarse - s_fine);
    (c0, c1)
}

/// Extract the first-order expansion coefficients of T1(s) = T(s) - T0(s) on
/// a strictly decreasing grid by Richardson extrapolation, together with the
/// remainder profile h(s) = (T1 - c0 - c1 s)/s and a two-grid stability flag.
/// Tolerances are tightened internally: T and T0 are of size 1/s and cancel
/// to an O(1) difference.
pub fn fit_c0_c1(unf: &Unfolding, s_grid: &[f64], config: &IntegratorConfig) -> Result<CoeffFit> {
    if s_grid.len() < 4 {
        return Err(Error::InvalidConfig("fit grid needs at least 4 points".into()));
    }
    if !s_grid.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::InvalidConfig("fit grid must be strictly decreasing".into()));
    }
    let tight = IntegratorConfig {
        rel_tol: config.rel_tol.min(1e-12),
        abs_tol: config.abs_tol.min(1e-14),
        ..*config
    };
    let u = USource::Truncated(unf.u());
    let mut samples = Vec::with_capacity(s_grid.len());
    let mut t_scale: f64 = 0.0;
    for &s in s_grid {
        let (t, _) = transit(unf, s, &tight, &u)?;
        let t0 = t0_time(unf, s, &tight)?;
        samples.push((s, t - t0));
        t_scale = t_scale.max(t.abs()).max(t0.abs());
    }

    let (c0, c1) = fit_on_grid(&samples);
    let (c0_prev, c1_prev) = fit_on_grid(&samples[..samples.len() - 1]);
    // Changes below the extrapolated integration noise carry no signal:
    // T and T0 are of size t_scale and cancel, the extrapolation weights
    // amplify the endpoint noise, and the s-division scales by the finest
    // grid value.
    let c0_floor = 1e4 * tight.rel_tol * t_scale;
    let c1_floor = c0_floor / s_grid[s_grid.len() - 1];
    let stable_coeff = |new: f64, old: f64, floor: f64| {
        (new - old).abs() < (0.01 * new.abs().max(old.abs())).max(floor)
    };
    let stable = stable_coeff(c0, c0_prev, c0_floor) && stable_coeff(c1, c1_prev, c1_floor);

    let remainder_profile = samples
        .iter()
        .map(|&(s, t1)| (s, (t1 - c0 - c1 * s) / s))
        .collect();
    Ok(CoeffFit { c0, c1, remainder_profile, stable })
}

/// One scan cell: the parameter, the derived unfolding constants and the
/// sample or its error.
#[derive(Clone, Debug)]
pub struct DulacScanRow {
    pub a: LoudParams,
    pub mu: u32,
    pub eps: f64,
    pub s: f64,
    pub result: Result<DulacSample>,
}

/// Scan output: rows in grid order plus the per-s minimum of -dT/ds over the
/// parameter grid, the quantity whose divergence the slope scan demonstrates.
#[derive(Clone, Debug)]
pub struct SlopeScan {
    pub rows: Vec<DulacScanRow>,
    pub min_neg_slope: Vec<(f64, Option<f64>)>,
}

/// Evaluate the Dulac sample over the product of a parameter grid and an
/// s-grid. Cells violating the scan bounds carry error records; the scan
/// continues. Cell order and values are deterministic regardless of the
/// worker count.
pub fn slope_scan<Fam>(
    family: Fam,
    a_grid: &[LoudParams],
    s_grid: &[f64],
    bounds: &ScanBounds,
    config: &IntegratorConfig,
) -> Result<SlopeScan>
where
    Fam: Fn(LoudParams) -> Result<Unfolding> + Sync,
{
    use rayon::prelude::*;

    if a_grid.is_empty() || s_grid.is_empty() {
        return Err(Error::InvalidConfig("scan grids must be nonempty".into()));
    }
    let cells: Vec<(usize, usize)> = (0..a_grid.len())
        .flat_map(|ia| (0..s_grid.len()).map(move |is| (ia, is)))
        .collect();
    let rows: Vec<DulacScanRow> = cells
        .par_iter()
        .map(|&(ia, is)| {
            let a = a_grid[ia];
            let s = s_grid[is];
            let result = family(a).and_then(|unf| {
                if s > bounds.s_max {
                    return Err(Error::InvalidConfig(format!(
                        "s = {s} exceeds the scan bound s_max = {}",
                        bounds.s_max
                    )));
                }
                if unf.eps().abs() > bounds.eps_max {
                    return Err(Error::InvalidConfig(format!(
                        "|eps| = {} exceeds the scan bound eps_max = {}",
                        unf.eps().abs(),
                        bounds.eps_max
                    )));
                }
                let sample = dulac_time(&unf, s, config)?;
                Ok((unf.mu(), sample))
            });
            match result {
                Ok((mu, sample)) => DulacScanRow { a, mu, eps: sample.eps, s, result: Ok(sample) },
                Err(e) => DulacScanRow { a, mu: 0, eps: f64::NAN, s, result: Err(e) },
            }
        })
        .collect();

    let min_neg_slope = s_grid
        .iter()
        .enumerate()
        .map(|(is, &s)| {
            let min = rows
                .iter()
                .skip(is)
                .step_by(s_grid.len())
                .filter_map(|row| row.result.as_ref().ok().map(|smpl| -smpl.dt_ds))
                .fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |m: f64| m.min(v))));
            (s, min)
        })
        .collect();

    Ok(SlopeScan { rows, min_neg_slope })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{build_loud_unfolding, BivariatePoly, UnivariatePoly};

    fn constant_unfolding(mu: u32, eps: f64, u: f64, v: f64) -> Unfolding {
        Unfolding::new(
            mu,
            eps,
            BivariatePoly::constant(u),
            UnivariatePoly::constant(v),
            1.0,
        )
        .unwrap()
    }

    #[test]
    fn theta_branches() {
        assert_eq!(theta(-0.1, 2), 0.0);
        assert_eq!(theta(0.0, 2), 0.0);
        assert!((theta(0.04, 2) - 0.2).abs() < 1e-16);
        assert!((theta(0.008, 3) - 0.2).abs() < 1e-16);
        assert!((theta(0.3, 1) - 0.3).abs() < 1e-16);
    }

    #[test]
    fn transit_time_inverse_square() {
        // U = 1, eps = 0, mu = 2: T = int_s^1 x^-2 dx = 1/s - 1.
        let unf = constant_unfolding(2, 0.0, 1.0, 1.0);
        let cfg = IntegratorConfig::default();
        let sample = dulac_time(&unf, 0.1, &cfg).unwrap();
        assert!((sample.t - 9.0).abs() < 1e-8, "T = {}", sample.t);
        // U has no y-dependence: T1 vanishes and T = T0.
        assert!((sample.t0 - 9.0).abs() < 1e-8);
        assert!(sample.t1.abs() < 1e-7);
    }

    #[test]
    fn transit_time_partial_fractions() {
        // eps = 0.04, theta = 0.2: T = (1/0.4) ln((x-0.2)/(x+0.2)) from 0.3 to 1.
        let unf = constant_unfolding(2, 0.04, 1.0, 1.0);
        let cfg = IntegratorConfig::default();
        let expect = 2.5 * (10.0f64 / 3.0).ln();
        let sample = dulac_time(&unf, 0.1, &cfg).unwrap();
        assert!((sample.t - expect).abs() < 1e-8, "T = {}", sample.t);
        let t0 = t0_time(&unf, 0.1, &cfg).unwrap();
        assert!((t0 - expect).abs() < 1e-9);
    }

    #[test]
    fn dulac_map_closed_form() {
        // V = 2, eps = 0, s = 0.5: D = exp(-(2/2)(1/s^2 - 1)) = e^-3.
        let unf = constant_unfolding(2, 0.0, 1.0, 2.0);
        let cfg = IntegratorConfig::default();
        let d = dulac_map(&unf, 0.5, &cfg).unwrap();
        assert!((d - (-3.0f64).exp()).abs() < 1e-8, "D = {d}");
        let sample = dulac_time(&unf, 0.5, &cfg).unwrap();
        assert!((sample.dmap - d).abs() < 1e-9);
    }

    #[test]
    fn dulac_map_exactly_exponential_for_constant_v() {
        let cfg = IntegratorConfig::default();
        for (lambda, mu) in [(1.5, 2u32), (0.8, 3)] {
            let unf = constant_unfolding(mu, 0.0, 1.0, lambda);
            for s in [0.3, 0.5, 0.7] {
                let d = dulac_map(&unf, s, &cfg).unwrap();
                let expect = (-(lambda / mu as f64) * (s.powi(-(mu as i32)) - 1.0)).exp();
                assert!((d - expect).abs() < 1e-8 * expect, "mu={mu} s={s}");
            }
        }
    }

    #[test]
    fn dulac_map_ratio_shrinks() {
        let unf = build_loud_unfolding(LoudParams::new(-0.5, 0.0).unwrap(), 8).unwrap();
        let cfg = IntegratorConfig::default();
        let mut previous = f64::INFINITY;
        for s in [0.1, 0.05, 0.02, 0.01] {
            let ratio = dulac_map(&unf, s, &cfg).unwrap() / s;
            assert!(
                ratio < previous || (ratio == 0.0 && previous == 0.0),
                "ratio {ratio} at s={s} did not shrink from {previous}"
            );
            previous = ratio;
        }
        assert!(previous < 0.1);
    }

    #[test]
    fn t0_values() {
        let cfg = IntegratorConfig::default();
        let unf = constant_unfolding(2, 0.0, 1.0, 1.0);
        assert!((t0_time(&unf, 0.1, &cfg).unwrap() - 9.0).abs() < 1e-9);
        let unf2 = constant_unfolding(2, 0.0, 2.0, 1.0);
        assert!((t0_time(&unf2, 0.1, &cfg).unwrap() - 18.0).abs() < 1e-8);
    }

    #[test]
    fn dt0_closed_form() {
        let unf = constant_unfolding(2, 0.0, 1.0, 1.0);
        assert!((dt0_ds(&unf, 0.1) - -100.0).abs() < 1e-10);
        let unf = constant_unfolding(2, 0.04, 1.0, 1.0);
        assert!((dt0_ds(&unf, 0.1) - -20.0).abs() < 1e-10);
        // U(x, 0) = 2 + x.
        let unf = Unfolding::new(
            2,
            0.0,
            BivariatePoly::from_terms([((0, 0), 2.0), ((1, 0), 1.0)]),
            UnivariatePoly::constant(1.0),
            1.0,
        )
        .unwrap();
        assert!((dt0_ds(&unf, 0.1) - -210.0).abs() < 1e-9);
    }

    #[test]
    fn dt0_matches_finite_differences_of_t0() {
        let cfg = IntegratorConfig::default();
        let unf = build_loud_unfolding(LoudParams::new(-0.5, 0.05).unwrap(), 8).unwrap();
        for s in [0.2, 0.1, 0.05] {
            let closed = dt0_ds(&unf, s);
            let h = (s / 10.0).min(1e-4);
            let est = central_richardson(|sp| t0_time(&unf, sp, &cfg), s, h).unwrap();
            assert!(
                (closed - est.value).abs() <= 1e-5 * closed.abs(),
                "s={s}: {closed} vs {}",
                est.value
            );
        }
    }

    #[test]
    fn dt_ds_reduces_to_dt0_when_u_is_constant() {
        let unf = constant_unfolding(2, 0.0, 1.0, 1.0);
        let cfg = IntegratorConfig::default();
        for s in [0.2, 0.1, 0.05] {
            let est = dt_ds(&unf, s, &cfg).unwrap();
            assert!(est.consistent);
            assert!(
                (est.value - -1.0 / (s * s)).abs() <= 1e-6 / (s * s),
                "s={s}: {}",
                est.value
            );
        }
    }

    #[test]
    fn monotone_divergence_for_loud_unfolding() {
        let cfg = IntegratorConfig::default();
        // eps = -0.1 cell: strictly decreasing slope along the stated grid.
        let unf = build_loud_unfolding(LoudParams::new(-0.5, 0.05).unwrap(), 8).unwrap();
        let mut previous = f64::INFINITY;
        let mut t1_slope_bound: f64 = 0.0;
        for s in [0.2, 0.1, 0.05, 0.02] {
            let est = dt_ds(&unf, s, &cfg).unwrap();
            assert!(est.consistent, "s={s}");
            assert!(est.value < previous, "s={s}: {} !< {previous}", est.value);
            previous = est.value;
            // dT/ds - dT0/ds stays bounded: the T1 part has bounded slope.
            t1_slope_bound = t1_slope_bound.max((est.value - dt0_ds(&unf, s)).abs());
        }
        assert!(t1_slope_bound < 50.0, "T1 slope grew to {t1_slope_bound}");

        // eps = 0 cell: the slope diverges like -U(0,0)/s^2.
        let unf = build_loud_unfolding(LoudParams::new(-0.5, 0.0).unwrap(), 8).unwrap();
        let mut previous = f64::INFINITY;
        for s in [0.2, 0.1, 0.05, 0.02, 0.01] {
            let est = dt_ds(&unf, s, &cfg).unwrap();
            assert!(est.consistent, "s={s}");
            assert!(est.value < previous, "s={s}");
            previous = est.value;
        }
        assert!(previous < -1e4, "slope at s=0.01 was {previous}");
    }

    #[test]
    fn decomposition_t0_plus_t1_direct() {
        let cfg = IntegratorConfig::default();
        for (d, f) in [(-0.5, 0.05), (-0.8, 0.0), (-0.2, -0.05)] {
            let unf = build_loud_unfolding(LoudParams::new(d, f).unwrap(), 8).unwrap();
            for s in [0.2, 0.05, 0.01] {
                let (t, _) = transit(&unf, s, &cfg, &USource::Truncated(unf.u())).unwrap();
                let t0 = t0_time(&unf, s, &cfg).unwrap();
                let t1 = t1_direct(&unf, s, &cfg).unwrap();
                assert!(
                    (t - (t0 + t1)).abs() <= 1e-7 * (1.0 + t.abs()),
                    "({d}, {f}) s={s}: T={t} T0+T1={}",
                    t0 + t1
                );
            }
        }
    }

    #[test]
    fn sample_signs_and_range() {
        let cfg = IntegratorConfig::default();
        for (d, f) in [(-0.5, 0.05), (-0.8, -0.05), (-0.2, 0.0)] {
            let unf = build_loud_unfolding(LoudParams::new(d, f).unwrap(), 8).unwrap();
            for s in [0.2, 0.1, 0.02] {
                let sample = dulac_time(&unf, s, &cfg).unwrap();
                assert!(sample.t > 0.0);
                assert!(sample.dmap >= 0.0 && sample.dmap <= 1.0);
            }
        }
    }

    #[test]
    fn fit_vanishes_when_u_has_no_y_dependence() {
        let unf = constant_unfolding(2, 0.0, 1.0, 1.0);
        let cfg = IntegratorConfig::default();
        let grid = [0.1, 0.05, 0.025, 0.0125, 0.00625];
        let fit = fit_c0_c1(&unf, &grid, &cfg).unwrap();
        assert!(fit.c0.abs() < 1e-7, "c0 = {}", fit.c0);
        assert!(fit.c1.abs() < 1e-4, "c1 = {}", fit.c1);
        assert!(fit.stable);
        for (_, h) in fit.remainder_profile {
            assert!(h.abs() < 1e-3);
        }
    }

    #[test]
    fn fit_is_stable_across_grids() {
        let unf = build_loud_unfolding(LoudParams::new(-0.5, 0.0).unwrap(), 8).unwrap();
        let cfg = IntegratorConfig::default();
        let grid_a: Vec<f64> = (0..7).map(|k| 0.1 * 0.5f64.powi(k)).collect();
        let grid_b: Vec<f64> = (0..7).map(|k| 0.08 * 0.5f64.powi(k)).collect();
        let fit_a = fit_c0_c1(&unf, &grid_a, &cfg).unwrap();
        let fit_b = fit_c0_c1(&unf, &grid_b, &cfg).unwrap();
        assert!(fit_a.stable && fit_b.stable);
        // c0 vanishes for this cell; agreement is within the noise floor.
        assert!(
            (fit_a.c0 - fit_b.c0).abs() <= (0.01 * fit_a.c0.abs()).max(1e-7),
            "c0: {} vs {}",
            fit_a.c0,
            fit_b.c0
        );
        assert!(
            (fit_a.c1 - fit_b.c1).abs() <= 0.01 * fit_a.c1.abs(),
            "c1: {} vs {}",
            fit_a.c1,
            fit_b.c1
        );
        // |h| decreasing on the tail of the grid.
        let n = fit_a.remainder_profile.len();
        let tail = &fit_a.remainder_profile[n - 3..];
        assert!(tail[0].1.abs() > tail[1].1.abs() && tail[1].1.abs() > tail[2].1.abs());
    }

    #[test]
    fn scan_matches_direct_call() {
        let cfg = IntegratorConfig::default();
        let a = LoudParams::new(-0.5, 0.05).unwrap();
        let scan = slope_scan(
            |p| build_loud_unfolding(p, 8),
            &[a],
            &[0.1],
            &ScanBounds::default(),
            &cfg,
        )
        .unwrap();
        assert_eq!(scan.rows.len(), 1);
        let row_sample = scan.rows[0].result.as_ref().unwrap();
        let unf = build_loud_unfolding(a, 8).unwrap();
        let direct = dulac_time(&unf, 0.1, &cfg).unwrap();
        assert_eq!(row_sample.t.to_bits(), direct.t.to_bits());
        assert_eq!(row_sample.dt_ds.to_bits(), direct.dt_ds.to_bits());
        assert_eq!(scan.min_neg_slope[0].1, Some(-direct.dt_ds));
    }

    #[test]
    fn scan_bounds_produce_cell_errors() {
        let cfg = IntegratorConfig::default();
        let a = LoudParams::new(-0.5, 0.3).unwrap(); // eps = -0.6 beyond eps_max
        let scan = slope_scan(
            |p| build_loud_unfolding(p, 8),
            &[a],
            &[0.1],
            &ScanBounds::default(),
            &cfg,
        )
        .unwrap();
        assert!(scan.rows[0].result.is_err());
        assert_eq!(scan.min_neg_slope[0].1, None);
    }

    #[test]
    fn floor_and_range_errors() {
        let unf = constant_unfolding(2, 0.0, 1.0, 1.0);
        let cfg = IntegratorConfig::default();
        assert!(matches!(
            dulac_time(&unf, 5e-4, &cfg),
            Err(Error::SectionBelowFloor { .. })
        ));
        assert!(matches!(
            dulac_time(&unf, 1.5, &cfg),
            Err(Error::SectionOutOfRange { .. })
        ));
        let unf = constant_unfolding(2, 0.04, 1.0, 1.0);
        assert!(matches!(
            dulac_time(&unf, 0.85, &cfg),
            Err(Error::SectionOutOfRange { .. })
        ));
    }
}
