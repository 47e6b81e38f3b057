//! Period function of the Loud center in affine coordinates: half-period
//! transit via the reversibility symmetry, orbit closure diagnostics,
//! derivative scans, critical-period search, and the near-polycycle
//! monotonicity check.

use serde::Serialize;

use crate::deriv::{central_richardson, DerivEstimate};
use crate::error::{Error, Result};
use crate::fields::{eval_loud, LoudParams, ParamBox, Vec2};
use crate::integrator::{
    integrate_until_event, CrossingDirection, EventSpec, IntegratorConfig, OrbitStatus,
};

/// Orbits starting closer to u = 1 than this pass too near the polycycle for
/// affine-chart integration at the default tolerances.
pub const U_MAX_DEFAULT: f64 = 0.995;

/// One period evaluation at the u-axis crossing u0.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PeriodSample {
    pub u0: f64,
    pub period: f64,
    pub dperiod_du0: f64,
    pub closure_residual: f64,
}

/// Kind of a critical period.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ExtremumKind {
    Min,
    Max,
}

/// A bracketed critical point of the period function.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct CriticalPeriod {
    pub u0: f64,
    pub period: f64,
    pub kind: ExtremumKind,
    pub bracket: (f64, f64),
}

/// Transit from (u0, 0) to the opposite v = 0 crossing.
#[derive(Clone, Copy, Debug)]
pub struct HalfPeriod {
    pub time: f64,
    pub exit_u: f64,
}

fn check_u0(u0: f64) -> Result<()> {
    if !(u0 > 0.0 && u0 < 1.0) {
        return Err(Error::Domain { context: "u0 must lie in (0, 1)", value: u0 });
    }
    Ok(())
}

/// Time from (u0, 0) to the next v = 0 crossing in the opposite direction.
/// By the (u, v) -> (u, -v) reversibility this is half the period. The exit
/// u-coordinate is negative for orbits around the center.
pub fn half_period(a: LoudParams, u0: f64, config: &IntegratorConfig) -> Result<HalfPeriod> {
    check_u0(u0)?;
    let field = move |p: Vec2| eval_loud(a, p, false);
    let section = |p: Vec2| p.y;
    // The orbit leaves (u0, 0) upward, so the return to v = 0 is downward.
    let event = EventSpec::new(&section, CrossingDirection::Down);
    let orbit = integrate_until_event(field, Vec2::new(u0, 0.0), &event, config)?;
    match orbit.status {
        OrbitStatus::EventHit => Ok(HalfPeriod {
            time: orbit.event_time.expect("event fields present on EVENT_HIT"),
            exit_u: orbit.event_state.expect("event fields present on EVENT_HIT").x,
        }),
        status => Err(Error::OrbitNotClosed { u0, status }),
    }
}

fn period_value(a: LoudParams, u0: f64, config: &IntegratorConfig) -> Result<f64> {
    Ok(2.0 * half_period(a, u0, config)?.time)
}

/// Period of the orbit through (u0, 0) with closure diagnostics and the
/// derivative estimate.
pub fn orbit_period(a: LoudParams, u0: f64, config: &IntegratorConfig) -> Result<PeriodSample> {
    let period = period_value(a, u0, config)?;
    // Full return to the section from above gives the closure residual.
    let field = move |p: Vec2| eval_loud(a, p, false);
    let section = |p: Vec2| p.y;
    let event = EventSpec::new(&section, CrossingDirection::Up);
    let orbit = integrate_until_event(field, Vec2::new(u0, 0.0), &event, config)?;
    let closure_residual = match orbit.status {
        OrbitStatus::EventHit => {
            (orbit.event_state.expect("event fields present") - Vec2::new(u0, 0.0)).norm()
        }
        status => return Err(Error::OrbitNotClosed { u0, status }),
    };
    let dperiod_du0 = dperiod(a, u0, config)?.value;
    Ok(PeriodSample { u0, period, dperiod_du0, closure_residual })
}

/// Full-return period measured directly at the Up-crossing of v = 0;
/// equals twice the half period up to the integration tolerance.
pub fn full_return_period(a: LoudParams, u0: f64, config: &IntegratorConfig) -> Result<f64> {
    check_u0(u0)?;
    let field = move |p: Vec2| eval_loud(a, p, false);
    let section = |p: Vec2| p.y;
    let event = EventSpec::new(&section, CrossingDirection::Up);
    let orbit = integrate_until_event(field, Vec2::new(u0, 0.0), &event, config)?;
    match orbit.status {
        OrbitStatus::EventHit => Ok(orbit.event_time.expect("event fields present")),
        status => Err(Error::OrbitNotClosed { u0, status }),
    }
}

/// Richardson-certified derivative of the period in u0, steps {h, h/2} with
/// h = min(1e-3, (1 - u0)/50, u0/50).
pub fn dperiod(a: LoudParams, u0: f64, config: &IntegratorConfig) -> Result<DerivEstimate> {
    check_u0(u0)?;
    let h = 1e-3f64.min((1.0 - u0) / 50.0).min(u0 / 50.0);
    central_richardson(|u| period_value(a, u, config), u0, h)
}

/// One period-scan cell.
#[derive(Clone, Debug)]
pub struct PeriodScanRow {
    pub u0: f64,
    pub result: Result<PeriodSample>,
}

/// Evaluate the period sample over a u0 grid; failed cells carry their error
/// records. Deterministic in grid order regardless of worker count.
pub fn period_scan(a: LoudParams, u0_grid: &[f64], config: &IntegratorConfig) -> Vec<PeriodScanRow> {
    use rayon::prelude::*;
    u0_grid
        .par_iter()
        .map(|&u0| PeriodScanRow { u0, result: orbit_period(a, u0, config) })
        .collect()
}

/// Critical periods of a supplied period function on [lo, hi]: scan the
/// derivative on a grid (uniform plus geometric refinement toward hi),
/// bracket sign changes, and bisect each bracket to width 1e-6. The kind
/// follows the derivative sign pattern: + to - is a maximum, - to + a
/// minimum.
pub fn critical_periods_of<P, D>(
    period_fn: P,
    dperiod_fn: D,
    interval: (f64, f64),
    grid_points: usize,
) -> Result<Vec<CriticalPeriod>>
where
    P: Fn(f64) -> Result<f64> + Sync,
    D: Fn(f64) -> Result<DerivEstimate> + Sync,
{
    use rayon::prelude::*;

    const BRACKET_WIDTH: f64 = 1e-6;
    let (lo, hi) = interval;
    if !(lo > 0.0 && lo < hi && hi < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "critical-period interval ({lo}, {hi}) must satisfy 0 < lo < hi < 1"
        )));
    }
    if grid_points < 2 {
        return Err(Error::InvalidConfig("grid needs at least 2 points".into()));
    }

    // Three quarters uniform, one quarter clustered geometrically at hi.
    let n_uniform = grid_points - grid_points / 4;
    let n_geom = grid_points - n_uniform;
    let mut grid: Vec<f64> = (0..n_uniform)
        .map(|k| lo + (hi - lo) * k as f64 / (n_uniform - 1) as f64)
        .collect();
    for k in 1..=n_geom {
        grid.push(hi - (hi - lo) * 0.5f64.powi(k as i32));
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup_by(|a, b| (*a - *b).abs() < 1e-12);

    let derivs: Vec<(f64, DerivEstimate)> = grid
        .par_iter()
        .map(|&u| dperiod_fn(u).map(|d| (u, d)))
        .collect::<Result<_>>()?;

    // Grid points where the derivative vanishes exactly carry no sign; they
    // are skipped so a crossing is bracketed by its nonzero neighbors.
    let signed: Vec<(f64, DerivEstimate)> = derivs
        .into_iter()
        .filter(|(_, d)| d.value != 0.0)
        .collect();

    // Sign probe for the refinement phase. Close to the root the fixed-step
    // stencil bias hides the sign, so the step shrinks until the certificate
    // holds.
    enum Probe {
        Sign(f64),
        ExactZero,
        Unresolved,
    }
    let probe = |u: f64| -> Result<Probe> {
        let base_h = 1e-3f64.min((1.0 - u) / 50.0).min(u / 50.0);
        for shrink in [1.0, 0.25, 0.0625] {
            let est = central_richardson(&period_fn, u, base_h * shrink)?;
            if let Some(sign) = est.certified_sign() {
                return Ok(Probe::Sign(sign));
            }
            if est.coarse == 0.0 && est.fine == 0.0 {
                return Ok(Probe::ExactZero);
            }
        }
        Ok(Probe::Unresolved)
    };

    let mut criticals = Vec::new();
    for pair in signed.windows(2) {
        let (u_left, d_left) = pair[0];
        let (u_right, d_right) = pair[1];
        if (d_left.value > 0.0) == (d_right.value > 0.0) {
            continue;
        }
        let falling = d_left.value > 0.0;
        let (mut bl, mut br) = (u_left, u_right);
        while br - bl > BRACKET_WIDTH {
            let mid = 0.5 * (bl + br);
            match probe(mid)? {
                Probe::ExactZero => {
                    // The stencil landed exactly on the critical point.
                    bl = mid - 0.5 * BRACKET_WIDTH;
                    br = mid + 0.5 * BRACKET_WIDTH;
                    break;
                }
                Probe::Unresolved => return Err(Error::UnresolvedBracket { lo: bl, hi: br }),
                Probe::Sign(sign) => {
                    if (sign > 0.0) == falling {
                        bl = mid;
                    } else {
                        br = mid;
                    }
                }
            }
        }
        let u0 = 0.5 * (bl + br);
        criticals.push(CriticalPeriod {
            u0,
            period: period_fn(u0)?,
            kind: if falling { ExtremumKind::Max } else { ExtremumKind::Min },
            bracket: (bl, br),
        });
    }
    Ok(criticals)
}

/// Critical periods of the Loud center on [lo, hi] in (0, 1), with the
/// default 64-point scan grid.
pub fn critical_periods(
    a: LoudParams,
    interval: (f64, f64),
    config: &IntegratorConfig,
) -> Result<Vec<CriticalPeriod>> {
    critical_periods_of(
        |u0| period_value(a, u0, config),
        |u0| dperiod(a, u0, config),
        interval,
        64,
    )
}

/// One cell of the boundary monotonicity report.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct MonotonicityCell {
    #[serde(rename = "D")]
    pub d: f64,
    #[serde(rename = "F")]
    pub f: f64,
    /// Common certified sign of dperiod on the window: +1, -1, or 0 when
    /// inconclusive.
    pub sign: i8,
    /// Adjacent certified sign changes found on the window.
    pub violations: usize,
    /// Window points whose sign certificate failed.
    pub inconclusive: usize,
    pub n_points: usize,
}

/// Deterministic report of the near-boundary derivative signs.
#[derive(Clone, Debug, Serialize)]
pub struct MonotonicityReport {
    pub d0: f64,
    pub delta: f64,
    pub window: (f64, f64),
    pub cells: Vec<MonotonicityCell>,
    pub total_violations: usize,
    pub total_inconclusive: usize,
}

/// Check that dperiod keeps one sign on a u0 window near the polycycle for
/// all (D, F) on a grid with |D - D0| <= delta, |F| <= delta. Inconclusive
/// cells are flagged, not asserted.
#[allow(clippy::too_many_arguments)]
pub fn boundary_monotonicity_check(
    d0: f64,
    delta: f64,
    n_d: usize,
    n_f: usize,
    n_u0: usize,
    window: (f64, f64),
    config: &IntegratorConfig,
) -> Result<MonotonicityReport> {
    use rayon::prelude::*;

    if !(d0 > -1.0 && d0 < 0.0) {
        return Err(Error::Domain { context: "D0 must lie in (-1, 0)", value: d0 });
    }
    if !(delta > 0.0) {
        return Err(Error::InvalidConfig("delta must be positive".into()));
    }
    if !(window.0 > 0.0 && window.0 < window.1 && window.1 < 1.0) {
        return Err(Error::InvalidConfig(format!(
            "window ({}, {}) must satisfy 0 < lo < hi < 1",
            window.0, window.1
        )));
    }
    if n_d == 0 || n_f == 0 || n_u0 < 2 {
        return Err(Error::InvalidConfig("grid sizes must be positive (n_u0 >= 2)".into()));
    }

    let bounds = ParamBox::default();
    let axis = |center: f64, n: usize| -> Vec<f64> {
        if n == 1 {
            vec![center]
        } else {
            (0..n)
                .map(|k| center - delta + 2.0 * delta * k as f64 / (n - 1) as f64)
                .collect()
        }
    };
    let d_grid = axis(d0, n_d);
    let f_grid = axis(0.0, n_f);
    let u0_grid: Vec<f64> = (0..n_u0)
        .map(|k| window.0 + (window.1 - window.0) * k as f64 / (n_u0 - 1) as f64)
        .collect();

    let mut params = Vec::new();
    for &d in &d_grid {
        for &f in &f_grid {
            params.push(LoudParams::new_in(d, f, &bounds)?);
        }
    }

    let cells: Vec<MonotonicityCell> = params
        .par_iter()
        .map(|&a| {
            let mut signs = Vec::with_capacity(u0_grid.len());
            let mut inconclusive = 0usize;
            for &u0 in &u0_grid {
                match dperiod(a, u0, config) {
                    Ok(est) => match est.certified_sign() {
                        Some(sign) => signs.push(sign),
                        None => inconclusive += 1,
                    },
                    Err(_) => inconclusive += 1,
                }
            }
            let violations = signs.windows(2).filter(|w| w[0] != w[1]).count();
            let sign = if violations == 0 && inconclusive == 0 && !signs.is_empty() {
                signs[0] as i8
            } else {
                0
            };
            MonotonicityCell {
                d: a.d(),
                f: a.f(),
                sign,
                violations,
                inconclusive,
                n_points: u0_grid.len(),
            }
        })
        .collect();

    let total_violations = cells.iter().map(|c| c.violations).sum();
    let total_inconclusive = cells.iter().map(|c| c.inconclusive).sum();
    Ok(MonotonicityReport {
        d0,
        delta,
        window,
        cells,
        total_violations,
        total_inconclusive,
    })
}
