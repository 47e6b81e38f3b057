//! Adaptive ODE integration with dense event detection.
//!
//! A Dormand-Prince 5(4) embedded pair with PI step-size control and the
//! classical quartic dense output drives everything: planar orbits with
//! section-crossing events, fixed-span planar arcs, and x-parametrized
//! augmented systems for the Dulac time.

use std::fmt;

use crate::error::{Error, Result};
use crate::fields::Vec2;

/// State norm beyond which an orbit is declared escaped to infinity.
/// Orbits near the polycycle that leave this ball belong to the projective
/// chart, not to affine coordinates.
pub const BLOWUP_NORM: f64 = 1e8;

/// Tolerances and step bounds for the embedded pair.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Starting step; `None` selects it from the local derivative scale.
    pub initial_step: Option<f64>,
    pub min_step: f64,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-10,
            abs_tol: 1e-12,
            max_steps: 1_000_000,
            initial_step: None,
            min_step: 1e-14,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        if !(self.min_step > 0.0) {
            return Err(Error::InvalidConfig("min_step must be positive".into()));
        }
        if let Some(h0) = self.initial_step {
            if !(h0 > self.min_step) {
                return Err(Error::InvalidConfig(
                    "initial_step must exceed min_step".into(),
                ));
            }
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidConfig("max_steps must be positive".into()));
        }
        Ok(())
    }

    /// Copy with both tolerances multiplied by `factor`.
    pub fn scaled_tol(&self, factor: f64) -> Self {
        Self {
            rel_tol: self.rel_tol * factor,
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// Which sign changes of the event function count as crossings.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CrossingDirection {
    Any,
    /// Negative to positive.
    Up,
    /// Positive to negative.
    Down,
}

/// A scalar section function together with crossing semantics.
pub struct EventSpec<'a> {
    pub event_fn: &'a (dyn Fn(Vec2) -> f64 + Sync),
    pub direction: CrossingDirection,
    /// Width in time to which the crossing is localized on the interpolant.
    pub refinement_tol: f64,
    /// Which matching crossing stops the integration (1 = first).
    pub count: usize,
}

impl<'a> EventSpec<'a> {
    pub fn new(event_fn: &'a (dyn Fn(Vec2) -> f64 + Sync), direction: CrossingDirection) -> Self {
        Self {
            event_fn,
            direction,
            refinement_tol: 1e-12,
            count: 1,
        }
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_refinement_tol(mut self, tol: f64) -> Self {
        self.refinement_tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        if !(self.refinement_tol > 0.0) {
            return Err(Error::InvalidConfig("refinement_tol must be positive".into()));
        }
        if self.count == 0 {
            return Err(Error::InvalidConfig("event count must be at least 1".into()));
        }
        Ok(())
    }
}

/// Terminal state of an event integration.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OrbitStatus {
    EventHit,
    MaxSteps,
    Blowup,
    StepUnderflow,
}

impl OrbitStatus {
    pub fn code(&self) -> &'static str {
        match self {
            OrbitStatus::EventHit => "EVENT_HIT",
            OrbitStatus::MaxSteps => "MAX_STEPS",
            OrbitStatus::Blowup => "BLOWUP",
            OrbitStatus::StepUnderflow => "STEP_UNDERFLOW",
        }
    }
}

impl fmt::Display for OrbitStatus {
    fn fmt(&self, out: &mut fmt::Formatter<'_>) -> fmt::Result {
        out.write_str(self.code())
    }
}

/// A time-stamped sampled trajectory with event metadata.
#[derive(Clone, Debug)]
pub struct Orbit {
    pub times: Vec<f64>,
    pub states: Vec<Vec2>,
    pub event_time: Option<f64>,
    pub event_state: Option<Vec2>,
    pub status: OrbitStatus,
}

impl Orbit {
    /// CSV with columns t, c1, c2 and a trailing status comment.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "t,c1,c2")?;
        for (t, s) in self.times.iter().zip(&self.states) {
            writeln!(out, "{:e},{:e},{:e}", t, s.x, s.y)?;
        }
        match self.event_time {
            Some(t) => writeln!(out, "# status={} event_t={:e}", self.status, t),
            None => writeln!(out, "# status={} event_t=none", self.status),
        }
    }
}

/// A sampled trajectory arc without event metadata.
#[derive(Clone, Debug)]
pub struct Path {
    pub times: Vec<f64>,
    pub states: Vec<Vec2>,
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const B: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// b - b_hat, for the embedded 4th-order error estimate.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Dense-output weights for the quartic interpolant.
const D5: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

const SAFETY: f64 = 0.9;
// PI controller exponents: 1/5 with stabilizing beta = 0.04.
const EXPO1: f64 = 0.17;
const BETA: f64 = 0.04;

struct AcceptedStep<const N: usize> {
    t0: f64,
    h: f64,
    y1: [f64; N],
    cont: [[f64; N]; 5],
}

impl<const N: usize> AcceptedStep<N> {
    /// Evaluate the quartic interpolant at fraction `theta` of the step.
    fn interpolate(&self, theta: f64) -> [f64; N] {
        let mut out = [0.0; N];
        let om = 1.0 - theta;
        for i in 0..N {
            out[i] = self.cont[0][i]
                + theta
                    * (self.cont[1][i]
                        + om * (self.cont[2][i] + theta * (self.cont[3][i] + om * self.cont[4][i])));
        }
        out
    }
}

enum StepOutcome<const N: usize> {
    Accepted(AcceptedStep<N>),
    Failed(OrbitStatus),
}

struct Stepper<F, const N: usize>
where
    F: Fn(f64, [f64; N]) -> [f64; N],
{
    rhs: F,
    cfg: IntegratorConfig,
    t: f64,
    y: [f64; N],
    dy: [f64; N],
    h: f64,
    dir: f64,
    err_old: f64,
    last_rejected: bool,
    attempts: usize,
}

fn axpy<const N: usize>(y: &mut [f64; N], a: f64, x: &[f64; N]) {
    for i in 0..N {
        y[i] += a * x[i];
    }
}

impl<F, const N: usize> Stepper<F, N>
where
    F: Fn(f64, [f64; N]) -> [f64; N],
{
    fn new(rhs: F, t0: f64, y0: [f64; N], dir: f64, span: Option<f64>, cfg: &IntegratorConfig) -> Result<Self> {
        cfg.validate()?;
        let dy = (rhs)(t0, y0);
        if !dy.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                context: "derivative at the initial state",
            });
        }
        let h0 = match cfg.initial_step {
            Some(h) => h,
            None => auto_initial_step(&rhs, t0, &y0, &dy, dir, span, cfg),
        };
        Ok(Self {
            rhs,
            cfg: *cfg,
            t: t0,
            y: y0,
            dy,
            h: h0.max(cfg.min_step) * dir,
            dir,
            err_old: 1e-4,
            last_rejected: false,
            attempts: 0,
        })
    }

    /// Advance one accepted step, or fail with a status code. `limit`
    /// truncates the step so the span endpoint is hit exactly.
    fn advance(&mut self, limit: Option<f64>) -> StepOutcome<N> {
        loop {
            if self.attempts >= self.cfg.max_steps {
                return StepOutcome::Failed(OrbitStatus::MaxSteps);
            }
            if self.h.abs() < self.cfg.min_step {
                return StepOutcome::Failed(OrbitStatus::StepUnderflow);
            }
            let mut h = self.h;
            let mut clipped = false;
            if let Some(t_end) = limit {
                if (self.t + h - t_end) * self.dir >= 0.0 {
                    h = t_end - self.t;
                    clipped = true;
                }
            }
            self.attempts += 1;

            // Stage sweep; k[6] is the new derivative by FSAL.
            let mut k = [[0.0; N]; 7];
            k[0] = self.dy;
            for s in 1..7 {
                let mut ys = self.y;
                for (j, kj) in k.iter().enumerate().take(s) {
                    axpy(&mut ys, h * A[s][j], kj);
                }
                k[s] = (self.rhs)(self.t + C[s] * h, ys);
            }
            let mut y1 = self.y;
            for (j, kj) in k.iter().enumerate() {
                axpy(&mut y1, h * B[j], kj);
            }

            // Weighted RMS error of the embedded difference.
            let mut err_sq = 0.0;
            let mut finite = y1.iter().all(|v| v.is_finite());
            for i in 0..N {
                let mut e = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                e *= h;
                let sc = self.cfg.abs_tol + self.cfg.rel_tol * self.y[i].abs().max(y1[i].abs());
                err_sq += (e / sc) * (e / sc);
                finite &= e.is_finite();
            }
            let err = (err_sq / N as f64).sqrt();

            if !finite || !(err <= 1.0) {
                // Rejected: shrink and retry. Non-finite values force the
                // strongest shrink.
                let fac = if finite {
                    (err.powf(0.2) / SAFETY).min(5.0)
                } else {
                    5.0
                };
                self.h = h / fac;
                self.last_rejected = true;
                continue;
            }

            // Accepted: assemble dense output and update the PI controller.
            let mut cont = [[0.0; N]; 5];
            for i in 0..N {
                let ydiff = y1[i] - self.y[i];
                let bspl = h * k[0][i] - ydiff;
                cont[0][i] = self.y[i];
                cont[1][i] = ydiff;
                cont[2][i] = bspl;
                cont[3][i] = ydiff - h * k[6][i] - bspl;
                let mut c4 = 0.0;
                for (j, kj) in k.iter().enumerate() {
                    c4 += D5[j] * kj[i];
                }
                cont[4][i] = h * c4;
            }
            let accepted = AcceptedStep {
                t0: self.t,
                h,
                y1,
                cont,
            };

            let fac11 = err.max(1e-30).powf(EXPO1);
            let mut fac = fac11 / self.err_old.powf(BETA);
            fac = (fac / SAFETY).clamp(0.1, 5.0);
            let mut h_new = h / fac;
            if self.last_rejected {
                h_new = h_new.abs().min(h.abs()) * self.dir;
            }
            self.err_old = err.max(1e-4);
            self.last_rejected = false;

            self.t = if clipped { limit.unwrap() } else { self.t + h };
            self.y = y1;
            self.dy = k[6];
            self.h = h_new;
            return StepOutcome::Accepted(accepted);
        }
    }
}

fn rms<const N: usize>(v: &[f64; N], sc: &[f64; N]) -> f64 {
    let mut s = 0.0;
    for i in 0..N {
        s += (v[i] / sc[i]) * (v[i] / sc[i]);
    }
    (s / N as f64).sqrt()
}

/// Initial step from the derivative and curvature scales, after Hairer's
/// starting-step procedure for order-5 pairs.
fn auto_initial_step<F, const N: usize>(
    rhs: &F,
    t0: f64,
    y0: &[f64; N],
    f0: &[f64; N],
    dir: f64,
    span: Option<f64>,
    cfg: &IntegratorConfig,
) -> f64
where
    F: Fn(f64, [f64; N]) -> [f64; N],
{
    let cap = span.map_or(1.0, |s| s.abs());
    let mut sc = [0.0; N];
    for i in 0..N {
        sc[i] = cfg.abs_tol + cfg.rel_tol * y0[i].abs();
    }
    let d0 = rms(y0, &sc);
    let d1 = rms(f0, &sc);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    }
    .min(cap);

    let mut y1 = *y0;
    axpy(&mut y1, h0 * dir, f0);
    let f1 = rhs(t0 + h0 * dir, y1);
    let mut df = [0.0; N];
    for i in 0..N {
        df[i] = f1[i] - f0[i];
    }
    let d2 = rms(&df, &sc) / h0;

    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(0.2)
    };
    (100.0 * h0).min(h1).min(cap).max(cfg.min_step * 2.0)
}

fn vec2_of(y: [f64; 2]) -> Vec2 {
    Vec2::new(y[0], y[1])
}

/// Integrate an autonomous planar field until the requested section crossing.
///
/// The event is localized by a sign change over an accepted step and refined
/// by bisection on the dense interpolant to `refinement_tol` in time. A zero
/// of the event function at the current sample (for example a start on the
/// section) does not count as a crossing.
pub fn integrate_until_event<F>(
    field: F,
    start: Vec2,
    event: &EventSpec<'_>,
    config: &IntegratorConfig,
) -> Result<Orbit>
where
    F: Fn(Vec2) -> Vec2,
{
    event.validate()?;
    let rhs = |_t: f64, y: [f64; 2]| {
        let v = field(vec2_of(y));
        [v.x, v.y]
    };
    let mut stepper = Stepper::new(rhs, 0.0, [start.x, start.y], 1.0, None, config)?;

    let mut times = vec![0.0];
    let mut states = vec![start];
    let mut g_prev = (event.event_fn)(start);
    let mut remaining = event.count;

    loop {
        match stepper.advance(None) {
            StepOutcome::Failed(status) => {
                return Ok(Orbit {
                    times,
                    states,
                    event_time: None,
                    event_state: None,
                    status,
                });
            }
            StepOutcome::Accepted(step) => {
                let y_new = vec2_of(step.y1);
                let t_new = step.t0 + step.h;
                if !y_new.is_finite() || y_new.norm_inf() > BLOWUP_NORM {
                    times.push(t_new);
                    states.push(y_new);
                    return Ok(Orbit {
                        times,
                        states,
                        event_time: None,
                        event_state: None,
                        status: OrbitStatus::Blowup,
                    });
                }
                let g_new = (event.event_fn)(y_new);
                let sign_change =
                    g_prev != 0.0 && (g_new == 0.0 || (g_prev > 0.0) != (g_new > 0.0));
                let crossing = sign_change
                    && match event.direction {
                        CrossingDirection::Any => true,
                        CrossingDirection::Up => g_prev < 0.0,
                        CrossingDirection::Down => g_prev > 0.0,
                    };
                if crossing {
                    remaining -= 1;
                    if remaining == 0 {
                        let (t_ev, y_ev) = refine_crossing(&step, event, g_prev);
                        times.push(t_ev);
                        states.push(y_ev);
                        return Ok(Orbit {
                            times,
                            states,
                            event_time: Some(t_ev),
                            event_state: Some(y_ev),
                            status: OrbitStatus::EventHit,
                        });
                    }
                }
                times.push(t_new);
                states.push(y_new);
                g_prev = g_new;
            }
        }
    }
}

/// Bisection on the dense interpolant; returns the crossing time and state.
fn refine_crossing(
    step: &AcceptedStep<2>,
    event: &EventSpec<'_>,
    g_prev: f64,
) -> (f64, Vec2) {
    let sign = if g_prev > 0.0 { 1.0 } else { -1.0 };
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    while (hi - lo) * step.h.abs() > event.refinement_tol {
        let mid = 0.5 * (lo + hi);
        let g_mid = (event.event_fn)(vec2_of(step.interpolate(mid)));
        if g_mid * sign > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t_ev = step.t0 + hi * step.h;
    (t_ev, vec2_of(step.interpolate(hi)))
}

/// Integrate an autonomous planar field over a fixed time span, keeping the
/// accepted-step samples.
pub fn integrate_for_time<F>(
    field: F,
    start: Vec2,
    t_span: f64,
    config: &IntegratorConfig,
) -> Result<Path>
where
    F: Fn(Vec2) -> Vec2,
{
    if !(t_span.is_finite() && t_span != 0.0) {
        return Err(Error::InvalidConfig("t_span must be finite and nonzero".into()));
    }
    let rhs = |_t: f64, y: [f64; 2]| {
        let v = field(vec2_of(y));
        [v.x, v.y]
    };
    let dir = t_span.signum();
    let mut stepper = Stepper::new(rhs, 0.0, [start.x, start.y], dir, Some(t_span), config)?;
    let mut times = vec![0.0];
    let mut states = vec![start];
    loop {
        match stepper.advance(Some(t_span)) {
            StepOutcome::Failed(status) => return Err(Error::Integration { status }),
            StepOutcome::Accepted(_) => {
                let y = vec2_of(stepper.y);
                if !y.is_finite() || y.norm_inf() > BLOWUP_NORM {
                    return Err(Error::Integration {
                        status: OrbitStatus::Blowup,
                    });
                }
                times.push(stepper.t);
                states.push(y);
                if stepper.t == t_span {
                    return Ok(Path { times, states });
                }
            }
        }
    }
}

/// Integrate d(state)/dx = rhs(x, state) from `x_start` to `x_end` and return
/// the final state. The independent variable is the x coordinate itself.
pub fn integrate_ode_in_x<const N: usize, F>(
    rhs: F,
    x_start: f64,
    x_end: f64,
    state0: [f64; N],
    config: &IntegratorConfig,
) -> Result<[f64; N]>
where
    F: Fn(f64, [f64; N]) -> [f64; N],
{
    if !(x_start.is_finite() && x_end.is_finite()) {
        return Err(Error::NonFinite { context: "integration span" });
    }
    if x_start == x_end {
        return Ok(state0);
    }
    let dir = (x_end - x_start).signum();
    let mut stepper = Stepper::new(rhs, x_start, state0, dir, Some(x_end - x_start), config)?;
    loop {
        match stepper.advance(Some(x_end)) {
            StepOutcome::Failed(status) => return Err(Error::Integration { status }),
            StepOutcome::Accepted(_) => {
                if !stepper.y.iter().all(|v| v.is_finite())
                    || stepper.y.iter().any(|v| v.abs() > BLOWUP_NORM)
                {
                    return Err(Error::Integration {
                        status: OrbitStatus::Blowup,
                    });
                }
                if stepper.t == x_end {
                    return Ok(stepper.y);
                }
            }
        }
    }
}
