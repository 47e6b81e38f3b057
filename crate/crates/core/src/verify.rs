//! Seeded verification sweeps: conjugacy residuals, first-integral drift
//! along integrated arcs, and coefficient-exact Weierstrass reconstruction.
//! The CLI `verify` command and the acceptance suite share these so both
//! report identical numbers for identical configurations.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::charts::{
    first_integral_bar, first_integral_normal, integral_drift_bar, integral_drift_normal,
    pullback_residual, SampleBox,
};
use crate::dulac::theta;
use crate::error::Result;
use crate::fields::{weierstrass_split, BivariatePoly, LoudParams, Vec2};
use crate::integrator::IntegratorConfig;

/// Parameter grid used by the verification sweeps.
pub fn default_param_grid() -> Vec<LoudParams> {
    let mut grid = Vec::new();
    for d in [-0.8, -0.5, -0.2] {
        for f in [-0.3, -0.1, 0.1, 0.3] {
            grid.push(LoudParams::new(d, f).expect("grid lies inside the box"));
        }
    }
    grid
}

/// Outcome of one verification sweep.
#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub name: &'static str,
    pub points: usize,
    pub worst: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl CheckReport {
    fn new(name: &'static str, points: usize, worst: f64, threshold: f64) -> Self {
        Self {
            name,
            points,
            worst,
            threshold,
            pass: worst <= threshold,
        }
    }
}

/// Conjugacy residual at `points_per_cell` seeded random points per
/// parameter cell, sampled in the projective box with z > 0.
pub fn check_pullback(
    grid: &[LoudParams],
    points_per_cell: usize,
    seed: u64,
    sample_box: &SampleBox,
) -> Result<CheckReport> {
    const THRESHOLD: f64 = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut points = 0usize;
    for &a in grid {
        for _ in 0..points_per_cell {
            let z = loop {
                let c: f64 = rng.random_range(0.0..sample_box.z_max);
                if c > 1e-12 {
                    break c;
                }
            };
            let w = rng.random_range(-sample_box.w_max..sample_box.w_max);
            let r = pullback_residual(a, Vec2::new(z, w))?;
            worst = worst.max(r);
            points += 1;
        }
    }
    Ok(CheckReport::new("pullback", points, worst, THRESHOLD))
}

/// First-integral drift along seeded arcs of the full projective field and
/// of the polynomial part of the normal form, for |F| >= 0.05. Candidate
/// arcs that leave the integral's domain or the integrable region are
/// rejected and redrawn deterministically.
pub fn check_first_integral_drift(
    grid: &[LoudParams],
    arcs_per_cell: usize,
    seed: u64,
    config: &IntegratorConfig,
) -> Result<CheckReport> {
    const THRESHOLD: f64 = 1e-6;
    const T_SPAN: f64 = 0.15;
    const MAX_DRAWS: usize = 200;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    let mut arcs = 0usize;

    for &a in grid {
        if a.f().abs() < 0.05 {
            continue;
        }
        // Projective side.
        let mut accepted = 0usize;
        let mut draws = 0usize;
        while accepted < arcs_per_cell && draws < MAX_DRAWS {
            draws += 1;
            let z = rng.random_range(0.12..1.6);
            let w = rng.random_range(-0.2..0.2);
            let start = Vec2::new(z, w);
            if first_integral_bar(a, start).is_err() {
                continue;
            }
            match integral_drift_bar(a, start, T_SPAN, config) {
                Ok(drift) => {
                    worst = worst.max(drift);
                    accepted += 1;
                    arcs += 1;
                }
                Err(_) => continue,
            }
        }
        // Normal-form side: start right of the saddle abscissa.
        let th = theta(-2.0 * a.f(), 2);
        let mut accepted = 0usize;
        let mut draws = 0usize;
        while accepted < arcs_per_cell && draws < MAX_DRAWS {
            draws += 1;
            let x = rng.random_range((th + 0.05)..0.9);
            let y = rng.random_range(-0.9..0.9);
            let start = Vec2::new(x, y);
            if first_integral_normal(a, start).is_err() {
                continue;
            }
            match integral_drift_normal(a, start, T_SPAN, config) {
                Ok(drift) => {
                    worst = worst.max(drift);
                    accepted += 1;
                    arcs += 1;
                }
                Err(_) => continue,
            }
        }
    }
    Ok(CheckReport::new("integral", arcs, worst, THRESHOLD))
}

/// Coefficient-exact reconstruction x U = x U0 + y Uhat for seeded random
/// polynomials of total degree up to `max_degree`. The reported worst value
/// is the largest absolute coefficient discrepancy, which must be exactly 0.
pub fn check_weierstrass(n_polys: usize, seed: u64, max_degree: u32) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..n_polys {
        let n_terms = rng.random_range(1..=2 * max_degree as usize);
        let poly = BivariatePoly::from_terms((0..n_terms).map(|_| {
            let i = rng.random_range(0..=max_degree);
            let j = rng.random_range(0..=max_degree.saturating_sub(i));
            ((i, j), rng.random_range(-100.0..100.0))
        }));
        let (u0, uhat) = weierstrass_split(&poly);
        let x_u = poly.mul_x();
        let x_u0 = BivariatePoly::from_terms(
            u0.coeffs()
                .iter()
                .enumerate()
                .map(|(i, c)| ((i as u32 + 1, 0), *c)),
        );
        let reconstructed = x_u0.add(&uhat.mul_y());
        // Exact comparison: every coefficient must match bitwise.
        let mut diff: f64 = 0.0;
        for ((i, j), c) in x_u.terms() {
            diff = diff.max((c - reconstructed.coefficient(i, j)).abs());
        }
        for ((i, j), c) in reconstructed.terms() {
            diff = diff.max((c - x_u.coefficient(i, j)).abs());
        }
        worst = worst.max(diff);
    }
    CheckReport::new("weierstrass", n_polys, worst, 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pullback_sweep_passes() {
        let report =
            check_pullback(&default_param_grid(), 20, 7, &SampleBox::default()).unwrap();
        assert!(report.pass, "worst {}", report.worst);
        assert_eq!(report.points, 12 * 20);
    }

    #[test]
    fn drift_sweep_passes() {
        let grid = [LoudParams::new(-0.5, 0.1).unwrap(), LoudParams::new(-0.8, -0.3).unwrap()];
        let report =
            check_first_integral_drift(&grid, 3, 11, &IntegratorConfig::default()).unwrap();
        assert!(report.pass, "worst {}", report.worst);
        assert!(report.points >= 10, "only {} arcs accepted", report.points);
    }

    #[test]
    fn weierstrass_sweep_is_exact() {
        let report = check_weierstrass(200, 3, 12);
        assert!(report.pass);
        assert_eq!(report.worst, 0.0);
    }

    #[test]
    fn seeded_sweeps_are_reproducible() {
        let a = check_pullback(&default_param_grid(), 10, 42, &SampleBox::default()).unwrap();
        let b = check_pullback(&default_param_grid(), 10, 42, &SampleBox::default()).unwrap();
        assert_eq!(a.worst.to_bits(), b.worst.to_bits());
        let c = check_pullback(&default_param_grid(), 10, 43, &SampleBox::default()).unwrap();
        assert_ne!(a.worst.to_bits(), c.worst.to_bits());
    }
}
