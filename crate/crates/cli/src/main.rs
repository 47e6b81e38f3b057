//! Command-line front end: period scans, Dulac scans, verification sweeps
//! and boundary critical-period reports, with reproducible configuration
//! echoes and machine-readable CSV/JSON output.
//!
//! Exit codes: 0 success, 1 configuration error, 2 partial cell failures or
//! inconclusive cells, 3 verification threshold failure.

mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use dulac_core::dulac::{fit_c0_c1, slope_scan, ScanBounds};
use dulac_core::fields::build_loud_unfolding;
use dulac_core::period::{boundary_monotonicity_check, critical_periods, period_scan};
use dulac_core::verify::{
    check_first_integral_drift, check_pullback, check_weierstrass, default_param_grid, CheckReport,
};
use dulac_core::{Error, IntegratorConfig, LoudParams, SampleBox};

use output::{config_echo, write_dulac_csv, write_json, write_period_csv};

#[derive(Parser)]
#[command(
    name = "dulac",
    version,
    about = "Period function and Dulac time scans for the Loud centers",
    after_help = "Worker count follows RAYON_NUM_THREADS (default: available parallelism).\n\
                  Output ordering and values are independent of the worker count."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Scan the period function of one Loud center over a u0 grid.
    PeriodScan(PeriodScanArgs),
    /// Scan Dulac samples over (D, F) and s grids, optionally fitting the
    /// first-order expansion coefficients.
    DulacScan(DulacScanArgs),
    /// Run the verification sweeps and print a pass/fail table.
    Verify(VerifyArgs),
    /// Report boundary monotonicity and critical periods near the polycycle.
    CriticalPeriods(CriticalPeriodsArgs),
}

#[derive(Args, Serialize)]
struct ToleranceArgs {
    /// Relative integration tolerance.
    #[arg(long, default_value_t = 1e-10)]
    rel_tol: f64,
    /// Absolute integration tolerance.
    #[arg(long, default_value_t = 1e-12)]
    abs_tol: f64,
}

impl ToleranceArgs {
    fn config(&self) -> IntegratorConfig {
        IntegratorConfig {
            rel_tol: self.rel_tol,
            abs_tol: self.abs_tol,
            ..IntegratorConfig::default()
        }
    }
}

#[derive(Args, Serialize)]
struct PeriodScanArgs {
    #[arg(long = "D", allow_hyphen_values = true)]
    d: f64,
    #[arg(long = "F", allow_hyphen_values = true)]
    f: f64,
    #[arg(long = "u0-min", default_value_t = 1e-3)]
    u0_min: f64,
    #[arg(long = "u0-max", default_value_t = 0.99)]
    u0_max: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 64)]
    n: usize,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    #[serde(flatten)]
    tol: ToleranceArgs,
}

#[derive(Args, Serialize)]
struct DulacScanArgs {
    /// Comma-separated D values.
    #[arg(long = "D-grid", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    d_grid: Vec<f64>,
    /// Comma-separated F values.
    #[arg(long = "F-grid", value_delimiter = ',', allow_hyphen_values = true, required = true)]
    f_grid: Vec<f64>,
    /// Comma-separated s values (decreasing for --fit).
    #[arg(long = "s-grid", value_delimiter = ',', required = true)]
    s_grid: Vec<f64>,
    /// Truncation degree of the normal-form factor.
    #[arg(long, default_value_t = 8)]
    degree: u32,
    /// Fit the first-order expansion per parameter cell.
    #[arg(long)]
    fit: bool,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Fit JSON path (defaults to <out>.fit.json).
    #[arg(long = "fit-out")]
    fit_out: Option<PathBuf>,
    /// Scan bound on s.
    #[arg(long = "s-max", default_value_t = 0.25)]
    s_max: f64,
    /// Scan bound on |eps|.
    #[arg(long = "eps-max", default_value_t = 0.1)]
    eps_max: f64,
    #[command(flatten)]
    #[serde(flatten)]
    tol: ToleranceArgs,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    /// Checks to run.
    #[arg(long, value_delimiter = ',', default_values_t = [
        "pullback".to_string(), "integral".to_string(), "weierstrass".to_string()
    ])]
    checks: Vec<String>,
    /// Points per parameter cell (pullback), arcs per cell (integral), or
    /// polynomials (weierstrass).
    #[arg(long, default_value_t = 100)]
    points: usize,
    /// RNG seed for the sampled point clouds.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    #[serde(flatten)]
    tol: ToleranceArgs,
}

#[derive(Args, Serialize)]
struct CriticalPeriodsArgs {
    #[arg(long = "D0", allow_hyphen_values = true)]
    d0: f64,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Window (lo, hi) in u0 near the polycycle.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.95, 0.995])]
    window: Vec<f64>,
    /// Parameter grid sizes per axis.
    #[arg(long = "n-d", default_value_t = 3)]
    n_d: usize,
    #[arg(long = "n-f", default_value_t = 3)]
    n_f: usize,
    /// Window points per cell for the sign sweep.
    #[arg(long = "n-u0", default_value_t = 5)]
    n_u0: usize,
    /// Output JSON path (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    tol: ToleranceArgs,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version displays are successful runs; everything else
            // is a configuration error.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::PeriodScan(args) => cmd_period_scan(&args),
        Command::DulacScan(args) => cmd_dulac_scan(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::CriticalPeriods(args) => cmd_critical_periods(&args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

type CmdResult = Result<u8, Box<dyn std::error::Error>>;

fn cmd_period_scan(args: &PeriodScanArgs) -> CmdResult {
    let echo = config_echo("period-scan", args)?;
    eprintln!("{echo}");
    let a = LoudParams::new(args.d, args.f)?;
    if !(args.n >= 1 && args.u0_min > 0.0 && args.u0_min <= args.u0_max && args.u0_max < 1.0) {
        return Err(Box::new(Error::InvalidConfig(
            "need 0 < u0-min <= u0-max < 1 and n >= 1".into(),
        )));
    }
    let grid: Vec<f64> = if args.n == 1 {
        vec![args.u0_min]
    } else {
        (0..args.n)
            .map(|k| {
                args.u0_min + (args.u0_max - args.u0_min) * k as f64 / (args.n - 1) as f64
            })
            .collect()
    };
    let rows = period_scan(a, &grid, &args.tol.config());
    let failures = rows.iter().filter(|r| r.result.is_err()).count();
    let mut file = std::fs::File::create(&args.out)?;
    write_period_csv(&mut file, &echo, args.d, args.f, &rows)?;
    eprintln!(
        "period-scan: {} cells, {} failed -> {}",
        rows.len(),
        failures,
        args.out.display()
    );
    Ok(if failures > 0 { 2 } else { 0 })
}

fn cmd_dulac_scan(args: &DulacScanArgs) -> CmdResult {
    let echo = config_echo("dulac-scan", args)?;
    eprintln!("{echo}");
    let config = args.tol.config();
    let mut a_grid = Vec::new();
    for &d in &args.d_grid {
        for &f in &args.f_grid {
            a_grid.push(LoudParams::new(d, f)?);
        }
    }
    if args.fit {
        if args.s_grid.len() < 4 || !args.s_grid.windows(2).all(|w| w[0] > w[1]) {
            return Err(Box::new(Error::InvalidConfig(
                "--fit needs a strictly decreasing s-grid with at least 4 points".into(),
            )));
        }
    }
    let bounds = ScanBounds { s_max: args.s_max, eps_max: args.eps_max };
    let degree = args.degree;
    let scan = slope_scan(
        |a| build_loud_unfolding(a, degree),
        &a_grid,
        &args.s_grid,
        &bounds,
        &config,
    )?;
    let failures = scan.rows.iter().filter(|r| r.result.is_err()).count();
    let mut file = std::fs::File::create(&args.out)?;
    write_dulac_csv(&mut file, &echo, &scan)?;
    eprintln!(
        "dulac-scan: {} cells, {} failed -> {}",
        scan.rows.len(),
        failures,
        args.out.display()
    );

    if args.fit {
        #[derive(Serialize)]
        struct FitCell {
            #[serde(rename = "D")]
            d: f64,
            #[serde(rename = "F")]
            f: f64,
            #[serde(flatten)]
            fit: dulac_core::CoeffFit,
        }
        let mut cells = Vec::new();
        for &a in &a_grid {
            let unf = build_loud_unfolding(a, degree)?;
            let fit = fit_c0_c1(&unf, &args.s_grid, &config)?;
            cells.push(FitCell { d: a.d(), f: a.f(), fit });
        }
        let fit_path = args.fit_out.clone().unwrap_or_else(|| {
            let mut p = args.out.clone().into_os_string();
            p.push(".fit.json");
            PathBuf::from(p)
        });
        let mut file = std::fs::File::create(&fit_path)?;
        write_json(&mut file, &echo, &serde_json::json!({ "cells": cells }))?;
        eprintln!("dulac-scan: fit -> {}", fit_path.display());
    }
    Ok(if failures > 0 { 2 } else { 0 })
}

fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    let echo = config_echo("verify", args)?;
    eprintln!("{echo}");
    let grid = default_param_grid();
    let config = args.tol.config();
    let mut reports: Vec<CheckReport> = Vec::new();
    for check in &args.checks {
        let report = match check.as_str() {
            "pullback" => check_pullback(&grid, args.points, args.seed, &SampleBox::default())?,
            "integral" => {
                // A handful of arcs per cell carries the same information as
                // a large point cloud.
                let arcs = (args.points / 20).max(1);
                check_first_integral_drift(&grid, arcs, args.seed, &config)?
            }
            "weierstrass" => check_weierstrass(args.points.max(1) * 10, args.seed, 12),
            other => {
                return Err(Box::new(Error::InvalidConfig(format!(
                    "unknown check '{other}' (expected pullback, integral, weierstrass)"
                ))));
            }
        };
        reports.push(report);
    }
    println!("{:<12} {:>8} {:>14} {:>10} {:>6}", "check", "points", "max_residual", "threshold", "status");
    let mut all_pass = true;
    for r in &reports {
        println!(
            "{:<12} {:>8} {:>14.3e} {:>10.1e} {:>6}",
            r.name,
            r.points,
            r.worst,
            r.threshold,
            if r.pass { "pass" } else { "FAIL" }
        );
        all_pass &= r.pass;
    }
    Ok(if all_pass { 0 } else { 3 })
}

fn cmd_critical_periods(args: &CriticalPeriodsArgs) -> CmdResult {
    let echo = config_echo("critical-periods", args)?;
    eprintln!("{echo}");
    if args.window.len() != 2 {
        return Err(Box::new(Error::InvalidConfig("--window needs lo,hi".into())));
    }
    let window = (args.window[0], args.window[1]);
    let config = args.tol.config();
    let report = boundary_monotonicity_check(
        args.d0, args.delta, args.n_d, args.n_f, args.n_u0, window, &config,
    )?;

    #[derive(Serialize)]
    struct CellCriticals {
        #[serde(rename = "D")]
        d: f64,
        #[serde(rename = "F")]
        f: f64,
        criticals: Vec<dulac_core::CriticalPeriod>,
        unresolved: bool,
    }
    let mut cells = Vec::new();
    let mut inconclusive = report.total_inconclusive > 0 || report.total_violations > 0;
    for cell in &report.cells {
        let a = LoudParams::new(cell.d, cell.f)?;
        let (criticals, unresolved) = match critical_periods(a, window, &config) {
            Ok(list) => (list, false),
            Err(Error::UnresolvedBracket { .. }) => (Vec::new(), true),
            Err(e) => return Err(Box::new(e)),
        };
        inconclusive |= unresolved;
        cells.push(CellCriticals { d: cell.d, f: cell.f, criticals, unresolved });
    }

    let body = serde_json::json!({
        "monotonicity": report,
        "critical_periods": cells,
    });
    match &args.out {
        Some(path) => {
            let mut file = std::fs::File::create(path)?;
            write_json(&mut file, &echo, &body)?;
            eprintln!("critical-periods -> {}", path.display());
        }
        None => {
            println!("{echo}");
            println!("{}", serde_json::to_string_pretty(&body)?);
        }
    }
    Ok(if inconclusive { 2 } else { 0 })
}
