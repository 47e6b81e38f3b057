//! Deterministic CSV and JSON writers. Every output file begins with a
//! comment line carrying the fully-resolved configuration and the artifact
//! version, and float formatting is fixed so identical configurations yield
//! byte-identical files regardless of the worker count.

use std::io::{self, Write};

use serde::Serialize;

use dulac_core::dulac::SlopeScan;
use dulac_core::period::PeriodScanRow;

/// The leading comment line: resolved config as JSON plus the version.
pub fn config_echo<T: Serialize>(command: &str, args: &T) -> Result<String, serde_json::Error> {
    let json = serde_json::to_string(&serde_json::json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "args": args,
    }))?;
    Ok(format!("# config={json}"))
}

fn fmt(v: f64) -> String {
    format!("{v:e}")
}

pub fn write_period_csv<W: Write>(
    out: &mut W,
    echo: &str,
    d: f64,
    f: f64,
    rows: &[PeriodScanRow],
) -> io::Result<()> {
    writeln!(out, "{echo}")?;
    writeln!(out, "D,F,u0,period,dperiod,closure_residual,status")?;
    for row in rows {
        match &row.result {
            Ok(s) => writeln!(
                out,
                "{},{},{},{},{},{},ok",
                fmt(d),
                fmt(f),
                fmt(s.u0),
                fmt(s.period),
                fmt(s.dperiod_du0),
                fmt(s.closure_residual),
            )?,
            Err(e) => writeln!(
                out,
                "{},{},{},nan,nan,nan,{}",
                fmt(d),
                fmt(f),
                fmt(row.u0),
                e.status_code(),
            )?,
        }
    }
    Ok(())
}

pub fn write_dulac_csv<W: Write>(out: &mut W, echo: &str, scan: &SlopeScan) -> io::Result<()> {
    writeln!(out, "{echo}")?;
    writeln!(out, "D,F,mu,eps,s,T,T0,T1,Dmap,dT_ds,status")?;
    for row in &scan.rows {
        match &row.result {
            Ok(s) => writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},ok",
                fmt(row.a.d()),
                fmt(row.a.f()),
                row.mu,
                fmt(s.eps),
                fmt(s.s),
                fmt(s.t),
                fmt(s.t0),
                fmt(s.t1),
                fmt(s.dmap),
                fmt(s.dt_ds),
            )?,
            Err(e) => writeln!(
                out,
                "{},{},{},nan,{},nan,nan,nan,nan,nan,{}",
                fmt(row.a.d()),
                fmt(row.a.f()),
                row.mu,
                fmt(row.s),
                e.status_code(),
            )?,
        }
    }
    Ok(())
}

pub fn write_json<W: Write>(
    out: &mut W,
    echo: &str,
    body: &serde_json::Value,
) -> io::Result<()> {
    writeln!(out, "{echo}")?;
    writeln!(out, "{}", serde_json::to_string_pretty(body)?)
}
