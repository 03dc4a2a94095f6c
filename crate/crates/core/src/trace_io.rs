//! Trace CSV and gnuplot script emission.
//!
//! Columns, in order:
//! `t, E_weak, E_regular, chi, grad2_ut_mu2, bound_thm2, lower_13`.
//! `bound_thm2` is `E₀·2C/(C+t)` (Kelvin-Voigt only), `lower_13` is
//! `(1/E₀ + 2t)^{-1}` (prototype only); the other one is left empty.
//! Numbers carry 17 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::diagnostics::{decay_bound, decay_constant, prototype_lower_bound, EnergyTrace};
use crate::evolution::Model;
use crate::{Error, Result};

pub const HEADER: &str = "t,E_weak,E_regular,chi,grad2_ut_mu2,bound_thm2,lower_13";

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn render_trace_csv(trace: &EnergyTrace) -> Result<String> {
    let e0 = trace.e0();
    let c = match trace.model {
        Model::KelvinVoigt => Some(decay_constant(trace.lambda1, e0)?),
        Model::BtPrototype => None,
    };
    let mut out = String::with_capacity(trace.len() * 128);
    out.push_str(HEADER);
    out.push('\n');
    for k in 0..trace.len() {
        let t = trace.times[k];
        let bound = c.map(|c| num(decay_bound(e0, c, t))).unwrap_or_default();
        let lower = match trace.model {
            Model::BtPrototype => num(prototype_lower_bound(e0, t)),
            Model::KelvinVoigt => String::new(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            num(t),
            num(trace.e_weak[k]),
            num(trace.e_regular[k]),
            num(trace.chi[k]),
            num(trace.grad2_ut_mu2[k]),
            bound,
            lower
        );
    }
    Ok(out)
}

pub fn write_trace_csv(trace: &EnergyTrace, path: &Path) -> Result<()> {
    fs::write(path, render_trace_csv(trace)?)?;
    Ok(())
}

/// A trace read back from CSV, with its bound columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTrace {
    pub trace: EnergyTrace,
    pub bound_thm2: Vec<Option<f64>>,
    pub lower_13: Vec<Option<f64>>,
}

impl CsvTrace {
    /// Recovers `C` from the bound column: `C = b·t / (2E₀ - b)` at the
    /// first sample with `t > 0`.
    pub fn recover_decay_constant(&self) -> Option<f64> {
        let e0 = self.trace.e0();
        if e0 <= 0.0 {
            return None;
        }
        self.trace
            .times
            .iter()
            .zip(&self.bound_thm2)
            .find_map(|(&t, b)| match b {
                Some(b) if t > 0.0 && 2.0 * e0 - b > 0.0 => Some(b * t / (2.0 * e0 - b)),
                _ => None,
            })
    }
}

pub fn parse_trace_csv(text: &str) -> Result<CsvTrace> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == HEADER => {}
        other => {
            return Err(Error::TraceFormat(format!(
                "expected header `{HEADER}`, found `{}`",
                other.unwrap_or("")
            )))
        }
    }
    // λ₁ is not stored in the file; it stays NaN unless the caller supplies it
    let mut trace = EnergyTrace::new(Model::KelvinVoigt, f64::NAN);
    trace.velocity_sq = None;
    trace.weak_dissipation = None;
    trace.regular_dissipation = None;
    let mut bound_thm2 = Vec::new();
    let mut lower_13 = Vec::new();
    for (idx, line) in lines.enumerate() {
        let lineno = idx + 2;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::TraceFormat(format!(
                "line {lineno}: expected 7 fields, found {}",
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.trim()
                .parse()
                .map_err(|_| Error::TraceFormat(format!("line {lineno}: `{s}` is not a number")))
        };
        let optional = |s: &str| -> Result<Option<f64>> {
            if s.trim().is_empty() {
                Ok(None)
            } else {
                parse(s).map(Some)
            }
        };
        trace.times.push(parse(fields[0])?);
        trace.e_weak.push(parse(fields[1])?);
        trace.e_regular.push(parse(fields[2])?);
        trace.chi.push(parse(fields[3])?);
        trace.grad2_ut_mu2.push(parse(fields[4])?);
        bound_thm2.push(optional(fields[5])?);
        lower_13.push(optional(fields[6])?);
    }
    if lower_13.iter().any(Option::is_some) {
        trace.model = Model::BtPrototype;
    }
    trace.steps = trace.len().saturating_sub(1);
    Ok(CsvTrace {
        trace,
        bound_thm2,
        lower_13,
    })
}

pub fn read_trace_csv(path: &Path) -> Result<CsvTrace> {
    parse_trace_csv(&fs::read_to_string(path)?)
}

/// gnuplot script for a trace file: energies and the relevant bound on
/// log-log axes. The script is only written, never run.
pub fn plot_script_for(trace_path: &Path) -> Result<String> {
    let csv = read_trace_csv(trace_path)?;
    let name = trace_path.display().to_string().replace('\'', "''");
    let mut s = String::new();
    s.push_str("# gnuplot script generated by kvwave\n");
    s.push_str("set datafile separator ','\n");
    s.push_str("set logscale xy\n");
    s.push_str("set xlabel 't'\n");
    s.push_str("set ylabel 'energy'\n");
    s.push_str("set key top right\n");
    s.push_str("set grid\n");
    let _ = writeln!(s, "file = '{name}'");
    s.push_str("plot file every ::1 using 1:2 with lines title 'E_weak', \\\n");
    s.push_str("     file every ::1 using 1:3 with lines title 'E_regular'");
    match csv.trace.model {
        Model::KelvinVoigt => {
            s.push_str(", \\\n     file every ::1 using 1:6 with lines dashtype 2 title 'E0*2C/(C+t)'");
        }
        Model::BtPrototype => {
            s.push_str(", \\\n     file every ::1 using 1:7 with lines dashtype 2 title '(1/E0+2t)^-1'");
        }
    }
    s.push('\n');
    Ok(s)
}

pub fn emit_plot_script(trace_path: &Path, script_path: &Path) -> Result<()> {
    let script = plot_script_for(trace_path)?;
    fs::write(script_path, script)?;
    Ok(())
}
