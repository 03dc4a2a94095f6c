//! Run orchestration behind the `kvwave` binary.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use crate::config::{parse_config, SimConfig};
use crate::diagnostics::{
    check_decay_bound, check_prototype_bounds, decay_constant, energy_monotonicity,
    loglog_slope, prototype_derivative_identity, regular_identity_residual,
    weak_identity_residual, DecayCertificate, EnergyTrace,
};
use crate::domain::SpectralDomain;
use crate::evolution::{evolve, Method, Model};
use crate::resolvent::{self, ResolventProblem, DEFAULT_TOL};
use crate::trace_io::{emit_plot_script, read_trace_csv, write_trace_csv};
use crate::{Error, Result};

/// Komornik margins may dip this far below zero (relative to `E₀`).
pub const KOMORNIK_SLACK: f64 = 1e-8;
/// Relative tolerance of the prototype derivative identity.
pub const PROTOTYPE_IDENTITY_TOL: f64 = 1e-4;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    /// Hard checks decide the exit status; soft ones are reported only.
    pub hard: bool,
    pub value: f64,
    pub threshold: f64,
}

impl Check {
    fn at_most(name: &'static str, value: f64, threshold: f64, hard: bool) -> Self {
        Self {
            name,
            passed: value <= threshold,
            hard,
            value,
            threshold,
        }
    }

    fn at_least(name: &'static str, value: f64, threshold: f64, hard: bool) -> Self {
        Self {
            name,
            passed: value >= threshold,
            hard,
            value,
            threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub title: String,
    pub fingerprint: String,
    pub model: Option<Model>,
    pub method: Option<String>,
    pub e0: f64,
    pub decay_constant: Option<f64>,
    pub slope: Option<f64>,
    pub checks: Vec<Check>,
    pub warnings: Vec<String>,
    pub notes: Vec<(String, String)>,
    pub wall_clock: Duration,
    pub strict: bool,
}

impl RunReport {
    fn new(title: &str, strict: bool) -> Self {
        Self {
            title: title.to_string(),
            fingerprint: String::new(),
            model: None,
            method: None,
            e0: 0.0,
            decay_constant: None,
            slope: None,
            checks: Vec::new(),
            warnings: Vec::new(),
            notes: Vec::new(),
            wall_clock: Duration::ZERO,
            strict,
        }
    }

    /// All hard checks pass; under `--strict` soft checks and warnings count too.
    pub fn passed(&self) -> bool {
        let checks_ok = self
            .checks
            .iter()
            .all(|c| c.passed || (!c.hard && !self.strict));
        checks_ok && (!self.strict || self.warnings.is_empty())
    }

    pub fn exit_code(&self) -> i32 {
        if self.passed() {
            0
        } else {
            1
        }
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    /// Key/value header followed by a CSV block of checks.
    pub fn render(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.10e}"));
        let mut s = String::new();
        let _ = writeln!(s, "# {}", self.title);
        let _ = writeln!(s, "fingerprint: {}", self.fingerprint);
        if let Some(m) = self.model {
            let _ = writeln!(s, "model: {m}");
        }
        if let Some(m) = &self.method {
            let _ = writeln!(s, "method: {m}");
        }
        let _ = writeln!(s, "e0: {:.10e}", self.e0);
        let _ = writeln!(s, "decay_constant: {}", opt(self.decay_constant));
        let _ = writeln!(s, "loglog_slope: {}", opt(self.slope));
        for (k, v) in &self.notes {
            let _ = writeln!(s, "{k}: {v}");
        }
        let _ = writeln!(s, "wall_clock_s: {:.3}", self.wall_clock.as_secs_f64());
        let _ = writeln!(s, "strict: {}", self.strict);
        let _ = writeln!(s, "status: {}", if self.passed() { "PASS" } else { "FAIL" });
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s.push('\n');
        s.push_str("check,status,kind,value,threshold\n");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{},{},{},{:.10e},{:.10e}",
                c.name,
                if c.passed { "pass" } else { "fail" },
                if c.hard { "hard" } else { "soft" },
                c.value,
                c.threshold
            );
        }
        s
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnalysisOptions {
    pub identity_tol: f64,
    /// Identity residuals decide pass/fail (exact-ODE integrators only).
    pub identity_hard: bool,
    /// Too-short horizon for the decay bound fails instead of warning.
    pub decay_required: bool,
}

fn relative(value: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        value.abs() / scale
    } else {
        value.abs()
    }
}

/// Runs every applicable diagnostic on a trace and records the outcome.
pub fn analyze_trace(trace: &EnergyTrace, opts: AnalysisOptions, report: &mut RunReport) -> Result<()> {
    report.model = Some(trace.model);
    report.e0 = trace.e0();
    report.slope = loglog_slope(trace);
    report.warnings.extend(trace.warnings.iter().cloned());
    if trace.is_empty() {
        return Err(Error::TraceFormat("empty trace".into()));
    }
    let last = trace.len() - 1;
    let e0 = trace.e0();
    let er0 = trace.e_regular[0];

    let weak = weak_identity_residual(trace, 0, last)?;
    report.checks.push(Check::at_most(
        "weak_identity",
        relative(weak, e0),
        opts.identity_tol,
        opts.identity_hard,
    ));
    let regular = regular_identity_residual(trace, 0, last)?;
    report.checks.push(Check::at_most(
        "regular_identity",
        relative(regular, er0),
        opts.identity_tol,
        opts.identity_hard,
    ));

    match trace.model {
        Model::KelvinVoigt => {
            let mono = energy_monotonicity(trace);
            let budget = 10.0 * opts.identity_tol;
            report.checks.push(Check::at_most(
                "weak_energy_monotone",
                relative(mono.max_weak_increase.max(0.0), e0),
                budget,
                true,
            ));
            report.checks.push(Check::at_most(
                "regular_energy_monotone",
                relative(mono.max_regular_increase.max(0.0), er0),
                budget,
                true,
            ));

            let cert = DecayCertificate::build(trace)?;
            report.decay_constant = Some(cert.c);
            let min_margin = cert
                .komornik_margins
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min);
            report.checks.push(Check::at_least(
                "komornik_margin",
                min_margin,
                -KOMORNIK_SLACK * e0,
                true,
            ));
            match check_decay_bound(trace, &cert) {
                Ok(r) => {
                    report.checks.push(Check::at_most(
                        "decay_bound_violations",
                        r.violations as f64,
                        0.0,
                        true,
                    ));
                    report
                        .notes
                        .push(("decay_bound_max_excess".into(), format!("{:.10e}", r.max_violation)));
                }
                Err(Error::InsufficientHorizon { t_end, required }) => {
                    let msg = format!(
                        "decay bound not checked: t_end = {t_end} < C = {required}; rerun with integrator.t_end >= {required:.6}"
                    );
                    if opts.decay_required {
                        report.checks.push(Check::at_least("decay_horizon", t_end, required, true));
                    }
                    report.warnings.push(msg);
                }
                Err(e) => return Err(e),
            }
        }
        Model::BtPrototype => {
            let proto = check_prototype_bounds(trace)?;
            report.checks.push(Check::at_least(
                "prototype_lower_bound_ratio",
                proto.min_ratio,
                1.0 - 1e-6,
                true,
            ));
            report.notes.push((
                "prototype_fitted_mu".into(),
                proto
                    .fitted_mu
                    .map_or_else(|| "n/a".into(), |m| format!("{m:.10e}")),
            ));
            report.notes.push((
                "prototype_sandwich_lower_holds".into(),
                proto.sandwich_lower_holds.to_string(),
            ));
            if trace.velocity_sq.is_some() {
                let rel = prototype_derivative_identity(trace)?;
                report.checks.push(Check::at_most(
                    "prototype_derivative_identity",
                    rel,
                    PROTOTYPE_IDENTITY_TOL,
                    false,
                ));
            }
        }
    }
    Ok(())
}

fn resolve(out_dir: &Path, p: &str) -> PathBuf {
    let path = Path::new(p);
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        out_dir.join(path)
    }
}

/// Evolves the configured run, writes trace, report and (optionally) plot
/// script under `out_dir`, and returns the report.
pub fn run_simulate(config: &SimConfig, out_dir: &Path, strict: bool) -> Result<RunReport> {
    let started = Instant::now();
    let mut report = RunReport::new("kvwave simulate", strict);
    report.fingerprint = config.fingerprint();
    report.method = Some(config.method.name().to_string());

    let domain = config.domain()?;
    let initial = config.initial_state(&domain)?;
    let spec = config.integrator_spec();
    fs::create_dir_all(out_dir)?;
    let trace_path = resolve(out_dir, &config.trace_path);
    let report_path = resolve(out_dir, &config.report_path);
    for p in [&trace_path, &report_path] {
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent)?;
        }
    }

    let trace = match evolve(&domain, &initial, config.model, &spec) {
        Ok(mut t) => {
            t.fingerprint = report.fingerprint.clone();
            t
        }
        Err(Error::BlowUp { time, partial }) => {
            if let Some(p) = &partial {
                write_trace_csv(p, &trace_path)?;
                report.warnings.extend(p.warnings.iter().cloned());
            }
            report.model = Some(config.model);
            report.checks.push(Check::at_least("integration_completed", time, config.t_end, true));
            report.warnings.push(format!("integration blew up at t = {time}; partial trace written"));
            report.wall_clock = started.elapsed();
            fs::write(&report_path, report.render())?;
            return Ok(report);
        }
        Err(e) => return Err(e),
    };
    write_trace_csv(&trace, &trace_path)?;

    let opts = AnalysisOptions {
        identity_tol: config.identity_tol,
        identity_hard: config.method == Method::DirectRk4,
        decay_required: config.decay_check,
    };
    analyze_trace(&trace, opts, &mut report)?;
    report.notes.push(("trace".into(), trace_path.display().to_string()));
    report.notes.push(("steps".into(), trace.steps.to_string()));

    if let Some(script) = &config.plot_script {
        let script_path = resolve(out_dir, script);
        emit_plot_script(&trace_path, &script_path)?;
        report.notes.push(("plot_script".into(), script_path.display().to_string()));
    }
    report.wall_clock = started.elapsed();
    fs::write(&report_path, report.render())?;
    Ok(report)
}

pub fn load_config(path: &Path) -> Result<SimConfig> {
    let text = fs::read_to_string(path)?;
    Ok(parse_config(&text)?)
}

/// Runs every config matching `pattern` concurrently, each in
/// `out_dir/<file stem>/`.
pub fn run_sweep(pattern: &str, out_dir: &Path, strict: bool) -> Result<Vec<(PathBuf, Result<RunReport>)>> {
    let paths: Vec<PathBuf> = glob::glob(pattern)
        .map_err(|e| Error::InvalidConfiguration(format!("bad sweep pattern `{pattern}`: {e}")))?
        .filter_map(std::result::Result::ok)
        .collect();
    if paths.is_empty() {
        return Err(Error::InvalidConfiguration(format!("sweep pattern `{pattern}` matched no files")));
    }
    let results = std::thread::scope(|scope| {
        let handles: Vec<_> = paths
            .iter()
            .map(|path| {
                scope.spawn(move || {
                    let stem = path
                        .file_stem()
                        .map_or_else(|| "run".into(), |s| s.to_string_lossy().into_owned());
                    let dir = out_dir.join(stem);
                    load_config(path).and_then(|c| run_simulate(&c, &dir, strict))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::InvalidData("sweep worker panicked".into())))
            })
            .collect::<Vec<_>>()
    });
    Ok(paths.into_iter().zip(results).collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventTestOptions {
    /// Fixed `α` for the single-mode case and all trials; `None` runs the
    /// single-mode case at `α = 1` and draws trial `α` log-uniformly in
    /// `[1e-3, 1e3]`.
    pub alpha: Option<f64>,
    pub modes: usize,
    pub trials: usize,
    pub seed: u64,
    pub tol: f64,
}

impl Default for ResolventTestOptions {
    fn default() -> Self {
        Self {
            alpha: None,
            modes: 8,
            trials: 100,
            seed: 0,
            tol: 1e-9,
        }
    }
}

/// Single-mode resolvent case on `(0, π)` with `f = 0, g = 1` followed by
/// randomized range trials on `(0, 1)`.
pub fn run_resolvent_test(opts: &ResolventTestOptions) -> Result<RunReport> {
    let started = Instant::now();
    let mut report = RunReport::new("kvwave resolvent", false);
    if let Some(a) = opts.alpha {
        if !(a.is_finite() && a > 0.0) {
            return Err(Error::InvalidConfiguration(format!("alpha must be positive, got {a}")));
        }
    }
    if opts.trials == 0 || opts.modes == 0 {
        return Err(Error::InvalidConfiguration("trials and modes must be at least 1".into()));
    }
    report.fingerprint = format!(
        "alpha={:?};modes={};trials={};seed={};tol={:e}",
        opts.alpha, opts.modes, opts.trials, opts.seed, opts.tol
    );

    let alpha = opts.alpha.unwrap_or(1.0);
    let single = SpectralDomain::interval(std::f64::consts::PI, 1)?;
    let problem = ResolventProblem::new(alpha, vec![0.0], vec![1.0]);
    let sol = resolvent::solve_resolvent(&single, &problem, DEFAULT_TOL)?;
    let range = resolvent::range_residual(&single, &problem, &sol)?;
    report.notes.push(("single_mode_alpha".into(), format!("{alpha:e}")));
    report.notes.push(("single_mode_v".into(), format!("{:.15e}", sol.v[0])));
    report.notes.push(("single_mode_chi_star".into(), format!("{:.15e}", sol.chi_star)));
    report.notes.push(("single_mode_iterations".into(), sol.iterations.to_string()));
    report.checks.push(Check::at_most("single_mode_range_residual", range, opts.tol, true));
    report.checks.push(Check::at_most(
        "single_mode_chi_consistency",
        (sol.chi_star - sol.v[0] * sol.v[0]).abs(),
        opts.tol,
        true,
    ));

    let domain = SpectralDomain::interval(1.0, opts.modes)?;
    let range = opts.alpha.map_or((1e-3, 1e3), |a| (a, a));
    let trials = resolvent::verify_m_dissipativity_in(&domain, opts.trials, opts.tol, opts.seed, range);
    report.notes.push(("trials".into(), trials.trials.to_string()));
    report.notes.push(("trials_solved".into(), trials.solved.to_string()));
    report.notes.push(("trials_max_iterations".into(), trials.max_iterations.to_string()));
    report.checks.push(Check::at_most("trials_max_range_residual", trials.max_residual, opts.tol, true));
    report.checks.push(Check::at_most(
        "trials_failures",
        trials.failures.len() as f64,
        0.0,
        true,
    ));
    report.checks.push(Check::at_least(
        "trials_min_coercivity_slack",
        trials.min_stated_coercivity_slack,
        -1e-12,
        false,
    ));
    report.warnings.extend(trials.failures.iter().cloned());
    report.wall_clock = started.elapsed();
    Ok(report)
}

/// Re-analyzes a trace CSV. `lambda1` (e.g. from the run's config) gives the
/// decay constant directly; otherwise it is recovered from the bound column.
pub fn run_decay_report(trace_path: &Path, lambda1: Option<f64>, strict: bool) -> Result<RunReport> {
    let started = Instant::now();
    let csv = read_trace_csv(trace_path)?;
    let mut trace = csv.trace.clone();
    let mut report = RunReport::new("kvwave decay-report", strict);
    report.fingerprint = trace_path.display().to_string();

    let e0 = trace.e0();
    trace.lambda1 = match (lambda1, trace.model) {
        (Some(l), _) => l,
        (None, Model::BtPrototype) => 1.0,
        (None, Model::KelvinVoigt) => match csv.recover_decay_constant() {
            // invert C(λ₁) numerically; C is increasing in λ₁
            Some(c) => invert_decay_constant(c, e0)?,
            None => 1.0,
        },
    };
    let opts = AnalysisOptions {
        identity_tol: 1e-6,
        identity_hard: false,
        decay_required: true,
    };
    analyze_trace(&trace, opts, &mut report)?;
    if trace.model == Model::KelvinVoigt && e0 > 0.0 {
        report.notes.push(("lambda1".into(), format!("{:.15e}", trace.lambda1)));
    }
    report.wall_clock = started.elapsed();
    Ok(report)
}

fn invert_decay_constant(c: f64, e0: f64) -> Result<f64> {
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while decay_constant(hi, e0)? < c {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::TraceFormat("cannot recover the Poincaré constant".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if decay_constant(mid, e0)? < c {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decay_constant_inversion_recovers_lambda() {
        let l = 1.0 / (std::f64::consts::PI * std::f64::consts::PI);
        let c = decay_constant(l, 2.5).unwrap();
        assert!((invert_decay_constant(c, 2.5).unwrap() - l).abs() < 1e-12);
    }

    #[test]
    fn strict_mode_turns_warnings_into_failures() {
        let mut r = RunReport::new("t", false);
        r.checks.push(Check::at_most("soft", 2.0, 1.0, false));
        r.warnings.push("w".into());
        assert!(r.passed());
        r.strict = true;
        assert!(!r.passed());
    }

    #[test]
    fn nonpositive_alpha_is_a_config_error() {
        let opts = ResolventTestOptions {
            alpha: Some(0.0),
            ..Default::default()
        };
        assert!(matches!(run_resolvent_test(&opts), Err(Error::InvalidConfiguration(_))));
    }

    #[test]
    fn cubic_case_reports_expected_chi() {
        let report = run_resolvent_test(&ResolventTestOptions::default()).unwrap();
        assert!(report.passed(), "{}", report.render());
        let chi = &report.notes.iter().find(|(k, _)| k == "single_mode_chi_star").unwrap().1;
        let chi: f64 = chi.parse().unwrap();
        assert!((chi - 0.205_570).abs() < 1e-6);
    }
}
