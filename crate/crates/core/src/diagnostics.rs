//! Energies, energy-identity residuals and decay certificates.
//!
//! ```text
//! E_w = ½‖u_t‖² + ½‖∇u‖²    = ½Σ b_i² + ½Σ μ_i a_i²
//! E_r = ½‖∇u_t‖² + ½‖Δu‖²   = ½Σ μ_i b_i² + ½Σ μ_i² a_i²
//! ```
//!
//! For the Kelvin-Voigt model `dE_w/dt = -χ²` and `dE_r/dt = -χ Σ μ_i² b_i²`;
//! for the prototype `dE_w/dt = -E_w ‖u_t‖²` and `dE_r/dt = -E_w χ`.

use crate::domain::SpectralDomain;
use crate::evolution::Model;
use crate::quadrature::cumulative_trapezoid;
use crate::state::{square_sum, weighted_square_sum, ModalState};
use crate::{Error, Result};

pub fn weak_energy(domain: &SpectralDomain, state: &ModalState) -> f64 {
    0.5 * square_sum(state.b()) + 0.5 * weighted_square_sum(domain.eigenvalues(), state.a())
}

pub fn regular_energy(domain: &SpectralDomain, state: &ModalState) -> f64 {
    let mu = domain.eigenvalues();
    let mut lap = 0.0;
    for i in 0..mu.len() {
        lap += mu[i] * mu[i] * state.a()[i] * state.a()[i];
    }
    0.5 * weighted_square_sum(mu, state.b()) + 0.5 * lap
}

/// Sampled energies of one trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyTrace {
    pub model: Model,
    /// Poincaré constant of the domain the run used.
    pub lambda1: f64,
    pub times: Vec<f64>,
    pub e_weak: Vec<f64>,
    pub e_regular: Vec<f64>,
    /// `χ = ‖∇u_t‖²`
    pub chi: Vec<f64>,
    /// `Σ μ_i² b_i² = ‖Δu_t‖²`
    pub grad2_ut_mu2: Vec<f64>,
    /// `‖u_t‖²`; absent for traces read back from CSV.
    pub velocity_sq: Option<Vec<f64>>,
    /// Integrator's running `∫₀^t -dE_w/dt` (`∫χ²` for Kelvin-Voigt).
    pub weak_dissipation: Option<Vec<f64>>,
    /// Integrator's running `∫₀^t -dE_r/dt`.
    pub regular_dissipation: Option<Vec<f64>>,
    pub fingerprint: String,
    pub valid: bool,
    pub warnings: Vec<String>,
    pub steps: usize,
}

impl EnergyTrace {
    pub fn new(model: Model, lambda1: f64) -> Self {
        Self {
            model,
            lambda1,
            times: Vec::new(),
            e_weak: Vec::new(),
            e_regular: Vec::new(),
            chi: Vec::new(),
            grad2_ut_mu2: Vec::new(),
            velocity_sq: Some(Vec::new()),
            weak_dissipation: Some(Vec::new()),
            regular_dissipation: Some(Vec::new()),
            fingerprint: String::new(),
            valid: true,
            warnings: Vec::new(),
            steps: 0,
        }
    }

    pub(crate) fn push_sample(
        &mut self,
        domain: &SpectralDomain,
        t: f64,
        state: &ModalState,
        q_weak: f64,
        q_regular: f64,
    ) {
        let mu = domain.eigenvalues();
        let b = state.b();
        let mut g2 = 0.0;
        for i in 0..mu.len() {
            g2 += mu[i] * mu[i] * b[i] * b[i];
        }
        self.times.push(t);
        self.e_weak.push(weak_energy(domain, state));
        self.e_regular.push(regular_energy(domain, state));
        self.chi.push(weighted_square_sum(mu, b));
        self.grad2_ut_mu2.push(g2);
        if let Some(v) = self.velocity_sq.as_mut() {
            v.push(square_sum(b));
        }
        if let Some(q) = self.weak_dissipation.as_mut() {
            q.push(q_weak);
        }
        if let Some(q) = self.regular_dissipation.as_mut() {
            q.push(q_regular);
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn e0(&self) -> f64 {
        self.e_weak.first().copied().unwrap_or(0.0)
    }

    /// Sampled `-dE_w/dt`, when it can be formed from the recorded columns.
    fn weak_rate_samples(&self) -> Result<Vec<f64>> {
        match self.model {
            Model::KelvinVoigt => Ok(self.chi.iter().map(|c| c * c).collect()),
            Model::BtPrototype => {
                let v = self.velocity_sq.as_ref().ok_or_else(|| {
                    Error::TraceFormat("prototype trace lacks the ‖u_t‖² column".into())
                })?;
                Ok(self.e_weak.iter().zip(v).map(|(e, v)| e * v).collect())
            }
        }
    }

    fn regular_rate_samples(&self) -> Vec<f64> {
        match self.model {
            Model::KelvinVoigt => self.chi.iter().zip(&self.grad2_ut_mu2).map(|(c, g)| c * g).collect(),
            Model::BtPrototype => self.e_weak.iter().zip(&self.chi).map(|(e, c)| e * c).collect(),
        }
    }

    fn check_range(&self, s: usize, t: usize) -> Result<()> {
        if s > t || t >= self.len() {
            return Err(Error::IndexOutOfRange(format!(
                "need S <= T < {}, got S = {s}, T = {t}",
                self.len()
            )));
        }
        Ok(())
    }
}

fn dissipation_between(running: Option<&Vec<f64>>, times: &[f64], rates: impl FnOnce() -> Result<Vec<f64>>, s: usize, t: usize) -> Result<f64> {
    match running {
        Some(q) if q.len() == times.len() => Ok(q[t] - q[s]),
        _ => {
            let q = cumulative_trapezoid(times, &rates()?);
            Ok(q[t] - q[s])
        }
    }
}

/// `E_w(T) - E_w(S) + ∫_S^T (-dE_w/dt) dt` between sample indices.
///
/// Uses the integrator's running integral when the trace has one, otherwise
/// the trapezoid rule on the sampled rate.
pub fn weak_identity_residual(trace: &EnergyTrace, s: usize, t: usize) -> Result<f64> {
    trace.check_range(s, t)?;
    let q = dissipation_between(
        trace.weak_dissipation.as_ref(),
        &trace.times,
        || trace.weak_rate_samples(),
        s,
        t,
    )?;
    Ok(trace.e_weak[t] - trace.e_weak[s] + q)
}

/// `E_r(T) - E_r(S) + ∫_S^T (-dE_r/dt) dt` between sample indices.
pub fn regular_identity_residual(trace: &EnergyTrace, s: usize, t: usize) -> Result<f64> {
    trace.check_range(s, t)?;
    let q = dissipation_between(
        trace.regular_dissipation.as_ref(),
        &trace.times,
        || Ok(trace.regular_rate_samples()),
        s,
        t,
    )?;
    Ok(trace.e_regular[t] - trace.e_regular[s] + q)
}

/// Same residuals forced onto the sampled trapezoid rule.
pub fn sampled_identity_residuals(trace: &EnergyTrace, s: usize, t: usize) -> Result<(f64, f64)> {
    trace.check_range(s, t)?;
    let qw = cumulative_trapezoid(&trace.times, &trace.weak_rate_samples()?);
    let qr = cumulative_trapezoid(&trace.times, &trace.regular_rate_samples());
    Ok((
        trace.e_weak[t] - trace.e_weak[s] + qw[t] - qw[s],
        trace.e_regular[t] - trace.e_regular[s] + qr[t] - qr[s],
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monotonicity {
    /// Largest sample-to-sample increase of `E_w` (≤ 0 when monotone).
    pub max_weak_increase: f64,
    pub max_regular_increase: f64,
}

pub fn energy_monotonicity(trace: &EnergyTrace) -> Monotonicity {
    let worst = |e: &[f64]| {
        e.windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max)
    };
    Monotonicity {
        max_weak_increase: worst(&trace.e_weak),
        max_regular_increase: worst(&trace.e_regular),
    }
}

/// `C = (2/3)[4λ₁² + (5√λ₁ + 1)E₀ + 2E₀²]`, the constant in
/// `∫_S^T E_w² dt ≤ C E_w(S)`.
pub fn decay_constant(lambda1: f64, e0: f64) -> Result<f64> {
    if !(lambda1.is_finite() && lambda1 > 0.0) {
        return Err(Error::InvalidData(format!(
            "Poincaré constant must be positive, got {lambda1}"
        )));
    }
    if !(e0.is_finite() && e0 >= 0.0) {
        return Err(Error::InvalidData(format!("initial energy must be nonnegative, got {e0}")));
    }
    Ok(2.0 / 3.0 * (4.0 * lambda1 * lambda1 + (5.0 * lambda1.sqrt() + 1.0) * e0 + 2.0 * e0 * e0))
}

/// `E₀ · 2C / (C + t)`.
pub fn decay_bound(e0: f64, c: f64, t: f64) -> f64 {
    e0 * 2.0 * c / (c + t)
}

/// `(1/E₀ + 2t)^{-1}`; zero for zero energy.
pub fn prototype_lower_bound(e0: f64, t: f64) -> f64 {
    if e0 <= 0.0 {
        0.0
    } else {
        1.0 / (1.0 / e0 + 2.0 * t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayCertificate {
    pub c: f64,
    pub lambda1: f64,
    pub e0: f64,
    pub bound_samples: Vec<f64>,
    pub komornik_margins: Vec<f64>,
}

impl DecayCertificate {
    pub fn build(trace: &EnergyTrace) -> Result<Self> {
        require_model(trace, Model::KelvinVoigt)?;
        let e0 = trace.e0();
        let c = decay_constant(trace.lambda1, e0)?;
        Ok(Self {
            c,
            lambda1: trace.lambda1,
            e0,
            bound_samples: trace.times.iter().map(|&t| decay_bound(e0, c, t)).collect(),
            komornik_margins: check_komornik_hypothesis(trace, c)?,
        })
    }
}

fn require_model(trace: &EnergyTrace, expected: Model) -> Result<()> {
    if trace.model != expected {
        return Err(Error::WrongModel {
            expected: expected.name(),
            found: trace.model.name(),
        });
    }
    Ok(())
}

/// `C·E_w(S) - ∫_S^{T_end} E_w² dt` at every sample `S` (trapezoid rule).
pub fn check_komornik_hypothesis(trace: &EnergyTrace, c: f64) -> Result<Vec<f64>> {
    require_model(trace, Model::KelvinVoigt)?;
    let squares: Vec<f64> = trace.e_weak.iter().map(|e| e * e).collect();
    let q = cumulative_trapezoid(&trace.times, &squares);
    let total = q.last().copied().unwrap_or(0.0);
    Ok(trace
        .e_weak
        .iter()
        .zip(&q)
        .map(|(e, qs)| c * e - (total - qs))
        .collect())
}

/// Least-squares slope of `ln E_w` against `ln t` over `[t_end/10, t_end]`.
pub fn loglog_slope(trace: &EnergyTrace) -> Option<f64> {
    let t_end = trace.t_end();
    let pts: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.e_weak)
        .filter(|(&t, &e)| t > 0.0 && t >= t_end / 10.0 && e > 0.0)
        .map(|(t, e)| (t.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayBoundReport {
    pub c: f64,
    pub checked_samples: usize,
    pub violations: usize,
    /// `max(E_w(t) - E₀·2C/(C+t))` over checked samples; ≤ 0 when the bound holds.
    pub max_violation: f64,
    pub slope: Option<f64>,
}

impl DecayBoundReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Checks `E_w(t) ≤ E₀·2C/(C+t)` at every sample with `t ≥ C`.
pub fn check_decay_bound(trace: &EnergyTrace, cert: &DecayCertificate) -> Result<DecayBoundReport> {
    require_model(trace, Model::KelvinVoigt)?;
    let slope = loglog_slope(trace);
    if cert.e0 == 0.0 {
        return Ok(DecayBoundReport {
            c: cert.c,
            checked_samples: trace.len(),
            violations: 0,
            max_violation: 0.0,
            slope,
        });
    }
    if trace.t_end() < cert.c {
        return Err(Error::InsufficientHorizon {
            t_end: trace.t_end(),
            required: cert.c,
        });
    }
    let mut report = DecayBoundReport {
        c: cert.c,
        checked_samples: 0,
        violations: 0,
        max_violation: f64::NEG_INFINITY,
        slope,
    };
    for (&t, &e) in trace.times.iter().zip(&trace.e_weak) {
        if t < cert.c {
            continue;
        }
        let excess = e - decay_bound(cert.e0, cert.c, t);
        report.checked_samples += 1;
        report.max_violation = report.max_violation.max(excess);
        if excess > 0.0 {
            report.violations += 1;
        }
    }
    Ok(report)
}

/// Absolute slack allowed on the prototype lower bound.
pub const PROTOTYPE_BOUND_SLACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeReport {
    /// `min_t E_w(t)·(1/E₀ + 2t)`; at least 1 when the lower bound holds.
    pub min_ratio: f64,
    /// `max_t [(1/E₀ + 2t)^{-1} - E_w(t)]`.
    pub max_shortfall: f64,
    pub lower_bound_holds: bool,
    /// Smallest `μ` with `E_w(t) ≤ ((t-1)⁺/μ + 1/E₀)^{-1}` at all samples.
    pub fitted_mu: Option<f64>,
    /// Whether `E_w(t) ≥ (4t + 1/E₀)^{-1}` at all samples.
    pub sandwich_lower_holds: bool,
    pub slope: Option<f64>,
}

pub fn check_prototype_bounds(trace: &EnergyTrace) -> Result<PrototypeReport> {
    require_model(trace, Model::BtPrototype)?;
    let e0 = trace.e0();
    let mut min_ratio = f64::INFINITY;
    let mut max_shortfall = f64::NEG_INFINITY;
    let mut sandwich_lower_holds = true;
    let mut fitted_mu: Option<f64> = None;
    for (&t, &e) in trace.times.iter().zip(&trace.e_weak) {
        let lower = prototype_lower_bound(e0, t);
        max_shortfall = max_shortfall.max(lower - e);
        if e0 > 0.0 {
            min_ratio = min_ratio.min(e * (1.0 / e0 + 2.0 * t));
            if e < 1.0 / (4.0 * t + 1.0 / e0) - PROTOTYPE_BOUND_SLACK {
                sandwich_lower_holds = false;
            }
            if t > 1.0 {
                let gap = 1.0 / e - 1.0 / e0;
                let mu = if gap > 0.0 { (t - 1.0) / gap } else { f64::INFINITY };
                fitted_mu = Some(fitted_mu.map_or(mu, |m: f64| m.max(mu)));
            }
        }
    }
    if e0 == 0.0 {
        min_ratio = 1.0;
    }
    Ok(PrototypeReport {
        min_ratio,
        max_shortfall,
        lower_bound_holds: max_shortfall <= PROTOTYPE_BOUND_SLACK,
        fitted_mu,
        sandwich_lower_holds,
        slope: loglog_slope(trace),
    })
}

/// Central-difference check of `dE_w/dt + E_w‖u_t‖² = 0` at interior samples.
/// Errors are measured relative to `E_w²`, the scale of `|dE_w/dt| ≤ 2E_w²`.
pub fn prototype_derivative_identity(trace: &EnergyTrace) -> Result<f64> {
    require_model(trace, Model::BtPrototype)?;
    let v = trace
        .velocity_sq
        .as_ref()
        .ok_or_else(|| Error::TraceFormat("trace lacks the ‖u_t‖² column".into()))?;
    let mut worst: f64 = 0.0;
    for k in 1..trace.len().saturating_sub(1) {
        let e = trace.e_weak[k];
        if e == 0.0 {
            continue;
        }
        let de = (trace.e_weak[k + 1] - trace.e_weak[k - 1]) / (trace.times[k + 1] - trace.times[k - 1]);
        worst = worst.max((de + e * v[k]).abs() / (e * e));
    }
    Ok(worst)
}
