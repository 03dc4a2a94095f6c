//! Time evolution of the modal system.
//!
//! Three integrators are provided for the Kelvin-Voigt model:
//! * `DirectRk4`: classical RK4 on the Galerkin ODE, the accuracy reference;
//! * `ImplicitEuler`: repeated resolvent steps `U ↦ J_dt U`, i.e. the
//!   exponential formula `(J_{t/n})ⁿ`, unconditionally energy-nonincreasing;
//! * `YosidaRk4`: RK4 on `U' = A_α U = (J_α U - U)/α`, the Lipschitz
//!   regularization whose flow tends to the semigroup as `α → 0`.
//!
//! The Balakrishnan-Taylor prototype `u_tt - Δu + E_w(t) u_t = 0` only runs
//! with `DirectRk4`.
//!
//! Along RK4 trajectories the dissipation rates `-dE_w/dt` and `-dE_r/dt`
//! are integrated as two extra ODE components, so the energy identities can
//! be checked to the integrator's own order.

use std::fmt;

use crate::diagnostics::EnergyTrace;
use crate::domain::SpectralDomain;
use crate::resolvent::{self, ResolventProblem, DEFAULT_TOL};
use crate::state::{square_sum, weighted_square_sum, ModalState};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Model {
    KelvinVoigt,
    BtPrototype,
}

impl Model {
    pub fn name(self) -> &'static str {
        match self {
            Model::KelvinVoigt => "kelvin_voigt",
            Model::BtPrototype => "bt_prototype",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "kelvin_voigt" => Some(Model::KelvinVoigt),
            "bt_prototype" => Some(Model::BtPrototype),
            _ => None,
        }
    }
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    DirectRk4,
    ImplicitEuler,
    YosidaRk4 { alpha: f64 },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::DirectRk4 => "direct_rk4",
            Method::ImplicitEuler => "implicit_euler_resolvent",
            Method::YosidaRk4 { .. } => "yosida_rk4",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegratorSpec {
    pub method: Method,
    pub dt: f64,
    pub t_end: f64,
    pub sample_stride: usize,
    /// Tolerance for the χ fixed point in resolvent-based methods.
    pub resolvent_tol: f64,
}

impl IntegratorSpec {
    pub fn new(method: Method, dt: f64, t_end: f64, sample_stride: usize) -> Self {
        Self {
            method,
            dt,
            t_end,
            sample_stride,
            resolvent_tol: DEFAULT_TOL,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfiguration(msg));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return bad(format!("t_end must be positive, got {}", self.t_end));
        }
        if self.dt > self.t_end {
            return bad(format!("dt = {} exceeds t_end = {}", self.dt, self.t_end));
        }
        if self.sample_stride == 0 {
            return bad("sample_stride must be at least 1".into());
        }
        if !(self.resolvent_tol.is_finite() && self.resolvent_tol > 0.0) {
            return Err(Error::InvalidTolerance(self.resolvent_tol));
        }
        if let Method::YosidaRk4 { alpha } = self.method {
            if !(alpha.is_finite() && alpha > 0.0) {
                return bad(format!("yosida alpha must be positive, got {alpha}"));
            }
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened when `t_end` is not a
    /// multiple of `dt`.
    pub fn step_count(&self) -> usize {
        let n = (self.t_end / self.dt * (1.0 - 1e-12)).ceil();
        (n as usize).max(1)
    }

    fn time_of(&self, k: usize, n: usize) -> f64 {
        if k == n {
            self.t_end
        } else {
            k as f64 * self.dt
        }
    }
}

// ---------------------------------------------------------------------------
// right-hand sides on the flat layout y = [a_0..a_m, b_0..b_m]

/// Writes `dy` and returns the dissipation rates `(-dE_w/dt, -dE_r/dt)`.
fn modal_rhs(model: Model, mu: &[f64], y: &[f64], dy: &mut [f64], damping_scale: f64) -> (f64, f64) {
    let m = mu.len();
    let (a, b) = y[..2 * m].split_at(m);
    let chi = weighted_square_sum(mu, b);
    match model {
        Model::KelvinVoigt => {
            let c = damping_scale * chi;
            let mut grad2 = 0.0;
            for i in 0..m {
                dy[i] = b[i];
                dy[m + i] = -mu[i] * a[i] - c * mu[i] * b[i];
                grad2 += mu[i] * mu[i] * b[i] * b[i];
            }
            (c * chi, c * grad2)
        }
        Model::BtPrototype => {
            let energy = damping_scale * 0.5 * (square_sum(b) + weighted_square_sum(mu, a));
            for i in 0..m {
                dy[i] = b[i];
                dy[m + i] = -mu[i] * a[i] - energy * b[i];
            }
            (energy * square_sum(b), energy * chi)
        }
    }
}

fn state_rhs(model: Model, domain: &SpectralDomain, state: &ModalState, scale: f64) -> ModalState {
    let mut y = Vec::with_capacity(2 * state.len());
    y.extend_from_slice(state.a());
    y.extend_from_slice(state.b());
    let mut dy = vec![0.0; y.len()];
    modal_rhs(model, domain.eigenvalues(), &y, &mut dy, scale);
    let b = dy.split_off(state.len());
    ModalState::from_raw(state.domain_id(), dy, b)
}

/// `(b, -μ_i a_i - χ μ_i b_i)`.
pub fn rhs_kelvin_voigt(domain: &SpectralDomain, state: &ModalState) -> ModalState {
    state_rhs(Model::KelvinVoigt, domain, state, 1.0)
}

/// Kelvin-Voigt right-hand side with the damping coefficient multiplied by
/// `damping_scale`; `0.0` gives the undamped wave equation.
pub fn rhs_kelvin_voigt_scaled(
    domain: &SpectralDomain,
    state: &ModalState,
    damping_scale: f64,
) -> ModalState {
    state_rhs(Model::KelvinVoigt, domain, state, damping_scale)
}

/// `(b, -μ_i a_i - E_w b_i)`.
pub fn rhs_bt_prototype(domain: &SpectralDomain, state: &ModalState) -> ModalState {
    state_rhs(Model::BtPrototype, domain, state, 1.0)
}

pub fn rhs(model: Model, domain: &SpectralDomain, state: &ModalState) -> ModalState {
    state_rhs(model, domain, state, 1.0)
}

// ---------------------------------------------------------------------------
// steppers

struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    fn new(n: usize) -> Self {
        Self {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    fn step<F>(&mut self, y: &mut [f64], dt: f64, mut f: F) -> Result<()>
    where
        F: FnMut(&[f64], &mut [f64]) -> Result<()>,
    {
        let n = y.len();
        f(y, &mut self.k1)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * dt * self.k1[i];
        }
        f(&self.tmp, &mut self.k2)?;
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * dt * self.k2[i];
        }
        f(&self.tmp, &mut self.k3)?;
        for i in 0..n {
            self.tmp[i] = y[i] + dt * self.k3[i];
        }
        f(&self.tmp, &mut self.k4)?;
        for i in 0..n {
            y[i] += dt / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
        Ok(())
    }
}

fn check_finite(y: &[f64], time: f64) -> Result<()> {
    if y.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::BlowUp {
            time,
            partial: None,
        })
    }
}

/// One classical RK4 step of `U' = rhs(U)`.
pub fn step_rk4<F>(domain: &SpectralDomain, state: &ModalState, rhs: F, dt: f64) -> Result<ModalState>
where
    F: Fn(&SpectralDomain, &ModalState) -> ModalState,
{
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidConfiguration(format!("dt must be positive, got {dt}")));
    }
    let m = state.len();
    let mut y = [state.a(), state.b()].concat();
    let id = state.domain_id();
    Rk4::new(2 * m).step(&mut y, dt, |x, dx| {
        let s = ModalState::from_raw(id, x[..m].to_vec(), x[m..].to_vec());
        let out = rhs(domain, &s);
        dx[..m].copy_from_slice(out.a());
        dx[m..].copy_from_slice(out.b());
        Ok(())
    })?;
    check_finite(&y, dt)?;
    let b = y.split_off(m);
    Ok(ModalState::from_raw(id, y, b))
}

/// `J_dt(state)`.
pub fn step_implicit_euler(
    domain: &SpectralDomain,
    state: &ModalState,
    dt: f64,
    tol: f64,
) -> Result<ModalState> {
    resolvent::resolvent(domain, state, dt, tol)
}

fn yosida_rhs(domain: &SpectralDomain, alpha: f64, tol: f64, y: &[f64], dy: &mut [f64]) -> Result<()> {
    let m = domain.len();
    let problem = ResolventProblem::new(alpha, y[..m].to_vec(), y[m..2 * m].to_vec());
    let sol = resolvent::solve_resolvent(domain, &problem, tol)?;
    for i in 0..m {
        dy[i] = (sol.u[i] - y[i]) / alpha;
        dy[m + i] = (sol.v[i] - y[m + i]) / alpha;
    }
    Ok(())
}

/// One RK4 step of the Yosida flow `U' = (J_α U - U)/α`.
pub fn step_yosida_rk4(
    domain: &SpectralDomain,
    state: &ModalState,
    alpha: f64,
    dt: f64,
    tol: f64,
) -> Result<ModalState> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(Error::InvalidConfiguration(format!("alpha must be positive, got {alpha}")));
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidConfiguration(format!("dt must be positive, got {dt}")));
    }
    let m = state.len();
    let mut y = [state.a(), state.b()].concat();
    Rk4::new(2 * m).step(&mut y, dt, |x, dx| yosida_rhs(domain, alpha, tol, x, dx))?;
    check_finite(&y, dt)?;
    let b = y.split_off(m);
    Ok(ModalState::from_raw(state.domain_id(), y, b))
}

/// `(J_{t/n})ⁿ U`.
pub fn exponential_formula(
    domain: &SpectralDomain,
    initial: &ModalState,
    t: f64,
    n: usize,
    tol: f64,
) -> Result<ModalState> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidConfiguration(format!("t must be nonnegative, got {t}")));
    }
    if n == 0 {
        return Err(Error::InvalidConfiguration("n must be at least 1".into()));
    }
    if t == 0.0 {
        return Ok(initial.clone());
    }
    let dt = t / n as f64;
    let mut state = initial.clone();
    for _ in 0..n {
        state = step_implicit_euler(domain, &state, dt, tol)?;
    }
    Ok(state)
}

// ---------------------------------------------------------------------------
// trajectory driver

struct Sampler<'a> {
    domain: &'a SpectralDomain,
    trace: EnergyTrace,
}

impl Sampler<'_> {
    fn record(&mut self, t: f64, y: &[f64], q_weak: f64, q_regular: f64) {
        let m = self.domain.len();
        let state = ModalState::from_raw(self.domain.id(), y[..m].to_vec(), y[m..2 * m].to_vec());
        self.trace.push_sample(self.domain, t, &state, q_weak, q_regular);
    }
}

fn check_supported(model: Model, method: Method) -> Result<()> {
    match (model, method) {
        (Model::BtPrototype, Method::ImplicitEuler | Method::YosidaRk4 { .. }) => {
            Err(Error::InvalidConfiguration(format!(
                "{} is only available for kelvin_voigt; use direct_rk4 for bt_prototype",
                method.name()
            )))
        }
        _ => Ok(()),
    }
}

/// Advances `initial` to `spec.t_end` and returns the sampled trace and the
/// final state. On blow-up the error carries the partial trace, flagged
/// invalid.
pub fn evolve_with_state(
    domain: &SpectralDomain,
    initial: &ModalState,
    model: Model,
    spec: &IntegratorSpec,
) -> Result<(EnergyTrace, ModalState)> {
    spec.validate()?;
    check_supported(model, spec.method)?;
    if initial.domain_id() != domain.id() || initial.len() != domain.len() {
        return Err(Error::DomainMismatch);
    }

    let m = domain.len();
    let mu = domain.eigenvalues();
    let mu_max = domain.max_eigenvalue();
    let n = spec.step_count();

    let mut trace = EnergyTrace::new(model, domain.poincare_constant());
    trace.fingerprint = format!(
        "{}/{}/dt={:e}/t_end={:e}/stride={}/m={}",
        model.name(),
        spec.method.name(),
        spec.dt,
        spec.t_end,
        spec.sample_stride,
        m
    );
    let mut sampler = Sampler { domain, trace };

    // y = [a, b, ∫ weak rate, ∫ regular rate]
    let mut y = Vec::with_capacity(2 * m + 2);
    y.extend_from_slice(initial.a());
    y.extend_from_slice(initial.b());
    y.extend_from_slice(&[0.0, 0.0]);
    sampler.record(0.0, &y, 0.0, 0.0);

    let mut rk4 = Rk4::new(2 * m + 2);
    let mut scratch = vec![0.0; 2 * m + 2];
    let mut stiffness_warned = false;

    for k in 1..=n {
        let t_prev = spec.time_of(k - 1, n);
        let t = spec.time_of(k, n);
        let h = t - t_prev;

        if spec.method == Method::DirectRk4 && !stiffness_warned {
            let b = &y[m..2 * m];
            let stiffness = match model {
                Model::KelvinVoigt => h * weighted_square_sum(mu, b) * mu_max,
                Model::BtPrototype => {
                    h * 0.5 * (square_sum(b) + weighted_square_sum(mu, &y[..m]))
                }
            };
            if stiffness > 1.0 {
                stiffness_warned = true;
                sampler.trace.warnings.push(format!(
                    "stiffness guard: dt*chi*mu_max = {stiffness:.3} > 1 at t = {t_prev}; explicit RK4 may be unstable"
                ));
            }
        }

        let stepped = match spec.method {
            Method::DirectRk4 => rk4.step(&mut y, h, |x, dx| {
                let (w, r) = modal_rhs(model, mu, x, dx, 1.0);
                dx[2 * m] = w;
                dx[2 * m + 1] = r;
                Ok(())
            }),
            Method::YosidaRk4 { alpha } => rk4.step(&mut y, h, |x, dx| {
                yosida_rhs(domain, alpha, spec.resolvent_tol, x, dx)?;
                let (w, r) = rates(model, mu, x, &mut scratch);
                dx[2 * m] = w;
                dx[2 * m + 1] = r;
                Ok(())
            }),
            Method::ImplicitEuler => {
                let (w0, r0) = rates(model, mu, &y, &mut scratch);
                let problem = ResolventProblem::new(h, y[..m].to_vec(), y[m..2 * m].to_vec());
                resolvent::solve_resolvent(domain, &problem, spec.resolvent_tol).map(|sol| {
                    y[..m].copy_from_slice(&sol.u);
                    y[m..2 * m].copy_from_slice(&sol.v);
                    let (w1, r1) = rates(model, mu, &y, &mut scratch);
                    y[2 * m] += 0.5 * h * (w0 + w1);
                    y[2 * m + 1] += 0.5 * h * (r0 + r1);
                })
            }
        };

        let failure = match stepped {
            Err(e) => Some(e),
            Ok(()) if y.iter().any(|v| !v.is_finite()) => Some(Error::BlowUp {
                time: t,
                partial: None,
            }),
            Ok(()) => None,
        };
        if let Some(err) = failure {
            let mut partial = sampler.trace;
            partial.valid = false;
            return Err(match err {
                Error::BlowUp { time, .. } => Error::BlowUp {
                    time,
                    partial: Some(Box::new(partial)),
                },
                // non-finite data handed to the resolvent
                Error::InvalidData(_) => Error::BlowUp {
                    time: t,
                    partial: Some(Box::new(partial)),
                },
                other => other,
            });
        }

        if k % spec.sample_stride == 0 || k == n {
            sampler.record(t, &y, y[2 * m], y[2 * m + 1]);
        }
    }

    sampler.trace.steps = n;
    let b = y[m..2 * m].to_vec();
    y.truncate(m);
    let final_state = ModalState::from_raw(domain.id(), y, b);
    Ok((sampler.trace, final_state))
}

/// Dissipation rates at `y` (dy is scratch).
fn rates(model: Model, mu: &[f64], y: &[f64], scratch: &mut [f64]) -> (f64, f64) {
    modal_rhs(model, mu, y, scratch, 1.0)
}

pub fn evolve(
    domain: &SpectralDomain,
    initial: &ModalState,
    model: Model,
    spec: &IntegratorSpec,
) -> Result<EnergyTrace> {
    evolve_with_state(domain, initial, model, spec).map(|(trace, _)| trace)
}

/// Final state only; sampling every step is skipped.
pub fn integrate(
    domain: &SpectralDomain,
    initial: &ModalState,
    model: Model,
    spec: &IntegratorSpec,
) -> Result<ModalState> {
    let mut coarse = *spec;
    coarse.sample_stride = usize::MAX;
    evolve_with_state(domain, initial, model, &coarse).map(|(_, s)| s)
}
