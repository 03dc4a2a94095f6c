//! Nonlinear resolvent `J_α = (I - αA)^{-1}`.
//!
//! Writing `(I - αA)(u, v) = (f, g)` gives `u = f + αv` and, mode by mode,
//!
//! ```text
//! (1 + α²μ_i + αχμ_i) v_i = r_i,   r_i = g_i - αμ_i f_i,   χ = Σ μ_i v_i²
//! ```
//!
//! For frozen `χ` the system is diagonal, so the whole problem collapses to
//! the scalar fixed point `χ = Φ(χ)` with
//! `Φ(χ) = Σ μ_i r_i² / (1 + α²μ_i + αχμ_i)²`. `Φ` is continuous and
//! nonincreasing on `[0, ∞)`, hence `χ - Φ(χ)` is strictly increasing with a
//! unique root in `[0, Φ(0)]`. We bisect that bracket and polish with Newton.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::SpectralDomain;
use crate::state::{self, weighted_square_sum, ModalState};
use crate::{Error, Result};

pub const DEFAULT_TOL: f64 = 1e-12;
const BRACKET_REL_WIDTH: f64 = 1e-14;
const MAX_NEWTON: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventProblem {
    pub alpha: f64,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

impl ResolventProblem {
    pub fn new(alpha: f64, f: Vec<f64>, g: Vec<f64>) -> Self {
        Self { alpha, f, g }
    }

    /// Problem whose solution is `J_α(state)`.
    pub fn from_state(alpha: f64, state: &ModalState) -> Self {
        Self {
            alpha,
            f: state.a().to_vec(),
            g: state.b().to_vec(),
        }
    }

    fn validate(&self, domain: &SpectralDomain) -> Result<()> {
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::InvalidData(format!(
                "resolvent parameter must be positive, got {}",
                self.alpha
            )));
        }
        if self.f.len() != domain.len() || self.g.len() != domain.len() {
            return Err(Error::DomainMismatch);
        }
        if self.f.iter().chain(&self.g).any(|x| !x.is_finite()) {
            return Err(Error::InvalidData("non-finite resolvent data".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolventSolution {
    pub u: Vec<f64>,
    pub v: Vec<f64>,
    /// Fixed point `χ* = ‖∇v‖²`.
    pub chi_star: f64,
    /// Bisection plus Newton iterations.
    pub iterations: usize,
    /// `|χ* - Φ(χ*)|`.
    pub chi_residual: f64,
    /// Max-norm residual of the modal equations with `χ` recomputed from `v`.
    pub residual: f64,
}

impl ResolventSolution {
    pub fn into_state(self, domain: &SpectralDomain) -> Result<ModalState> {
        ModalState::from_parts(domain, self.u, self.v)
    }
}

/// Right-hand side of the modal system, `r_i = g_i - αμ_i f_i`.
pub fn residual_coefficients(domain: &SpectralDomain, problem: &ResolventProblem) -> Vec<f64> {
    let mu = domain.eigenvalues();
    (0..mu.len())
        .map(|i| problem.g[i] - problem.alpha * mu[i] * problem.f[i])
        .collect()
}

/// `Φ(χ) = Σ μ_i r_i² / (1 + α²μ_i + αχμ_i)²`.
pub fn chi_fixed_point_map(domain: &SpectralDomain, problem: &ResolventProblem, chi: f64) -> f64 {
    let r = residual_coefficients(domain, problem);
    phi(domain.eigenvalues(), &r, problem.alpha, chi)
}

fn phi(mu: &[f64], r: &[f64], alpha: f64, chi: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..mu.len() {
        let d = 1.0 + alpha * alpha * mu[i] + alpha * chi * mu[i];
        s += mu[i] * r[i] * r[i] / (d * d);
    }
    s
}

/// `Φ'(χ) = -2α Σ μ_i² r_i² / d_i³ ≤ 0`.
fn phi_derivative(mu: &[f64], r: &[f64], alpha: f64, chi: f64) -> f64 {
    let mut s = 0.0;
    for i in 0..mu.len() {
        let d = 1.0 + alpha * alpha * mu[i] + alpha * chi * mu[i];
        s += mu[i] * mu[i] * r[i] * r[i] / (d * d * d);
    }
    -2.0 * alpha * s
}

/// Solves `(I - αA)(u, v) = (f, g)` on the truncated basis.
pub fn solve_resolvent(
    domain: &SpectralDomain,
    problem: &ResolventProblem,
    tol: f64,
) -> Result<ResolventSolution> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidTolerance(tol));
    }
    problem.validate(domain)?;
    let mu = domain.eigenvalues();
    let alpha = problem.alpha;
    let r = residual_coefficients(domain, problem);

    if r.iter().all(|&x| x == 0.0) {
        return Ok(ResolventSolution {
            u: problem.f.clone(),
            v: vec![0.0; mu.len()],
            chi_star: 0.0,
            iterations: 0,
            chi_residual: 0.0,
            residual: 0.0,
        });
    }

    let h = |chi: f64| chi - phi(mu, &r, alpha, chi);
    let phi0 = phi(mu, &r, alpha, 0.0);
    let mut lo = 0.0;
    let mut hi = phi0;
    let width = BRACKET_REL_WIDTH * phi0.max(1.0);
    let mut iterations = 0;
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if h(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
        iterations += 1;
    }

    let mut chi = 0.5 * (lo + hi);
    for _ in 0..MAX_NEWTON {
        let value = h(chi);
        if value == 0.0 {
            break;
        }
        let slope = 1.0 - phi_derivative(mu, &r, alpha, chi);
        let next = (chi - value / slope).clamp(lo, hi);
        iterations += 1;
        if next == chi {
            break;
        }
        chi = next;
    }
    // keep whichever bracket end point or polished value is best
    for candidate in [lo, hi] {
        if h(candidate).abs() < h(chi).abs() {
            chi = candidate;
        }
    }

    let chi_residual = h(chi).abs();
    if chi_residual > tol {
        return Err(Error::NotConverged {
            residual: chi_residual,
            tol,
        });
    }

    let v: Vec<f64> = (0..mu.len())
        .map(|i| r[i] / (1.0 + alpha * alpha * mu[i] + alpha * chi * mu[i]))
        .collect();
    let u: Vec<f64> = (0..mu.len()).map(|i| problem.f[i] + alpha * v[i]).collect();

    let chi_v = weighted_square_sum(mu, &v);
    let residual = (0..mu.len())
        .map(|i| ((1.0 + alpha * alpha * mu[i] + alpha * chi_v * mu[i]) * v[i] - r[i]).abs())
        .fold(0.0, f64::max);

    Ok(ResolventSolution {
        u,
        v,
        chi_star: chi,
        iterations,
        chi_residual,
        residual,
    })
}

/// `J_α(state)`; one implicit Euler step of size `alpha`.
pub fn resolvent(
    domain: &SpectralDomain,
    state: &ModalState,
    alpha: f64,
    tol: f64,
) -> Result<ModalState> {
    solve_resolvent(domain, &ResolventProblem::from_state(alpha, state), tol)?.into_state(domain)
}

/// `‖(I - αA)(u, v) - (f, g)‖_H`, evaluated through [`state::apply_operator`].
pub fn range_residual(
    domain: &SpectralDomain,
    problem: &ResolventProblem,
    solution: &ResolventSolution,
) -> Result<f64> {
    let uv = ModalState::from_parts(domain, solution.u.clone(), solution.v.clone())?;
    let image = state::apply_operator(domain, &uv);
    let alpha = problem.alpha;
    let ea: Vec<f64> = (0..domain.len())
        .map(|i| uv.a()[i] - alpha * image.a()[i] - problem.f[i])
        .collect();
    let eb: Vec<f64> = (0..domain.len())
        .map(|i| uv.b()[i] - alpha * image.b()[i] - problem.g[i])
        .collect();
    state::h_norm(domain, &ModalState::from_parts(domain, ea, eb)?)
}

/// Both sides of the a priori estimate for the velocity component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoercivityCheck {
    /// `α²‖∇v‖²/2 + ‖v‖²/2 + α‖∇v‖⁴`
    pub lhs: f64,
    /// `2α‖∇f‖² + ‖g‖²/2`
    pub stated_rhs: f64,
    /// `‖∇f‖²/2 + ‖g‖²/2`, which always dominates `lhs`
    pub sharp_rhs: f64,
}

impl CoercivityCheck {
    pub fn stated_slack(&self) -> f64 {
        self.stated_rhs - self.lhs
    }

    pub fn sharp_slack(&self) -> f64 {
        self.sharp_rhs - self.lhs
    }
}

pub fn coercivity(
    domain: &SpectralDomain,
    problem: &ResolventProblem,
    solution: &ResolventSolution,
) -> CoercivityCheck {
    let mu = domain.eigenvalues();
    let alpha = problem.alpha;
    let grad_v = weighted_square_sum(mu, &solution.v);
    let v2 = state::square_sum(&solution.v);
    let grad_f = weighted_square_sum(mu, &problem.f);
    let g2 = state::square_sum(&problem.g);
    CoercivityCheck {
        lhs: 0.5 * alpha * alpha * grad_v + 0.5 * v2 + alpha * grad_v * grad_v,
        stated_rhs: 2.0 * alpha * grad_f + 0.5 * g2,
        sharp_rhs: 0.5 * grad_f + 0.5 * g2,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MDissipativityReport {
    pub trials: usize,
    pub solved: usize,
    pub max_residual: f64,
    pub min_stated_coercivity_slack: f64,
    pub min_sharp_coercivity_slack: f64,
    pub max_iterations: usize,
    pub failures: Vec<String>,
    pub tol: f64,
}

impl MDissipativityReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty() && self.solved == self.trials && self.max_residual <= self.tol
    }
}

/// Range probe: random `(α, f, g)` with `α` log-uniform in `alpha_range`
/// and data uniform in `[-1, 1]`. Solver failures are collected, not raised.
pub fn verify_m_dissipativity(
    domain: &SpectralDomain,
    trials: usize,
    tol: f64,
    seed: u64,
) -> MDissipativityReport {
    verify_m_dissipativity_in(domain, trials, tol, seed, (1e-3, 1e3))
}

pub fn verify_m_dissipativity_in(
    domain: &SpectralDomain,
    trials: usize,
    tol: f64,
    seed: u64,
    alpha_range: (f64, f64),
) -> MDissipativityReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = domain.len();
    let (lo, hi) = (alpha_range.0.ln(), alpha_range.1.ln());
    let problems = (0..trials).map(move |_| {
        let alpha = if hi > lo {
            rng.gen_range(lo..=hi).exp()
        } else {
            alpha_range.0
        };
        let f = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let g = (0..m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        ResolventProblem::new(alpha, f, g)
    });
    verify_problems(domain, problems, tol)
}

/// Runs the range probe over an explicit list of problems.
pub fn verify_problems(
    domain: &SpectralDomain,
    problems: impl IntoIterator<Item = ResolventProblem>,
    tol: f64,
) -> MDissipativityReport {
    let mut report = MDissipativityReport {
        trials: 0,
        solved: 0,
        max_residual: 0.0,
        min_stated_coercivity_slack: f64::INFINITY,
        min_sharp_coercivity_slack: f64::INFINITY,
        max_iterations: 0,
        failures: Vec::new(),
        tol,
    };
    for (k, problem) in problems.into_iter().enumerate() {
        report.trials += 1;
        let solved = solve_resolvent(domain, &problem, DEFAULT_TOL.min(tol)).and_then(|sol| {
            let res = range_residual(domain, &problem, &sol)?;
            Ok((sol, res))
        });
        match solved {
            Ok((sol, res)) => {
                report.solved += 1;
                report.max_residual = report.max_residual.max(res);
                report.max_iterations = report.max_iterations.max(sol.iterations);
                let c = coercivity(domain, &problem, &sol);
                report.min_stated_coercivity_slack =
                    report.min_stated_coercivity_slack.min(c.stated_slack());
                report.min_sharp_coercivity_slack =
                    report.min_sharp_coercivity_slack.min(c.sharp_slack());
                if res > tol {
                    report.failures.push(format!(
                        "trial {k}: alpha = {:e}, residual {res:.3e} > {tol:.1e}",
                        problem.alpha
                    ));
                }
            }
            Err(e) => report
                .failures
                .push(format!("trial {k}: alpha = {:e}: {e}", problem.alpha)),
        }
    }
    report
}
