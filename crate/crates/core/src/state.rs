//! Phase-space algebra for `U = (u, u_t)` in modal coordinates.
//!
//! A state is a pair of coefficient vectors `(a, b)` with
//! `u = Σ a_i ω_i`, `u_t = Σ b_i ω_i`. The energy space is `H¹₀ × L²`, so
//! `‖(a, b)‖²_H = Σ μ_i a_i² + Σ b_i²`. All sums run in ascending index order.

use crate::domain::{DomainId, SpectralDomain};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModalState {
    a: Vec<f64>,
    b: Vec<f64>,
    domain: DomainId,
}

impl ModalState {
    pub fn zeros(domain: &SpectralDomain) -> Self {
        Self {
            a: vec![0.0; domain.len()],
            b: vec![0.0; domain.len()],
            domain: domain.id(),
        }
    }

    pub fn from_parts(domain: &SpectralDomain, a: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if a.len() != domain.len() || b.len() != domain.len() {
            return Err(Error::InvalidData(format!(
                "coefficient vectors have lengths ({}, {}), domain has {} modes",
                a.len(),
                b.len(),
                domain.len()
            )));
        }
        if a.iter().chain(&b).any(|c| !c.is_finite()) {
            return Err(Error::InvalidData("non-finite coefficient".into()));
        }
        Ok(Self {
            a,
            b,
            domain: domain.id(),
        })
    }

    /// Coefficients of `u`.
    pub fn a(&self) -> &[f64] {
        &self.a
    }

    /// Coefficients of `u_t`.
    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn domain_id(&self) -> DomainId {
        self.domain
    }

    pub fn len(&self) -> usize {
        self.a.len()
    }

    pub fn is_empty(&self) -> bool {
        self.a.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.a.iter().chain(&self.b).all(|&c| c == 0.0)
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.a, self.b)
    }

    /// `self - other`, componentwise.
    pub fn difference(&self, other: &ModalState) -> Result<ModalState> {
        same_domain(self, other)?;
        Ok(ModalState {
            a: self.a.iter().zip(&other.a).map(|(x, y)| x - y).collect(),
            b: self.b.iter().zip(&other.b).map(|(x, y)| x - y).collect(),
            domain: self.domain,
        })
    }

    pub(crate) fn from_raw(domain: DomainId, a: Vec<f64>, b: Vec<f64>) -> Self {
        Self { a, b, domain }
    }
}

fn same_domain(s1: &ModalState, s2: &ModalState) -> Result<()> {
    if s1.domain != s2.domain || s1.len() != s2.len() {
        Err(Error::DomainMismatch)
    } else {
        Ok(())
    }
}

fn check_domain(domain: &SpectralDomain, state: &ModalState) -> Result<()> {
    if state.domain != domain.id() || state.len() != domain.len() {
        Err(Error::DomainMismatch)
    } else {
        Ok(())
    }
}

/// `Σ μ_i w_i²` in ascending index order.
pub(crate) fn weighted_square_sum(mu: &[f64], w: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..mu.len() {
        s += mu[i] * w[i] * w[i];
    }
    s
}

pub(crate) fn square_sum(w: &[f64]) -> f64 {
    let mut s = 0.0;
    for x in w {
        s += x * x;
    }
    s
}

/// Nonlocal coefficient `χ = ‖∇u_t‖² = Σ μ_i b_i²`.
///
/// Panics if `state` was not built on `domain`.
pub fn chi(domain: &SpectralDomain, state: &ModalState) -> f64 {
    check_domain(domain, state).expect("state built on a different domain");
    weighted_square_sum(domain.eigenvalues(), &state.b)
}

/// Energy-space inner product `Σ μ_i a¹_i a²_i + Σ b¹_i b²_i`.
pub fn h_inner(domain: &SpectralDomain, s1: &ModalState, s2: &ModalState) -> Result<f64> {
    check_domain(domain, s1)?;
    check_domain(domain, s2)?;
    let mu = domain.eigenvalues();
    let mut potential = 0.0;
    for i in 0..mu.len() {
        potential += mu[i] * s1.a[i] * s2.a[i];
    }
    let mut kinetic = 0.0;
    for i in 0..mu.len() {
        kinetic += s1.b[i] * s2.b[i];
    }
    Ok(potential + kinetic)
}

/// `‖U‖_H`.
pub fn h_norm(domain: &SpectralDomain, state: &ModalState) -> Result<f64> {
    h_inner(domain, state, state).map(f64::sqrt)
}

/// `‖U₁ - U₂‖_H`.
pub fn h_distance(domain: &SpectralDomain, s1: &ModalState, s2: &ModalState) -> Result<f64> {
    h_norm(domain, &s1.difference(s2)?)
}

/// Modal image of `A(u, v) = (v, Δu + ‖∇v‖²Δv)`:
/// `(b, -μ_i a_i - χ μ_i b_i)`.
///
/// Panics if `state` was not built on `domain`.
pub fn apply_operator(domain: &SpectralDomain, state: &ModalState) -> ModalState {
    let chi = chi(domain, state);
    let mu = domain.eigenvalues();
    let b_out = (0..mu.len())
        .map(|i| -mu[i] * state.a[i] - chi * mu[i] * state.b[i])
        .collect();
    ModalState {
        a: state.b.clone(),
        b: b_out,
        domain: state.domain,
    }
}

/// Dissipativity probe of `A` on a pair of states.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DissipativityGap {
    /// `⟨AU₁ - AU₂, U₁ - U₂⟩_H`
    pub gap: f64,
    /// `-½(χ₁ - χ₂)²`, an upper bound for `gap`
    pub certificate: f64,
}

pub fn dissipativity_gap(
    domain: &SpectralDomain,
    s1: &ModalState,
    s2: &ModalState,
) -> Result<DissipativityGap> {
    check_domain(domain, s1)?;
    check_domain(domain, s2)?;
    let image_diff = apply_operator(domain, s1).difference(&apply_operator(domain, s2))?;
    let gap = h_inner(domain, &image_diff, &s1.difference(s2)?)?;
    let d = chi(domain, s1) - chi(domain, s2);
    Ok(DissipativityGap {
        gap,
        certificate: -0.5 * d * d,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn unit(m: usize) -> SpectralDomain {
        SpectralDomain::interval(1.0, m).unwrap()
    }

    fn state(d: &SpectralDomain, a: &[f64], b: &[f64]) -> ModalState {
        ModalState::from_parts(d, a.to_vec(), b.to_vec()).unwrap()
    }

    #[test]
    fn chi_examples() {
        let d = unit(2);
        assert_eq!(chi(&d, &d.zero_state()), 0.0);
        assert_eq!(chi(&d, &state(&d, &[0.0, 0.0], &[1.0, 0.0])), PI * PI);
        let c = chi(&d, &state(&d, &[0.0, 0.0], &[1.0, 1.0]));
        assert!((c - 5.0 * PI * PI).abs() < 1e-12);
        assert!((c - 49.348).abs() < 1e-3);
    }

    #[test]
    fn inner_product_examples() {
        let d = unit(2);
        let s = state(&d, &[0.3, -1.0], &[2.0, 0.5]);
        assert_eq!(h_inner(&d, &s, &d.zero_state()).unwrap(), 0.0);

        let d1 = unit(1);
        let s = state(&d1, &[1.0], &[0.0]);
        assert_eq!(h_inner(&d1, &s, &s).unwrap(), PI * PI);

        let s1 = state(&d, &[1.0, 0.0], &[0.0, 1.0]);
        let s2 = state(&d, &[0.0, 1.0], &[1.0, 0.0]);
        assert_eq!(h_inner(&d, &s1, &s2).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_domains_are_rejected() {
        let d1 = unit(2);
        let d2 = SpectralDomain::interval(2.0, 2).unwrap();
        let s1 = d1.zero_state();
        let s2 = d2.zero_state();
        assert!(matches!(h_inner(&d1, &s1, &s2), Err(Error::DomainMismatch)));
        assert!(matches!(
            dissipativity_gap(&d1, &s1, &s2),
            Err(Error::DomainMismatch)
        ));
    }

    #[test]
    fn operator_examples() {
        let d = unit(1);
        assert!(apply_operator(&d, &d.zero_state()).is_zero());

        let out = apply_operator(&d, &state(&d, &[1.0], &[0.0]));
        assert_eq!(out.a(), &[0.0]);
        assert_eq!(out.b(), &[-PI * PI]);

        // χ = π², damping term -χμb = -π⁴
        let out = apply_operator(&d, &state(&d, &[0.0], &[1.0]));
        assert_eq!(out.a(), &[1.0]);
        assert!((out.b()[0] + PI.powi(4)).abs() < 1e-12);
    }

    #[test]
    fn gap_examples() {
        let d = unit(3);
        let s = state(&d, &[0.1, 0.2, -0.3], &[1.0, -0.5, 0.25]);
        let g = dissipativity_gap(&d, &s, &s).unwrap();
        assert_eq!(g.gap, 0.0);
        assert_eq!(g.certificate, 0.0);

        // against zero: gap = -χ², certificate = -½χ²
        let c = chi(&d, &s);
        let g = dissipativity_gap(&d, &s, &d.zero_state()).unwrap();
        assert!((g.gap + c * c).abs() < 1e-10 * c * c);
        assert!((g.certificate + 0.5 * c * c).abs() < 1e-12 * c * c);
    }

    fn coeffs(m: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-2.0..2.0f64, m)
    }

    proptest! {
        #[test]
        fn gap_is_bounded_by_certificate(a1 in coeffs(6), b1 in coeffs(6), a2 in coeffs(6), b2 in coeffs(6)) {
            let d = SpectralDomain::interval(PI, 6).unwrap();
            let s1 = state(&d, &a1, &b1);
            let s2 = state(&d, &a2, &b2);
            let g = dissipativity_gap(&d, &s1, &s2).unwrap();
            // absolute slack scaled to the size of the terms being cancelled
            let scale = 1.0 + chi(&d, &s1).powi(2) + chi(&d, &s2).powi(2);
            prop_assert!(g.gap <= g.certificate + 1e-12 * scale);
            prop_assert!(g.certificate <= 0.0);
        }

        #[test]
        fn inner_product_is_symmetric_and_bilinear(a1 in coeffs(4), b1 in coeffs(4), a2 in coeffs(4), b2 in coeffs(4), t in -3.0..3.0f64) {
            let d = unit(4);
            let s1 = state(&d, &a1, &b1);
            let s2 = state(&d, &a2, &b2);
            let x = h_inner(&d, &s1, &s2).unwrap();
            let y = h_inner(&d, &s2, &s1).unwrap();
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));

            let scaled = state(&d,
                &a1.iter().map(|v| t * v).collect::<Vec<_>>(),
                &b1.iter().map(|v| t * v).collect::<Vec<_>>());
            let z = h_inner(&d, &scaled, &s2).unwrap();
            prop_assert!((z - t * x).abs() <= 1e-12 * (1.0 + z.abs()) * 10.0);

            let n = h_inner(&d, &s1, &s1).unwrap();
            prop_assert!(n >= 0.0);
        }

        #[test]
        fn operator_without_velocity_is_linear(a in coeffs(5)) {
            let d = unit(5);
            let s = state(&d, &a, &[0.0; 5]);
            let out = apply_operator(&d, &s);
            prop_assert!(out.a().iter().all(|&v| v == 0.0));
            for i in 0..5 {
                prop_assert_eq!(out.b()[i], -d.eigenvalues()[i] * a[i]);
            }
        }
    }
}
