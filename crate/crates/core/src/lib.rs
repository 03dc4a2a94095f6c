//! Spectral simulation of the wave equation with Kelvin-Voigt nonlocal damping
//!
//! ```text
//! u_tt - Δu - ‖∇u_t‖² Δu_t = 0   in Ω,   u = 0 on ∂Ω
//! ```
//!
//! The PDE is truncated onto the Dirichlet eigenbasis of an interval or a
//! rectangle. In modal coordinates the nonlinearity reduces to the single
//! scalar `χ = Σ μ_i b_i²`, which makes the resolvent `(I - αA)^{-1}` a
//! monotone scalar root-finding problem. On top of it sit three time
//! integrators (explicit RK4 reference, implicit Euler / exponential formula,
//! RK4 on the Yosida regularization) and the energy diagnostics used to check
//! the dissipation identities and the `1/t` decay certificate.
//!
//! Modules:
//! * [`domain`]: eigenpairs, Poincaré constant and projection of initial data
//! * [`state`]: phase-space algebra (`H¹₀ × L²` inner product, operator, χ)
//! * [`resolvent`]: nonlinear resolvent solve and m-dissipativity probes
//! * [`evolution`]: right-hand sides, steppers and trajectory driver
//! * [`diagnostics`]: energies, identity residuals, decay certificates
//! * [`config`], [`trace_io`], [`run`]: configuration files, CSV traces and
//!   the orchestration behind the `kvwave` binary

pub mod config;
pub mod diagnostics;
pub mod domain;
mod error;
pub mod evolution;
pub mod quadrature;
pub mod resolvent;
pub mod run;
pub mod state;
pub mod trace_io;

pub use diagnostics::{DecayCertificate, EnergyTrace};
pub use domain::{Geometry, InitialData, SpectralDomain};
pub use error::{Error, Result};
pub use evolution::{IntegratorSpec, Method, Model};
pub use resolvent::{ResolventProblem, ResolventSolution};
pub use state::ModalState;
