//! Dirichlet eigenpairs of `-Δ` on intervals and rectangles, and projection
//! of initial data onto the truncated eigenbasis.
//!
//! Eigenfunctions are normalized in L²:
//! `ω_k(x) = √(2/L) sin(kπx/L)`, and on rectangles the tensor product of the
//! two axis families. Rectangle modes are flattened into a single list sorted
//! by eigenvalue; ties keep `(j, k)` lexicographic order.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::quadrature::composite_rule;
use crate::state::ModalState;
use crate::{Error, Result};

/// Gauss points per panel for profile projection.
const GAUSS_ORDER: usize = 8;
/// Stopping rule for panel doubling (relative change of the coefficient vector).
pub const PROJECTION_TOL: f64 = 1e-10;
const MAX_PANELS_INTERVAL: usize = 1 << 15;
const MAX_PANELS_RECTANGLE: usize = 1 << 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Geometry {
    Interval { length: f64 },
    Rectangle { lx: f64, ly: f64 },
}

/// Identifier tying a [`ModalState`] to the domain it was built on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct DomainId(pub u64);

/// Axis wavenumbers of a mode. `y` is `None` on intervals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ModeIndex {
    pub x: usize,
    pub y: Option<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralDomain {
    geometry: Geometry,
    modes_per_axis: usize,
    modes: Vec<ModeIndex>,
    eigenvalues: Vec<f64>,
    poincare_constant: f64,
    id: DomainId,
}

impl SpectralDomain {
    /// Builds the truncated eigenbasis. For rectangles `mode_count` is per
    /// axis, giving `mode_count²` flattened modes.
    pub fn new(geometry: Geometry, mode_count: usize) -> Result<Self> {
        if mode_count == 0 {
            return Err(Error::InvalidConfiguration(
                "mode count must be at least 1".into(),
            ));
        }
        let lengths_ok = match geometry {
            Geometry::Interval { length } => length.is_finite() && length > 0.0,
            Geometry::Rectangle { lx, ly } => {
                lx.is_finite() && ly.is_finite() && lx > 0.0 && ly > 0.0
            }
        };
        if !lengths_ok {
            return Err(Error::InvalidConfiguration(format!(
                "domain lengths must be positive and finite: {geometry:?}"
            )));
        }

        let mut pairs: Vec<(ModeIndex, f64)> = match geometry {
            Geometry::Interval { length } => (1..=mode_count)
                .map(|k| (ModeIndex { x: k, y: None }, axis_eigenvalue(k, length)))
                .collect(),
            Geometry::Rectangle { lx, ly } => {
                let mut v = Vec::with_capacity(mode_count * mode_count);
                for j in 1..=mode_count {
                    for k in 1..=mode_count {
                        v.push((
                            ModeIndex { x: j, y: Some(k) },
                            axis_eigenvalue(j, lx) + axis_eigenvalue(k, ly),
                        ));
                    }
                }
                v
            }
        };
        // stable: ties stay in (j, k) order
        pairs.sort_by(|a, b| a.1.total_cmp(&b.1));

        let (modes, eigenvalues): (Vec<_>, Vec<_>) = pairs.into_iter().unzip();
        let poincare_constant = 1.0 / eigenvalues[0];
        let id = domain_id(&geometry, mode_count);
        Ok(Self {
            geometry,
            modes_per_axis: mode_count,
            modes,
            eigenvalues,
            poincare_constant,
            id,
        })
    }

    pub fn interval(length: f64, mode_count: usize) -> Result<Self> {
        Self::new(Geometry::Interval { length }, mode_count)
    }

    pub fn rectangle(lx: f64, ly: f64, modes_per_axis: usize) -> Result<Self> {
        Self::new(Geometry::Rectangle { lx, ly }, modes_per_axis)
    }

    pub fn geometry(&self) -> Geometry {
        self.geometry
    }

    /// Number of flattened modes `m`.
    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn modes_per_axis(&self) -> usize {
        self.modes_per_axis
    }

    /// Eigenvalues `μ_1 ≤ … ≤ μ_m` of `-Δ`.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn modes(&self) -> &[ModeIndex] {
        &self.modes
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues.last().expect("domain has at least one mode")
    }

    /// `λ₁ = 1/μ_1`, the constant in `‖w‖² ≤ λ₁‖∇w‖²`.
    pub fn poincare_constant(&self) -> f64 {
        self.poincare_constant
    }

    pub fn id(&self) -> DomainId {
        self.id
    }

    pub fn zero_state(&self) -> ModalState {
        ModalState::zeros(self)
    }

    /// Value of the `i`-th (0-based, flattened) normalized eigenfunction.
    pub fn eigenfunction(&self, i: usize, x: f64, y: f64) -> f64 {
        let mode = self.modes[i];
        match self.geometry {
            Geometry::Interval { length } => axis_function(mode.x, length, x),
            Geometry::Rectangle { lx, ly } => {
                axis_function(mode.x, lx, x) * axis_function(mode.y.unwrap_or(1), ly, y)
            }
        }
    }

    /// Projects `(u₀, u₁)` onto the eigenbasis.
    pub fn project(&self, u0: &InitialData, u1: &InitialData) -> Result<ModalState> {
        let a = self.project_one(u0)?;
        let b = self.project_one(u1)?;
        ModalState::from_parts(self, a, b)
    }

    /// L² coefficients `(w, ω_i)` of a single datum.
    pub fn project_one(&self, data: &InitialData) -> Result<Vec<f64>> {
        let m = self.len();
        match data {
            InitialData::Zero => Ok(vec![0.0; m]),
            InitialData::SingleMode { index, amplitude } => {
                self.mode_coefficients(&[(*index, *amplitude)])
            }
            InitialData::ModeSum(terms) => self.mode_coefficients(terms),
            InitialData::Profile(profile) => self.project_profile(profile),
        }
    }

    fn mode_coefficients(&self, terms: &[(usize, f64)]) -> Result<Vec<f64>> {
        let mut c = vec![0.0; self.len()];
        for &(index, amplitude) in terms {
            if index == 0 || index > self.len() {
                return Err(Error::InvalidConfiguration(format!(
                    "mode index {index} outside 1..={}",
                    self.len()
                )));
            }
            if !amplitude.is_finite() {
                return Err(Error::InvalidData(format!(
                    "non-finite amplitude for mode {index}"
                )));
            }
            c[index - 1] += amplitude;
        }
        Ok(c)
    }

    fn project_profile(&self, profile: &Profile) -> Result<Vec<f64>> {
        let (start, cap) = match self.geometry {
            Geometry::Interval { .. } => ((2 * self.modes_per_axis).max(4), MAX_PANELS_INTERVAL),
            Geometry::Rectangle { .. } => ((2 * self.modes_per_axis).max(4), MAX_PANELS_RECTANGLE),
        };
        let mut panels = start;
        let mut previous = self.profile_quadrature(profile, panels)?;
        loop {
            let next_panels = panels * 2;
            let current = self.profile_quadrature(profile, next_panels)?;
            let scale = current.iter().fold(0.0_f64, |s, c| s.max(c.abs()));
            let diff = current
                .iter()
                .zip(&previous)
                .fold(0.0_f64, |s, (c, p)| s.max((c - p).abs()));
            let change = if scale > 0.0 { diff / scale } else { diff };
            if change < PROJECTION_TOL {
                return Ok(current);
            }
            if next_panels >= cap {
                return Err(Error::ProjectionAccuracy {
                    change,
                    panels: next_panels,
                });
            }
            panels = next_panels;
            previous = current;
        }
    }

    fn profile_quadrature(&self, profile: &Profile, panels: usize) -> Result<Vec<f64>> {
        let m = self.len();
        let mut coeffs = vec![0.0; m];
        match self.geometry {
            Geometry::Interval { length } => {
                let (xs, ws) = composite_rule(0.0, length, panels, GAUSS_ORDER);
                for (x, w) in xs.iter().zip(&ws) {
                    let fx = profile.eval(*x, 0.0);
                    if !fx.is_finite() {
                        return Err(Error::InvalidData(format!("profile is not finite at x = {x}")));
                    }
                    let wf = w * fx;
                    for (i, c) in coeffs.iter_mut().enumerate() {
                        *c += wf * axis_function(self.modes[i].x, length, *x);
                    }
                }
            }
            Geometry::Rectangle { lx, ly } => {
                let n = self.modes_per_axis;
                let (xs, wxs) = composite_rule(0.0, lx, panels, GAUSS_ORDER);
                let (ys, wys) = composite_rule(0.0, ly, panels, GAUSS_ORDER);
                let table = |len: f64, pts: &[f64]| -> Vec<Vec<f64>> {
                    (1..=n)
                        .map(|k| pts.iter().map(|&p| axis_function(k, len, p)).collect())
                        .collect()
                };
                let phi = table(lx, &xs);
                let psi = table(ly, &ys);
                // inner[k][ix] = Σ_y w_y f(x, y) ψ_k(y)
                let mut inner = vec![vec![0.0; xs.len()]; n];
                for (ix, x) in xs.iter().enumerate() {
                    for (iy, y) in ys.iter().enumerate() {
                        let f = profile.eval(*x, *y);
                        if !f.is_finite() {
                            return Err(Error::InvalidData(format!(
                                "profile is not finite at ({x}, {y})"
                            )));
                        }
                        let wf = wys[iy] * f;
                        for k in 0..n {
                            inner[k][ix] += wf * psi[k][iy];
                        }
                    }
                }
                for (i, mode) in self.modes.iter().enumerate() {
                    let j = mode.x - 1;
                    let k = mode.y.unwrap_or(1) - 1;
                    coeffs[i] = (0..xs.len())
                        .map(|ix| wxs[ix] * phi[j][ix] * inner[k][ix])
                        .sum();
                }
            }
        }
        Ok(coeffs)
    }
}

fn axis_eigenvalue(k: usize, length: f64) -> f64 {
    let w = k as f64 * PI / length;
    w * w
}

fn axis_function(k: usize, length: f64, x: f64) -> f64 {
    (2.0 / length).sqrt() * (k as f64 * PI * x / length).sin()
}

fn domain_id(geometry: &Geometry, modes: usize) -> DomainId {
    // FNV-1a over the defining parameters
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    let mut feed = |bytes: &[u8]| {
        for b in bytes {
            h ^= u64::from(*b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    };
    match geometry {
        Geometry::Interval { length } => {
            feed(b"I");
            feed(&length.to_bits().to_le_bytes());
        }
        Geometry::Rectangle { lx, ly } => {
            feed(b"R");
            feed(&lx.to_bits().to_le_bytes());
            feed(&ly.to_bits().to_le_bytes());
        }
    }
    feed(&(modes as u64).to_le_bytes());
    DomainId(h)
}

/// Pointwise profile `w(x, y)`; `y` is ignored on intervals.
#[derive(Clone)]
pub struct Profile(Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>);

impl Profile {
    pub fn new(f: impl Fn(f64, f64) -> f64 + Send + Sync + 'static) -> Self {
        Self(Arc::new(f))
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        (self.0)(x, y)
    }
}

impl fmt::Debug for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Profile(..)")
    }
}

/// Initial displacement or velocity. Mode indices are 1-based positions in
/// the flattened, eigenvalue-sorted mode list.
#[derive(Debug, Clone)]
pub enum InitialData {
    Zero,
    SingleMode { index: usize, amplitude: f64 },
    ModeSum(Vec<(usize, f64)>),
    Profile(Profile),
}
