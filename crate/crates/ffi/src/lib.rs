//! C ABI over `kvwave`.
//!
//! Domains and traces are opaque heap handles released with their `_free`
//! functions. Every call returns a [`KvStatus`]; on failure the message is
//! available from [`kv_last_error_message`] on the same thread. Panics never
//! cross the boundary.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use kvwave::diagnostics::{decay_constant, EnergyTrace};
use kvwave::evolution::{evolve, IntegratorSpec, Method, Model};
use kvwave::resolvent::{solve_resolvent, ResolventProblem};
use kvwave::{Error, ModalState, SpectralDomain};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KvStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotConverged = 3,
    BlowUp = 4,
    DomainMismatch = 5,
    InsufficientHorizon = 6,
    BufferTooSmall = 7,
    Io = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KvModel {
    KelvinVoigt = 0,
    BtPrototype = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KvMethod {
    DirectRk4 = 0,
    ImplicitEuler = 1,
    YosidaRk4 = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KvColumn {
    Time = 0,
    EnergyWeak = 1,
    EnergyRegular = 2,
    Chi = 3,
    Grad2UtMu2 = 4,
}

/// Integrator settings; `alpha` is read only by `YosidaRk4`, and
/// `resolvent_tol <= 0` selects the default.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KvIntegrator {
    pub method: KvMethod,
    pub alpha: f64,
    pub dt: f64,
    pub t_end: f64,
    pub sample_stride: usize,
    pub resolvent_tol: f64,
}

/// Opaque spectral domain.
pub struct KvDomain(SpectralDomain);

/// Opaque energy trace.
pub struct KvTrace(EnergyTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    let c = CString::new(msg).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn status_of(err: &Error) -> KvStatus {
    match err {
        Error::NotConverged { .. } => KvStatus::NotConverged,
        Error::BlowUp { .. } => KvStatus::BlowUp,
        Error::DomainMismatch => KvStatus::DomainMismatch,
        Error::InsufficientHorizon { .. } => KvStatus::InsufficientHorizon,
        Error::Io(_) => KvStatus::Io,
        _ => KvStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), KvStatus>) -> KvStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KvStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            KvStatus::Panic
        }
    }
}

fn fail(err: Error) -> KvStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(what: &str) -> KvStatus {
    set_error(format!("null pointer: {what}"));
    KvStatus::NullPointer
}

unsafe fn slice_in<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], KvStatus> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

unsafe fn copy_out(src: &[f64], buf: *mut f64, cap: usize, out_len: *mut usize) -> Result<(), KvStatus> {
    if !out_len.is_null() {
        *out_len = src.len();
    }
    if cap < src.len() {
        set_error(format!("buffer holds {cap} values, need {}", src.len()));
        return Err(KvStatus::BufferTooSmall);
    }
    if src.is_empty() {
        return Ok(());
    }
    if buf.is_null() {
        return Err(null("buffer"));
    }
    ptr::copy_nonoverlapping(src.as_ptr(), buf, src.len());
    Ok(())
}

unsafe fn domain_ref<'a>(d: *const KvDomain) -> Result<&'a SpectralDomain, KvStatus> {
    d.as_ref().map(|d| &d.0).ok_or_else(|| null("domain"))
}

unsafe fn trace_ref<'a>(t: *const KvTrace) -> Result<&'a EnergyTrace, KvStatus> {
    t.as_ref().map(|t| &t.0).ok_or_else(|| null("trace"))
}

unsafe fn store_domain(d: kvwave::Result<SpectralDomain>, out: *mut *mut KvDomain) -> Result<(), KvStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = ptr::null_mut();
    let d = d.map_err(fail)?;
    *out = Box::into_raw(Box::new(KvDomain(d)));
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next `kv_*` call on the same thread.
#[no_mangle]
pub extern "C" fn kv_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Interval `(0, length)` with `modes` modes.
#[no_mangle]
pub unsafe extern "C" fn kv_domain_interval(length: f64, modes: usize, out: *mut *mut KvDomain) -> KvStatus {
    guard(|| store_domain(SpectralDomain::interval(length, modes), out))
}

/// Rectangle `(0, lx) × (0, ly)` with `modes_per_axis²` modes.
#[no_mangle]
pub unsafe extern "C" fn kv_domain_rectangle(
    lx: f64,
    ly: f64,
    modes_per_axis: usize,
    out: *mut *mut KvDomain,
) -> KvStatus {
    guard(|| store_domain(SpectralDomain::rectangle(lx, ly, modes_per_axis), out))
}

#[no_mangle]
pub unsafe extern "C" fn kv_domain_free(domain: *mut KvDomain) {
    if !domain.is_null() {
        drop(Box::from_raw(domain));
    }
}

/// Number of modes, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn kv_domain_len(domain: *const KvDomain) -> usize {
    domain.as_ref().map_or(0, |d| d.0.len())
}

#[no_mangle]
pub unsafe extern "C" fn kv_domain_eigenvalues(
    domain: *const KvDomain,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> KvStatus {
    guard(|| copy_out(domain_ref(domain)?.eigenvalues(), buf, cap, out_len))
}

#[no_mangle]
pub unsafe extern "C" fn kv_domain_poincare_constant(domain: *const KvDomain, out: *mut f64) -> KvStatus {
    guard(|| {
        let d = domain_ref(domain)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = d.poincare_constant();
        Ok(())
    })
}

/// Solves `(I - αA)(u, v) = (f, g)`. `f`, `g`, `u_out`, `v_out` hold
/// `kv_domain_len` values; `chi_out` may be null.
#[no_mangle]
pub unsafe extern "C" fn kv_solve_resolvent(
    domain: *const KvDomain,
    alpha: f64,
    f: *const f64,
    g: *const f64,
    tol: f64,
    u_out: *mut f64,
    v_out: *mut f64,
    chi_out: *mut f64,
) -> KvStatus {
    guard(|| {
        let d = domain_ref(domain)?;
        let n = d.len();
        let f = slice_in(f, n, "f")?;
        let g = slice_in(g, n, "g")?;
        if u_out.is_null() || v_out.is_null() {
            return Err(null("u_out/v_out"));
        }
        let problem = ResolventProblem::new(alpha, f.to_vec(), g.to_vec());
        let sol = solve_resolvent(d, &problem, tol).map_err(fail)?;
        copy_out(&sol.u, u_out, n, ptr::null_mut())?;
        copy_out(&sol.v, v_out, n, ptr::null_mut())?;
        if let Some(chi) = chi_out.as_mut() {
            *chi = sol.chi_star;
        }
        Ok(())
    })
}

/// Evolves modal data `(a, b)` (each `kv_domain_len` values) and returns the
/// sampled energy trace.
#[no_mangle]
pub unsafe extern "C" fn kv_evolve(
    domain: *const KvDomain,
    model: KvModel,
    integrator: *const KvIntegrator,
    a: *const f64,
    b: *const f64,
    out: *mut *mut KvTrace,
) -> KvStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let d = domain_ref(domain)?;
        let cfg = integrator.as_ref().ok_or_else(|| null("integrator"))?;
        let n = d.len();
        let a = slice_in(a, n, "a")?;
        let b = slice_in(b, n, "b")?;
        let state = ModalState::from_parts(d, a.to_vec(), b.to_vec()).map_err(fail)?;
        let method = match cfg.method {
            KvMethod::DirectRk4 => Method::DirectRk4,
            KvMethod::ImplicitEuler => Method::ImplicitEuler,
            KvMethod::YosidaRk4 => Method::YosidaRk4 { alpha: cfg.alpha },
        };
        let model = match model {
            KvModel::KelvinVoigt => Model::KelvinVoigt,
            KvModel::BtPrototype => Model::BtPrototype,
        };
        let mut spec = IntegratorSpec::new(method, cfg.dt, cfg.t_end, cfg.sample_stride);
        if cfg.resolvent_tol > 0.0 {
            spec.resolvent_tol = cfg.resolvent_tol;
        }
        let trace = evolve(d, &state, model, &spec).map_err(fail)?;
        *out = Box::into_raw(Box::new(KvTrace(trace)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn kv_trace_free(trace: *mut KvTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Number of samples, 0 for a null handle.
#[no_mangle]
pub unsafe extern "C" fn kv_trace_len(trace: *const KvTrace) -> usize {
    trace.as_ref().map_or(0, |t| t.0.len())
}

/// Copies one trace column. With `cap` too small the required length is
/// still written to `out_len` and `KV_STATUS_BUFFER_TOO_SMALL` is returned.
#[no_mangle]
pub unsafe extern "C" fn kv_trace_column(
    trace: *const KvTrace,
    column: KvColumn,
    buf: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> KvStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let col = match column {
            KvColumn::Time => &t.times,
            KvColumn::EnergyWeak => &t.e_weak,
            KvColumn::EnergyRegular => &t.e_regular,
            KvColumn::Chi => &t.chi,
            KvColumn::Grad2UtMu2 => &t.grad2_ut_mu2,
        };
        copy_out(col, buf, cap, out_len)
    })
}

/// Decay constant `C(λ₁, E₀)` of a Kelvin-Voigt trace.
#[no_mangle]
pub unsafe extern "C" fn kv_trace_decay_constant(trace: *const KvTrace, out: *mut f64) -> KvStatus {
    guard(|| {
        let t = trace_ref(trace)?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = decay_constant(t.lambda1, t.e0()).map_err(fail)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn kv_decay_constant(lambda1: f64, e0: f64, out: *mut f64) -> KvStatus {
    guard(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = decay_constant(lambda1, e0).map_err(fail)?;
        Ok(())
    })
}
