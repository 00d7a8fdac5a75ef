//! C ABI over the grnscale toolkit.
//!
//! Conventions:
//! - model parameters live behind an opaque handle created by
//!   [`grnscale_params_new`] and released by [`grnscale_params_free`];
//! - every fallible call returns a [`GrnScaleStatus`] and writes results
//!   through out-pointers, which are left untouched on failure;
//! - panics never cross the boundary (they map to `GRN_SCALE_STATUS_PANIC`).
//!
//! The matching header is generated into `include/grnscale.h` at build time.

use grnscale::equilibria::solve_equilibrium;
use grnscale::model::{hill_plus, ModelParams};
use grnscale::pwl::{poincare_derivatives_at_one, poincare_map};
use grnscale::reduction::{alpha, mu_hopf};
use grnscale::sim::{simulate_to_attractor, AttractorVerdict, SystemKind};
use grnscale::Error;
use std::ffi::{c_char, c_double};
use std::panic::{catch_unwind, AssertUnwindSafe};

/// Status code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrnScaleStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DomainError = 3,
    NoConvergence = 4,
    NumericFailure = 5,
    Panic = 6,
}

/// Attractor classification returned by `grnscale_simulate_verdict`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GrnScaleVerdict {
    Equilibrium = 0,
    LimitCycle = 1,
    Undecided = 2,
}

/// Opaque parameter handle.
pub struct GrnScaleParams {
    inner: ModelParams,
}

fn status_of(err: &Error) -> GrnScaleStatus {
    match err {
        Error::InvalidParams(_) => GrnScaleStatus::InvalidArgument,
        Error::Domain(_) | Error::Existence(_) | Error::WrongSide(_) | Error::Boundary(_) => {
            GrnScaleStatus::DomainError
        }
        Error::NonConvergence { .. }
        | Error::RootNotBracketed(_)
        | Error::StepSizeUnderflow { .. } => GrnScaleStatus::NoConvergence,
        _ => GrnScaleStatus::NumericFailure,
    }
}

fn guarded(f: impl FnOnce() -> GrnScaleStatus) -> GrnScaleStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(GrnScaleStatus::Panic)
}

/// Create a parameter handle. On success writes the new handle into `out`
/// and returns `OK`; the handle must be released with
/// [`grnscale_params_free`].
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn grnscale_params_new(
    gamma: c_double,
    delta: c_double,
    xi_a: c_double,
    xi_b: c_double,
    sigma: c_double,
    eps: c_double,
    out: *mut *mut GrnScaleParams,
) -> GrnScaleStatus {
    if out.is_null() {
        return GrnScaleStatus::NullPointer;
    }
    guarded(|| match ModelParams::new(gamma, delta, xi_a, xi_b, sigma, eps) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(GrnScaleParams { inner }));
            GrnScaleStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// Release a handle created by [`grnscale_params_new`]. A null pointer is a
/// no-op.
///
/// # Safety
/// `params` must be null or a pointer obtained from
/// [`grnscale_params_new`] that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn grnscale_params_free(params: *mut GrnScaleParams) {
    if !params.is_null() {
        drop(Box::from_raw(params));
    }
}

unsafe fn deref<'a>(params: *const GrnScaleParams) -> Option<&'a ModelParams> {
    params.as_ref().map(|p| &p.inner)
}

/// The Hopf-ray coefficient `alpha = gamma (1 + delta) / (delta (1 + gamma))`.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn grnscale_alpha(
    params: *const GrnScaleParams,
    out: *mut c_double,
) -> GrnScaleStatus {
    let (Some(p), false) = (deref(params), out.is_null()) else {
        return GrnScaleStatus::NullPointer;
    };
    guarded(|| {
        *out = alpha(p);
        GrnScaleStatus::Ok
    })
}

/// Increasing Hill function `p^n / (p^n + theta^n)`.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn grnscale_hill_plus(
    p: c_double,
    theta: c_double,
    n: c_double,
    out: *mut c_double,
) -> GrnScaleStatus {
    if out.is_null() {
        return GrnScaleStatus::NullPointer;
    }
    guarded(|| match hill_plus(p, theta, n) {
        Ok(v) => {
            *out = v;
            GrnScaleStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// The Hopf threshold `mu_Hopf(sigma)` at the handle's `(gamma, delta,
/// xi_a, xi_b)`.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn grnscale_mu_hopf(
    params: *const GrnScaleParams,
    sigma: c_double,
    out: *mut c_double,
) -> GrnScaleStatus {
    let (Some(p), false) = (deref(params), out.is_null()) else {
        return GrnScaleStatus::NullPointer;
    };
    guarded(|| match mu_hopf(p, sigma) {
        Ok(v) => {
            *out = v;
            GrnScaleStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// Solve the unique equilibrium. Writes `(r_a, r_b, p_a, p_b)` into
/// `out_state` and the eigenvalues of the Jacobian into `out_eig_re` /
/// `out_eig_im` (sorted by descending real part).
///
/// # Safety
/// All pointers must be valid; the arrays must have room for 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn grnscale_solve_equilibrium(
    params: *const GrnScaleParams,
    out_state: *mut c_double,
    out_eig_re: *mut c_double,
    out_eig_im: *mut c_double,
) -> GrnScaleStatus {
    let Some(p) = deref(params) else {
        return GrnScaleStatus::NullPointer;
    };
    if out_state.is_null() || out_eig_re.is_null() || out_eig_im.is_null() {
        return GrnScaleStatus::NullPointer;
    }
    guarded(|| match solve_equilibrium(p) {
        Ok(eq) => {
            for (k, (&s, l)) in eq.state.to_array().iter().zip(&eq.eigenvalues).enumerate() {
                *out_state.add(k) = s;
                *out_eig_re.add(k) = l.re;
                *out_eig_im.add(k) = l.im;
            }
            GrnScaleStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// Closed-form first-return map of the switching-limit system on
/// `{p_a = 1, p_b > 1}`.
///
/// # Safety
/// `params` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn grnscale_poincare_map(
    params: *const GrnScaleParams,
    p_b0: c_double,
    out: *mut c_double,
) -> GrnScaleStatus {
    let (Some(p), false) = (deref(params), out.is_null()) else {
        return GrnScaleStatus::NullPointer;
    };
    guarded(|| match poincare_map(p_b0, p) {
        Ok(v) => {
            *out = v;
            GrnScaleStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// First and second derivatives of the return map at the corner value 1.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn grnscale_poincare_derivatives(
    params: *const GrnScaleParams,
    out_first: *mut c_double,
    out_second: *mut c_double,
) -> GrnScaleStatus {
    let Some(p) = deref(params) else {
        return GrnScaleStatus::NullPointer;
    };
    if out_first.is_null() || out_second.is_null() {
        return GrnScaleStatus::NullPointer;
    }
    guarded(|| match poincare_derivatives_at_one(p) {
        Ok((d1, d2)) => {
            *out_first = d1;
            *out_second = d2;
            GrnScaleStatus::Ok
        }
        Err(e) => status_of(&e),
    })
}

/// Integrate the full system from `y0[4]` to `t_end` at tolerance `tol` and
/// classify the attractor. `out_period` and `out_amplitude` are zero unless
/// the verdict is a limit cycle.
///
/// # Safety
/// All pointers must be valid; `y0` must point to 4 doubles.
#[no_mangle]
pub unsafe extern "C" fn grnscale_simulate_verdict(
    params: *const GrnScaleParams,
    y0: *const c_double,
    t_end: c_double,
    tol: c_double,
    out_verdict: *mut GrnScaleVerdict,
    out_period: *mut c_double,
    out_amplitude: *mut c_double,
) -> GrnScaleStatus {
    let Some(p) = deref(params) else {
        return GrnScaleStatus::NullPointer;
    };
    if y0.is_null() || out_verdict.is_null() || out_period.is_null() || out_amplitude.is_null() {
        return GrnScaleStatus::NullPointer;
    }
    let y = std::slice::from_raw_parts(y0, 4).to_vec();
    guarded(|| {
        let q = solve_equilibrium(p)
            .ok()
            .filter(|eq| eq.max_re() < 0.0)
            .map(|eq| eq.state.to_array().to_vec());
        match simulate_to_attractor(SystemKind::Full, p, &y, t_end, tol, q) {
            Ok((_, verdict)) => {
                let (v, period, amp) = match verdict {
                    AttractorVerdict::Equilibrium { .. } => {
                        (GrnScaleVerdict::Equilibrium, 0.0, 0.0)
                    }
                    AttractorVerdict::LimitCycle { period, amplitude } => (
                        GrnScaleVerdict::LimitCycle,
                        period,
                        amplitude.0.max(amplitude.1),
                    ),
                    AttractorVerdict::Undecided { .. } => (GrnScaleVerdict::Undecided, 0.0, 0.0),
                };
                *out_verdict = v;
                *out_period = period;
                *out_amplitude = amp;
                GrnScaleStatus::Ok
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn grnscale_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn grnscale_status_message(status: GrnScaleStatus) -> *const c_char {
    let s: &'static str = match status {
        GrnScaleStatus::Ok => "ok\0",
        GrnScaleStatus::NullPointer => "null pointer argument\0",
        GrnScaleStatus::InvalidArgument => "invalid argument\0",
        GrnScaleStatus::DomainError => "argument outside the operation's domain\0",
        GrnScaleStatus::NoConvergence => "iteration did not converge\0",
        GrnScaleStatus::NumericFailure => "numeric failure\0",
        GrnScaleStatus::Panic => "internal panic\0",
    };
    s.as_ptr() as *const c_char
}
