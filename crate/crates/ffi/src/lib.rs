//! C ABI over the kacmoment engine.
//!
//! Kernels and measures are opaque heap handles created by the `km_*_new`
//! and `km_*_from_json` functions and released with the matching `_free`.
//! Every fallible call returns a [`KmStatus`]; on failure the message is
//! kept per thread and read with [`km_last_error_message`]. Handles are
//! immutable after creation and may be shared between threads.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use kacmoment::kernels::{potential_density, TransitionKernel};
use kacmoment::measures::{potential_of_measure, RevuzMeasure};
use kacmoment::moments::{kth_moment, MomentRequest};
use kacmoment::quadrature::QuadratureSpec;
use kacmoment::KacError;

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KmStatus {
    Ok = 0,
    /// A point outside the state space.
    Domain = 1,
    InvalidArgument = 2,
    Numeric = 3,
    Infeasible = 4,
    Nonconvergent = 5,
    /// Malformed JSON or an invalid description.
    Config = 6,
    Io = 7,
    NullPointer = 8,
    /// A Rust panic was caught at the boundary.
    Internal = 9,
}

/// Opaque transition kernel.
pub struct KmKernel(TransitionKernel);

/// Opaque Revuz measure.
pub struct KmMeasure(RevuzMeasure);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &KacError) -> KmStatus {
    match e {
        KacError::Domain(_) => KmStatus::Domain,
        KacError::Argument(_) => KmStatus::InvalidArgument,
        KacError::Numeric { .. } => KmStatus::Numeric,
        KacError::Infeasible(_) => KmStatus::Infeasible,
        KacError::Nonconvergent { .. } => KmStatus::Nonconvergent,
        KacError::Config { .. } => KmStatus::Config,
        KacError::Io(_) => KmStatus::Io,
    }
}

enum Fail {
    Kac(KacError),
    Null(&'static str),
}

impl From<KacError> for Fail {
    fn from(e: KacError) -> Self {
        Fail::Kac(e)
    }
}

fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> KmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => KmStatus::Ok,
        Ok(Err(Fail::Kac(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            KmStatus::NullPointer
        }
        Err(_) => {
            set_error("internal error".into());
            KmStatus::Internal
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

unsafe fn write<T>(p: *mut T, v: T, what: &'static str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    p.write(v);
    Ok(())
}

unsafe fn json_str<'a>(p: *const c_char) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null("json"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail::Kac(KacError::config(format!("json is not utf-8: {e}"))))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn km_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn km_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Standard Brownian motion on the line.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn km_kernel_brownian_new(out: *mut *mut KmKernel) -> KmStatus {
    guard(|| write(out, boxed(KmKernel(TransitionKernel::brownian())), "out"))
}

/// Brownian motion with constant drift.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn km_kernel_brownian_drift_new(drift: f64, out: *mut *mut KmKernel) -> KmStatus {
    guard(|| {
        let k = TransitionKernel::brownian_drift(drift)?;
        write(out, boxed(KmKernel(k)), "out")
    })
}

/// Brownian motion reflected at zero.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn km_kernel_reflected_new(out: *mut *mut KmKernel) -> KmStatus {
    guard(|| write(out, boxed(KmKernel(TransitionKernel::reflected_brownian())), "out"))
}

/// Brownian motion killed on leaving `(lower, upper)`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn km_kernel_killed_new(lower: f64, upper: f64, out: *mut *mut KmKernel) -> KmStatus {
    guard(|| {
        let k = TransitionKernel::killed_brownian(lower, upper)?;
        write(out, boxed(KmKernel(k)), "out")
    })
}

/// A kernel from its JSON description, e.g. `{"family":"brownian-drift","drift":1}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn km_kernel_from_json(json: *const c_char, out: *mut *mut KmKernel) -> KmStatus {
    guard(|| {
        let text = json_str(json)?;
        let k: TransitionKernel = serde_json::from_str(text)
            .map_err(|e| KacError::Config { line: Some(e.line()), message: e.to_string() })?;
        let k = TransitionKernel::new(k.family())?;
        write(out, boxed(KmKernel(k)), "out")
    })
}

/// Releases a kernel; null is ignored.
///
/// # Safety
/// `kernel` must come from a `km_kernel_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn km_kernel_free(kernel: *mut KmKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

/// `weight · δ_location`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn km_measure_atom_new(location: f64, weight: f64, out: *mut *mut KmMeasure) -> KmStatus {
    guard(|| {
        if !(location.is_finite() && weight.is_finite() && weight >= 0.0) {
            return Err(KacError::Argument("atom needs a finite location and a nonnegative weight".into()).into());
        }
        write(out, boxed(KmMeasure(RevuzMeasure::atom(location, weight))), "out")
    })
}

/// `c` times Lebesgue measure.
///
/// # Safety
/// `out` must be a valid pointer to writable storage.
#[no_mangle]
pub unsafe extern "C" fn km_measure_lebesgue_new(c: f64, out: *mut *mut KmMeasure) -> KmStatus {
    guard(|| {
        if !(c.is_finite() && c >= 0.0) {
            return Err(KacError::Argument("density constant must be finite and nonnegative".into()).into());
        }
        write(out, boxed(KmMeasure(RevuzMeasure::lebesgue(c))), "out")
    })
}

/// A measure from its JSON description, e.g.
/// `{"density":{"kind":"indicator","lower":0,"upper":1},"atoms":[{"location":0,"weight":1}]}`.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn km_measure_from_json(json: *const c_char, out: *mut *mut KmMeasure) -> KmStatus {
    guard(|| {
        let text = json_str(json)?;
        let mu: RevuzMeasure = serde_json::from_str(text)
            .map_err(|e| KacError::Config { line: Some(e.line()), message: e.to_string() })?;
        write(out, boxed(KmMeasure(mu)), "out")
    })
}

/// Releases a measure; null is ignored.
///
/// # Safety
/// `measure` must come from a `km_measure_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn km_measure_free(measure: *mut KmMeasure) {
    if !measure.is_null() {
        drop(Box::from_raw(measure));
    }
}

/// Transition density `p_t(x, y)`.
///
/// # Safety
/// `kernel` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn km_density(kernel: *const KmKernel, t: f64, x: f64, y: f64, out: *mut f64) -> KmStatus {
    guard(|| {
        let k = &deref(kernel, "kernel")?.0;
        if !(t > 0.0) || !t.is_finite() {
            return Err(KacError::Argument(format!("time must be positive, got {t}")).into());
        }
        k.check_point(x)?;
        k.check_point(y)?;
        write(out, k.density(t, x, y), "out")
    })
}

/// α-potential density `r_α(x, y)`.
///
/// # Safety
/// `kernel` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn km_potential_density(
    kernel: *const KmKernel,
    alpha: f64,
    x: f64,
    y: f64,
    out: *mut f64,
) -> KmStatus {
    guard(|| {
        let k = &deref(kernel, "kernel")?.0;
        write(out, potential_density(k, alpha, x, y)?, "out")
    })
}

/// `U_α μ(x)` with its absolute error estimate.
///
/// # Safety
/// Handles must be live; `value` and `error` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn km_potential_of_measure(
    kernel: *const KmKernel,
    measure: *const KmMeasure,
    alpha: f64,
    x: f64,
    value: *mut f64,
    error: *mut f64,
) -> KmStatus {
    guard(|| {
        let k = &deref(kernel, "kernel")?.0;
        let mu = &deref(measure, "measure")?.0;
        if value.is_null() || error.is_null() {
            return Err(Fail::Null("value/error"));
        }
        let e = potential_of_measure(k, mu, alpha, x)?;
        write(value, e.value, "value")?;
        write(error, e.error, "error")
    })
}

/// `E_x[A_t^k]` for the functional with Revuz measure `measure`, with its
/// error estimate, at default quadrature settings.
///
/// # Safety
/// Handles must be live; `value` and `error` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn km_kth_moment(
    kernel: *const KmKernel,
    measure: *const KmMeasure,
    k: u32,
    x: f64,
    t: f64,
    value: *mut f64,
    error: *mut f64,
) -> KmStatus {
    guard(|| {
        let kern = &deref(kernel, "kernel")?.0;
        let mu = &deref(measure, "measure")?.0;
        if value.is_null() || error.is_null() {
            return Err(Fail::Null("value/error"));
        }
        let req = MomentRequest::power(*kern, mu.clone(), k as usize, x, t);
        let r = kth_moment(&req, &QuadratureSpec::default())?;
        write(value, r.value, "value")?;
        write(error, r.error_estimate, "error")
    })
}
