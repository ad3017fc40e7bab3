//! C ABI over the shadowlab solvers.
//!
//! Objects are opaque handles created by `*_new` functions and released by
//! the matching `*_free`. Every fallible call returns a [`SlStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`sl_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use shadowlab::cli::shadow;
use shadowlab::config::{ExperimentConfig, JumpSpec, ModelSpec};
use shadowlab::shadowing::{delta_for_epsilon_stable, RateBound, RateDirection, ShadowCertificate};
use shadowlab::splitting::{compute_splitting, HyperbolicSplitting, DEFAULT_MARGIN};
use shadowlab::{Error, MatrixSemigroup, Semigroup, Vector};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NotHyperbolic = 4,
    NotCertified = 5,
    InvalidPseudoOrbit = 6,
    NumericalFailure = 7,
    Panic = 8,
}

/// Matrix semigroup `t -> e^{tA}` with a real generator.
pub struct SlSemigroup {
    rows: usize,
    data: Vec<f64>,
    inner: MatrixSemigroup,
}

pub struct SlSplitting {
    inner: HyperbolicSplitting,
}

pub struct SlCertificate {
    inner: ShadowCertificate,
}

/// Constants of a stable/unstable splitting.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct SlSplitConstants {
    pub dim_m: usize,
    pub dim_n: usize,
    pub k_m: f64,
    pub lambda_m: f64,
    pub k_n: f64,
    pub lambda_n: f64,
    pub gap: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> SlStatus {
    match err {
        Error::DimensionMismatch { .. } => SlStatus::DimensionMismatch,
        Error::NotHyperbolic { .. } => SlStatus::NotHyperbolic,
        Error::BoundNotCertified(_) => SlStatus::NotCertified,
        Error::InvalidPseudoOrbit(_) => SlStatus::InvalidPseudoOrbit,
        Error::EigFailure(_) | Error::SingularResolvent(_) => SlStatus::NumericalFailure,
        _ => SlStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (SlStatus, String)>) -> SlStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => SlStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            SlStatus::Panic
        }
    }
}

fn lift(err: Error) -> (SlStatus, String) {
    (status_of(&err), err.to_string())
}

fn null() -> (SlStatus, String) {
    (SlStatus::NullPointer, "null pointer argument".into())
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn sl_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Creates a semigroup from a row-major `rows x rows` real generator.
///
/// # Safety
/// `data` must point to `rows * rows` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_semigroup_new(rows: usize, data: *const f64, out: *mut *mut SlSemigroup) -> SlStatus {
    guard(|| {
        if data.is_null() || out.is_null() {
            return Err(null());
        }
        if rows == 0 {
            return Err((SlStatus::InvalidArgument, "rows must be positive".into()));
        }
        let data = std::slice::from_raw_parts(data, rows * rows).to_vec();
        let inner = MatrixSemigroup::from_real(rows, &data).map_err(lift)?;
        *out = Box::into_raw(Box::new(SlSemigroup { rows, data, inner }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`sl_semigroup_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn sl_semigroup_free(handle: *mut SlSemigroup) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live semigroup handle.
#[no_mangle]
pub unsafe extern "C" fn sl_semigroup_dim(handle: *const SlSemigroup) -> usize {
    handle.as_ref().map(|h| h.rows).unwrap_or(0)
}

/// `out = T(t) x` for a real vector `x` of length `dim`. Writes real and
/// imaginary parts; `out_im` may be null.
///
/// # Safety
/// `x` and `out_re` (and `out_im` when non-null) must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn sl_semigroup_apply(
    handle: *const SlSemigroup,
    t: f64,
    x: *const f64,
    dim: usize,
    out_re: *mut f64,
    out_im: *mut f64,
) -> SlStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(null)?;
        if x.is_null() || out_re.is_null() {
            return Err(null());
        }
        if dim != h.rows {
            return Err(lift(Error::DimensionMismatch {
                expected: h.rows,
                got: dim,
            }));
        }
        let v = Vector::from_real(std::slice::from_raw_parts(x, dim));
        let y = h.inner.apply(t, &v).map_err(lift)?;
        for (i, z) in y.coords().iter().enumerate() {
            *out_re.add(i) = z.re;
            if !out_im.is_null() {
                *out_im.add(i) = z.im;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `handle` must be a live semigroup handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_splitting_new(handle: *const SlSemigroup, out: *mut *mut SlSplitting) -> SlStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let inner = compute_splitting(&h.inner, None, DEFAULT_MARGIN).map_err(lift)?;
        *out = Box::into_raw(Box::new(SlSplitting { inner }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`sl_splitting_new`], freed once.
#[no_mangle]
pub unsafe extern "C" fn sl_splitting_free(handle: *mut SlSplitting) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live splitting handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_splitting_constants(handle: *const SlSplitting, out: *mut SlSplitConstants) -> SlStatus {
    guard(|| {
        let s = &handle.as_ref().ok_or_else(null)?.inner;
        let out = out.as_mut().ok_or_else(null)?;
        *out = SlSplitConstants {
            dim_m: s.dim_m,
            dim_n: s.dim_n,
            k_m: s.k_m,
            lambda_m: s.lambda_m,
            k_n: s.k_n,
            lambda_n: s.lambda_n,
            gap: s.gap,
        };
        Ok(())
    })
}

/// `δ` and `R` for a forward-contraction bound `K e^{-λt}`.
///
/// # Safety
/// `delta` and `r` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sl_delta_for_epsilon_stable(
    k: f64,
    lambda: f64,
    epsilon: f64,
    r_min: f64,
    delta: *mut f64,
    r: *mut f64,
) -> SlStatus {
    guard(|| {
        if delta.is_null() || r.is_null() {
            return Err(null());
        }
        let bound = RateBound::new(k, lambda, RateDirection::ForwardContraction).map_err(lift)?;
        let p = delta_for_epsilon_stable(&bound, epsilon, r_min).map_err(lift)?;
        *delta = p.delta;
        *r = p.r;
        Ok(())
    })
}

/// Generates a seeded pseudo-orbit of `n_legs` legs sized for `epsilon` and
/// runs the matching solver. `rho` in `(0, 1)` gives decaying jumps
/// `δ ρ^i`; any other value gives constant jumps.
///
/// # Safety
/// `handle` must be a live semigroup handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_shadow(
    handle: *const SlSemigroup,
    epsilon: f64,
    n_legs: usize,
    rho: f64,
    seed: u64,
    out: *mut *mut SlCertificate,
) -> SlStatus {
    guard(|| {
        let h = handle.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let mut cfg = ExperimentConfig::with_model(ModelSpec::Matrix {
            rows: h.rows,
            data: h.data.clone(),
        });
        cfg.epsilon = epsilon;
        cfg.orbit_length = n_legs;
        cfg.seed = seed;
        if rho > 0.0 && rho < 1.0 {
            cfg.jumps = JumpSpec::Decaying { scale: 1.0, rho };
        }
        cfg.validate().map_err(lift)?;
        let run = shadow(&cfg).map_err(lift)?;
        *out = Box::into_raw(Box::new(SlCertificate {
            inner: run.certificate,
        }));
        Ok(())
    })
}

/// # Safety
/// `handle` must be null or come from [`sl_shadow`], freed once.
#[no_mangle]
pub unsafe extern "C" fn sl_certificate_free(handle: *mut SlCertificate) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Sup error; NaN for a null handle.
///
/// # Safety
/// `handle` must be null or a live certificate handle.
#[no_mangle]
pub unsafe extern "C" fn sl_certificate_sup_error(handle: *const SlCertificate) -> f64 {
    handle.as_ref().map(|c| c.inner.sup_error).unwrap_or(f64::NAN)
}

/// Sup over the last quarter of the samples; NaN for a null handle.
///
/// # Safety
/// `handle` must be null or a live certificate handle.
#[no_mangle]
pub unsafe extern "C" fn sl_certificate_tail_sup(handle: *const SlCertificate) -> f64 {
    handle.as_ref().map(|c| c.inner.tail_sup).unwrap_or(f64::NAN)
}

/// 1 if the ε-bound held on every sample, else 0.
///
/// # Safety
/// `handle` must be null or a live certificate handle.
#[no_mangle]
pub unsafe extern "C" fn sl_certificate_pass_eps(handle: *const SlCertificate) -> i32 {
    handle.as_ref().map(|c| c.inner.pass_eps as i32).unwrap_or(0)
}

/// 1 if the tail bound held, else 0.
///
/// # Safety
/// `handle` must be null or a live certificate handle.
#[no_mangle]
pub unsafe extern "C" fn sl_certificate_pass_limit(handle: *const SlCertificate) -> i32 {
    handle.as_ref().map(|c| c.inner.pass_limit as i32).unwrap_or(0)
}

/// Certificate as a JSON string; release with [`sl_string_free`].
///
/// # Safety
/// `handle` must be a live certificate handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sl_certificate_to_json(handle: *const SlCertificate, out: *mut *mut c_char) -> SlStatus {
    guard(|| {
        let c = handle.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        let text = c.inner.to_json_value().to_string();
        *out = CString::new(text).expect("JSON has no NUL").into_raw();
        Ok(())
    })
}

/// # Safety
/// `s` must be null or come from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn sl_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
