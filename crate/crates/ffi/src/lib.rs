//! C interface to `hinfsf`.
//!
//! Matrices cross the boundary as row-major `double` arrays. Plants and
//! gains are opaque handles owned by the caller and released with the
//! matching `*_free` function. Every fallible call returns a [`HinfStatus`];
//! on failure the message is kept per thread and read with
//! [`hinf_last_error_message`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hinfsf::hinfnorm::{closed_loop, hinf_norm};
use hinfsf::positivity::{disturbance_to_state, internal_positivity};
use hinfsf::riccati::synth_are;
use hinfsf::synthesis::{optimal_gamma, synth_optimal, synth_weighted};
use hinfsf::{CostWeights, Error, GainMatrix, LtiSystem};
use nalgebra::DMatrix;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HinfStatus {
    Ok = 0,
    NullPointer = 1,
    /// Input rejected: bad dimensions, not symmetric, not Hurwitz, bad weights.
    InvalidInput = 2,
    /// A numeric routine failed on valid input.
    NumericFailure = 3,
    BufferTooSmall = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

/// Opaque plant `dx/dt = a x + b u + w` with `a` symmetric Hurwitz.
pub struct HinfSystem(LtiSystem);

/// Opaque static feedback gain `u = l x`.
pub struct HinfGain(GainMatrix);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn fail(status: HinfStatus, msg: impl Into<String>) -> HinfStatus {
    set_error(msg);
    status
}

fn from_error(e: Error) -> HinfStatus {
    let status = if e.is_validation() {
        HinfStatus::InvalidInput
    } else {
        HinfStatus::NumericFailure
    };
    fail(status, e.to_string())
}

fn guard(f: impl FnOnce() -> HinfStatus) -> HinfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == HinfStatus::Ok {
                LAST_ERROR.with(|e| *e.borrow_mut() = None);
            }
            status
        }
        Err(_) => fail(HinfStatus::Internal, "internal panic"),
    }
}

/// # Safety
/// `data` must point to `rows * cols` readable doubles.
unsafe fn read_matrix(data: *const f64, rows: usize, cols: usize) -> DMatrix<f64> {
    if rows * cols == 0 {
        return DMatrix::zeros(rows, cols);
    }
    DMatrix::from_row_slice(rows, cols, std::slice::from_raw_parts(data, rows * cols))
}

macro_rules! non_null {
    ($($p:expr),+) => {
        $(if $p.is_null() {
            return fail(HinfStatus::NullPointer, concat!("null pointer: ", stringify!($p)));
        })+
    };
}

/// Build a plant from row-major `a` (n x n) and `b` (n x m).
///
/// # Safety
/// `a` and `b` must point to `n * n` and `n * m` doubles; `out` must be
/// writable. `b` may be null when `m == 0`.
#[no_mangle]
pub unsafe extern "C" fn hinf_system_new(
    a: *const f64,
    n: usize,
    b: *const f64,
    m: usize,
    out: *mut *mut HinfSystem,
) -> HinfStatus {
    guard(|| {
        non_null!(a, out);
        if m > 0 {
            non_null!(b);
        }
        let (a, b) = (read_matrix(a, n, n), read_matrix(b, n, m));
        match LtiSystem::new(a, b) {
            Ok(sys) => {
                *out = Box::into_raw(Box::new(HinfSystem(sys)));
                HinfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `sys` must come from [`hinf_system_new`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hinf_system_free(sys: *mut HinfSystem) {
    if !sys.is_null() {
        drop(Box::from_raw(sys));
    }
}

/// # Safety
/// `sys` must be a live handle; `n` and `m` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hinf_system_dims(
    sys: *const HinfSystem,
    n: *mut usize,
    m: *mut usize,
) -> HinfStatus {
    guard(|| {
        non_null!(sys, n, m);
        *n = (*sys).0.n();
        *m = (*sys).0.m();
        HinfStatus::Ok
    })
}

/// Smallest achievable closed-loop H-infinity norm over static state feedback.
///
/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hinf_optimal_gamma(sys: *const HinfSystem, out: *mut f64) -> HinfStatus {
    guard(|| {
        non_null!(sys, out);
        *out = optimal_gamma(&(*sys).0);
        HinfStatus::Ok
    })
}

unsafe fn emit_gain(result: hinfsf::Result<GainMatrix>, out: *mut *mut HinfGain) -> HinfStatus {
    match result {
        Ok(g) => {
            *out = Box::into_raw(Box::new(HinfGain(g)));
            HinfStatus::Ok
        }
        Err(e) => from_error(e),
    }
}

/// The optimal gain `b^T a^{-1}`.
///
/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hinf_synth_optimal(
    sys: *const HinfSystem,
    out: *mut *mut HinfGain,
) -> HinfStatus {
    guard(|| {
        non_null!(sys, out);
        emit_gain(synth_optimal(&(*sys).0), out)
    })
}

/// The weighted gain `r^{-1} b^T q a^{-1}`; `q` is n x n and `r` is m x m,
/// both row-major, symmetric positive definite.
///
/// # Safety
/// `q` and `r` must point to `n * n` and `m * m` doubles.
#[no_mangle]
pub unsafe extern "C" fn hinf_synth_weighted(
    sys: *const HinfSystem,
    q: *const f64,
    r: *const f64,
    pd_tol: f64,
    out: *mut *mut HinfGain,
) -> HinfStatus {
    guard(|| {
        non_null!(sys, q, r, out);
        let sys = &(*sys).0;
        let w = match CostWeights::new(
            read_matrix(q, sys.n(), sys.n()),
            read_matrix(r, sys.m(), sys.m()),
            pd_tol,
        ) {
            Ok(w) => w,
            Err(e) => return from_error(e),
        };
        emit_gain(synth_weighted(sys, &w, pd_tol), out)
    })
}

/// Riccati-based gain from a gamma iteration with relative tolerance
/// `gamma_tol`. `achieved_gamma` may be null.
///
/// # Safety
/// `sys` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hinf_synth_are(
    sys: *const HinfSystem,
    gamma_tol: f64,
    out: *mut *mut HinfGain,
    achieved_gamma: *mut f64,
) -> HinfStatus {
    guard(|| {
        non_null!(sys, out);
        match synth_are(&(*sys).0, gamma_tol) {
            Ok(are) => {
                if !achieved_gamma.is_null() {
                    *achieved_gamma = are.achieved_gamma;
                }
                emit_gain(Ok(are.gain), out)
            }
            Err(e) => from_error(e),
        }
    })
}

/// # Safety
/// `gain` must come from a synthesis call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn hinf_gain_free(gain: *mut HinfGain) {
    if !gain.is_null() {
        drop(Box::from_raw(gain));
    }
}

/// # Safety
/// `gain` must be a live handle; `rows` and `cols` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hinf_gain_dims(
    gain: *const HinfGain,
    rows: *mut usize,
    cols: *mut usize,
) -> HinfStatus {
    guard(|| {
        non_null!(gain, rows, cols);
        *rows = (*gain).0.l.nrows();
        *cols = (*gain).0.l.ncols();
        HinfStatus::Ok
    })
}

/// Copy the gain row-major into `buf`, which holds `len` doubles.
///
/// # Safety
/// `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn hinf_gain_copy(
    gain: *const HinfGain,
    buf: *mut f64,
    len: usize,
) -> HinfStatus {
    guard(|| {
        non_null!(gain, buf);
        let l = &(*gain).0.l;
        if len < l.len() {
            return fail(
                HinfStatus::BufferTooSmall,
                format!("gain has {} entries, buffer holds {len}", l.len()),
            );
        }
        let dst = std::slice::from_raw_parts_mut(buf, l.len());
        for (k, v) in l.transpose().iter().enumerate() {
            dst[k] = *v;
        }
        HinfStatus::Ok
    })
}

/// H-infinity norm from `w` to `(x, u)` under `u = l x`.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hinf_closed_loop_norm(
    sys: *const HinfSystem,
    gain: *const HinfGain,
    out: *mut f64,
) -> HinfStatus {
    guard(|| {
        non_null!(sys, gain, out);
        match closed_loop(&(*sys).0, &(*gain).0).and_then(|ss| hinf_norm(&ss)) {
            Ok(r) => {
                *out = r.gamma;
                HinfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Whether the loop `dx/dt = (a + b l) x + w` is internally positive.
///
/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hinf_closed_loop_positive(
    sys: *const HinfSystem,
    gain: *const HinfGain,
    tol: f64,
    out: *mut bool,
) -> HinfStatus {
    guard(|| {
        non_null!(sys, gain, out);
        match disturbance_to_state(&(*sys).0, &(*gain).0.l)
            .and_then(|ss| internal_positivity(&ss, tol))
        {
            Ok(c) => {
                *out = c.verdict;
                HinfStatus::Ok
            }
            Err(e) => from_error(e),
        }
    })
}

/// Copy the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`). Returns the full message length
/// excluding the terminator, or 0 when there is none. `buf` may be null to
/// query the length.
///
/// # Safety
/// `buf` must point to `len` writable bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn hinf_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let k = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, k);
            *buf.add(k) = 0;
        }
        bytes.len()
    })
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn hinf_status_name(status: HinfStatus) -> *const c_char {
    let s: &'static [u8] = match status {
        HinfStatus::Ok => b"ok\0",
        HinfStatus::NullPointer => b"null pointer\0",
        HinfStatus::InvalidInput => b"invalid input\0",
        HinfStatus::NumericFailure => b"numeric failure\0",
        HinfStatus::BufferTooSmall => b"buffer too small\0",
        HinfStatus::Internal => b"internal error\0",
    };
    s.as_ptr().cast()
}
