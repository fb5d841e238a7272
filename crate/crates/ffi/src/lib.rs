//! C ABI over `plankton-lk`.
//!
//! Every entry point returns a [`PlkStatus`]; on failure a message is kept
//! per thread and can be read with [`plk_last_error`]. Objects are opaque
//! handles released with their `*_free` function. Matrices cross the
//! boundary row-major, states as `double[3]` in the order `(x, y, z)`.
//! Panics never unwind into C: they are caught and reported as
//! `PLK_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufWriter;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::ptr;

use plankton_lk::app;
use plankton_lk::certificate::{
    assemble_c, build_certificate_with, check_generic_certificate, CertificateOptions, LkCertificate,
};
use plankton_lk::history::{History, HistoryShape, Table};
use plankton_lk::model::{classify_equilibria, EquilibriumLabel, ModelParams, RawParams};
use plankton_lk::numlin::Mat3;
use plankton_lk::sim::{estimate_solver_error, integrate, strided_indices, Trajectory};
use plankton_lk::spectrum::{lemma_classify, VerdictKind};
use plankton_lk::verify::{check_differential_inequality, check_envelope, check_initial_conditions, CONDITION_NAMES};
use plankton_lk::Error;

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlkStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidParam = 2,
    Domain = 3,
    Inapplicable = 4,
    Unsupported = 5,
    Construction = 6,
    Numerical = 7,
    Integration = 8,
    Dimension = 9,
    Config = 10,
    Io = 11,
    InvalidString = 12,
    OutOfRange = 13,
    Panic = 255,
}

/// Raw model inputs.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PlkParams {
    pub r: f64,
    pub k: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub b1: f64,
    pub b2: f64,
    pub tau1: f64,
    pub tau2: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlkEquilibriumLabel {
    Extinction = 0,
    PhytoOnly = 1,
    PlanktonOnly = 2,
    Coexistence = 3,
}

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PlkEquilibrium {
    pub label: PlkEquilibriumLabel,
    pub state: [f64; 3],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlkVerdict {
    AsymptoticallyStable = 0,
    Unstable = 1,
    DelayDependent = 2,
}

/// Free parameters of the certificate construction.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PlkCertificateOptions {
    pub alpha: f64,
    pub mu_fraction: f64,
    pub m_fraction: f64,
    pub h33_factor: f64,
}

/// Scalar constants of a certificate.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PlkCertificateScalars {
    pub x0: f64,
    pub y0: f64,
    pub alpha: f64,
    pub beta: f64,
    pub m1: f64,
    pub m2: f64,
    pub mu1: f64,
    pub mu2: f64,
    pub h11: f64,
    pub h12: f64,
    pub h22: f64,
    pub h33: f64,
    pub h33_lower_bound: f64,
    pub sigma: f64,
    pub epsilon: f64,
    pub q: f64,
}

/// 3x3 matrices retrievable from a certificate.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlkMatrix {
    A = 0,
    B1 = 1,
    B2 = 2,
    H = 3,
    H1 = 4,
    H2 = 5,
    Htilde1 = 6,
    Htilde2 = 7,
    L = 8,
    R1 = 9,
    R2 = 10,
}

/// Number of admissibility conditions reported by [`plk_theorem_check`].
pub const PLK_CONDITION_COUNT: usize = 5;

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PlkTheoremSummary {
    pub v0: f64,
    /// All conditions hold, so the envelopes apply.
    pub admissible: bool,
    pub lhs: [f64; PLK_CONDITION_COUNT],
    pub rhs: [f64; PLK_CONDITION_COUNT],
    pub margin: [f64; PLK_CONDITION_COUNT],
    pub passed: [bool; PLK_CONDITION_COUNT],
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct PlkEnvelopeSummary {
    pub samples: usize,
    pub tolerance: f64,
    pub solver_error: f64,
    pub worst_margin: [f64; 3],
    pub violations: usize,
    pub strict_violations: usize,
    pub worst_gronwall_margin: f64,
    pub gronwall_violations: usize,
    pub diff_ineq_checked: usize,
    pub diff_ineq_violations: usize,
    pub diff_ineq_worst_slack: f64,
    pub passed: bool,
}

pub struct PlkModel {
    params: ModelParams,
}

pub struct PlkHistory {
    history: History,
}

pub struct PlkCertificate {
    cert: LkCertificate,
}

pub struct PlkTrajectory {
    traj: Trajectory,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure {
    status: PlkStatus,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidParam { .. } => PlkStatus::InvalidParam,
            Error::Domain(_) => PlkStatus::Domain,
            Error::Inapplicable(_) => PlkStatus::Inapplicable,
            Error::Unsupported(_) => PlkStatus::Unsupported,
            Error::Construction(_) => PlkStatus::Construction,
            Error::Numerical(_) => PlkStatus::Numerical,
            Error::Integration { .. } => PlkStatus::Integration,
            Error::Dimension(_) => PlkStatus::Dimension,
            Error::Config(_) => PlkStatus::Config,
            Error::Io(_) => PlkStatus::Io,
        };
        Failure {
            status,
            message: e.to_string(),
        }
    }
}

fn fail(status: PlkStatus, message: impl Into<String>) -> Failure {
    Failure {
        status,
        message: message.into(),
    }
}

fn set_last_error(msg: Option<String>) {
    let c = msg.map(|m| CString::new(m.replace('\0', " ")).unwrap_or_default());
    LAST_ERROR.with(|slot| *slot.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PlkStatus {
    set_last_error(None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PlkStatus::Ok,
        Ok(Err(e)) => {
            set_last_error(Some(e.message));
            e.status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(Some(format!("panic: {msg}")));
            PlkStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Failure> {
    p.as_ref()
        .ok_or_else(|| fail(PlkStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, Failure> {
    p.as_mut()
        .ok_or_else(|| fail(PlkStatus::NullPointer, format!("`{name}` is null")))
}

unsafe fn vec3(p: *const f64, name: &str) -> Result<[f64; 3], Failure> {
    if p.is_null() {
        return Err(fail(PlkStatus::NullPointer, format!("`{name}` is null")));
    }
    Ok([*p, *p.add(1), *p.add(2)])
}

unsafe fn write3(p: *mut f64, v: &[f64; 3], name: &str) -> Result<(), Failure> {
    if p.is_null() {
        return Err(fail(PlkStatus::NullPointer, format!("`{name}` is null")));
    }
    ptr::copy_nonoverlapping(v.as_ptr(), p, 3);
    Ok(())
}

unsafe fn path(p: *const c_char, name: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(fail(PlkStatus::NullPointer, format!("`{name}` is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(PlkStatus::InvalidString, format!("`{name}` is not valid UTF-8")))
}

unsafe fn put_handle<T>(dst: *mut *mut T, value: T, name: &str) -> Result<(), Failure> {
    let slot = out(dst, name)?;
    *slot = Box::into_raw(Box::new(value));
    Ok(())
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map_or(ptr::null_mut(), CString::into_raw)
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn plk_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn plk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn plk_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Validate parameters and create a model.
///
/// # Safety
/// `params` must point to a `PlkParams`; `out` to writable storage.
#[no_mangle]
pub unsafe extern "C" fn plk_model_new(params: *const PlkParams, out: *mut *mut PlkModel) -> PlkStatus {
    guard(|| {
        let p = deref(params, "params")?;
        let params = ModelParams::new(RawParams {
            r: p.r,
            k: p.k,
            c1: p.c1,
            c2: p.c2,
            d1: p.d1,
            d2: p.d2,
            b1: p.b1,
            b2: p.b2,
            tau1: p.tau1,
            tau2: p.tau2,
        })?;
        put_handle(out, PlkModel { params }, "out")
    })
}

/// # Safety
/// `model` must be NULL or a handle from [`plk_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn plk_model_free(model: *mut PlkModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Non-negative equilibria. Writes at most `capacity` entries to `points`
/// (4 always suffice), the total into `count` and the case (1, 2 or 3)
/// into `case_id`. `points` may be NULL when `capacity` is 0.
///
/// # Safety
/// Pointers must be valid for the stated sizes.
#[no_mangle]
pub unsafe extern "C" fn plk_model_equilibria(
    model: *const PlkModel,
    points: *mut PlkEquilibrium,
    capacity: usize,
    count: *mut usize,
    case_id: *mut u8,
) -> PlkStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let set = classify_equilibria(&m.params);
        if capacity > 0 && points.is_null() {
            return Err(fail(PlkStatus::NullPointer, "`points` is null"));
        }
        for (i, e) in set.points.iter().take(capacity).enumerate() {
            let label = match e.label {
                EquilibriumLabel::Extinction => PlkEquilibriumLabel::Extinction,
                EquilibriumLabel::PhytoOnly => PlkEquilibriumLabel::PhytoOnly,
                EquilibriumLabel::PlanktonOnly => PlkEquilibriumLabel::PlanktonOnly,
                EquilibriumLabel::Coexistence => PlkEquilibriumLabel::Coexistence,
            };
            *points.add(i) = PlkEquilibrium { label, state: e.state };
        }
        *out(count, "count")? = set.points.len();
        if !case_id.is_null() {
            *case_id = set.case_id.number();
        }
        Ok(())
    })
}

/// Delay-independent stability verdict for the plankton-only point.
///
/// # Safety
/// `model` must be a live handle; `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_model_verdict(model: *const PlkModel, verdict: *mut PlkVerdict) -> PlkStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let v = lemma_classify(&m.params)?;
        *out(verdict, "verdict")? = match v.kind {
            VerdictKind::AsymptoticallyStable => PlkVerdict::AsymptoticallyStable,
            VerdictKind::Unstable => PlkVerdict::Unstable,
            VerdictKind::DelayDependent => PlkVerdict::DelayDependent,
        };
        Ok(())
    })
}

/// Default certificate options.
#[no_mangle]
pub extern "C" fn plk_certificate_options_default() -> PlkCertificateOptions {
    let o = CertificateOptions::default();
    PlkCertificateOptions {
        alpha: o.alpha,
        mu_fraction: o.mu_fraction,
        m_fraction: o.m_fraction,
        h33_factor: o.h33_factor,
    }
}

/// Build the stability certificate. `options` may be NULL for defaults.
///
/// # Safety
/// `model` must be a live handle; `options` NULL or valid; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_certificate_build(
    model: *const PlkModel,
    options: *const PlkCertificateOptions,
    out: *mut *mut PlkCertificate,
) -> PlkStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let opts = match options.as_ref() {
            None => CertificateOptions::default(),
            Some(o) => CertificateOptions {
                alpha: o.alpha,
                mu_fraction: o.mu_fraction,
                m_fraction: o.m_fraction,
                h33_factor: o.h33_factor,
            },
        };
        let cert = build_certificate_with(&m.params, opts)?;
        put_handle(out, PlkCertificate { cert }, "out")
    })
}

/// # Safety
/// `cert` must be NULL or a live certificate handle.
#[no_mangle]
pub unsafe extern "C" fn plk_certificate_free(cert: *mut PlkCertificate) {
    if !cert.is_null() {
        drop(Box::from_raw(cert));
    }
}

/// # Safety
/// `cert` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_certificate_scalars(
    cert: *const PlkCertificate,
    out: *mut PlkCertificateScalars,
) -> PlkStatus {
    guard(|| {
        let c = &deref(cert, "cert")?.cert;
        *self::out(out, "out")? = PlkCertificateScalars {
            x0: c.lin.x0,
            y0: c.lin.y0,
            alpha: c.alpha,
            beta: c.beta,
            m1: c.m1,
            m2: c.m2,
            mu1: c.mu1,
            mu2: c.mu2,
            h11: c.h11(),
            h12: c.h12(),
            h22: c.h22(),
            h33: c.h33(),
            h33_lower_bound: c.h33_lower_bound,
            sigma: c.sigma,
            epsilon: c.epsilon,
            q: c.q,
        };
        Ok(())
    })
}

/// Copy one 3x3 matrix, row-major, into `out[9]`. `which` is a
/// `PlkMatrix` value.
///
/// # Safety
/// `cert` must be a live handle; `out` must hold 9 doubles.
#[no_mangle]
pub unsafe extern "C" fn plk_certificate_matrix(
    cert: *const PlkCertificate,
    which: u32,
    out: *mut f64,
) -> PlkStatus {
    guard(|| {
        let c = &deref(cert, "cert")?.cert;
        let m: Mat3 = match matrix_id(which)? {
            PlkMatrix::A => c.lin.a,
            PlkMatrix::B1 => c.lin.b1,
            PlkMatrix::B2 => c.lin.b2,
            PlkMatrix::H => c.h,
            PlkMatrix::H1 => c.h1,
            PlkMatrix::H2 => c.h2,
            PlkMatrix::Htilde1 => c.htilde1,
            PlkMatrix::Htilde2 => c.htilde2,
            PlkMatrix::L => c.l,
            PlkMatrix::R1 => c.r1(),
            PlkMatrix::R2 => c.r2(),
        };
        if out.is_null() {
            return Err(fail(PlkStatus::NullPointer, "`out` is null"));
        }
        for (i, row) in m.iter().enumerate() {
            ptr::copy_nonoverlapping(row.as_ptr(), out.add(3 * i), 3);
        }
        Ok(())
    })
}

fn matrix_id(v: u32) -> Result<PlkMatrix, Failure> {
    use PlkMatrix::*;
    [A, B1, B2, H, H1, H2, Htilde1, Htilde2, L, R1, R2]
        .into_iter()
        .find(|m| *m as u32 == v)
        .ok_or_else(|| fail(PlkStatus::OutOfRange, format!("unknown matrix id {v}")))
}

/// Copy the assembled 9x9 matrix `C`, row-major, into `out[81]`, and its
/// smallest eigenvalue on the structural support into `min_eigenvalue`
/// (may be NULL).
///
/// # Safety
/// `cert` must be a live handle; `out` must hold 81 doubles.
#[no_mangle]
pub unsafe extern "C" fn plk_certificate_c_matrix(
    cert: *const PlkCertificate,
    out: *mut f64,
    min_eigenvalue: *mut f64,
) -> PlkStatus {
    guard(|| {
        let c = assemble_c(&deref(cert, "cert")?.cert);
        if out.is_null() {
            return Err(fail(PlkStatus::NullPointer, "`out` is null"));
        }
        for (i, row) in c.matrix.rows().iter().enumerate() {
            ptr::copy_nonoverlapping(row.as_ptr(), out.add(9 * i), 9);
        }
        if !min_eigenvalue.is_null() {
            *min_eigenvalue = c.on_support.min_eigenvalue;
        }
        Ok(())
    })
}

/// Human-readable certificate report; release with [`plk_string_free`].
///
/// # Safety
/// `cert` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_certificate_report(cert: *const PlkCertificate, out: *mut *mut c_char) -> PlkStatus {
    guard(|| {
        let c = &deref(cert, "cert")?.cert;
        *self::out(out, "out")? = into_c_string(c.report());
        Ok(())
    })
}

/// Check user-supplied matrices against the sufficient conditions of the
/// two-delay linear test. `a`, `b1`, `b2`, `h` are `n x n` row-major;
/// `k1` holds `n1` samples of `K1` on a uniform grid over `[0, tau1]`
/// (each `n x n`), likewise `k2`. `failure` may be NULL; when not, it
/// receives NULL on success or a message to release with
/// [`plk_string_free`].
///
/// # Safety
/// Arrays must hold the stated number of doubles.
#[no_mangle]
pub unsafe extern "C" fn plk_check_generic_certificate(
    n: usize,
    a: *const f64,
    b1: *const f64,
    b2: *const f64,
    h: *const f64,
    k1: *const f64,
    n1: usize,
    k2: *const f64,
    n2: usize,
    passed: *mut bool,
    c_min_eigenvalue: *mut f64,
    failure: *mut *mut c_char,
) -> PlkStatus {
    guard(|| {
        if n == 0 || n > 3 {
            return Err(fail(PlkStatus::Dimension, format!("state dimension {n} outside 1..=3")));
        }
        let mat = |p: *const f64, name: &str| -> Result<Vec<Vec<f64>>, Failure> {
            if p.is_null() {
                return Err(fail(PlkStatus::NullPointer, format!("`{name}` is null")));
            }
            Ok((0..n).map(|i| (0..n).map(|j| *p.add(i * n + j)).collect()).collect())
        };
        let samples = |p: *const f64, count: usize, name: &str| -> Result<Vec<Vec<Vec<f64>>>, Failure> {
            (0..count).map(|s| mat(if p.is_null() { p } else { p.add(s * n * n) }, name)).collect()
        };
        let v = check_generic_certificate(
            &mat(a, "a")?,
            &mat(b1, "b1")?,
            &mat(b2, "b2")?,
            &mat(h, "h")?,
            &samples(k1, n1, "k1")?,
            &samples(k2, n2, "k2")?,
        )?;
        *out(passed, "passed")? = v.passed;
        if !c_min_eigenvalue.is_null() {
            *c_min_eigenvalue = v.c_min_eigenvalue.unwrap_or(f64::NAN);
        }
        if !failure.is_null() {
            *failure = v.failure.map_or(ptr::null_mut(), into_c_string);
        }
        Ok(())
    })
}

unsafe fn new_history(model: *const PlkModel, shape: HistoryShape, dst: *mut *mut PlkHistory) -> Result<(), Failure> {
    let m = deref(model, "model")?;
    let history = History::new(shape, &m.params)?;
    put_handle(dst, PlkHistory { history }, "out")
}

/// Constant initial history.
///
/// # Safety
/// `model` must be live; `value` must hold 3 doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_history_constant(
    model: *const PlkModel,
    value: *const f64,
    out: *mut *mut PlkHistory,
) -> PlkStatus {
    guard(|| new_history(model, HistoryShape::Constant(vec3(value, "value")?), out))
}

/// `base + offset` on the whole delay window.
///
/// # Safety
/// `base` and `offset` must hold 3 doubles each.
#[no_mangle]
pub unsafe extern "C" fn plk_history_offset(
    model: *const PlkModel,
    base: *const f64,
    offset: *const f64,
    out: *mut *mut PlkHistory,
) -> PlkStatus {
    guard(|| {
        let shape = HistoryShape::EquilibriumPlusConstant {
            base: vec3(base, "base")?,
            offset: vec3(offset, "offset")?,
        };
        new_history(model, shape, out)
    })
}

/// `base + amplitude * sin(frequency * theta + phase)`, componentwise.
///
/// # Safety
/// `base` and `amplitude` must hold 3 doubles each.
#[no_mangle]
pub unsafe extern "C" fn plk_history_sine(
    model: *const PlkModel,
    base: *const f64,
    amplitude: *const f64,
    frequency: f64,
    phase: f64,
    out: *mut *mut PlkHistory,
) -> PlkStatus {
    guard(|| {
        let shape = HistoryShape::EquilibriumPlusSine {
            base: vec3(base, "base")?,
            amplitude: vec3(amplitude, "amplitude")?,
            frequency,
            phase,
        };
        new_history(model, shape, out)
    })
}

/// Tabulated history joined by a natural cubic spline. `theta` must be
/// strictly increasing and cover `[-tau_max, 0]`.
///
/// # Safety
/// Each array must hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn plk_history_table(
    model: *const PlkModel,
    theta: *const f64,
    x: *const f64,
    y: *const f64,
    z: *const f64,
    n: usize,
    out: *mut *mut PlkHistory,
) -> PlkStatus {
    guard(|| {
        let col = |p: *const f64, name: &str| -> Result<Vec<f64>, Failure> {
            if p.is_null() {
                return Err(fail(PlkStatus::NullPointer, format!("`{name}` is null")));
            }
            Ok(std::slice::from_raw_parts(p, n).to_vec())
        };
        let table = Table::new(col(theta, "theta")?, [col(x, "x")?, col(y, "y")?, col(z, "z")?])?;
        new_history(model, HistoryShape::Table(table), out)
    })
}

/// # Safety
/// `history` must be NULL or a live history handle.
#[no_mangle]
pub unsafe extern "C" fn plk_history_free(history: *mut PlkHistory) {
    if !history.is_null() {
        drop(Box::from_raw(history));
    }
}

/// Evaluate the history at `theta` in `[-tau_max, 0]`.
///
/// # Safety
/// `history` must be live; `out` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn plk_history_eval(history: *const PlkHistory, theta: f64, out: *mut f64) -> PlkStatus {
    guard(|| {
        let v = deref(history, "history")?.history.eval(theta)?;
        write3(out, &v, "out")
    })
}

/// Integrate on `[0, t_end]`. `step <= 0` selects the default step.
///
/// # Safety
/// `model` and `history` must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_integrate(
    model: *const PlkModel,
    history: *const PlkHistory,
    t_end: f64,
    step: f64,
    out: *mut *mut PlkTrajectory,
) -> PlkStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let h = deref(history, "history")?;
        let traj = integrate(&m.params, &h.history, t_end, (step > 0.0).then_some(step))?;
        put_handle(out, PlkTrajectory { traj }, "out")
    })
}

/// # Safety
/// `traj` must be NULL or a live trajectory handle.
#[no_mangle]
pub unsafe extern "C" fn plk_trajectory_free(traj: *mut PlkTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// Number of nodes, including `t = 0`. Returns 0 for NULL.
///
/// # Safety
/// `traj` must be NULL or live.
#[no_mangle]
pub unsafe extern "C" fn plk_trajectory_len(traj: *const PlkTrajectory) -> usize {
    traj.as_ref().map_or(0, |t| t.traj.times().len())
}

/// Time and state of node `index`.
///
/// # Safety
/// `traj` must be live; `t` writable; `state` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn plk_trajectory_node(
    traj: *const PlkTrajectory,
    index: usize,
    t: *mut f64,
    state: *mut f64,
) -> PlkStatus {
    guard(|| {
        let tr = &deref(traj, "traj")?.traj;
        let n = tr.times().len();
        if index >= n {
            return Err(fail(PlkStatus::OutOfRange, format!("node {index} of {n}")));
        }
        *out(t, "t")? = tr.times()[index];
        write3(state, &tr.states()[index], "state")
    })
}

/// Dense-output state at any `t` in `[-tau_max, t_end]`.
///
/// # Safety
/// `traj` must be live; `state` must hold 3 doubles.
#[no_mangle]
pub unsafe extern "C" fn plk_trajectory_sample(traj: *const PlkTrajectory, t: f64, state: *mut f64) -> PlkStatus {
    guard(|| {
        let v = deref(traj, "traj")?.traj.sample(t)?;
        write3(state, &v, "state")
    })
}

/// Write every `stride`-th node as CSV `t,x,y,z`.
///
/// # Safety
/// `traj` must be live; `path` a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn plk_trajectory_write_csv(
    traj: *const PlkTrajectory,
    path: *const c_char,
    stride: usize,
) -> PlkStatus {
    guard(|| {
        let tr = &deref(traj, "traj")?.traj;
        let p = self::path(path, "path")?;
        let f = File::create(&p).map_err(|e| fail(PlkStatus::Io, format!("{}: {e}", p.display())))?;
        tr.write_csv(BufWriter::new(f), stride)?;
        Ok(())
    })
}

/// Name of admissibility condition `index` (static string), or NULL when
/// `index >= PLK_CONDITION_COUNT`.
#[no_mangle]
pub extern "C" fn plk_condition_name(index: usize) -> *const c_char {
    const NAMES: [&CStr; PLK_CONDITION_COUNT] = [
        c"zooplankton_window_tau1",
        c"zooplankton_window_tau2",
        c"small_functional",
        c"deflated_prey_zooplankton",
        c"deflated_fish",
    ];
    debug_assert!(NAMES.iter().zip(CONDITION_NAMES).all(|(a, b)| a.to_str() == Ok(b)));
    NAMES.get(index).map_or(ptr::null(), |s| s.as_ptr())
}

/// Evaluate the functional at the initial history and every admissibility
/// condition.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_theorem_check(
    model: *const PlkModel,
    cert: *const PlkCertificate,
    history: *const PlkHistory,
    out: *mut PlkTheoremSummary,
) -> PlkStatus {
    guard(|| {
        let m = deref(model, "model")?;
        let c = deref(cert, "cert")?;
        let h = deref(history, "history")?;
        let rep = check_initial_conditions(&h.history, &c.cert, &m.params)?;
        let mut s = PlkTheoremSummary {
            v0: rep.v0,
            admissible: rep.envelopes_valid,
            ..Default::default()
        };
        for (i, cond) in rep.conditions.iter().enumerate().take(PLK_CONDITION_COUNT) {
            s.lhs[i] = cond.lhs;
            s.rhs[i] = cond.rhs;
            s.margin[i] = cond.margin;
            s.passed[i] = cond.passed;
        }
        *self::out(out, "out")? = s;
        Ok(())
    })
}

/// Check the decay envelopes, the Gronwall bound and the differential
/// inequality at every `stride`-th node. The trajectory must start from an
/// admissible history. `solver_error < 0` estimates the solver error by a
/// half-step rerun.
///
/// # Safety
/// Handles must be live; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_envelope_check(
    traj: *const PlkTrajectory,
    cert: *const PlkCertificate,
    stride: usize,
    solver_error: f64,
    out: *mut PlkEnvelopeSummary,
) -> PlkStatus {
    guard(|| {
        let tr = &deref(traj, "traj")?.traj;
        let c = &deref(cert, "cert")?.cert;
        let rep = check_initial_conditions(tr.history(), c, tr.params())?;
        let err = if solver_error < 0.0 { estimate_solver_error(tr)? } else { solver_error };
        let times: Vec<f64> = strided_indices(tr.times().len(), stride.max(1))
            .into_iter()
            .map(|i| tr.times()[i])
            .collect();
        let env = check_envelope(tr, c, &rep, &times, err)?;
        let di = check_differential_inequality(tr, c, &times, tr.step())?;
        *self::out(out, "out")? = PlkEnvelopeSummary {
            samples: env.samples.len(),
            tolerance: env.tolerance,
            solver_error: err,
            worst_margin: env.worst_margin,
            violations: env.violations,
            strict_violations: env.strict_violations,
            worst_gronwall_margin: env.worst_gronwall_margin,
            gronwall_violations: env.gronwall_violations,
            diff_ineq_checked: di.checked,
            diff_ineq_violations: di.violations,
            diff_ineq_worst_slack: di.worst_slack,
            passed: env.passed() && di.passed(),
        };
        Ok(())
    })
}

/// Run a scenario file end to end. `out_dir` may be NULL to use the
/// directory named in the file. `exit_code` receives the command-line exit
/// code (0, 2 or 3); input errors are returned as a failing status.
///
/// # Safety
/// Strings must be NUL-terminated UTF-8; `exit_code` writable.
#[no_mangle]
pub unsafe extern "C" fn plk_run_scenario(
    config: *const c_char,
    out_dir: *const c_char,
    exit_code: *mut i32,
) -> PlkStatus {
    guard(|| {
        let cfg = path(config, "config")?;
        let dir = if out_dir.is_null() { None } else { Some(path(out_dir, "out_dir")?) };
        let summary = app::run_scenario(&cfg, dir.as_deref().map(Path::new))?;
        *out(exit_code, "exit_code")? = summary.exit_code;
        Ok(())
    })
}
