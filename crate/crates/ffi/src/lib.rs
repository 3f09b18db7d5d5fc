//! C ABI over the mggd library.
//!
//! Datasets and fit reports are opaque handles created and released through
//! this interface; every fallible call returns an [`MggdStatus`] code and a
//! thread-local message retrievable with [`mggd_last_error_message`]. The
//! generated header lives at `include/mggd.h` (regenerated by the build
//! script via cbindgen).
//!
//! Handle discipline: pointers returned through `out` parameters are owned
//! by the caller and must be released with the matching `_free` function.
//! Passing null where a handle is expected yields `NullPointer`, never a
//! crash. Handles are not synchronized; share them across threads only
//! behind external locking.

// Every exported function checks pointers for null before dereferencing;
// validity and aliasing of non-null pointers are the caller's contract, as
// usual for a C ABI.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use mggd::estimator::{fit_joint, EstimatorError, FitOptions, FitReport, InitMatrix};
use mggd::io::read_dataset;
use mggd::model::{MggdParams, ModelError, SampleSet};
use mggd::sampler::{sample_mggd, RngSeed};
use mggd::spd::toeplitz_rho;

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let message = message.into();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(message).ok();
    });
}

/// Status codes returned by every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MggdStatus {
    Ok = 0,
    InvalidArgument = 1,
    NotPositiveDefinite = 2,
    DegenerateData = 3,
    NotConverged = 4,
    IoError = 5,
    NullPointer = 6,
    InternalPanic = 7,
}

/// Scatter initialization for fits.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MggdInit {
    /// Identity matrix.
    Identity = 0,
    /// Trace-normalized sample covariance (the default).
    Scm = 1,
}

/// Fit configuration; obtain defaults with `mggd_fit_config_default`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MggdFitConfig {
    /// Stopping threshold on the relative scatter step.
    pub tol_c: f64,
    pub max_iter: usize,
    /// Set to 1 to fix the shape at `beta_fixed` (known-shape mode).
    pub has_fixed_beta: i32,
    pub beta_fixed: f64,
    pub beta_init: f64,
    pub newton_max_step: f64,
    pub init: MggdInit,
}

/// Opaque dataset handle.
pub struct MggdDataset {
    inner: SampleSet,
}

/// Opaque fit-report handle.
pub struct MggdReport {
    inner: FitReport,
}

fn status_of_model(e: &ModelError) -> MggdStatus {
    match e {
        ModelError::DegenerateData { .. } => MggdStatus::DegenerateData,
        ModelError::Linalg(_) => MggdStatus::NotPositiveDefinite,
        _ => MggdStatus::InvalidArgument,
    }
}

fn status_of_estimator(e: &EstimatorError) -> MggdStatus {
    match e {
        EstimatorError::DegenerateData { .. } => MggdStatus::DegenerateData,
        EstimatorError::Model(m) => status_of_model(m),
        EstimatorError::Linalg(_) => MggdStatus::NotPositiveDefinite,
        _ => MggdStatus::InvalidArgument,
    }
}

fn guard(body: impl FnOnce() -> MggdStatus) -> MggdStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(status) => status,
        Err(_) => {
            set_last_error("internal panic");
            MggdStatus::InternalPanic
        }
    }
}

/// Copies the last error message on this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length in bytes, or 0 when
/// no error is recorded.
#[no_mangle]
pub extern "C" fn mggd_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let slot = slot.borrow();
        let Some(msg) = slot.as_ref() else {
            return 0;
        };
        let bytes = msg.as_bytes_with_nul();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len);
            unsafe {
                ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buf, n);
                // Always NUL-terminate, even when truncating.
                *buf.add(n - 1) = 0;
            }
        }
        bytes.len() - 1
    })
}

/// Fills `config` with the library defaults.
#[no_mangle]
pub extern "C" fn mggd_fit_config_default(config: *mut MggdFitConfig) -> MggdStatus {
    if config.is_null() {
        set_last_error("config pointer is null");
        return MggdStatus::NullPointer;
    }
    let defaults = FitOptions::default();
    unsafe {
        *config = MggdFitConfig {
            tol_c: defaults.tol_c,
            max_iter: defaults.max_iter,
            has_fixed_beta: 0,
            beta_fixed: f64::NAN,
            beta_init: defaults.beta_init,
            newton_max_step: defaults.newton_max_step,
            init: MggdInit::Scm,
        };
    }
    MggdStatus::Ok
}

/// Builds a dataset from a row-major `n_rows` × `dim` array.
#[no_mangle]
pub extern "C" fn mggd_dataset_new(
    dim: usize,
    n_rows: usize,
    values: *const f64,
    out: *mut *mut MggdDataset,
) -> MggdStatus {
    guard(|| {
        if values.is_null() || out.is_null() {
            set_last_error("values or out pointer is null");
            return MggdStatus::NullPointer;
        }
        let data = unsafe { std::slice::from_raw_parts(values, dim * n_rows) }.to_vec();
        match SampleSet::new(dim, data) {
            Ok(set) => {
                unsafe { *out = Box::into_raw(Box::new(MggdDataset { inner: set })) };
                MggdStatus::Ok
            }
            Err(e) => {
                set_last_error(e.to_string());
                status_of_model(&e)
            }
        }
    })
}

/// Reads a dataset CSV (optional `x0,…` header, one observation per row).
#[no_mangle]
pub extern "C" fn mggd_dataset_read_csv(
    path: *const c_char,
    out: *mut *mut MggdDataset,
) -> MggdStatus {
    guard(|| {
        if path.is_null() || out.is_null() {
            set_last_error("path or out pointer is null");
            return MggdStatus::NullPointer;
        }
        let path = match unsafe { CStr::from_ptr(path) }.to_str() {
            Ok(s) => s,
            Err(_) => {
                set_last_error("path is not valid UTF-8");
                return MggdStatus::InvalidArgument;
            }
        };
        match read_dataset(Path::new(path)) {
            Ok(set) => {
                unsafe { *out = Box::into_raw(Box::new(MggdDataset { inner: set })) };
                MggdStatus::Ok
            }
            Err(mggd::io::IoError::Model(e)) => {
                set_last_error(e.to_string());
                status_of_model(&e)
            }
            Err(e) => {
                set_last_error(e.to_string());
                MggdStatus::IoError
            }
        }
    })
}

/// Draws `n` MGGD vectors with a Toeplitz scatter rho^|i-j|.
#[no_mangle]
pub extern "C" fn mggd_sample_toeplitz(
    dim: usize,
    beta: f64,
    m: f64,
    rho: f64,
    n: usize,
    master_seed: u64,
    stream_id: u64,
    out: *mut *mut MggdDataset,
) -> MggdStatus {
    guard(|| {
        if out.is_null() {
            set_last_error("out pointer is null");
            return MggdStatus::NullPointer;
        }
        let scatter = match toeplitz_rho(dim, rho) {
            Ok(s) => s,
            Err(e) => {
                set_last_error(e.to_string());
                return MggdStatus::InvalidArgument;
            }
        };
        let params = match MggdParams::new(scatter, m, beta) {
            Ok(p) => p,
            Err(e) => {
                set_last_error(e.to_string());
                return MggdStatus::InvalidArgument;
            }
        };
        let mut rng = RngSeed::new(master_seed, stream_id).rng();
        match sample_mggd(&params, n, &mut rng) {
            Ok(set) => {
                unsafe { *out = Box::into_raw(Box::new(MggdDataset { inner: set })) };
                MggdStatus::Ok
            }
            Err(e) => {
                set_last_error(e.to_string());
                status_of_model(&e)
            }
        }
    })
}

#[no_mangle]
pub extern "C" fn mggd_dataset_dim(dataset: *const MggdDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    unsafe { &*dataset }.inner.dim()
}

#[no_mangle]
pub extern "C" fn mggd_dataset_len(dataset: *const MggdDataset) -> usize {
    if dataset.is_null() {
        return 0;
    }
    unsafe { &*dataset }.inner.count()
}

/// Copies the row-major observations into `buf` (length `len` doubles).
#[no_mangle]
pub extern "C" fn mggd_dataset_copy(
    dataset: *const MggdDataset,
    buf: *mut f64,
    len: usize,
) -> MggdStatus {
    if dataset.is_null() || buf.is_null() {
        set_last_error("dataset or buf pointer is null");
        return MggdStatus::NullPointer;
    }
    let data = unsafe { &*dataset }.inner.as_slice();
    if len < data.len() {
        set_last_error(format!("buffer holds {len} doubles, need {}", data.len()));
        return MggdStatus::InvalidArgument;
    }
    unsafe { ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len()) };
    MggdStatus::Ok
}

#[no_mangle]
pub extern "C" fn mggd_dataset_free(dataset: *mut MggdDataset) {
    if !dataset.is_null() {
        drop(unsafe { Box::from_raw(dataset) });
    }
}

/// Fits MGGD parameters. A fit that merely fails to converge still produces
/// a report (inspect `mggd_report_converged`); the `NotConverged` status is
/// reserved for that case so callers can distinguish it without parsing.
#[no_mangle]
pub extern "C" fn mggd_fit(
    dataset: *const MggdDataset,
    config: *const MggdFitConfig,
    out: *mut *mut MggdReport,
) -> MggdStatus {
    guard(|| {
        if dataset.is_null() || out.is_null() {
            set_last_error("dataset or out pointer is null");
            return MggdStatus::NullPointer;
        }
        let mut opts = FitOptions::default();
        if !config.is_null() {
            let cfg = unsafe { &*config };
            opts.tol_c = cfg.tol_c;
            opts.max_iter = cfg.max_iter;
            opts.beta_fixed = (cfg.has_fixed_beta != 0).then_some(cfg.beta_fixed);
            opts.beta_init = cfg.beta_init;
            opts.newton_max_step = cfg.newton_max_step;
            opts.init = match cfg.init {
                MggdInit::Identity => InitMatrix::Identity,
                MggdInit::Scm => InitMatrix::ScaledScm,
            };
        }
        let data = &unsafe { &*dataset }.inner;
        match fit_joint(data, &opts) {
            Ok(report) => {
                let converged = report.converged;
                unsafe { *out = Box::into_raw(Box::new(MggdReport { inner: report })) };
                if converged {
                    MggdStatus::Ok
                } else {
                    set_last_error("fit did not converge within the iteration budget");
                    MggdStatus::NotConverged
                }
            }
            Err(e) => {
                set_last_error(e.to_string());
                status_of_estimator(&e)
            }
        }
    })
}

#[no_mangle]
pub extern "C" fn mggd_report_beta(report: *const MggdReport) -> f64 {
    if report.is_null() {
        return f64::NAN;
    }
    unsafe { &*report }.inner.beta
}

#[no_mangle]
pub extern "C" fn mggd_report_scale(report: *const MggdReport) -> f64 {
    if report.is_null() {
        return f64::NAN;
    }
    unsafe { &*report }.inner.scale
}

#[no_mangle]
pub extern "C" fn mggd_report_iterations(report: *const MggdReport) -> usize {
    if report.is_null() {
        return 0;
    }
    unsafe { &*report }.inner.iterations
}

#[no_mangle]
pub extern "C" fn mggd_report_converged(report: *const MggdReport) -> i32 {
    if report.is_null() {
        return 0;
    }
    unsafe { &*report }.inner.converged as i32
}

#[no_mangle]
pub extern "C" fn mggd_report_alpha_residual(report: *const MggdReport) -> f64 {
    if report.is_null() {
        return f64::NAN;
    }
    unsafe { &*report }.inner.alpha_residual
}

#[no_mangle]
pub extern "C" fn mggd_report_objective(report: *const MggdReport) -> f64 {
    if report.is_null() {
        return f64::NAN;
    }
    unsafe { &*report }.inner.objective
}

/// Copies the row-major p×p scatter estimate into `buf` (`len` doubles).
#[no_mangle]
pub extern "C" fn mggd_report_scatter(
    report: *const MggdReport,
    buf: *mut f64,
    len: usize,
) -> MggdStatus {
    if report.is_null() || buf.is_null() {
        set_last_error("report or buf pointer is null");
        return MggdStatus::NullPointer;
    }
    let entries = unsafe { &*report }.inner.scatter.entries();
    if len < entries.len() {
        set_last_error(format!(
            "buffer holds {len} doubles, need {}",
            entries.len()
        ));
        return MggdStatus::InvalidArgument;
    }
    unsafe { ptr::copy_nonoverlapping(entries.as_ptr(), buf, entries.len()) };
    MggdStatus::Ok
}

#[no_mangle]
pub extern "C" fn mggd_report_free(report: *mut MggdReport) {
    if !report.is_null() {
        drop(unsafe { Box::from_raw(report) });
    }
}
