//! C interface to `parallel_analysis`.
//!
//! Matrices and selection results are opaque handles owned by the caller and
//! released with the matching `_free` function. Every fallible call returns a
//! `PaStatus`; on failure the message is available from
//! `pa_last_error_message` on the same thread until the next failing call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use nalgebra::DMatrix;
use parallel_analysis::harness::load_matrix_csv;
use parallel_analysis::{oracles, select, singular_values, PaConfig, PaError, SelectionResult};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PaStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    NonFinite = 3,
    Parse = 4,
    Config = 5,
    SvdFailed = 6,
    Io = 7,
    NullPointer = 8,
    Panic = 9,
}

/// Row-major dense matrix.
pub struct PaMatrix {
    inner: DMatrix<f64>,
}

pub struct PaSelection {
    inner: SelectionResult,
}

/// Selection settings. `max_rank == 0` means every rank up to `min(n, p)`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PaSelectConfig {
    pub num_permutations: usize,
    pub percentile: f64,
    pub max_rank: usize,
    pub stepwise: bool,
    pub demean_columns: bool,
    pub seed: u64,
}

impl From<&PaSelectConfig> for PaConfig {
    fn from(c: &PaSelectConfig) -> Self {
        PaConfig {
            num_permutations: c.num_permutations,
            percentile: c.percentile,
            max_rank: (c.max_rank > 0).then_some(c.max_rank),
            stepwise: c.stepwise,
            demean_columns: c.demean_columns,
            seed: c.seed,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &PaError) -> PaStatus {
    match err {
        PaError::InvalidArgument(_) => PaStatus::InvalidArgument,
        PaError::DimensionMismatch { .. } => PaStatus::DimensionMismatch,
        PaError::NonFinite { .. } => PaStatus::NonFinite,
        PaError::Parse { .. } => PaStatus::Parse,
        PaError::Config(_) => PaStatus::Config,
        PaError::SvdFailed => PaStatus::SvdFailed,
        PaError::Io { .. } => PaStatus::Io,
    }
}

fn fail(status: PaStatus, msg: impl Into<String>) -> PaStatus {
    set_last_error(msg.into());
    status
}

fn guard(f: impl FnOnce() -> Result<(), PaStatus>) -> PaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PaStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => fail(PaStatus::Panic, "internal panic"),
    }
}

fn check<T>(r: parallel_analysis::Result<T>) -> Result<T, PaStatus> {
    r.map_err(|e| fail(status_of(&e), e.to_string()))
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, PaStatus> {
    p.as_ref().ok_or_else(|| fail(PaStatus::NullPointer, format!("{what} is null")))
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), PaStatus> {
    if out.is_null() {
        return Err(fail(PaStatus::NullPointer, "output pointer is null"));
    }
    out.write(value);
    Ok(())
}

/// Copies up to `cap` values into `buf` and returns how many exist in total.
unsafe fn copy_out(values: &[f64], buf: *mut f64, cap: usize) -> usize {
    if !buf.is_null() {
        let k = values.len().min(cap);
        ptr::copy_nonoverlapping(values.as_ptr(), buf, k);
    }
    values.len()
}

/// Message for the most recent failure on this thread, or null if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pa_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn pa_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `data` must point to `rows * cols` readable doubles in row-major order.
#[no_mangle]
pub unsafe extern "C" fn pa_matrix_new(rows: usize, cols: usize, data: *const f64, out: *mut *mut PaMatrix) -> PaStatus {
    guard(|| {
        if data.is_null() {
            return Err(fail(PaStatus::NullPointer, "data is null"));
        }
        if rows == 0 || cols == 0 {
            return Err(fail(PaStatus::InvalidArgument, "matrix must have at least one row and one column"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| fail(PaStatus::InvalidArgument, "rows * cols overflows"))?;
        let values = slice::from_raw_parts(data, len);
        let inner = DMatrix::from_row_slice(rows, cols, values);
        write_out(out, Box::into_raw(Box::new(PaMatrix { inner })))
    })
}

/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn pa_matrix_from_csv(path: *const c_char, has_header: bool, out: *mut *mut PaMatrix) -> PaStatus {
    guard(|| {
        if path.is_null() {
            return Err(fail(PaStatus::NullPointer, "path is null"));
        }
        let path = CStr::from_ptr(path)
            .to_str()
            .map_err(|_| fail(PaStatus::InvalidArgument, "path is not valid UTF-8"))?;
        let inner = check(load_matrix_csv(path, has_header))?;
        write_out(out, Box::into_raw(Box::new(PaMatrix { inner })))
    })
}

/// # Safety
/// `m` must be null or a handle from `pa_matrix_new`/`pa_matrix_from_csv`.
#[no_mangle]
pub unsafe extern "C" fn pa_matrix_rows(m: *const PaMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.nrows())
}

/// # Safety
/// As for `pa_matrix_rows`.
#[no_mangle]
pub unsafe extern "C" fn pa_matrix_cols(m: *const PaMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.inner.ncols())
}

/// # Safety
/// `m` must be null or a live matrix handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pa_matrix_free(m: *mut PaMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Singular values in descending order. Writes up to `cap` into `buf` and
/// stores the total count in `count`; pass a null `buf` to query the size.
///
/// # Safety
/// `buf` must be null or hold `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pa_singular_values(m: *const PaMatrix, buf: *mut f64, cap: usize, count: *mut usize) -> PaStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let s = check(singular_values(&m.inner, None))?;
        let total = copy_out(&s.values, buf, cap);
        write_out(count, total)
    })
}

#[no_mangle]
pub extern "C" fn pa_select_config_default() -> PaSelectConfig {
    let d = PaConfig::default();
    PaSelectConfig {
        num_permutations: d.num_permutations,
        percentile: d.percentile,
        max_rank: d.max_rank.unwrap_or(0),
        stepwise: d.stepwise,
        demean_columns: d.demean_columns,
        seed: d.seed,
    }
}

/// Runs the selection. A null `config` uses `pa_select_config_default()`.
///
/// # Safety
/// `m` must be a live matrix handle and `config` null or readable.
#[no_mangle]
pub unsafe extern "C" fn pa_select(m: *const PaMatrix, config: *const PaSelectConfig, out: *mut *mut PaSelection) -> PaStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        let cfg = match config.as_ref() {
            Some(c) => PaConfig::from(c),
            None => PaConfig::default(),
        };
        let inner = check(select::pa_select(&m.inner, &cfg))?;
        write_out(out, Box::into_raw(Box::new(PaSelection { inner })))
    })
}

/// # Safety
/// `s` must be null or a live selection handle.
#[no_mangle]
pub unsafe extern "C" fn pa_selection_rank(s: *const PaSelection) -> usize {
    s.as_ref().map_or(0, |s| s.inner.selected_rank)
}

/// Number of ranks compared, i.e. the length of the observed and threshold arrays.
///
/// # Safety
/// As for `pa_selection_rank`.
#[no_mangle]
pub unsafe extern "C" fn pa_selection_len(s: *const PaSelection) -> usize {
    s.as_ref().map_or(0, |s| s.inner.thresholds.len())
}

/// Copies observed singular values; returns the total available.
///
/// # Safety
/// `s` must be null or a live selection handle; `buf` null or `cap` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn pa_selection_observed(s: *const PaSelection, buf: *mut f64, cap: usize) -> usize {
    match s.as_ref() {
        Some(s) => {
            let k = s.inner.thresholds.len();
            copy_out(&s.inner.observed.values[..k], buf, cap)
        }
        None => 0,
    }
}

/// Copies permutation thresholds; returns the total available.
///
/// # Safety
/// As for `pa_selection_observed`.
#[no_mangle]
pub unsafe extern "C" fn pa_selection_thresholds(s: *const PaSelection, buf: *mut f64, cap: usize) -> usize {
    s.as_ref().map_or(0, |s| copy_out(&s.inner.thresholds, buf, cap))
}

/// # Safety
/// `s` must be null or a live selection handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn pa_selection_free(s: *mut PaSelection) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

fn scalar(out: *mut f64, r: parallel_analysis::Result<f64>) -> PaStatus {
    guard(|| {
        let v = check(r)?;
        unsafe { write_out(out, v) }
    })
}

/// Spike strength at which a rank-one signal separates from identity noise.
#[no_mangle]
pub extern "C" fn pa_bbp_threshold_identity(gamma: f64, out: *mut f64) -> PaStatus {
    scalar(out, oracles::bbp_threshold_identity_noise(gamma))
}

#[no_mangle]
pub extern "C" fn pa_bbp_threshold_classical(gamma: f64, out: *mut f64) -> PaStatus {
    scalar(out, oracles::bbp_threshold_classical(gamma))
}

/// Upper edge 1 + sqrt(gamma) of the normalized noise spectrum.
#[no_mangle]
pub extern "C" fn pa_noise_edge(gamma: f64, out: *mut f64) -> PaStatus {
    scalar(out, oracles::noise_edge_identity(gamma))
}

#[no_mangle]
pub extern "C" fn pa_permuted_norm(theta_total: f64, n: usize, p: usize, out: *mut f64) -> PaStatus {
    scalar(out, oracles::permuted_norm_heuristic(theta_total, n, p))
}

#[no_mangle]
pub extern "C" fn pa_shadowing_ratio(n: usize, p: usize, out: *mut f64) -> PaStatus {
    scalar(out, oracles::shadowing_ratio(n, p))
}

/// # Safety
/// `v` must hold `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn pa_c_k(v: *const f64, len: usize, n: usize, k: u32, out: *mut f64) -> PaStatus {
    if v.is_null() {
        return fail(PaStatus::NullPointer, "v is null");
    }
    let v = slice::from_raw_parts(v, len);
    scalar(out, oracles::c_k(v, n, k))
}
