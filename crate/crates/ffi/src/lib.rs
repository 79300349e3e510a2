//! C interface to `tworeg`.
//!
//! Datasets and covariance matrices live behind opaque handles created by
//! `tw_*_new` (or returned by the covariance functions) and released with the
//! matching `tw_*_free`. Every fallible call returns a `TwStatus`; on failure
//! `tw_last_error_message` describes the most recent error on the calling
//! thread. Matrices cross the boundary as row-major `double` arrays.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::{DMatrix, DVector};
use tworeg::covariance::{
    block_bootstrap_cov, cv_hac_cov, normalize_by_gram, prior_cov_from_gram, select_shrinkage, shrink, BootstrapConfig,
    FoldPlan, Metric, ShrinkageParams,
};
use tworeg::estimators::{ols_fit, ridge_fit, tworeg_ridge_fit, CovStage, CovarianceMatrix, Dataset};
use tworeg::{Error, ErrorClass};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TwStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullPointer = 1,
    /// Invalid parameter, penalty or dimensions.
    InvalidArgument = 2,
    /// Input data could not be used (too few rows and the like).
    DataError = 3,
    /// Rank deficiency, singular systems, non-PSD matrices.
    NumericalError = 4,
    /// An internal panic was caught at the boundary.
    Internal = 5,
}

/// Opaque regression dataset.
pub struct TwDataset(Dataset);

/// Opaque symmetric PSD covariance matrix.
pub struct TwCovariance(CovarianceMatrix);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn fail(e: Error) -> TwStatus {
    let status = match e.class() {
        ErrorClass::Validation => TwStatus::InvalidArgument,
        ErrorClass::Data => TwStatus::DataError,
        ErrorClass::Numerical => TwStatus::NumericalError,
    };
    set_error(format!("{}: {e}", e.kind()));
    status
}

fn guard(f: impl FnOnce() -> Result<(), TwStatus>) -> TwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TwStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            TwStatus::Internal
        }
    }
}

fn null(what: &str) -> TwStatus {
    set_error(format!("null pointer: {what}"));
    TwStatus::NullPointer
}

fn invalid(msg: &str) -> TwStatus {
    set_error(msg.into());
    TwStatus::InvalidArgument
}

unsafe fn slice<'a>(ptr: *const f64, len: usize, what: &str) -> Result<&'a [f64], TwStatus> {
    if len == 0 {
        return Ok(&[]);
    }
    if ptr.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(ptr, len))
}

unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, TwStatus> {
    ptr.as_ref().ok_or_else(|| null(what))
}

fn dims(rows: usize, cols: usize) -> Result<usize, TwStatus> {
    rows.checked_mul(cols).ok_or_else(|| invalid("matrix dimensions overflow"))
}

unsafe fn write_vec(values: &DVector<f64>, out: *mut f64, len: usize) -> Result<(), TwStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    if len != values.len() {
        return Err(invalid(&format!("output buffer holds {len} values, need {}", values.len())));
    }
    std::slice::from_raw_parts_mut(out, len).copy_from_slice(values.as_slice());
    Ok(())
}

unsafe fn emit(cov: CovarianceMatrix, out: *mut *mut TwCovariance) -> Result<(), TwStatus> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(TwCovariance(cov)));
    Ok(())
}

/// Message for the most recent failure on this thread; empty if none.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tw_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

#[no_mangle]
pub extern "C" fn tw_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies an `n x p` row-major design and a length-`n` response into a new dataset.
/// `design` must point to `n * p` doubles, `response` to `n` doubles and
/// `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tw_dataset_new(
    design: *const f64,
    response: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut TwDataset,
) -> TwStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let x = slice(design, dims(n, p)?, "design")?;
        let y = slice(response, n, "response")?;
        let data = Dataset::new(DMatrix::from_row_slice(n, p, x), DVector::from_column_slice(y)).map_err(fail)?;
        *out = Box::into_raw(Box::new(TwDataset(data)));
        Ok(())
    })
}

/// `data` must be null or a handle from `tw_dataset_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tw_dataset_free(data: *mut TwDataset) {
    if !data.is_null() {
        drop(Box::from_raw(data));
    }
}

/// Copies a `p x p` row-major matrix; it must be symmetric PSD.
/// `entries` must point to `p * p` doubles and `out` to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tw_covariance_new(entries: *const f64, p: usize, out: *mut *mut TwCovariance) -> TwStatus {
    guard(|| {
        let e = slice(entries, dims(p, p)?, "entries")?;
        let cov = CovarianceMatrix::new(DMatrix::from_row_slice(p, p, e), CovStage::TrueKnown).map_err(fail)?;
        emit(cov, out)
    })
}

/// `cov` must be null or a live covariance handle.
#[no_mangle]
pub unsafe extern "C" fn tw_covariance_free(cov: *mut TwCovariance) {
    if !cov.is_null() {
        drop(Box::from_raw(cov));
    }
}

/// Dimension `p` of the matrix, or 0 for a null handle.
/// `cov` must be null or a live covariance handle.
#[no_mangle]
pub unsafe extern "C" fn tw_covariance_dim(cov: *const TwCovariance) -> usize {
    cov.as_ref().map_or(0, |c| c.0.dim())
}

/// Writes the entries row-major into `out`, which holds `len = p * p` doubles.
/// `cov` must be a live handle and `out` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_covariance_copy(cov: *const TwCovariance, out: *mut f64, len: usize) -> TwStatus {
    guard(|| {
        let c = &handle(cov, "cov")?.0;
        // symmetric, so column-major storage equals row-major
        write_vec(&DVector::from_column_slice(c.entries().as_slice()), out, len)
    })
}

/// `data` must be a live handle and `out` must point to `len = p` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_ols_fit(data: *const TwDataset, out: *mut f64, len: usize) -> TwStatus {
    guard(|| {
        let coef = ols_fit(&handle(data, "data")?.0).map_err(fail)?;
        write_vec(&coef.values, out, len)
    })
}

/// Pointer requirements as for `tw_ols_fit`.
#[no_mangle]
pub unsafe extern "C" fn tw_ridge_fit(data: *const TwDataset, lambda: f64, out: *mut f64, len: usize) -> TwStatus {
    guard(|| {
        let coef = ridge_fit(&handle(data, "data")?.0, lambda).map_err(fail)?;
        write_vec(&coef.values, out, len)
    })
}

/// Two-stage ridge with penalty matrix `cov`, normally the output of `tw_normalize`.
/// `data` and `cov` must be live handles; `out` must point to `len = p` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_tworeg_ridge_fit(
    data: *const TwDataset,
    cov: *const TwCovariance,
    lambda: f64,
    out: *mut f64,
    len: usize,
) -> TwStatus {
    guard(|| {
        let coef = tworeg_ridge_fit(&handle(data, "data")?.0, &handle(cov, "cov")?.0, lambda).map_err(fail)?;
        write_vec(&coef.values, out, len)
    })
}

/// Block bootstrap estimate of the OLS coefficient covariance.
/// `data` must be a live handle and `out` writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tw_block_bootstrap_cov(
    data: *const TwDataset,
    iterations: usize,
    blocks: usize,
    seed: u64,
    out: *mut *mut TwCovariance,
) -> TwStatus {
    guard(|| {
        let cfg = BootstrapConfig::new(iterations, blocks, seed).map_err(fail)?;
        emit(block_bootstrap_cov(&handle(data, "data")?.0, &cfg).map_err(fail)?, out)
    })
}

/// Cross-validated sandwich estimate over `folds` contiguous folds.
/// Pointer requirements as for `tw_block_bootstrap_cov`.
#[no_mangle]
pub unsafe extern "C" fn tw_cv_hac_cov(data: *const TwDataset, folds: usize, out: *mut *mut TwCovariance) -> TwStatus {
    guard(|| {
        let d = &handle(data, "data")?.0;
        let plan = FoldPlan::contiguous(d.n(), folds).map_err(fail)?;
        emit(cv_hac_cov(d, &plan).map_err(fail)?, out)
    })
}

/// `(X'X)^{-1}` rescaled to the trace of `crude`.
/// `data` and `crude` must be live handles and `out` writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tw_prior_cov(
    data: *const TwDataset,
    crude: *const TwCovariance,
    out: *mut *mut TwCovariance,
) -> TwStatus {
    guard(|| {
        let prior = prior_cov_from_gram(handle(data, "data")?.0.gram(), &handle(crude, "crude")?.0).map_err(fail)?;
        emit(prior, out)
    })
}

/// `crude` and `prior` must be live handles and `out` writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tw_shrink(
    crude: *const TwCovariance,
    prior: *const TwCovariance,
    kappa: f64,
    mu: f64,
    out: *mut *mut TwCovariance,
) -> TwStatus {
    guard(|| {
        let params = ShrinkageParams::new(kappa, mu).map_err(fail)?;
        emit(shrink(&handle(crude, "crude")?.0, &handle(prior, "prior")?.0, params).map_err(fail)?, out)
    })
}

/// Rescales `cov` so that `tr(X'X cov) = p`.
/// `data` and `cov` must be live handles and `out` writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn tw_normalize(
    data: *const TwDataset,
    cov: *const TwCovariance,
    out: *mut *mut TwCovariance,
) -> TwStatus {
    guard(|| emit(normalize_by_gram(&handle(cov, "cov")?.0, handle(data, "data")?.0.gram()).map_err(fail)?, out))
}

/// Chooses `(kappa, mu)` on the 6 x 6 grid `{0, 0.2, ..., 1}^2` by held-out
/// block bootstrap over `folds` contiguous folds. `metric` is 0 for Frobenius
/// distance and 1 for symmetrized Gaussian KL.
/// `data` must be a live handle; `kappa` and `mu` must point to writable doubles.
#[no_mangle]
pub unsafe extern "C" fn tw_select_shrinkage(
    data: *const TwDataset,
    folds: usize,
    iterations: usize,
    blocks: usize,
    seed: u64,
    metric: u32,
    kappa: *mut f64,
    mu: *mut f64,
) -> TwStatus {
    guard(|| {
        let d = &handle(data, "data")?.0;
        if kappa.is_null() || mu.is_null() {
            return Err(null("kappa/mu"));
        }
        let metric = match metric {
            0 => Metric::Frobenius,
            1 => Metric::GaussianKl,
            m => return Err(invalid(&format!("unknown metric {m}"))),
        };
        let plan = FoldPlan::contiguous(d.n(), folds).map_err(fail)?;
        let cfg = BootstrapConfig::new(iterations, blocks, seed).map_err(fail)?;
        let sel = select_shrinkage(d, &plan, &ShrinkageParams::default_grid(), &cfg, metric).map_err(fail)?;
        *kappa = sel.kappa;
        *mu = sel.mu;
        Ok(())
    })
}
