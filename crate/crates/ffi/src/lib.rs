//! C ABI over `ctls-core`.
//!
//! Matrices and estimates are opaque heap handles owned by the caller and
//! released with the matching `*_free` function. Every fallible call returns
//! a [`CtlsStatus`]; on failure a description is available from
//! [`ctls_last_error_message`] on the same thread. Matrix data crosses the
//! boundary in row-major order.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ctls_core::estimators::{estimate, EstimateResult, EstimatorOptions, Method, MuChoice};
use ctls_core::model::{generate_model, observe, DesignKind, ObservedData, PartitionSpec};
use ctls_core::rng::derive_seed;
use ctls_core::{Error, Matrix};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtlsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    NonFinite = 4,
    InvalidPartition = 5,
    LowerBlockSingular = 6,
    RankDeficientFixedColumns = 7,
    RankDeficientUpperRows = 8,
    /// Singular system, non-convergence or a failed factorization.
    Numerical = 9,
    /// The requested quantity does not exist for this estimate.
    Unavailable = 10,
    Panic = 11,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtlsMethod {
    Tls = 0,
    CtlsColumns = 1,
    CtlsRows = 2,
    CtlsRowcol = 3,
    Projection = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CtlsMu {
    Min = 0,
    Mean = 1,
    Max = 2,
}

/// Opaque dense matrix.
pub struct CtlsMatrix(Matrix);

/// Opaque estimator result.
pub struct CtlsEstimate(EstimateResult);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> CtlsStatus {
    match e {
        Error::EmptyMatrix { .. } | Error::IncompatibleConfig(_) => CtlsStatus::InvalidArgument,
        Error::DataLength { .. } | Error::NonSquare { .. } | Error::WideMatrix { .. } | Error::DimensionMismatch(_) => {
            CtlsStatus::DimensionMismatch
        }
        Error::NonFinite { .. } => CtlsStatus::NonFinite,
        Error::InvalidPartition(_) => CtlsStatus::InvalidPartition,
        Error::LowerBlockSingular { .. } => CtlsStatus::LowerBlockSingular,
        Error::RankDeficientFixedColumns { .. } => CtlsStatus::RankDeficientFixedColumns,
        Error::RankDeficientUpperRows { .. } => CtlsStatus::RankDeficientUpperRows,
        Error::FullRank { .. }
        | Error::NearSingular { .. }
        | Error::NoConvergence { .. }
        | Error::NotPositiveDefinite { .. }
        | Error::InfeasibleCandidate { .. } => CtlsStatus::Numerical,
    }
}

struct Failure(CtlsStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), format!("{}: {e}", e.tag()))
    }
}

fn null(what: &str) -> Failure {
    Failure(CtlsStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> CtlsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CtlsStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            CtlsStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn store<T>(out: *mut *mut T, value: T) {
    *out = Box::into_raw(Box::new(value));
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next `ctls_*` call on the same thread.
#[no_mangle]
pub extern "C" fn ctls_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Static name of a status code.
#[no_mangle]
pub extern "C" fn ctls_status_name(status: CtlsStatus) -> *const c_char {
    let s: &'static CStr = match status {
        CtlsStatus::Ok => c"Ok",
        CtlsStatus::NullPointer => c"NullPointer",
        CtlsStatus::InvalidArgument => c"InvalidArgument",
        CtlsStatus::DimensionMismatch => c"DimensionMismatch",
        CtlsStatus::NonFinite => c"NonFinite",
        CtlsStatus::InvalidPartition => c"InvalidPartition",
        CtlsStatus::LowerBlockSingular => c"LowerBlockSingular",
        CtlsStatus::RankDeficientFixedColumns => c"RankDeficientFixedColumns",
        CtlsStatus::RankDeficientUpperRows => c"RankDeficientUpperRows",
        CtlsStatus::Numerical => c"Numerical",
        CtlsStatus::Unavailable => c"Unavailable",
        CtlsStatus::Panic => c"Panic",
    };
    s.as_ptr()
}

/// Library version string.
#[no_mangle]
pub extern "C" fn ctls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `rows * cols` row-major values into a new matrix.
///
/// # Safety
/// `data` must point to `rows * cols` readable doubles and `out` must be
/// writable.
#[no_mangle]
pub unsafe extern "C" fn ctls_matrix_new(
    rows: usize,
    cols: usize,
    data: *const f64,
    out: *mut *mut CtlsMatrix,
) -> CtlsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if data.is_null() {
            return Err(null("data"));
        }
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Failure(CtlsStatus::InvalidArgument, "rows * cols overflows".into()))?;
        let values = std::slice::from_raw_parts(data, len).to_vec();
        store(out, CtlsMatrix(Matrix::from_row_major(rows, cols, values)?));
        Ok(())
    })
}

/// Row count, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn ctls_matrix_rows(m: *const CtlsMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.rows())
}

/// Column count, or 0 for NULL.
///
/// # Safety
/// `m` must be NULL or a live matrix handle.
#[no_mangle]
pub unsafe extern "C" fn ctls_matrix_cols(m: *const CtlsMatrix) -> usize {
    m.as_ref().map_or(0, |m| m.0.cols())
}

/// Copies the entries row-major into `dst`, which holds `len` doubles.
///
/// # Safety
/// `dst` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ctls_matrix_copy(m: *const CtlsMatrix, dst: *mut f64, len: usize) -> CtlsStatus {
    guard(|| {
        let m = deref(m, "matrix")?;
        if dst.is_null() {
            return Err(null("dst"));
        }
        let src = m.0.as_slice();
        if len != src.len() {
            return Err(Failure(
                CtlsStatus::DimensionMismatch,
                format!("buffer holds {len} values, matrix has {}", src.len()),
            ));
        }
        ptr::copy_nonoverlapping(src.as_ptr(), dst, len);
        Ok(())
    })
}

/// Releases a matrix; NULL is ignored.
///
/// # Safety
/// `m` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctls_matrix_free(m: *mut CtlsMatrix) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Estimates `X` from `A` (`m x n`) and `B` (`m x ell`) with `j` exact
/// leading rows and `k` exact leading columns.
///
/// # Safety
/// `a` and `b` must be live matrix handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctls_estimate(
    a: *const CtlsMatrix,
    b: *const CtlsMatrix,
    j: usize,
    k: usize,
    method: CtlsMethod,
    mu: CtlsMu,
    out: *mut *mut CtlsEstimate,
) -> CtlsStatus {
    guard(|| {
        let a = deref(a, "a")?;
        let b = deref(b, "b")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let data = ObservedData::new(a.0.clone(), b.0.clone(), j, k)?;
        let method = match method {
            CtlsMethod::Tls => Method::Tls,
            CtlsMethod::CtlsColumns => Method::CtlsColumns,
            CtlsMethod::CtlsRows => Method::CtlsRows,
            CtlsMethod::CtlsRowcol => Method::CtlsRowcol,
            CtlsMethod::Projection => Method::Projection,
        };
        let opts = EstimatorOptions {
            mu: match mu {
                CtlsMu::Min => MuChoice::Min,
                CtlsMu::Mean => MuChoice::Mean,
                CtlsMu::Max => MuChoice::Max,
            },
            ..Default::default()
        };
        store(out, CtlsEstimate(estimate(&data, method, &opts)?));
        Ok(())
    })
}

/// New matrix holding the estimate `X̂` (`n x ell`).
///
/// # Safety
/// `e` must be a live estimate handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctls_estimate_x_hat(e: *const CtlsEstimate, out: *mut *mut CtlsMatrix) -> CtlsStatus {
    guard(|| {
        let e = deref(e, "estimate")?;
        if out.is_null() {
            return Err(null("out"));
        }
        store(out, CtlsMatrix(e.0.x_hat.clone()));
        Ok(())
    })
}

/// Noise variance estimate.
///
/// # Safety
/// `e` must be a live estimate handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctls_estimate_sigma2(e: *const CtlsEstimate, out: *mut f64) -> CtlsStatus {
    guard(|| {
        let e = deref(e, "estimate")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = e.0.sigma2_hat;
        Ok(())
    })
}

/// Shift `mu` of the projection estimator; `Unavailable` for other methods.
///
/// # Safety
/// `e` must be a live estimate handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ctls_estimate_mu(e: *const CtlsEstimate, out: *mut f64) -> CtlsStatus {
    guard(|| {
        let e = deref(e, "estimate")?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out =
            e.0.mu
                .ok_or_else(|| Failure(CtlsStatus::Unavailable, "estimate has no mu".into()))?;
        Ok(())
    })
}

/// Number of reported smallest eigenvalues (`ell`).
///
/// # Safety
/// `e` must be NULL or a live estimate handle.
#[no_mangle]
pub unsafe extern "C" fn ctls_estimate_eig_count(e: *const CtlsEstimate) -> usize {
    e.as_ref().map_or(0, |e| e.0.smallest_eigs.len())
}

/// Copies the smallest eigenvalues, ascending, into `dst` (`len` doubles).
///
/// # Safety
/// `e` must be a live estimate handle and `dst` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ctls_estimate_eigs(e: *const CtlsEstimate, dst: *mut f64, len: usize) -> CtlsStatus {
    guard(|| {
        let e = deref(e, "estimate")?;
        if dst.is_null() {
            return Err(null("dst"));
        }
        let eigs = &e.0.smallest_eigs;
        if len != eigs.len() {
            return Err(Failure(
                CtlsStatus::DimensionMismatch,
                format!("buffer holds {len} values, estimate has {}", eigs.len()),
            ));
        }
        ptr::copy_nonoverlapping(eigs.as_ptr(), dst, len);
        Ok(())
    })
}

/// Releases an estimate; NULL is ignored.
///
/// # Safety
/// `e` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ctls_estimate_free(e: *mut CtlsEstimate) {
    if !e.is_null() {
        drop(Box::from_raw(e));
    }
}

/// Seeded synthetic instance with i.i.d. Gaussian design and noise; the
/// same arguments always produce the same matrices as `ctls simulate`.
///
/// # Safety
/// `a`, `b` and `x_true` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ctls_simulate(
    n: usize,
    ell: usize,
    j: usize,
    k: usize,
    m: usize,
    sigma: f64,
    seed: u64,
    a: *mut *mut CtlsMatrix,
    b: *mut *mut CtlsMatrix,
    x_true: *mut *mut CtlsMatrix,
) -> CtlsStatus {
    guard(|| {
        if a.is_null() || b.is_null() || x_true.is_null() {
            return Err(null("output pointer"));
        }
        if !(sigma.is_finite() && sigma >= 0.0) {
            return Err(Failure(
                CtlsStatus::InvalidArgument,
                format!("sigma must be >= 0, got {sigma}"),
            ));
        }
        let partition = PartitionSpec::new(j, k, n, ell, m)?;
        let model = generate_model(partition, seed, DesignKind::IidRows)?.with_sigma(sigma);
        let data = observe(&model, derive_seed(seed, ctls_core::cli::SIMULATE_NOISE_STREAM));
        store(a, CtlsMatrix(data.a));
        store(b, CtlsMatrix(data.b));
        store(x_true, CtlsMatrix(model.x_true));
        Ok(())
    })
}
