//! C ABI over the `gosvm` library.
//!
//! Every fallible function returns a [`GosvmStatus`]; on failure the message
//! is available from [`gosvm_last_error`] on the same thread. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::slice;

use gosvm::data::{read_dataset, write_dataset, Dataset, Label, LabeledSample};
use gosvm::gosvm::{evaluate_model, train_gosvm, GoSvmParams, GoSvmSolution};
use gosvm::kernels::KernelSpec;
use gosvm::nusvm::{train_nusvm, TrainedModel};
use gosvm::ordermetrics::OrderingMode;
use gosvm::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GosvmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    InsufficientData = 6,
    /// ν or (ν_b, ν_o, α) outside the feasible range.
    Infeasible = 7,
    SolverFailed = 8,
    Panic = 9,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GosvmKernel {
    Linear = 0,
    Rbf = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GosvmOrdering {
    Global = 0,
    PerClass = 1,
}

/// Test-set metrics. `liso` is NaN when the dataset has no oracle.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GosvmEvaluation {
    pub error_rate: f64,
    pub liso: f64,
    pub balance: f64,
}

/// Opaque labeled dataset.
pub struct GosvmDataset(Dataset);

/// Opaque trained model, with the ordering used for evaluation.
pub struct GosvmModel {
    model: TrainedModel,
    ordering: OrderingMode,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> GosvmStatus {
    match e {
        Error::Io { .. } => GosvmStatus::Io,
        Error::Parse { .. } => GosvmStatus::Parse,
        Error::DimensionMismatch { .. } => GosvmStatus::DimensionMismatch,
        Error::InsufficientData { .. } | Error::EmptyClass(_) | Error::MissingOracle => {
            GosvmStatus::InsufficientData
        }
        Error::InfeasibleNu { .. } | Error::InfeasibleParams { .. } => GosvmStatus::Infeasible,
        Error::SolverFailed(_) | Error::IllConditioned { .. } => GosvmStatus::SolverFailed,
        _ => GosvmStatus::InvalidArgument,
    }
}

/// Runs `f`, recording any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (GosvmStatus, String)>) -> GosvmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GosvmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            GosvmStatus::Panic
        }
    }
}

fn lib<T>(r: gosvm::Result<T>) -> Result<T, (GosvmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (GosvmStatus, String) {
    (GosvmStatus::NullPointer, format!("{what} is null"))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, (GosvmStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p).to_str().map(PathBuf::from).map_err(|_| {
        (
            GosvmStatus::InvalidArgument,
            "path is not valid UTF-8".into(),
        )
    })
}

unsafe fn out_arg<'a, T>(p: *mut *mut T) -> Result<&'a mut *mut T, (GosvmStatus, String)> {
    p.as_mut().ok_or_else(|| null("output pointer"))
}

fn kernel_spec(kind: GosvmKernel, width: f64) -> gosvm::Result<KernelSpec> {
    match kind {
        GosvmKernel::Linear => Ok(KernelSpec::Linear),
        GosvmKernel::Rbf => KernelSpec::rbf(width),
    }
}

fn ordering_mode(o: GosvmOrdering) -> OrderingMode {
    match o {
        GosvmOrdering::Global => OrderingMode::Global,
        GosvmOrdering::PerClass => OrderingMode::PerClass,
    }
}

/// Message of the last failure on this thread, or null. Valid until the
/// next call into the library on this thread.
#[no_mangle]
pub extern "C" fn gosvm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Reads a dataset CSV (`f0..,label[,oracle]`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gosvm_dataset_read(
    path: *const c_char,
    out: *mut *mut GosvmDataset,
) -> GosvmStatus {
    guard(|| {
        let out = out_arg(out)?;
        let ds = lib(read_dataset(path_arg(path)?))?;
        *out = Box::into_raw(Box::new(GosvmDataset(ds)));
        Ok(())
    })
}

/// Builds a dataset from a row-major `n × dim` feature matrix and `±1`
/// labels. `oracle` may be null.
///
/// # Safety
/// `features` must point to `n*dim` values, `labels` to `n`, and `oracle`
/// (if non-null) to `n`.
#[no_mangle]
pub unsafe extern "C" fn gosvm_dataset_from_arrays(
    features: *const f64,
    labels: *const i8,
    oracle: *const f64,
    n: usize,
    dim: usize,
    out: *mut *mut GosvmDataset,
) -> GosvmStatus {
    guard(|| {
        let out = out_arg(out)?;
        if n > 0 && (features.is_null() || labels.is_null()) {
            return Err(null("features or labels"));
        }
        let len = n
            .checked_mul(dim)
            .ok_or((GosvmStatus::InvalidArgument, "n*dim overflows".to_string()))?;
        let (x, y) = if n == 0 {
            (&[][..], &[][..])
        } else {
            (
                slice::from_raw_parts(features, len),
                slice::from_raw_parts(labels, n),
            )
        };
        let o = (!oracle.is_null() && n > 0).then(|| slice::from_raw_parts(oracle, n));
        let samples = (0..n)
            .map(|i| {
                let label = Label::try_from(i64::from(y[i]))
                    .map_err(|e| (GosvmStatus::InvalidArgument, e))?;
                Ok(LabeledSample::new(
                    x[i * dim..(i + 1) * dim].to_vec(),
                    label,
                    o.map(|o| o[i]),
                ))
            })
            .collect::<Result<Vec<_>, _>>()?;
        *out = Box::into_raw(Box::new(GosvmDataset(lib(Dataset::new(samples, dim))?)));
        Ok(())
    })
}

/// # Safety
/// `ds` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gosvm_dataset_write(
    ds: *const GosvmDataset,
    path: *const c_char,
) -> GosvmStatus {
    guard(|| {
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        lib(write_dataset(&ds.0, path_arg(path)?))
    })
}

/// Number of samples; 0 for a null handle.
///
/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gosvm_dataset_len(ds: *const GosvmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.len())
}

/// # Safety
/// `ds` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gosvm_dataset_dim(ds: *const GosvmDataset) -> usize {
    ds.as_ref().map_or(0, |d| d.0.dim())
}

/// # Safety
/// `ds` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gosvm_dataset_free(ds: *mut GosvmDataset) {
    if !ds.is_null() {
        drop(Box::from_raw(ds));
    }
}

/// Trains a ν-SVM.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gosvm_train_nusvm(
    ds: *const GosvmDataset,
    nu: f64,
    kernel: GosvmKernel,
    width: f64,
    out: *mut *mut GosvmModel,
) -> GosvmStatus {
    guard(|| {
        let out = out_arg(out)?;
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let model = lib(train_nusvm(&ds.0, nu, &lib(kernel_spec(kernel, width))?))?;
        *out = Box::into_raw(Box::new(GosvmModel {
            model,
            ordering: OrderingMode::Global,
        }));
        Ok(())
    })
}

/// Trains a GO-SVM; the dataset needs an oracle column.
///
/// # Safety
/// `ds` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gosvm_train_gosvm(
    ds: *const GosvmDataset,
    nu_b: f64,
    nu_o: f64,
    alpha: f64,
    kernel: GosvmKernel,
    width: f64,
    ordering: GosvmOrdering,
    out: *mut *mut GosvmModel,
) -> GosvmStatus {
    guard(|| {
        let out = out_arg(out)?;
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let ordering = ordering_mode(ordering);
        let p = GoSvmParams::new(nu_b, nu_o, alpha, lib(kernel_spec(kernel, width))?)
            .with_ordering(ordering);
        let sol = lib(train_gosvm(&ds.0, &p))?;
        *out = Box::into_raw(Box::new(GosvmModel {
            model: sol.model,
            ordering,
        }));
        Ok(())
    })
}

/// Loads a model file written by the CLI or by [`gosvm_model_save`].
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gosvm_model_load(
    path: *const c_char,
    out: *mut *mut GosvmModel,
) -> GosvmStatus {
    guard(|| {
        let out = out_arg(out)?;
        let path = path_arg(path)?;
        let text = std::fs::read_to_string(&path)
            .map_err(|e| (GosvmStatus::Io, format!("{}: {e}", path.display())))?;
        let m = match GoSvmSolution::from_toml(&text) {
            Ok(sol) => GosvmModel {
                ordering: sol.params.ordering,
                model: sol.model,
            },
            Err(_) => GosvmModel {
                model: lib(TrainedModel::from_toml(&text))?,
                ordering: OrderingMode::Global,
            },
        };
        *out = Box::into_raw(Box::new(m));
        Ok(())
    })
}

/// Saves the model (without GO-SVM training diagnostics).
///
/// # Safety
/// `model` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn gosvm_model_save(
    model: *const GosvmModel,
    path: *const c_char,
) -> GosvmStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        lib(m.model.save(path_arg(path)?))
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn gosvm_model_dim(model: *const GosvmModel) -> usize {
    model.as_ref().map_or(0, |m| m.model.dim())
}

/// Decision value `f(x)`; the sign is the predicted class (0 → −1).
///
/// # Safety
/// `x` must point to `dim` values; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gosvm_model_predict(
    model: *const GosvmModel,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> GosvmStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        if x.is_null() && dim > 0 {
            return Err(null("x"));
        }
        let xs = if dim == 0 {
            &[][..]
        } else {
            slice::from_raw_parts(x, dim)
        };
        *out = lib(m.model.predict(xs))?;
        Ok(())
    })
}

/// # Safety
/// Both handles must be live; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn gosvm_model_evaluate(
    model: *const GosvmModel,
    ds: *const GosvmDataset,
    out: *mut GosvmEvaluation,
) -> GosvmStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let ds = ds.as_ref().ok_or_else(|| null("dataset"))?;
        let out = out.as_mut().ok_or_else(|| null("output pointer"))?;
        let ev = lib(evaluate_model(&m.model, m.ordering, &ds.0))?;
        *out = GosvmEvaluation {
            error_rate: ev.error_rate,
            liso: ev.liso.unwrap_or(f64::NAN),
            balance: ev.balance,
        };
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gosvm_model_free(model: *mut GosvmModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}
