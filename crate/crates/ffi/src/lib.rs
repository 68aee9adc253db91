//! C ABI for adipredict.
//!
//! Conventions:
//!
//! * Every fallible function returns an [`AdpStatus`]; results go through
//!   out-pointers that are written only on success.
//! * On failure a message is kept per thread and can be read with
//!   [`adp_last_error_message`] until the next failing call on that thread.
//! * Handles (`AdpDataset`, `AdpModel`, `AdpReport`) are opaque and owned by
//!   the caller, who releases them with the matching `*_free` function.
//!   Strings returned as `char *` are released with [`adp_string_free`].
//! * Strings passed in must be NUL-terminated UTF-8.
//! * Panics never cross the boundary; they surface as `ADP_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::Duration;

use adipredict::budget::Deadline;
use adipredict::dataset::{Dataset, Task};
use adipredict::experiment::{
    render_report_csv, render_table, run_cv, AlgorithmEntry, ExperimentSpec, RankingReport,
    TableFormat,
};
use adipredict::fixed::{invert_linear, FixedEquation};
use adipredict::ingest::{classify_pixel, counts_to_volume, FatClass, VoxelSpacing};
use adipredict::metrics::{evaluate, MetricStatus, PredictionSet};
use adipredict::regressors::{RegressionModel, TrainConfig, TrainedModel};
use adipredict::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Parse = 4,
    DimensionMismatch = 5,
    NotInvertible = 6,
    SingularDesign = 7,
    Timeout = 8,
    TrainingFailed = 9,
    UnknownName = 10,
    Panic = 11,
}

/// Mask class of a pixel.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdpFatClass {
    Epicardial = 0,
    Mediastinal = 1,
    Pericardium = 2,
    OtherFat = 3,
    Background = 4,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdpMetricStatus {
    Ok = 0,
    RhoUndefined = 1,
    DenominatorZero = 2,
}

/// Rendering of a ranking report.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AdpReportFormat {
    /// Display-precision table, comma separated.
    TableCsv = 0,
    /// Display-precision table, aligned text.
    TableText = 1,
    /// Full-precision report CSV with header comments.
    FullCsv = 2,
}

/// Pooled evaluation measures. `rho` is meaningful only when `has_rho`;
/// `rae_pct` and `rrse_pct` only when `has_relative`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdpEvalReport {
    pub rho: f64,
    pub mae: f64,
    pub rmse: f64,
    pub rae_pct: f64,
    pub rrse_pct: f64,
    pub n: usize,
    pub has_rho: bool,
    pub has_relative: bool,
    pub status: AdpMetricStatus,
}

/// A loaded dataset bound to one prediction task.
pub struct AdpDataset {
    inner: Dataset,
}

/// A trained, loaded or fixed regression model.
pub struct AdpModel {
    inner: TrainedModel,
    names: Vec<CString>,
    target: CString,
}

/// Result of a cross-validation run.
pub struct AdpReport {
    inner: RankingReport,
}

struct Failure {
    status: AdpStatus,
    message: String,
}

impl Failure {
    fn new(status: AdpStatus, message: impl Into<String>) -> Self {
        Failure {
            status,
            message: message.into(),
        }
    }

    fn null(what: &str) -> Self {
        Failure::new(AdpStatus::NullPointer, format!("{what} is NULL"))
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.root() {
            Error::Io(_) => AdpStatus::Io,
            Error::Parse { .. } | Error::ModelFormat(_) => AdpStatus::Parse,
            Error::DimensionMismatch { .. } => AdpStatus::DimensionMismatch,
            Error::NotInvertible { .. } => AdpStatus::NotInvertible,
            Error::SingularDesign(_) => AdpStatus::SingularDesign,
            Error::DeadlineExceeded => AdpStatus::Timeout,
            Error::TrainingDiverged { .. } => AdpStatus::TrainingFailed,
            Error::UnknownFeature(_) | Error::UnknownAlgorithm { .. } | Error::UnknownTask(_) => {
                AdpStatus::UnknownName
            }
            _ => AdpStatus::InvalidArgument,
        };
        Failure::new(status, e.to_string())
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> AdpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => AdpStatus::Ok,
        Ok(Err(fail)) => {
            set_last_error(&fail.message);
            fail.status
        }
        Err(_) => {
            set_last_error("internal panic");
            AdpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(Failure::null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        Failure::new(
            AdpStatus::InvalidArgument,
            format!("{what} is not valid UTF-8"),
        )
    })
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| Failure::null(what))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| Failure::null(what))
}

unsafe fn slice_arg<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], Failure> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Failure::null(what));
    }
    Ok(std::slice::from_raw_parts(p, n))
}

fn to_c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " "))
        .expect("NULs removed")
        .into_raw()
}

fn model_handle(inner: TrainedModel) -> *mut AdpModel {
    let names = inner
        .feature_names
        .iter()
        .map(|n| CString::new(n.as_str()).unwrap_or_default())
        .collect();
    let target = CString::new(inner.target_name.as_str()).unwrap_or_default();
    Box::into_raw(Box::new(AdpModel {
        inner,
        names,
        target,
    }))
}

/// Message of the last failing call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn adp_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn adp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. NULL is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn adp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Nearest canonical mask class of an RGB pixel.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_classify_pixel(
    r: u8,
    g: u8,
    b: u8,
    out: *mut AdpFatClass,
) -> AdpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = match classify_pixel([r, g, b]) {
            FatClass::Epicardial => AdpFatClass::Epicardial,
            FatClass::Mediastinal => AdpFatClass::Mediastinal,
            FatClass::Pericardium => AdpFatClass::Pericardium,
            FatClass::OtherFat => AdpFatClass::OtherFat,
            FatClass::Background => AdpFatClass::Background,
        };
        Ok(())
    })
}

/// Volume in mm³ of `count` voxels of size `dx × dy × dz` mm.
///
/// # Safety
/// `out` must be NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_counts_to_volume(
    count: f64,
    dx: f64,
    dy: f64,
    dz: f64,
    out: *mut f64,
) -> AdpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spacing = VoxelSpacing::new(dx, dy, dz)?;
        *out = counts_to_volume(count, &spacing)?;
        Ok(())
    })
}

/// Pooled evaluation of `n` (predicted, actual) pairs.
///
/// # Safety
/// `predicted` and `actual` must point to `n` doubles; `out` must be valid
/// for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_evaluate(
    predicted: *const f64,
    actual: *const f64,
    n: usize,
    out: *mut AdpEvalReport,
) -> AdpStatus {
    guard(|| {
        let a = slice_arg(predicted, n, "predicted")?;
        let b = slice_arg(actual, n, "actual")?;
        let out = out_arg(out, "out")?;
        let r = evaluate(&PredictionSet::from_pairs(
            a.iter().copied().zip(b.iter().copied()),
        ))?;
        *out = AdpEvalReport {
            rho: r.rho.unwrap_or(f64::NAN),
            mae: r.mae,
            rmse: r.rmse,
            rae_pct: r.rae_pct.unwrap_or(f64::NAN),
            rrse_pct: r.rrse_pct.unwrap_or(f64::NAN),
            n: r.n,
            has_rho: r.rho.is_some(),
            has_relative: r.rae_pct.is_some(),
            status: match r.status {
                MetricStatus::Ok => AdpMetricStatus::Ok,
                MetricStatus::RhoUndefined => AdpMetricStatus::RhoUndefined,
                MetricStatus::DenominatorZero => AdpMetricStatus::DenominatorZero,
            },
        };
        Ok(())
    })
}

/// Loads a dataset CSV for `task` (e.g. `"mediastinal-from-epicardial"`).
///
/// # Safety
/// `path` and `task` must be NUL-terminated strings; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_dataset_load(
    path: *const c_char,
    task: *const c_char,
    out: *mut *mut AdpDataset,
) -> AdpStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let task: Task = str_arg(task, "task")?.parse()?;
        let out = out_arg(out, "out")?;
        let inner = Dataset::load_csv(Path::new(path), task)?;
        *out = Box::into_raw(Box::new(AdpDataset { inner }));
        Ok(())
    })
}

/// Number of instances.
///
/// # Safety
/// `d` must be a live dataset handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_dataset_len(d: *const AdpDataset, out: *mut usize) -> AdpStatus {
    guard(|| {
        let d = ref_arg(d, "dataset")?;
        *out_arg(out, "out")? = d.inner.len();
        Ok(())
    })
}

/// Number of features of the dataset's task.
///
/// # Safety
/// `d` must be a live dataset handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_dataset_n_features(
    d: *const AdpDataset,
    out: *mut usize,
) -> AdpStatus {
    guard(|| {
        let d = ref_arg(d, "dataset")?;
        *out_arg(out, "out")? = d.inner.feature_names().len();
        Ok(())
    })
}

/// Releases a dataset. NULL is ignored.
///
/// # Safety
/// `d` must come from [`adp_dataset_load`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn adp_dataset_free(d: *mut AdpDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// One of the published equations: `"fixed:eq8"`, `"fixed:eq9"`, `"fixed:eq10"`.
///
/// # Safety
/// `id` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_model_fixed(id: *const c_char, out: *mut *mut AdpModel) -> AdpStatus {
    guard(|| {
        let eq: FixedEquation = str_arg(id, "id")?.parse()?;
        let out = out_arg(out, "out")?;
        let m = eq.model();
        *out = model_handle(TrainedModel {
            feature_names: m.feature_names.clone(),
            target_name: m.target_name.clone(),
            model: RegressionModel::Linear(m),
        });
        Ok(())
    })
}

/// Fits `algorithm` (a selection string such as `"knn:k=3"`) on the whole
/// dataset.
///
/// # Safety
/// `d` must be a live dataset handle; `algorithm` a NUL-terminated string;
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_model_train(
    d: *const AdpDataset,
    algorithm: *const c_char,
    seed: u64,
    out: *mut *mut AdpModel,
) -> AdpStatus {
    guard(|| {
        let d = ref_arg(d, "dataset")?;
        let config = TrainConfig::parse(str_arg(algorithm, "algorithm")?)?;
        let out = out_arg(out, "out")?;
        let model = config.train(&d.inner.samples(), seed, &Deadline::unlimited())?;
        *out = model_handle(TrainedModel {
            feature_names: d.inner.feature_names().to_vec(),
            target_name: d.inner.target_name().to_string(),
            model,
        });
        Ok(())
    })
}

/// Reads a model file written by [`adp_model_save`] or the CLI.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_model_load(path: *const c_char, out: *mut *mut AdpModel) -> AdpStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let out = out_arg(out, "out")?;
        *out = model_handle(TrainedModel::load(Path::new(path))?);
        Ok(())
    })
}

/// Writes the model in the plain-text model format.
///
/// # Safety
/// `m` must be a live model handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn adp_model_save(m: *const AdpModel, path: *const c_char) -> AdpStatus {
    guard(|| {
        let m = ref_arg(m, "model")?;
        m.inner.save(Path::new(str_arg(path, "path")?))?;
        Ok(())
    })
}

/// Number of inputs the model expects.
///
/// # Safety
/// `m` must be a live model handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_model_n_features(m: *const AdpModel, out: *mut usize) -> AdpStatus {
    guard(|| {
        let m = ref_arg(m, "model")?;
        *out_arg(out, "out")? = m.inner.feature_names.len();
        Ok(())
    })
}

/// Name of input `index`. The string is owned by the model handle.
///
/// # Safety
/// `m` must be a live model handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_model_feature_name(
    m: *const AdpModel,
    index: usize,
    out: *mut *const c_char,
) -> AdpStatus {
    guard(|| {
        let m = ref_arg(m, "model")?;
        let out = out_arg(out, "out")?;
        let name = m.names.get(index).ok_or_else(|| {
            Failure::new(
                AdpStatus::InvalidArgument,
                format!("feature index {index} out of range"),
            )
        })?;
        *out = name.as_ptr();
        Ok(())
    })
}

/// Name of the predicted quantity. The string is owned by the model handle.
///
/// # Safety
/// `m` must be a live model handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_model_target_name(
    m: *const AdpModel,
    out: *mut *const c_char,
) -> AdpStatus {
    guard(|| {
        let m = ref_arg(m, "model")?;
        *out_arg(out, "out")? = m.target.as_ptr();
        Ok(())
    })
}

/// Raw (unclamped) prediction for one input row in feature order.
///
/// # Safety
/// `m` must be a live model handle; `x` must point to `n` doubles; `out`
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_model_predict(
    m: *const AdpModel,
    x: *const f64,
    n: usize,
    out: *mut f64,
) -> AdpStatus {
    guard(|| {
        let m = ref_arg(m, "model")?;
        let x = slice_arg(x, n, "x")?;
        let out = out_arg(out, "out")?;
        *out = m.inner.model.predict(x)?;
        Ok(())
    })
}

/// Solves a linear model for one of its inputs; the old target takes that
/// input's position.
///
/// # Safety
/// `m` must be a live model handle; `solve_for` a NUL-terminated string;
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_model_invert(
    m: *const AdpModel,
    solve_for: *const c_char,
    out: *mut *mut AdpModel,
) -> AdpStatus {
    guard(|| {
        let m = ref_arg(m, "model")?;
        let solve_for = str_arg(solve_for, "solve_for")?;
        let out = out_arg(out, "out")?;
        let RegressionModel::Linear(lin) = &m.inner.model else {
            return Err(Failure::new(
                AdpStatus::InvalidArgument,
                "only linear models can be inverted",
            ));
        };
        let inv = invert_linear(lin, solve_for)?;
        *out = model_handle(TrainedModel {
            feature_names: inv.feature_names.clone(),
            target_name: inv.target_name.clone(),
            model: RegressionModel::Linear(inv),
        });
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `m` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn adp_model_free(m: *mut AdpModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Cross-validates a comma-separated algorithm list (as accepted by the
/// CLI's `--algorithms`) on the dataset's task.
///
/// # Safety
/// `d` must be a live dataset handle; `algorithms` a NUL-terminated string;
/// `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_run_cv(
    d: *const AdpDataset,
    algorithms: *const c_char,
    folds: usize,
    seed: u64,
    budget_s: f64,
    out: *mut *mut AdpReport,
) -> AdpStatus {
    guard(|| {
        let d = ref_arg(d, "dataset")?;
        let list = str_arg(algorithms, "algorithms")?;
        let out = out_arg(out, "out")?;
        if !(budget_s.is_finite() && budget_s > 0.0) {
            return Err(Failure::new(
                AdpStatus::InvalidArgument,
                "budget_s must be > 0",
            ));
        }
        let entries = adipredict::cli::split_algorithms(list)
            .iter()
            .map(|s| AlgorithmEntry::parse(s))
            .collect::<Result<Vec<_>, _>>()?;
        let mut spec = ExperimentSpec::new(d.inner.task(), entries, seed);
        spec.folds = folds;
        spec.budget = Duration::from_secs_f64(budget_s);
        let inner = run_cv(&d.inner, &spec)?;
        *out = Box::into_raw(Box::new(AdpReport { inner }));
        Ok(())
    })
}

/// Number of rows (one per algorithm).
///
/// # Safety
/// `r` must be a live report handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_report_len(r: *const AdpReport, out: *mut usize) -> AdpStatus {
    guard(|| {
        let r = ref_arg(r, "report")?;
        *out_arg(out, "out")? = r.inner.rows.len();
        Ok(())
    })
}

/// Renders the report; release the result with [`adp_string_free`].
///
/// # Safety
/// `r` must be a live report handle; `out` valid for writes.
#[no_mangle]
pub unsafe extern "C" fn adp_report_render(
    r: *const AdpReport,
    format: AdpReportFormat,
    out: *mut *mut c_char,
) -> AdpStatus {
    guard(|| {
        let r = ref_arg(r, "report")?;
        let out = out_arg(out, "out")?;
        let text = match format {
            AdpReportFormat::TableCsv => render_table(&r.inner, TableFormat::Csv),
            AdpReportFormat::TableText => render_table(&r.inner, TableFormat::Text),
            AdpReportFormat::FullCsv => render_report_csv(&r.inner, false),
        };
        *out = to_c_string(text);
        Ok(())
    })
}

/// Releases a report. NULL is ignored.
///
/// # Safety
/// `r` must come from [`adp_run_cv`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn adp_report_free(r: *mut AdpReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}
