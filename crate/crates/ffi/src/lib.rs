//! C ABI over the depscore library.
//!
//! Every fallible function returns a [`DsStatus`]. On failure a description
//! is kept per thread and can be read with [`ds_last_error_message`].
//! Datasets are opaque handles created by a `ds_dataset_from_*` call and
//! released with [`ds_dataset_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use depscore::checks::{classify_check_name, CheckCategory};
use depscore::confidence::{ci_precision, interval_for_counts, posterior_params};
use depscore::datasets::{
    read_events_file, read_snapshots_file, DatasetError, ThreeTupleDataset, TupleKey,
};
use depscore::scoring::{compatibility_score, range_compatibility_score, Badge, ScoreReport};
use depscore::versions::{in_origin_range, parse_version, RangeLevel};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Parse = 4,
    NotFound = 5,
    Domain = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsRangeLevel {
    Exact = 0,
    Patch = 1,
    Minor = 2,
    Major = 3,
}

impl From<DsRangeLevel> for RangeLevel {
    fn from(l: DsRangeLevel) -> Self {
        match l {
            DsRangeLevel::Exact => RangeLevel::Exact,
            DsRangeLevel::Patch => RangeLevel::Patch,
            DsRangeLevel::Minor => RangeLevel::Minor,
            DsRangeLevel::Major => RangeLevel::Major,
        }
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DsCheckCategory {
    Build = 0,
    Test = 1,
    Useless = 2,
    Lint = 3,
    Deploy = 4,
    SecurityAnalysis = 5,
    Unclassified = 6,
}

impl From<CheckCategory> for DsCheckCategory {
    fn from(c: CheckCategory) -> Self {
        match c {
            CheckCategory::Build => DsCheckCategory::Build,
            CheckCategory::Test => DsCheckCategory::Test,
            CheckCategory::Useless => DsCheckCategory::Useless,
            CheckCategory::Lint => DsCheckCategory::Lint,
            CheckCategory::Deploy => DsCheckCategory::Deploy,
            CheckCategory::SecurityAnalysis => DsCheckCategory::SecurityAnalysis,
            CheckCategory::Unclassified => DsCheckCategory::Unclassified,
        }
    }
}

/// 90% interval. `precision` is the unclamped half-width.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DsInterval {
    pub lo: f64,
    pub hi: f64,
    pub precision: f64,
}

/// Flattened score report. `score`, `percent` and `interval` are meaningful
/// only when `has_score` is true.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DsScoreReport {
    pub candidate_updates: u64,
    pub successful_updates: u64,
    pub has_score: bool,
    pub score: f64,
    /// Half-up rounded percentage.
    pub percent: u32,
    pub badge_shown: bool,
    pub interval: DsInterval,
    pub matched_records: usize,
    pub excluded_unparseable: usize,
}

impl From<&ScoreReport> for DsScoreReport {
    fn from(r: &ScoreReport) -> Self {
        DsScoreReport {
            candidate_updates: r.candidate_updates,
            successful_updates: r.successful_updates,
            has_score: r.score.is_some(),
            score: r.score.map_or(0.0, |s| s.value()),
            percent: r.score.map_or(0, |s| s.percent() as u32),
            badge_shown: r.badge == Badge::Shown,
            interval: r.interval.map_or(DsInterval::default(), |i| DsInterval {
                lo: i.lo,
                hi: i.hi,
                precision: i.precision,
            }),
            matched_records: r.matched_records,
            excluded_unparseable: r.excluded_unparseable,
        }
    }
}

/// Opaque 3-tuple dataset.
pub struct DsDataset {
    inner: ThreeTupleDataset,
    rejected: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

struct Failure(DsStatus, String);

type FfiResult<T> = Result<T, Failure>;

fn fail<T>(status: DsStatus, msg: impl Into<String>) -> FfiResult<T> {
    Err(Failure(status, msg.into()))
}

/// Run `f`, turning errors and panics into a status plus the thread's last error.
fn guard(f: impl FnOnce() -> FfiResult<()>) -> DsStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => DsStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            DsStatus::Panic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> FfiResult<&'a str> {
    if p.is_null() {
        return fail(DsStatus::NullPointer, format!("{what} is NULL"));
    }
    CStr::from_ptr(p)
        .to_str()
        .or_else(|_| fail(DsStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

fn out_ref<'a, T>(p: *mut T, what: &str) -> FfiResult<&'a mut T> {
    // SAFETY: callers pass either NULL or a valid, writable pointer.
    unsafe { p.as_mut() }.ok_or_else(|| Failure(DsStatus::NullPointer, format!("{what} is NULL")))
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn ds_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

fn dataset_failure(e: DatasetError) -> Failure {
    let status = match e {
        DatasetError::Io { .. } => DsStatus::Io,
        DatasetError::Malformed(_) => DsStatus::Parse,
    };
    Failure(status, e.to_string())
}

fn load(path: *const c_char, out: *mut *mut DsDataset, snapshots: bool) -> DsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = ptr::null_mut();
        // SAFETY: path is NULL or a NUL-terminated string as documented on the entry points.
        let path = unsafe { text(path, "path") }?;
        let (inner, rejected) = if snapshots {
            let (records, report) =
                read_snapshots_file(path).map_err(dataset_failure)?;
            (ThreeTupleDataset::from_snapshots(records).0, report.rejected.len())
        } else {
            let (events, report) =
                read_events_file(path).map_err(dataset_failure)?;
            (ThreeTupleDataset::from_events(&events), report.rejected.len())
        };
        *out = Box::into_raw(Box::new(DsDataset { inner, rejected }));
        Ok(())
    })
}

/// Build a dataset from a newline-delimited event log. `*out` is set to NULL
/// on failure.
///
/// # Safety
/// `path` must be NULL or a NUL-terminated string; `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_dataset_from_events_file(
    path: *const c_char,
    out: *mut *mut DsDataset,
) -> DsStatus {
    load(path, out, false)
}

/// Build a dataset from a snapshot file; duplicate keys keep the latest record.
///
/// # Safety
/// As for [`ds_dataset_from_events_file`].
#[no_mangle]
pub unsafe extern "C" fn ds_dataset_from_snapshots_file(
    path: *const c_char,
    out: *mut *mut DsDataset,
) -> DsStatus {
    load(path, out, true)
}

/// # Safety
/// `dataset` must be NULL or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ds_dataset_free(dataset: *mut DsDataset) {
    if !dataset.is_null() {
        drop(Box::from_raw(dataset));
    }
}

/// Number of keys; 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_dataset_len(dataset: *const DsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.inner.len())
}

/// Records rejected while loading; 0 for NULL.
///
/// # Safety
/// `dataset` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ds_dataset_rejected(dataset: *const DsDataset) -> usize {
    dataset.as_ref().map_or(0, |d| d.rejected)
}

/// Score an update. At `DS_RANGE_LEVEL_EXACT` `origin` is required and an
/// absent tuple gives `DS_STATUS_NOT_FOUND`; at range levels `origin` is
/// ignored and may be NULL.
///
/// # Safety
/// Strings must be NULL or NUL-terminated; `dataset` a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ds_score(
    dataset: *const DsDataset,
    provider: *const c_char,
    ecosystem: *const c_char,
    origin: *const c_char,
    target: *const c_char,
    level: DsRangeLevel,
    out: *mut DsScoreReport,
) -> DsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let ds = match dataset.as_ref() {
            Some(d) => &d.inner,
            None => return fail(DsStatus::NullPointer, "dataset is NULL"),
        };
        let provider = text(provider, "provider")?;
        let ecosystem = text(ecosystem, "ecosystem")?;
        let target = text(target, "target")?;
        let report = match RangeLevel::from(level) {
            RangeLevel::Exact => {
                let key = TupleKey::new(provider, ecosystem, text(origin, "origin")?, target);
                match ds.get(&key) {
                    Some(rec) => compatibility_score(rec),
                    None => return fail(DsStatus::NotFound, format!("unknown tuple {key}")),
                }
            }
            l => range_compatibility_score(ds, provider, ecosystem, target, l)
                .or_else(|e| fail(DsStatus::Parse, e.to_string()))?,
        };
        *out = DsScoreReport::from(&report);
        Ok(())
    })
}

/// Interval for `successes` out of `candidates` (candidates >= 1).
///
/// # Safety
/// `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_confidence_interval(
    candidates: u64,
    successes: u64,
    out: *mut DsInterval,
) -> DsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let i = interval_for_counts(candidates, successes)
            .or_else(|e| fail(DsStatus::Domain, e.to_string()))?;
        *out = DsInterval {
            lo: i.lo,
            hi: i.hi,
            precision: i.precision,
        };
        Ok(())
    })
}

/// Unclamped interval half-width; defined for `candidates == 0` too.
///
/// # Safety
/// `out` must be NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_ci_precision(candidates: u64, successes: u64, out: *mut f64) -> DsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let p = posterior_params(candidates, successes)
            .or_else(|e| fail(DsStatus::Domain, e.to_string()))?;
        *out = ci_precision(p);
        Ok(())
    })
}

/// # Safety
/// `name` must be NULL or NUL-terminated; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_classify_check(name: *const c_char, out: *mut DsCheckCategory) -> DsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        *out = classify_check_name(text(name, "name")?).into();
        Ok(())
    })
}

/// Whether `origin` falls in the `level` bucket of `target`. Unparseable
/// versions give `DS_STATUS_PARSE`.
///
/// # Safety
/// Strings must be NULL or NUL-terminated; `out` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn ds_version_in_origin_range(
    origin: *const c_char,
    target: *const c_char,
    level: DsRangeLevel,
    out: *mut bool,
) -> DsStatus {
    guard(|| {
        let out = out_ref(out, "out")?;
        let o = parse_version(text(origin, "origin")?).or_else(|e| fail(DsStatus::Parse, e.to_string()))?;
        let t = parse_version(text(target, "target")?).or_else(|e| fail(DsStatus::Parse, e.to_string()))?;
        *out = in_origin_range(&o, &t, level.into());
        Ok(())
    })
}
