//! C ABI over `tailfit`.
//!
//! Objects are opaque heap handles created by `tailfit_*_new`-style
//! constructors and released with the matching `*_free`. Every fallible call
//! returns a [`TailfitStatus`]; on failure a message is kept per thread and
//! can be read with [`tailfit_last_error`]. Strings returned to the caller
//! must be released with [`tailfit_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use tailfit::distributions::{ExponentialModel, LogNormalModel, PowerLawModel, Sampler};
use tailfit::fitting::{log_grid, ComparisonReport, Fitter};
use tailfit::ingestion::{parse_manifest, Category, Ingest};
use tailfit::maxent::MaxEntModel;
use tailfit::{BinIndex, Error, Family, SizeHistogram, TailModel};

/// Result codes. Zero is success.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailfitStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Domain = 3,
    Divergent = 4,
    EmptyTail = 5,
    InsufficientTail = 6,
    Degenerate = 7,
    NoFit = 8,
    Infeasible = 9,
    NoConvergence = 10,
    Format = 11,
    Io = 12,
    Panic = 99,
}

/// Model families, in report order.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TailfitFamily {
    PowerLaw = 0,
    LogNormal = 1,
    Exponential = 2,
}

impl From<TailfitFamily> for Family {
    fn from(f: TailfitFamily) -> Family {
        match f {
            TailfitFamily::PowerLaw => Family::PowerLaw,
            TailfitFamily::LogNormal => Family::LogNormal,
            TailfitFamily::Exponential => Family::Exponential,
        }
    }
}

impl From<Family> for TailfitFamily {
    fn from(f: Family) -> TailfitFamily {
        match f {
            Family::PowerLaw => TailfitFamily::PowerLaw,
            Family::LogNormal => TailfitFamily::LogNormal,
            Family::Exponential => TailfitFamily::Exponential,
        }
    }
}

/// Binned file-size counts.
pub struct TailfitHistogram(SizeHistogram);

/// A normalized discrete tail model.
pub struct TailfitModel(TailModel);

/// Per-family best fits ranked by rss.
pub struct TailfitReport(ComparisonReport);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> TailfitStatus {
    match err {
        Error::Domain(_) => TailfitStatus::Domain,
        Error::Divergent(_) => TailfitStatus::Divergent,
        Error::EmptyTail { .. } => TailfitStatus::EmptyTail,
        Error::InsufficientTail { .. } => TailfitStatus::InsufficientTail,
        Error::Degenerate(_) => TailfitStatus::Degenerate,
        Error::NoFit(_) => TailfitStatus::NoFit,
        Error::Infeasible(_) => TailfitStatus::Infeasible,
        Error::NoConvergence { .. } => TailfitStatus::NoConvergence,
        Error::Format(_) => TailfitStatus::Format,
        Error::Io(_) => TailfitStatus::Io,
    }
}

enum Failure {
    Status(TailfitStatus, String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Status(TailfitStatus::InvalidArgument, msg.into())
}

fn null(what: &str) -> Failure {
    Failure::Status(TailfitStatus::NullPointer, format!("{what} is NULL"))
}

/// Runs `f`, turning errors and panics into a status plus a stored message.
fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> TailfitStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TailfitStatus::Ok,
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Ok(Err(Failure::Status(s, msg))) => {
            set_error(msg);
            s
        }
        Err(panic) => {
            let msg = panic
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| panic.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            TailfitStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn deref_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn put<T>(out: *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    out.write(value);
    Ok(())
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

fn bin(k: u64, what: &str) -> Result<BinIndex, Failure> {
    BinIndex::new(k).map_err(|_| invalid(format!("{what} must be >= 1, got {k}")))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

// ---- errors and strings

/// Message for the last failed call on this thread, or NULL. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tailfit_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn tailfit_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- histograms

#[no_mangle]
pub extern "C" fn tailfit_histogram_new() -> *mut TailfitHistogram {
    boxed(TailfitHistogram(SizeHistogram::new()))
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_histogram_free(h: *mut TailfitHistogram) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Adds `count` files to bin `k` (`k >= 1`).
#[no_mangle]
pub unsafe extern "C" fn tailfit_histogram_add(h: *mut TailfitHistogram, k: u64, count: u64) -> TailfitStatus {
    guard(|| {
        let h = deref_mut(h, "histogram")?;
        h.0.add(bin(k, "k")?, count);
        Ok(())
    })
}

/// Adds one file of `bytes` bytes to bin `floor(bytes / 1024) + 1`.
#[no_mangle]
pub unsafe extern "C" fn tailfit_histogram_add_size_bytes(h: *mut TailfitHistogram, bytes: u64) -> TailfitStatus {
    guard(|| {
        deref_mut(h, "histogram")?.0.add_size_bytes(bytes);
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_histogram_total(h: *const TailfitHistogram, out: *mut u64) -> TailfitStatus {
    guard(|| put(out, deref(h, "histogram")?.0.total()))
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_histogram_count(h: *const TailfitHistogram, k: u64, out: *mut u64) -> TailfitStatus {
    guard(|| {
        let h = deref(h, "histogram")?;
        put(out, h.0.count(bin(k, "k")?))
    })
}

/// Reads a line-delimited JSON manifest (plain or gzip) and returns the
/// histogram of one MIME category (`"image"`, `"video"`, ...).
#[no_mangle]
pub unsafe extern "C" fn tailfit_histogram_from_manifest(
    path: *const c_char,
    category: *const c_char,
    out: *mut *mut TailfitHistogram,
) -> TailfitStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        let category: Category = str_arg(category, "category")?.parse()?;
        let mut records = parse_manifest(File::open(path).map_err(Error::from)?)?;
        let mut ingest = Ingest::new(false);
        while let Some(r) = records.try_next()? {
            ingest.push(r);
        }
        let hist = ingest.histograms().get(&category).cloned().unwrap_or_default();
        put(out, boxed(TailfitHistogram(hist)))
    })
}

// ---- models

unsafe fn new_model(out: *mut *mut TailfitModel, build: impl FnOnce() -> Result<TailModel, Failure>) -> TailfitStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let m = build()?;
        put(out, boxed(TailfitModel(m)))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_model_powerlaw(alpha: f64, k_min: u64, out: *mut *mut TailfitModel) -> TailfitStatus {
    new_model(out, || Ok(PowerLawModel::new(alpha, bin(k_min, "k_min")?)?.into()))
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_model_lognormal(
    mu: f64,
    sigma: f64,
    k_min: u64,
    out: *mut *mut TailfitModel,
) -> TailfitStatus {
    new_model(out, || Ok(LogNormalModel::new(mu, sigma, bin(k_min, "k_min")?)?.into()))
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_model_exponential(lambda: f64, k_min: u64, out: *mut *mut TailfitModel) -> TailfitStatus {
    new_model(out, || Ok(ExponentialModel::new(lambda, bin(k_min, "k_min")?)?.into()))
}

/// `p(k) ∝ exp(−λ_s·k − λ₁·ln k − λ₂·ln² k)` on `[k_min, k_max]`; `k_max = 0`
/// means unbounded.
#[no_mangle]
pub unsafe extern "C" fn tailfit_model_maxent(
    lambda_s: f64,
    lambda_1: f64,
    lambda_2: f64,
    k_min: u64,
    k_max: u64,
    out: *mut *mut TailfitModel,
) -> TailfitStatus {
    new_model(out, || {
        let hi = if k_max == 0 { None } else { Some(bin(k_max, "k_max")?) };
        Ok(MaxEntModel::new(lambda_s, lambda_1, lambda_2, bin(k_min, "k_min")?, hi)?.into())
    })
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_model_free(m: *mut TailfitModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_model_pmf(m: *const TailfitModel, k: u64, out: *mut f64) -> TailfitStatus {
    guard(|| {
        let m = deref(m, "model")?;
        put(out, m.0.pmf(bin(k, "k")?)?)
    })
}

/// `Pr(K ≥ k)`.
#[no_mangle]
pub unsafe extern "C" fn tailfit_model_ccdf(m: *const TailfitModel, k: u64, out: *mut f64) -> TailfitStatus {
    guard(|| {
        let m = deref(m, "model")?;
        put(out, m.0.ccdf(bin(k, "k")?)?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_model_log_likelihood(
    m: *const TailfitModel,
    h: *const TailfitHistogram,
    out: *mut f64,
) -> TailfitStatus {
    guard(|| {
        let (m, h) = (deref(m, "model")?, deref(h, "histogram")?);
        put(out, m.0.log_likelihood(&h.0)?)
    })
}

/// Draws `n` values with a fixed seed into a new histogram.
#[no_mangle]
pub unsafe extern "C" fn tailfit_model_sample(
    m: *const TailfitModel,
    n: u64,
    seed: u64,
    out: *mut *mut TailfitHistogram,
) -> TailfitStatus {
    guard(|| {
        let m = deref(m, "model")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let n = usize::try_from(n).map_err(|_| invalid("n does not fit in memory"))?;
        put(out, boxed(TailfitHistogram(Sampler::new(&m.0).sample_histogram(n, seed))))
    })
}

// ---- fitting

/// Fits every family over `points` log-spaced `k_min` candidates in
/// `[kmin_lo, kmin_hi]` and ranks them by rss.
#[no_mangle]
pub unsafe extern "C" fn tailfit_compare(
    h: *const TailfitHistogram,
    kmin_lo: u64,
    kmin_hi: u64,
    points: u32,
    out: *mut *mut TailfitReport,
) -> TailfitStatus {
    guard(|| {
        let h = deref(h, "histogram")?;
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let grid = log_grid(bin(kmin_lo, "kmin_lo")?, bin(kmin_hi, "kmin_hi")?, points as usize)?;
        let report = Fitter::new(&h.0).compare(&Family::ALL, &grid)?;
        put(out, boxed(TailfitReport(report)))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_report_free(r: *mut TailfitReport) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Family with the smallest rss. Fails with `NoFit` if no family fitted.
#[no_mangle]
pub unsafe extern "C" fn tailfit_report_selected(r: *const TailfitReport, out: *mut TailfitFamily) -> TailfitStatus {
    guard(|| {
        let r = deref(r, "report")?;
        match r.0.selected_family {
            Some(f) => put(out, f.into()),
            None => Err(Failure::Status(TailfitStatus::NoFit, r.0.failures().join("; "))),
        }
    })
}

/// Best rss over second-best rss; fails with `NoFit` with fewer than two fits.
#[no_mangle]
pub unsafe extern "C" fn tailfit_report_rss_ratio(r: *const TailfitReport, out: *mut f64) -> TailfitStatus {
    guard(|| {
        let r = deref(r, "report")?;
        match r.0.rss_ratio {
            Some(x) => put(out, x),
            None => Err(Failure::Status(TailfitStatus::NoFit, "fewer than two families fitted".into())),
        }
    })
}

fn family_fit(r: &TailfitReport, family: TailfitFamily) -> Result<&tailfit::fitting::FitResult, Failure> {
    let family: Family = family.into();
    r.0.get(family).ok_or_else(|| {
        let why = r.0.outcomes.iter().find(|o| o.family == family).and_then(|o| o.result.as_ref().err());
        Failure::Status(TailfitStatus::NoFit, format!("{family}: {}", why.map_or("not fitted", |s| s.as_str())))
    })
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_report_rss(r: *const TailfitReport, family: TailfitFamily, out: *mut f64) -> TailfitStatus {
    guard(|| put(out, family_fit(deref(r, "report")?, family)?.rss))
}

#[no_mangle]
pub unsafe extern "C" fn tailfit_report_kmin(r: *const TailfitReport, family: TailfitFamily, out: *mut u64) -> TailfitStatus {
    guard(|| put(out, family_fit(deref(r, "report")?, family)?.k_min.get()))
}

/// A fitted parameter by name: `"alpha"`, `"mu"`, `"sigma"` or `"lambda"`.
#[no_mangle]
pub unsafe extern "C" fn tailfit_report_param(
    r: *const TailfitReport,
    family: TailfitFamily,
    name: *const c_char,
    out: *mut f64,
) -> TailfitStatus {
    guard(|| {
        let fit = family_fit(deref(r, "report")?, family)?;
        let name = str_arg(name, "name")?;
        let v = fit.param(name).ok_or_else(|| invalid(format!("no parameter '{name}' for this family")))?;
        put(out, v)
    })
}

/// The report as a JSON document; release with [`tailfit_string_free`].
#[no_mangle]
pub unsafe extern "C" fn tailfit_report_to_json(r: *const TailfitReport, out: *mut *mut c_char) -> TailfitStatus {
    guard(|| {
        let r = deref(r, "report")?;
        let text = serde_json::to_string(&r.0.to_json()).map_err(|e| invalid(e.to_string()))?;
        let c = CString::new(text).map_err(|e| invalid(e.to_string()))?;
        put(out, c.into_raw())
    })
}
