//! C ABI over `lm_forecast`.
//!
//! Every fallible function returns an [`LmfStatus`]; on failure the message is
//! available from [`lmf_last_error_message`] on the same thread. Objects are
//! opaque handles released with their `_free` function. Panics never cross the
//! boundary; they surface as `LMF_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lm_forecast::lm::LmConfig;
use lm_forecast::metrics::{self, EvaluationPair, MetricsReport};
use lm_forecast::nar::NarLayout;
use lm_forecast::series::{self, ColumnSelector, NanPolicy, SeriesData, SplitSpec, SynthParams};
use lm_forecast::session::{self, SessionConfig, SessionResult};
use lm_forecast::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    NotFound = 3,
    Io = 4,
    /// The data cannot support the request (empty, constant, too short, bad split).
    Data = 5,
    SolveFailure = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LmfSplit {
    Train = 0,
    Validation = 1,
    Test = 2,
}

/// Opaque heart-rate series.
pub struct LmfSeries(SeriesData);

/// Opaque trained session.
pub struct LmfSession(SessionResult);

#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LmfSynthParams {
    pub seed: u64,
    pub n: usize,
    pub base_bpm: f64,
    pub drift_bpm_per_ks: f64,
    pub modulation_amp: f64,
    pub modulation_period_s: f64,
    pub noise_std: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LmfCounts {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
}

/// Metrics for one split. `pearson_r` and `r_squared` are NaN when undefined.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct LmfMetrics {
    pub mse: f64,
    pub mae: f64,
    pub mape: f64,
    pub pearson_r: f64,
    pub r_squared: f64,
    pub accuracy: f64,
    pub efficiency: f64,
    pub n_total: usize,
    pub t_train: usize,
    pub samples: usize,
}

/// Session settings. `lags` must point to `lag_count` values and only needs to
/// stay valid for the duration of the call that reads it. `max_fail == 0`
/// disables early stopping.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LmfSessionConfig {
    pub lags: *const usize,
    pub lag_count: usize,
    pub hidden_units: usize,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub test_fraction: f64,
    pub max_fail: usize,
    pub max_epochs: usize,
    pub seed: u64,
}

static DEFAULT_LAGS: [usize; 2] = [1, 2];

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(CString::new(msg).expect("nul bytes removed")));
}

fn status_of(e: &Error) -> LmfStatus {
    match e {
        Error::SolveFailure => LmfStatus::SolveFailure,
        Error::FileNotFound(_) | Error::ColumnNotFound(_) => LmfStatus::NotFound,
        Error::Io(_) | Error::Csv(_) | Error::Json(_) => LmfStatus::Io,
        Error::EmptySeries
        | Error::DegenerateSeries
        | Error::SeriesTooShort { .. }
        | Error::DegenerateSplit(_)
        | Error::ZeroTarget(_)
        | Error::ZeroVariance(_) => LmfStatus::Data,
        Error::DimensionMismatch(_) | Error::InvalidArgument(_) | Error::Config(_) => LmfStatus::InvalidArgument,
    }
}

struct Fail(LmfStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LmfStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LmfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LmfStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LmfStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail(LmfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn check_out<T>(out: *mut T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    Ok(())
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Fail> {
    check_out(out)?;
    out.write(value);
    Ok(())
}

fn metrics_of(r: &MetricsReport) -> LmfMetrics {
    LmfMetrics {
        mse: r.mse,
        mae: r.mae,
        mape: r.mape,
        pearson_r: r.pearson_r.unwrap_or(f64::NAN),
        r_squared: r.r_squared.unwrap_or(f64::NAN),
        accuracy: r.accuracy,
        efficiency: r.efficiency,
        n_total: r.n_total,
        t_train: r.t_train,
        samples: r.samples,
    }
}

/// Message for the most recent failure on this thread, or null if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn lmf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

#[no_mangle]
pub extern "C" fn lmf_synth_params_default() -> LmfSynthParams {
    let d = SynthParams::default();
    LmfSynthParams {
        seed: d.seed,
        n: d.n,
        base_bpm: d.base_bpm,
        drift_bpm_per_ks: d.drift_bpm_per_ks,
        modulation_amp: d.modulation_amp,
        modulation_period_s: d.modulation_period_s,
        noise_std: d.noise_std,
    }
}

/// # Safety
/// `values` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_series_from_values(values: *const f64, len: usize, out: *mut *mut LmfSeries) -> LmfStatus {
    guard(|| {
        check_out(out)?;
        let v = slice(values, len, "values")?.to_vec();
        let s = SeriesData::new(v, None, "ffi")?;
        write_out(out, Box::into_raw(Box::new(LmfSeries(s))))
    })
}

/// Loads one column (name, or 0-based index given as digits) from a CSV file,
/// dropping rows with missing or non-positive values.
///
/// # Safety
/// `path` and `column` must be NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_series_load_csv(
    path: *const c_char,
    column: *const c_char,
    out: *mut *mut LmfSeries,
) -> LmfStatus {
    guard(|| {
        check_out(out)?;
        let path = str_arg(path, "path")?;
        let column: ColumnSelector = str_arg(column, "column")?.parse().expect("infallible");
        let s = series::load_csv(path.as_ref(), &column, NanPolicy::DropRow)?;
        write_out(out, Box::into_raw(Box::new(LmfSeries(s))))
    })
}

/// # Safety
/// `params` must be readable and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_series_synth(params: *const LmfSynthParams, out: *mut *mut LmfSeries) -> LmfStatus {
    guard(|| {
        check_out(out)?;
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let s = series::synth_heart_rate(&SynthParams {
            seed: p.seed,
            n: p.n,
            base_bpm: p.base_bpm,
            drift_bpm_per_ks: p.drift_bpm_per_ks,
            modulation_amp: p.modulation_amp,
            modulation_period_s: p.modulation_period_s,
            noise_std: p.noise_std,
        })?;
        write_out(out, Box::into_raw(Box::new(LmfSeries(s))))
    })
}

/// Length of the series; 0 for a null handle.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lmf_series_len(series: *const LmfSeries) -> usize {
    series.as_ref().map_or(0, |s| s.0.len())
}

/// Borrowed pointer to the samples, valid while the handle lives.
///
/// # Safety
/// `series` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn lmf_series_values(series: *const LmfSeries) -> *const f64 {
    series.as_ref().map_or(ptr::null(), |s| s.0.values().as_ptr())
}

/// # Safety
/// `series` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lmf_series_free(series: *mut LmfSeries) {
    if !series.is_null() {
        drop(Box::from_raw(series));
    }
}

/// Contiguous block split of `n` samples.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_split_block(
    n: usize,
    train_fraction: f64,
    validation_fraction: f64,
    test_fraction: f64,
    out: *mut LmfCounts,
) -> LmfStatus {
    guard(|| {
        let spec = SplitSpec::new(train_fraction, validation_fraction, test_fraction)?;
        let (train, validation, test) = series::split_block(n, &spec)?.counts();
        write_out(
            out,
            LmfCounts {
                train,
                validation,
                test,
            },
        )
    })
}

/// Exact efficiency `n_total / t_train`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_efficiency(n_total: usize, t_train: usize, out: *mut f64) -> LmfStatus {
    guard(|| {
        if t_train == 0 || t_train > n_total {
            return Err(Fail(
                LmfStatus::InvalidArgument,
                format!("efficiency needs 1 <= t <= n, got n={n_total} t={t_train}"),
            ));
        }
        write_out(out, metrics::efficiency(n_total, t_train))
    })
}

/// # Safety
/// `targets` and `predictions` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_metrics_compute(
    targets: *const f64,
    predictions: *const f64,
    len: usize,
    n_total: usize,
    t_train: usize,
    out: *mut LmfMetrics,
) -> LmfStatus {
    guard(|| {
        let t = slice(targets, len, "targets")?;
        let p = slice(predictions, len, "predictions")?;
        let pair = EvaluationPair::new(t, p)?;
        let report = MetricsReport::compute(&pair, n_total, t_train)?;
        write_out(out, metrics_of(&report))
    })
}

/// Library defaults: lags {1, 2}, 10 hidden units, 70/15/15, max_fail 6.
#[no_mangle]
pub extern "C" fn lmf_session_config_default() -> LmfSessionConfig {
    let d = SessionConfig::default();
    LmfSessionConfig {
        lags: DEFAULT_LAGS.as_ptr(),
        lag_count: DEFAULT_LAGS.len(),
        hidden_units: d.layout.hidden_units(),
        train_fraction: d.split.train_fraction,
        validation_fraction: d.split.validation_fraction,
        test_fraction: d.split.test_fraction,
        max_fail: d.max_fail.unwrap_or(0),
        max_epochs: d.lm.max_epochs,
        seed: d.seed,
    }
}

/// Trains and evaluates one session.
///
/// # Safety
/// `series` must be a live handle, `config` readable (with a valid `lags`
/// array) and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_session_run(
    series: *const LmfSeries,
    config: *const LmfSessionConfig,
    out: *mut *mut LmfSession,
) -> LmfStatus {
    guard(|| {
        check_out(out)?;
        let s = series.as_ref().ok_or_else(|| null("series"))?;
        let c = config.as_ref().ok_or_else(|| null("config"))?;
        let lags = slice(c.lags, c.lag_count, "lags")?.to_vec();
        let cfg = SessionConfig {
            layout: NarLayout::new(lags, c.hidden_units)?,
            lm: LmConfig {
                max_epochs: c.max_epochs,
                ..LmConfig::default()
            },
            split: SplitSpec::new(c.train_fraction, c.validation_fraction, c.test_fraction)?,
            max_fail: (c.max_fail > 0).then_some(c.max_fail),
            seed: c.seed,
        };
        let result = session::run_session(&s.0, &cfg)?;
        write_out(out, Box::into_raw(Box::new(LmfSession(result))))
    })
}

/// # Safety
/// `session` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_session_metrics(
    session: *const LmfSession,
    split: LmfSplit,
    out: *mut LmfMetrics,
) -> LmfStatus {
    guard(|| {
        let r = &session.as_ref().ok_or_else(|| null("session"))?.0.reports;
        let report = match split {
            LmfSplit::Train => &r.train,
            LmfSplit::Validation => &r.validation,
            LmfSplit::Test => &r.test,
        };
        write_out(out, metrics_of(report))
    })
}

/// Raw-series sample counts per split.
///
/// # Safety
/// `session` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_session_split_counts(session: *const LmfSession, out: *mut LmfCounts) -> LmfStatus {
    guard(|| {
        let c = &session.as_ref().ok_or_else(|| null("session"))?.0.raw_counts;
        write_out(
            out,
            LmfCounts {
                train: c.train,
                validation: c.validation,
                test: c.test,
            },
        )
    })
}

/// Best-validation epoch and the epoch training stopped at.
///
/// # Safety
/// `session` must be a live handle; both outputs writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_session_epochs(
    session: *const LmfSession,
    best_epoch: *mut usize,
    stop_epoch: *mut usize,
) -> LmfStatus {
    guard(|| {
        let t = &session.as_ref().ok_or_else(|| null("session"))?.0.trace;
        if stop_epoch.is_null() {
            return Err(null("stop_epoch"));
        }
        write_out(best_epoch, t.best_epoch)?;
        write_out(stop_epoch, t.stop_epoch)
    })
}

/// One-step forecast in bpm from `history` (oldest first, at least max-lag values).
///
/// # Safety
/// `session` must be a live handle, `history` must point to `len` doubles and
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_session_forecast_next(
    session: *const LmfSession,
    history: *const f64,
    len: usize,
    out: *mut f64,
) -> LmfStatus {
    guard(|| {
        let s = session.as_ref().ok_or_else(|| null("session"))?;
        let h = slice(history, len, "history")?;
        write_out(out, s.0.forecast_next(h)?)
    })
}

/// Full session result as JSON. Release the string with [`lmf_string_free`].
///
/// # Safety
/// `session` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn lmf_session_to_json(session: *const LmfSession, out: *mut *mut c_char) -> LmfStatus {
    guard(|| {
        check_out(out)?;
        let s = session.as_ref().ok_or_else(|| null("session"))?;
        let json = lm_forecast::report::session_json(&s.0)?;
        let c = CString::new(json).map_err(|_| Fail(LmfStatus::Io, "JSON contained a NUL byte".into()))?;
        write_out(out, c.into_raw())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lmf_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `session` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn lmf_session_free(session: *mut LmfSession) {
    if !session.is_null() {
        drop(Box::from_raw(session));
    }
}
