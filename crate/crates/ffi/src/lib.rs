//! C ABI over `ser-core`.
//!
//! Every entry point returns a [`SerStatus`]. On anything but `SER_STATUS_OK`
//! the message is available from [`ser_last_error`] on the same thread.
//! Panics are caught at the boundary and reported as `SER_STATUS_PANIC`.
//!
//! Strings handed out by this library must be released with
//! [`ser_string_free`]; checkpoints with [`ser_checkpoint_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use clap::Parser;
use ser_core::cli::{run, Cli};
use ser_core::econometrics::{newey_west_se, quintile_sort};
use ser_core::event_model::{compound_weekly, encode_records, ObservationConfig, PanelRecord};
use ser_core::model::{predict_panel, Checkpoint};
use ser_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SerStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    Null = 1,
    Invalid = 2,
    Io = 3,
    /// Malformed JSON, TOML or CSV input.
    Parse = 4,
    Insufficient = 5,
    /// Input outside the function's domain (non-finite, return <= -1, ...).
    Domain = 6,
    /// Numerical failure: singular design or diverged training.
    Numeric = 7,
    Transport = 8,
    Panic = 9,
}

/// Loaded model checkpoint. Opaque to C.
pub struct SerCheckpoint {
    inner: Checkpoint,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    // Interior NULs would truncate the message on the C side anyway.
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(err: &Error) -> SerStatus {
    match err {
        Error::Shape { .. } | Error::Invalid(_) | Error::OutOfVocabulary { .. } => SerStatus::Invalid,
        Error::Domain(_) => SerStatus::Domain,
        Error::Insufficient(_) => SerStatus::Insufficient,
        Error::Parse(_) | Error::Schema { .. } | Error::Json(_) | Error::Csv(_) => SerStatus::Parse,
        Error::Singular(_) | Error::Diverged(_) => SerStatus::Numeric,
        Error::Transport(_) => SerStatus::Transport,
        Error::Io(_) => SerStatus::Io,
    }
}

struct Failure(SerStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(SerStatus::Null, format!("{what} is NULL"))
}

/// Runs `f` behind catch_unwind and records any failure.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SerStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SerStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
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
            SerStatus::Panic
        }
    }
}

/// # Safety
/// `p` is NULL or a valid NUL-terminated string.
unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(SerStatus::Invalid, format!("{what} is not valid UTF-8")))
}

/// # Safety
/// `p` is NULL only when `len` is 0; otherwise it points at `len` doubles.
unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn into_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(SerStatus::Invalid, "output contains an interior NUL".into()))
}

/// Library version, a static string. Do not free.
#[no_mangle]
pub extern "C" fn ser_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message for the last failed call on this thread, or NULL after a success.
/// Valid until the next call into this library from the same thread.
#[no_mangle]
pub extern "C" fn ser_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// # Safety
/// `s` is NULL or a string returned by this library that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ser_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Runs one `ser` CLI invocation. `argv[0]` is the program name, as in `main`.
/// On success `*summary_path` receives the path of the summary JSON.
///
/// # Safety
/// `argv` points at `argc` valid NUL-terminated strings; `summary_path` is writable.
#[no_mangle]
pub unsafe extern "C" fn ser_run(argc: usize, argv: *const *const c_char, summary_path: *mut *mut c_char) -> SerStatus {
    guard(|| {
        if argv.is_null() {
            return Err(null("argv"));
        }
        if summary_path.is_null() {
            return Err(null("summary_path"));
        }
        let args = std::slice::from_raw_parts(argv, argc)
            .iter()
            .map(|&a| read_str(a, "argv entry").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?;
        let cli = Cli::try_parse_from(args).map_err(|e| Failure(SerStatus::Invalid, e.to_string()))?;
        let path = run(&cli)?;
        *summary_path = into_c_string(path.display().to_string())?;
        Ok(())
    })
}

/// Loads and validates a checkpoint file.
///
/// # Safety
/// `path` is a valid NUL-terminated string; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ser_checkpoint_load(path: *const c_char, out: *mut *mut SerCheckpoint) -> SerStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        let path = read_str(path, "path")?;
        let inner = Checkpoint::load(Path::new(path))?;
        *out = Box::into_raw(Box::new(SerCheckpoint { inner }));
        Ok(())
    })
}

/// # Safety
/// `ckpt` is NULL or a handle from [`ser_checkpoint_load`] that has not been freed.
#[no_mangle]
pub unsafe extern "C" fn ser_checkpoint_free(ckpt: *mut SerCheckpoint) {
    if !ckpt.is_null() {
        drop(Box::from_raw(ckpt));
    }
}

/// Mode, table sizes, model config and training span as a JSON object.
///
/// # Safety
/// `ckpt` is a live handle; `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn ser_checkpoint_info(ckpt: *const SerCheckpoint, out_json: *mut *mut c_char) -> SerStatus {
    guard(|| {
        if ckpt.is_null() {
            return Err(null("ckpt"));
        }
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let c = &(*ckpt).inner;
        let info = serde_json::json!({
            "mode": c.mode,
            "sizes": c.sizes,
            "config": c.config,
            "train_span": c.train_span,
            "epochs": c.epoch_mse.len(),
        });
        *out_json = into_c_string(info.to_string())?;
        Ok(())
    })
}

/// Predicts a JSON array of panel records (the objects of a panel file).
/// Tokens the checkpoint has not seen map to UNK. The result is a JSON array
/// of `{date, stock_id, prediction, realized}` in (date, stock) order.
///
/// # Safety
/// `ckpt` is a live handle; `records_json` a valid NUL-terminated string;
/// `out_json` is writable.
#[no_mangle]
pub unsafe extern "C" fn ser_checkpoint_predict(
    ckpt: *const SerCheckpoint,
    records_json: *const c_char,
    out_json: *mut *mut c_char,
) -> SerStatus {
    guard(|| {
        if ckpt.is_null() {
            return Err(null("ckpt"));
        }
        if out_json.is_null() {
            return Err(null("out_json"));
        }
        let c = &(*ckpt).inner;
        let records: Vec<PanelRecord> = serde_json::from_str(read_str(records_json, "records_json")?).map_err(Error::from)?;
        let obs_cfg = ObservationConfig {
            max_events: c.config.max_events,
            days_per_week: c.config.days_per_week,
        };
        let mut vocab = c.vocab.clone();
        let (panel, _warnings) = encode_records(&records, c.mode, &obs_cfg, &mut vocab, false)?;
        let preds = predict_panel(&panel, c)?;
        *out_json = into_c_string(serde_json::to_string(&preds).map_err(Error::from)?)?;
        Ok(())
    })
}

/// Newey-West standard error of the mean of `x` with Bartlett weights.
///
/// # Safety
/// `x` points at `len` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ser_newey_west_se(x: *const f64, len: usize, lags: usize, out: *mut f64) -> SerStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = newey_west_se(read_slice(x, len, "x")?, lags)?;
        Ok(())
    })
}

/// Compounds 1 to 5 daily returns into one weekly return.
///
/// # Safety
/// `daily` points at `len` doubles; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ser_compound_weekly(daily: *const f64, len: usize, out: *mut f64) -> SerStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = compound_weekly(read_slice(daily, len, "daily")?)?;
        Ok(())
    })
}

/// Top-minus-bottom quintile return for one cross-section. Ties in
/// `prediction` break on `stock_id`.
///
/// # Safety
/// `stock_id`, `prediction` and `realized` each point at `n` elements; `out` is writable.
#[no_mangle]
pub unsafe extern "C" fn ser_quintile_long_short(
    stock_id: *const i64,
    prediction: *const f64,
    realized: *const f64,
    n: usize,
    out: *mut f64,
) -> SerStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if n > 0 && stock_id.is_null() {
            return Err(null("stock_id"));
        }
        let ids: &[i64] = if n == 0 { &[] } else { std::slice::from_raw_parts(stock_id, n) };
        let pred = read_slice(prediction, n, "prediction")?;
        let real = read_slice(realized, n, "realized")?;
        let cross: Vec<(i64, f64, f64)> = (0..n).map(|i| (ids[i], pred[i], real[i])).collect();
        *out = quintile_sort(&cross)?.long_short;
        Ok(())
    })
}
