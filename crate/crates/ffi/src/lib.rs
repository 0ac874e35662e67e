//! C ABI over the `madegan` crate.
//!
//! Every fallible function returns an [`MgStatus`]; on failure a message is
//! available from [`mg_last_error`] on the same thread. Models are opaque
//! [`MgModel`] handles created by `mg_model_load*` and released with
//! [`mg_model_free`]. Beat buffers are row-major, 320 doubles per beat.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use madegan::classifier::Level2;
use madegan::gan::{self, Level1};
use madegan::signal;
use madegan::tensor::Checkpoint;
use madegan::{metrics, Error, BEAT_LEN};

/// Result codes. `MG_STATUS_OK` is zero; everything else is a failure.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Dimension = 3,
    Parse = 4,
    Io = 5,
    Checkpoint = 6,
    Diverged = 7,
    NoHead = 8,
    BufferTooSmall = 9,
    Panic = 10,
}

/// A loaded first-level model with an optional second-level head.
pub struct MgModel {
    level1: Level1,
    level2: Option<Level2>,
}

/// Network sizes and training progress of a model.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MgModelInfo {
    pub width: usize,
    pub latent: usize,
    pub slots: usize,
    pub epochs_trained: usize,
    /// Second-level branches, 0 without a head.
    pub branches: usize,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

struct Failure(MgStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::Dimension { .. } | Error::Rank { .. } => MgStatus::Dimension,
            Error::Parse { .. } | Error::Format { .. } => MgStatus::Parse,
            Error::Checkpoint(_) | Error::UnknownParam(_) => MgStatus::Checkpoint,
            Error::Diverged { .. } | Error::NonFinite(_) => MgStatus::Diverged,
            Error::Io(_) => MgStatus::Io,
            _ => MgStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn fail(status: MgStatus, msg: impl Into<String>) -> Failure {
    Failure(status, msg.into())
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            MgStatus::Ok
        }
        Ok(Err(Failure(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            MgStatus::Panic
        }
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(fail(MgStatus::NullPointer, format!("`{what}` is null")));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn slice_mut<'a, T>(p: *mut T, len: usize, what: &str) -> Result<&'a mut [T], Failure> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(fail(MgStatus::NullPointer, format!("`{what}` is null")));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

unsafe fn model<'a>(m: *const MgModel) -> Result<&'a MgModel, Failure> {
    m.as_ref().ok_or_else(|| fail(MgStatus::NullPointer, "`model` is null"))
}

unsafe fn beats(p: *const f64, n: usize) -> Result<Vec<Vec<f64>>, Failure> {
    let flat = slice(
        p,
        n.checked_mul(BEAT_LEN).ok_or_else(|| fail(MgStatus::InvalidArgument, "beat count overflows"))?,
        "beats",
    )?;
    Ok(flat.chunks(BEAT_LEN).map(gan::to_model_input).collect())
}

fn from_checkpoint(ckpt: &Checkpoint) -> Result<MgModel, Failure> {
    if ckpt.get("meta.l2.branches").is_some() {
        let (level1, level2) = Level2::from_checkpoint(ckpt)?;
        Ok(MgModel { level1, level2: Some(level2) })
    } else {
        Ok(MgModel { level1: Level1::from_checkpoint(ckpt)?, level2: None })
    }
}

unsafe fn store(out: *mut *mut MgModel, m: MgModel) -> Result<(), Failure> {
    if out.is_null() {
        return Err(fail(MgStatus::NullPointer, "`out` is null"));
    }
    *out = Box::into_raw(Box::new(m));
    Ok(())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or an empty string after a
/// success. Valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn mg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Samples per beat window.
#[no_mangle]
pub extern "C" fn mg_beat_len() -> usize {
    BEAT_LEN
}

/// Loads a checkpoint file written by `train-level1` or `train-level2`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_model_load(path: *const c_char, out: *mut *mut MgModel) -> MgStatus {
    guard(|| {
        if path.is_null() {
            return Err(fail(MgStatus::NullPointer, "`path` is null"));
        }
        let p = CStr::from_ptr(path).to_str().map_err(|_| fail(MgStatus::InvalidArgument, "`path` is not UTF-8"))?;
        let m = from_checkpoint(&Checkpoint::load(Path::new(p))?)?;
        store(out, m)
    })
}

/// Loads a checkpoint from an in-memory copy of its bytes.
///
/// # Safety
/// `data` must point to `len` readable bytes and `out` be writable.
#[no_mangle]
pub unsafe extern "C" fn mg_model_load_bytes(data: *const u8, len: usize, out: *mut *mut MgModel) -> MgStatus {
    guard(|| {
        let bytes = slice(data, len, "data")?;
        let m = from_checkpoint(&Checkpoint::from_bytes(bytes)?)?;
        store(out, m)
    })
}

/// Releases a model. Null is ignored.
///
/// # Safety
/// `model` must come from `mg_model_load*` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn mg_model_free(model: *mut MgModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn mg_model_info(model: *const MgModel, out: *mut MgModelInfo) -> MgStatus {
    guard(|| {
        let m = self::model(model)?;
        let out = out.as_mut().ok_or_else(|| fail(MgStatus::NullPointer, "`out` is null"))?;
        let a = m.level1.arch;
        *out = MgModelInfo {
            width: a.width,
            latent: a.latent,
            slots: a.slots,
            epochs_trained: m.level1.epoch(),
            branches: m.level2.as_ref().map_or(0, |l| l.head.branches),
        };
        Ok(())
    })
}

/// Anomaly score `‖x − G(x)‖` of `n` beats into `out[n]`. Beats are raw
/// windows; standardization happens inside.
///
/// # Safety
/// `beats` must hold `n * 320` doubles and `out` room for `n`.
#[no_mangle]
pub unsafe extern "C" fn mg_model_score(model: *const MgModel, beats: *const f64, n: usize, out: *mut f64) -> MgStatus {
    guard(|| {
        let m = self::model(model)?;
        let x = self::beats(beats, n)?;
        let out = slice_mut(out, n, "out")?;
        out.copy_from_slice(&m.level1.scores(&x)?);
        Ok(())
    })
}

/// Class probabilities `(S, V, F)` of `n` abnormal beats into `out[3n]`.
/// Fails with `MG_STATUS_NO_HEAD` for a first-level-only model.
///
/// # Safety
/// `beats` must hold `n * 320` doubles and `out` room for `3 * n`.
#[no_mangle]
pub unsafe extern "C" fn mg_model_classify(
    model: *const MgModel,
    beats: *const f64,
    n: usize,
    out: *mut f64,
) -> MgStatus {
    guard(|| {
        let m = self::model(model)?;
        let head = m.level2.as_ref().ok_or_else(|| fail(MgStatus::NoHead, "model has no second-level head"))?;
        let x = self::beats(beats, n)?;
        let out = slice_mut(out, n * 3, "out")?;
        for (dst, p) in out.chunks_mut(3).zip(head.predict(&x)?) {
            dst.copy_from_slice(&p);
        }
        Ok(())
    })
}

/// Min-max scaling of `n ≥ 2` scores into `out[n]`.
///
/// # Safety
/// `scores` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mg_scale_scores(scores: *const f64, n: usize, out: *mut f64) -> MgStatus {
    guard(|| {
        let s = slice(scores, n, "scores")?;
        let out = slice_mut(out, n, "out")?;
        out.copy_from_slice(&gan::scale_scores(s)?);
        Ok(())
    })
}

unsafe fn binary_metric(
    scores: *const f64,
    labels: *const u8,
    n: usize,
    out: *mut f64,
    f: fn(&[f64], &[bool]) -> madegan::Result<f64>,
) -> MgStatus {
    guard(|| {
        let s = slice(scores, n, "scores")?;
        let l: Vec<bool> = slice(labels, n, "labels")?.iter().map(|&v| v != 0).collect();
        let out = out.as_mut().ok_or_else(|| fail(MgStatus::NullPointer, "`out` is null"))?;
        *out = f(s, &l)?;
        Ok(())
    })
}

/// Area under the ROC curve; a nonzero label marks a positive.
///
/// # Safety
/// `scores` and `labels` must each hold `n` entries; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mg_auroc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> MgStatus {
    binary_metric(scores, labels, n, out, metrics::auroc)
}

/// Area under the precision-recall curve.
///
/// # Safety
/// As for [`mg_auroc`].
#[no_mangle]
pub unsafe extern "C" fn mg_auprc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> MgStatus {
    binary_metric(scores, labels, n, out, metrics::auprc)
}

/// Zero-phase FIR high-pass filtering of `signal[n]` into `out[n]`.
///
/// # Safety
/// `signal` and `out` must each hold `n` doubles.
#[no_mangle]
pub unsafe extern "C" fn mg_highpass(
    signal: *const f64,
    n: usize,
    sample_rate: f64,
    cutoff_hz: f64,
    taps: usize,
    out: *mut f64,
) -> MgStatus {
    guard(|| {
        let x = slice(signal, n, "signal")?;
        let out = slice_mut(out, n, "out")?;
        let filter = signal::design_highpass_fir(cutoff_hz, sample_rate, taps)?;
        out.copy_from_slice(&signal::apply_filter(&filter, x)?);
        Ok(())
    })
}

/// R-peak sample indices of `signal[n]`. The number found is written to
/// `count`; when it exceeds `capacity` the call fails with
/// `MG_STATUS_BUFFER_TOO_SMALL` and `peaks` is left untouched.
///
/// # Safety
/// `signal` must hold `n` doubles, `peaks` room for `capacity` entries and
/// `count` must be writable.
#[no_mangle]
pub unsafe extern "C" fn mg_detect_r_peaks(
    signal: *const f64,
    n: usize,
    sample_rate: f64,
    peaks: *mut usize,
    capacity: usize,
    count: *mut usize,
) -> MgStatus {
    guard(|| {
        let x = slice(signal, n, "signal")?;
        let count = count.as_mut().ok_or_else(|| fail(MgStatus::NullPointer, "`count` is null"))?;
        let found = signal::pan_tompkins(x, sample_rate)?;
        *count = found.len();
        if found.len() > capacity {
            return Err(fail(MgStatus::BufferTooSmall, format!("{} peaks found, capacity {capacity}", found.len())));
        }
        slice_mut(peaks, found.len(), "peaks")?.copy_from_slice(&found);
        Ok(())
    })
}
