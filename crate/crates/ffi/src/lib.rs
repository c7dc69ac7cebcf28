//! C ABI for stabilitykit.
//!
//! Videos and models cross the boundary as opaque handles created by
//! `sk_*_load` / `sk_sequence_from_rgb` and released with the matching
//! `sk_*_free`. Every entry point returns an [`SkStatus`]; on failure
//! [`sk_last_error`] describes the most recent error on the calling thread.
//! Panics never unwind into C: they are caught and reported as
//! `SK_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::fs::File;
use std::io::BufReader;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use stabilitykit::cli::load_video;
use stabilitykit::metrics::{itf, stability_score};
use stabilitykit::model::{predict_video, read_checkpoint, Model};
use stabilitykit::motion::{trajectory_from_sequence, MotionModel, MotionOptions};
use stabilitykit::{Error, Frame, FrameSequence};

/// Result code of every call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SkStatus {
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// File missing or unreadable.
    Io = 2,
    /// Malformed file contents or non-UTF-8 path.
    Parse = 3,
    /// Argument out of range or inconsistent sizes.
    InvalidArgument = 4,
    /// Nothing to measure: flat frames or untrackable motion.
    DegenerateContent = 5,
    /// Too few frames or samples for the request.
    InsufficientData = 6,
    /// Output buffer too small; the required length was still written.
    BufferTooSmall = 7,
    /// Internal panic, caught at the boundary.
    Panic = 8,
}

/// Decoded video.
pub struct SkSequence {
    seq: FrameSequence,
}

/// Trained regressor loaded from a checkpoint.
pub struct SkModel {
    model: Model,
}

/// Stability Score and its per-axis components, all in [0, 1].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct SkStability {
    pub score: f64,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn status_of(e: &Error) -> SkStatus {
    match e {
        Error::Io { .. } => SkStatus::Io,
        Error::Parse(_) | Error::Truncated { .. } => SkStatus::Parse,
        Error::InsufficientFrames { .. }
        | Error::InsufficientData(_)
        | Error::InsufficientRatings { .. }
        | Error::EmptyInput(_) => SkStatus::InsufficientData,
        e if e.is_degenerate_content() => SkStatus::DegenerateContent,
        Error::DegenerateInput(_) => SkStatus::DegenerateContent,
        _ => SkStatus::InvalidArgument,
    }
}

/// Runs `f`, converting errors and panics into a status plus the
/// thread-local message.
fn guard(f: impl FnOnce() -> Result<(), SkStatus>) -> SkStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            SkStatus::Ok
        }
        Ok(Err(status)) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            SkStatus::Panic
        }
    }
}

fn fail(e: Error) -> SkStatus {
    set_error(e.to_string());
    status_of(&e)
}

fn null(what: &str) -> SkStatus {
    set_error(format!("{what} is null"));
    SkStatus::NullArgument
}

unsafe fn path_arg(path: *const c_char) -> Result<PathBuf, SkStatus> {
    if path.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(path)
        .to_str()
        .map(PathBuf::from)
        .map_err(|_| fail(Error::Parse("path is not valid UTF-8".into())))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, SkStatus> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn seq_arg<'a>(p: *const SkSequence) -> Result<&'a FrameSequence, SkStatus> {
    p.as_ref().map(|s| &s.seq).ok_or_else(|| null("sequence"))
}

/// Message for the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn sk_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sk_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load a Y4M file or a directory of PPM/PGM frames.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_sequence_load(path: *const c_char, out: *mut *mut SkSequence) -> SkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let seq = load_video(&path).map_err(fail)?;
        *out = Box::into_raw(Box::new(SkSequence { seq }));
        Ok(())
    })
}

/// Build a sequence from `frames` packed RGB8 images of `width` x `height`.
///
/// # Safety
/// `rgb` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_sequence_from_rgb(
    width: usize,
    height: usize,
    frames: usize,
    fps: f64,
    rgb: *const u8,
    len: usize,
    out: *mut *mut SkSequence,
) -> SkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if rgb.is_null() {
            return Err(null("rgb"));
        }
        let frame_len = width
            .checked_mul(height)
            .and_then(|n| n.checked_mul(3))
            .ok_or_else(|| fail(Error::InvalidValue("frame size overflows".into())))?;
        if frame_len.checked_mul(frames) != Some(len) {
            return Err(fail(Error::InvalidValue(format!(
                "{len} bytes do not hold {frames} frames of {width}x{height} RGB"
            ))));
        }
        let bytes = std::slice::from_raw_parts(rgb, len);
        let decoded = bytes
            .chunks_exact(frame_len.max(1))
            .take(frames)
            .map(|c| Frame::new(width, height, c.to_vec()))
            .collect::<Result<Vec<_>, _>>()
            .map_err(fail)?;
        let seq = FrameSequence::new(decoded, fps).map_err(fail)?;
        *out = Box::into_raw(Box::new(SkSequence { seq }));
        Ok(())
    })
}

/// Release a sequence. Null is ignored.
///
/// # Safety
/// `seq` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sk_sequence_free(seq: *mut SkSequence) {
    if !seq.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(seq))));
    }
}

/// Frame count, width and height; any output pointer may be null.
///
/// # Safety
/// `seq` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_sequence_info(
    seq: *const SkSequence,
    frames: *mut usize,
    width: *mut usize,
    height: *mut usize,
) -> SkStatus {
    guard(|| {
        let s = seq_arg(seq)?;
        for (p, v) in [(frames, s.len()), (width, s.width()), (height, s.height())] {
            if let Some(p) = p.as_mut() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Inter-frame transformation fidelity in dB.
///
/// # Safety
/// `seq` must be a live handle; `out_db` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_itf(seq: *const SkSequence, out_db: *mut f64) -> SkStatus {
    guard(|| {
        let s = seq_arg(seq)?;
        let out = out_arg(out_db, "out_db")?;
        *out = itf(s).map_err(fail)?.score_db;
        Ok(())
    })
}

/// Low-frequency energy Stability Score of the estimated camera path.
///
/// # Safety
/// `seq` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_stability_score(seq: *const SkSequence, out: *mut SkStability) -> SkStatus {
    guard(|| {
        let s = seq_arg(seq)?;
        let out = out_arg(out, "out")?;
        let traj = trajectory_from_sequence(s, MotionModel::Similarity, &MotionOptions::default())
            .map_err(fail)?;
        let r = stability_score(&traj).map_err(fail)?;
        *out = SkStability {
            score: r.score,
            x: r.component_scores.x,
            y: r.component_scores.y,
            theta: r.component_scores.theta,
        };
        Ok(())
    })
}

/// Estimated camera trajectory, one sample per frame. `capacity` is the
/// length of each of `x`, `y` and `theta`; `out_len` always receives the
/// frame count. Fails with `SK_STATUS_BUFFER_TOO_SMALL` when capacity is
/// short, in which case the buffers are left untouched.
///
/// # Safety
/// `seq` must be a live handle; each buffer must hold `capacity` doubles.
#[no_mangle]
pub unsafe extern "C" fn sk_trajectory(
    seq: *const SkSequence,
    x: *mut f64,
    y: *mut f64,
    theta: *mut f64,
    capacity: usize,
    out_len: *mut usize,
) -> SkStatus {
    guard(|| {
        let s = seq_arg(seq)?;
        let len = out_arg(out_len, "out_len")?;
        *len = s.len();
        if capacity < s.len() {
            set_error(format!("capacity {capacity} < {} frames", s.len()));
            return Err(SkStatus::BufferTooSmall);
        }
        if x.is_null() || y.is_null() || theta.is_null() {
            return Err(null("trajectory buffer"));
        }
        let traj = trajectory_from_sequence(s, MotionModel::Similarity, &MotionOptions::default())
            .map_err(fail)?;
        for (dst, src) in [(x, &traj.x), (y, &traj.y), (theta, &traj.theta)] {
            std::slice::from_raw_parts_mut(dst, src.len()).copy_from_slice(src);
        }
        Ok(())
    })
}

/// Load a checkpoint written by `stabilitykit train`.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_model_load(path: *const c_char, out: *mut *mut SkModel) -> SkStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = path_arg(path)?;
        let file = File::open(&path).map_err(|e| {
            fail(Error::Io {
                path: path.clone(),
                source: e,
            })
        })?;
        let model = read_checkpoint(BufReader::new(file)).map_err(fail)?;
        *out = Box::into_raw(Box::new(SkModel { model }));
        Ok(())
    })
}

/// Release a model. Null is ignored.
///
/// # Safety
/// `model` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sk_model_free(model: *mut SkModel) {
    if !model.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(model))));
    }
}

/// Fused feature dimension the model expects.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_model_input_dim(model: *const SkModel, out: *mut usize) -> SkStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        *out_arg(out, "out")? = m.model.params.input_dim;
        Ok(())
    })
}

/// Learned stability prediction averaged over `n_clips` seeded clips.
///
/// # Safety
/// `model` and `seq` must be live handles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sk_predict(
    model: *const SkModel,
    seq: *const SkSequence,
    n_clips: usize,
    seed: u64,
    out: *mut f64,
) -> SkStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let s = seq_arg(seq)?;
        let out = out_arg(out, "out")?;
        *out = predict_video(&m.model, s, n_clips, seed).map_err(fail)?;
        Ok(())
    })
}
