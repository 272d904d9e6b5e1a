// SPDX-License-Identifier: Apache-2.0

//! C ABI over the forgebench frame operations, baseline scorer and metrics.
//!
//! Conventions:
//! * every fallible function returns an `FbStatus`; on failure the message
//!   is available from `fb_last_error_message` on the same thread;
//! * frames are opaque `FbFrame` handles released with `fb_frame_free`;
//! * strings returned by the library are released with `fb_string_free`;
//! * panics never cross the boundary and are reported as `FB_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use forgebench::dataset::{self, FrameBuffer, Label};
use forgebench::metrics::{self, LabeledScores};
use forgebench::perturb::{self, OpId, PerturbationSpec};
use forgebench::{rng, scorer, Error};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Decode = 4,
    Degenerate = 5,
    Unsupported = 6,
    Panic = 7,
}

/// Opaque RGB8 frame.
pub struct FbFrame {
    inner: FrameBuffer,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(err: &Error) -> FbStatus {
    match err {
        Error::Io { .. } | Error::MissingFrame { .. } => FbStatus::Io,
        Error::FrameDecode { .. } | Error::DimensionMismatch { .. } => FbStatus::Decode,
        Error::DegenerateLabels { .. } => FbStatus::Degenerate,
        _ => FbStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (FbStatus, String)>) -> FbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FbStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FbStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (FbStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (FbStatus, String) {
    (FbStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, (FbStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (FbStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn frame_arg<'a>(p: *const FbFrame) -> Result<&'a FrameBuffer, (FbStatus, String)> {
    p.as_ref().map(|f| &f.inner).ok_or_else(|| null("frame"))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (FbStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

fn boxed(frame: FrameBuffer) -> *mut FbFrame {
    Box::into_raw(Box::new(FbFrame { inner: frame }))
}

/// Message of the last failed call on this thread, or NULL. Free with
/// `fb_string_free`.
#[no_mangle]
pub extern "C" fn fb_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null_mut(), |s| s.clone().into_raw()))
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn fb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn fb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies `len` = width*height*3 bytes of row-major RGB into a new frame.
///
/// # Safety
/// `rgb` must point to `len` readable bytes; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_frame_new(
    width: u32,
    height: u32,
    rgb: *const u8,
    len: usize,
    out: *mut *mut FbFrame,
) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if rgb.is_null() {
            return Err(null("rgb"));
        }
        let pixels = std::slice::from_raw_parts(rgb, len).to_vec();
        *out = boxed(FrameBuffer::new(width, height, pixels).map_err(lib_err)?);
        Ok(())
    })
}

/// Reads an 8-bit RGB PNG.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fb_frame_read(path: *const c_char, out: *mut *mut FbFrame) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        *out = boxed(dataset::read_frame_file(Path::new(path)).map_err(lib_err)?);
        Ok(())
    })
}

/// # Safety
/// `frame` must be a live handle; `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fb_frame_write(frame: *const FbFrame, path: *const c_char) -> FbStatus {
    guard(|| {
        let frame = frame_arg(frame)?;
        let path = str_arg(path, "path")?;
        dataset::write_frame(frame, Path::new(path)).map_err(lib_err)
    })
}

/// # Safety
/// `frame` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fb_frame_width(frame: *const FbFrame) -> u32 {
    frame.as_ref().map_or(0, |f| f.inner.width())
}

/// # Safety
/// `frame` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fb_frame_height(frame: *const FbFrame) -> u32 {
    frame.as_ref().map_or(0, |f| f.inner.height())
}

/// Borrowed pointer to the RGB bytes, valid until the frame is freed.
/// Stores the byte count in `len`.
///
/// # Safety
/// `frame` must be NULL or a live handle; `len` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn fb_frame_pixels(frame: *const FbFrame, len: *mut usize) -> *const u8 {
    let Some(f) = frame.as_ref() else {
        return ptr::null();
    };
    if let Some(len) = len.as_mut() {
        *len = f.inner.pixels().len();
    }
    f.inner.pixels().as_ptr()
}

/// # Safety
/// `frame` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn fb_frame_free(frame: *mut FbFrame) {
    if !frame.is_null() {
        drop(Box::from_raw(frame));
    }
}

/// Applies a frame-level op with its canonical parameters. `seed` is only
/// used by `noise`. Compression ops are video-level and return
/// `FB_STATUS_UNSUPPORTED`.
///
/// # Safety
/// `frame` must be a live handle, `op_id` a NUL-terminated string and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_perturb(
    frame: *const FbFrame,
    op_id: *const c_char,
    seed: u64,
    out: *mut *mut FbFrame,
) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let frame = frame_arg(frame)?;
        let op: OpId = str_arg(op_id, "op_id")?.parse().map_err(lib_err)?;
        if op.is_codec() {
            return Err((FbStatus::Unsupported, format!("{op} needs the external codec; use the CLI")));
        }
        let spec = PerturbationSpec::canonical(op);
        *out = boxed(perturb::apply_to_frame(&spec, frame, seed).map_err(lib_err)?);
        Ok(())
    })
}

/// Per-frame noise seed.
///
/// # Safety
/// `video_id` and `op_id` must be NUL-terminated strings; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_derive_frame_seed(
    global_seed: u64,
    video_id: *const c_char,
    op_id: *const c_char,
    frame_index: u64,
    out: *mut u64,
) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let video = str_arg(video_id, "video_id")?;
        let op = str_arg(op_id, "op_id")?;
        *out = rng::derive_frame_seed(global_seed, video, op, frame_index);
        Ok(())
    })
}

/// Built-in reference scorer in [0, 1].
///
/// # Safety
/// `frame` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_baseline_score(frame: *const FbFrame, out: *mut f64) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = scorer::baseline_score_frame(frame_arg(frame)?).map_err(lib_err)?;
        Ok(())
    })
}

/// ROC AUC in [0, 1] with fake as the positive class. `labels[i]` is 1 for
/// fake and 0 for real.
///
/// # Safety
/// `scores` and `labels` must point to `n` readable elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_auc(scores: *const f64, labels: *const u8, n: usize, out: *mut f64) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if n > 0 && (scores.is_null() || labels.is_null()) {
            return Err(null("scores or labels"));
        }
        let (scores, labels) = if n == 0 {
            (&[][..], &[][..])
        } else {
            (std::slice::from_raw_parts(scores, n), std::slice::from_raw_parts(labels, n))
        };
        let pairs = scores
            .iter()
            .zip(labels)
            .map(|(&s, &l)| match l {
                0 => Ok((s, Label::Real)),
                1 => Ok((s, Label::Fake)),
                other => Err((FbStatus::InvalidArgument, format!("label {other} is not 0 or 1"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let data = LabeledScores::new(pairs).map_err(lib_err)?;
        *out = metrics::auc(&data).map_err(lib_err)?;
        Ok(())
    })
}

/// Arithmetic mean of `n` >= 1 percentages.
///
/// # Safety
/// `values` must point to `n` readable elements; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_row_average(values: *const f64, n: usize, out: *mut f64) -> FbStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        if values.is_null() {
            return Err(null("values"));
        }
        let values = std::slice::from_raw_parts(values, n);
        *out = metrics::mean_percent(values.iter().copied()).map_err(lib_err)?;
        Ok(())
    })
}

/// Evenly spaced sample of `min(n_frames, k)` indices. Writes at most `cap`
/// entries to `buf` and the full count to `out_len`; if `cap` is too small
/// nothing is written and `FB_STATUS_INVALID_ARGUMENT` is returned.
///
/// # Safety
/// `buf` must have room for `cap` elements; `out_len` writable.
#[no_mangle]
pub unsafe extern "C" fn fb_sample_frame_indices(
    n_frames: usize,
    k: usize,
    buf: *mut usize,
    cap: usize,
    out_len: *mut usize,
) -> FbStatus {
    guard(|| {
        let out_len = out_arg(out_len, "out_len")?;
        let idx = dataset::sample_frame_indices(n_frames, k).map_err(lib_err)?;
        *out_len = idx.len();
        if idx.len() > cap {
            return Err((FbStatus::InvalidArgument, format!("buffer holds {cap}, need {}", idx.len())));
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        std::slice::from_raw_parts_mut(buf, idx.len()).copy_from_slice(&idx);
        Ok(())
    })
}
