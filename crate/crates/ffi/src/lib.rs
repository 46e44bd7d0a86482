//! C ABI over the inference side of `sketch2photo`.
//!
//! Images cross the boundary as caller-owned `float` buffers in `[0,1]`:
//! single-channel images row-major `H×W`, colour images planar `3×H×W`
//! (all of R, then G, then B). Every function returns an [`S2pStatus`];
//! on failure [`s2p_last_error`] describes the cause for the calling thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use sketch2photo::pipeline::Synthesizer;
use sketch2photo::sketchdata::{ColorPhoto, SketchImage};
use sketch2photo::Error;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum S2pStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidInput = 2,
    Config = 3,
    Integrity = 4,
    UnsupportedVersion = 5,
    Io = 6,
    Internal = 7,
    Panic = 8,
}

/// Opaque loaded model.
pub struct S2pModel {
    inner: Synthesizer,
    version: CString,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> S2pStatus {
    match e {
        Error::Config(_) => S2pStatus::Config,
        Error::Integrity(_) => S2pStatus::Integrity,
        Error::UnsupportedVersion { .. } => S2pStatus::UnsupportedVersion,
        Error::Io(_) | Error::Decode { .. } => S2pStatus::Io,
        Error::InvalidInput(_) | Error::Shape(_) | Error::OutOfBounds(_) => S2pStatus::InvalidInput,
        _ => S2pStatus::Internal,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (S2pStatus, String)>) -> S2pStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => S2pStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside sketch2photo");
            S2pStatus::Panic
        }
    }
}

fn lift<T>(r: sketch2photo::Result<T>) -> Result<T, (S2pStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (S2pStatus, String) {
    (S2pStatus::NullArgument, format!("{what} is null"))
}

unsafe fn opt_path(p: *const c_char) -> Result<Option<PathBuf>, (S2pStatus, String)> {
    if p.is_null() {
        return Ok(None);
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (S2pStatus::InvalidInput, "path is not UTF-8".to_string()))?;
    Ok(Some(PathBuf::from(s)))
}

unsafe fn input<'a>(p: *const f32, len: usize, what: &str) -> Result<&'a [f32], (S2pStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f32, len: usize, what: &str) -> Result<&'a mut [f32], (S2pStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts_mut(p, len))
}

fn area(width: usize, height: usize) -> Result<usize, (S2pStatus, String)> {
    width
        .checked_mul(height)
        .filter(|&a| a > 0)
        .ok_or_else(|| (S2pStatus::InvalidInput, format!("bad image size {width}×{height}")))
}

/// Message for the last failed call on this thread, valid until the next
/// failure on the same thread.
#[no_mangle]
pub extern "C" fn s2p_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn s2p_library_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Load checkpoints. `shape_path` is required; `content_path` may be null,
/// in which case only [`s2p_photo_to_sketch`] is available.
///
/// # Safety
/// Paths must be null or NUL-terminated strings; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn s2p_model_load(
    shape_path: *const c_char,
    content_path: *const c_char,
    out: *mut *mut S2pModel,
) -> S2pStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = std::ptr::null_mut();
        let shape = opt_path(shape_path)?.ok_or_else(|| null("shape_path"))?;
        let content = opt_path(content_path)?;
        let inner = lift(Synthesizer::load(Some(&shape), content.as_deref()))?;
        let version = CString::new(inner.version()).unwrap_or_default();
        *out = Box::into_raw(Box::new(S2pModel { inner, version }));
        Ok(())
    })
}

/// Release a model from [`s2p_model_load`]; null is ignored.
///
/// # Safety
/// `model` must come from `s2p_model_load` and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn s2p_model_free(model: *mut S2pModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Digest identifying the loaded checkpoints; owned by the model.
///
/// # Safety
/// `model` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn s2p_model_version(model: *const S2pModel) -> *const c_char {
    match model.as_ref() {
        Some(m) => m.version.as_ptr(),
        None => std::ptr::null(),
    }
}

/// Sketch → grayscale (`H×W`) and colour (`3×H×W`) photos. `reference` is
/// an optional `3×H×W` style photo. Sides must be multiples of 4.
///
/// # Safety
/// Buffers must hold the stated number of floats; `reference` may be null.
#[no_mangle]
pub unsafe extern "C" fn s2p_synthesize(
    model: *const S2pModel,
    sketch: *const f32,
    width: usize,
    height: usize,
    reference: *const f32,
    out_gray: *mut f32,
    out_color: *mut f32,
) -> S2pStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let n = area(width, height)?;
        let s = lift(SketchImage::new(width, height, input(sketch, n, "sketch")?.to_vec()))?;
        let r = if reference.is_null() {
            None
        } else {
            Some(lift(ColorPhoto::new(width, height, input(reference, 3 * n, "reference")?.to_vec()))?)
        };
        let gray_out = output(out_gray, n, "out_gray")?;
        let color_out = output(out_color, 3 * n, "out_color")?;
        let (gray, color) = lift(m.inner.synthesize(&s, r.as_ref()))?;
        gray_out.copy_from_slice(gray.pixels());
        color_out.copy_from_slice(color.pixels());
        Ok(())
    })
}

/// Photo (`3×H×W`) → sketch (`H×W`).
///
/// # Safety
/// Buffers must hold the stated number of floats.
#[no_mangle]
pub unsafe extern "C" fn s2p_photo_to_sketch(
    model: *const S2pModel,
    photo: *const f32,
    width: usize,
    height: usize,
    out_sketch: *mut f32,
) -> S2pStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let n = area(width, height)?;
        let p = lift(ColorPhoto::new(width, height, input(photo, 3 * n, "photo")?.to_vec()))?;
        let out = output(out_sketch, n, "out_sketch")?;
        let sketch = lift(m.inner.photo_to_sketch(&p))?;
        out.copy_from_slice(sketch.pixels());
        Ok(())
    })
}
