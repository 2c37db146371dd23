//! C ABI over the saliency pipeline.
//!
//! Objects are opaque handles created by `ts_*_new`/`ts_*_load` style calls
//! and released with the matching `ts_*_free`. Every fallible call returns a
//! [`TsStatus`]; on failure the message is available from
//! [`ts_last_error_message`] on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use tumor_saliency::eval::score;
use tumor_saliency::imaging::{load_image, BinaryMask, GrayImage};
use tumor_saliency::pipeline::Analysis;
use tumor_saliency::{analyze, Error, PipelineConfig};

/// Status codes returned by every fallible function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TsStatus {
    Ok = 0,
    NullArgument = 1,
    /// Bad key, value, size or UTF-8 text.
    InvalidArgument = 2,
    Io = 3,
    Format = 4,
    /// A pipeline stage (layering, assembly, solver) failed.
    Pipeline = 5,
    Panic = 6,
}

/// Grayscale image in `[0, 1]`.
pub struct TsImage(GrayImage);

/// Pipeline parameters.
pub struct TsConfig(PipelineConfig);

/// Result of one pipeline run.
pub struct TsAnalysis(Analysis);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TsDiagnostics {
    pub regions: usize,
    pub layer_count: usize,
    pub sigma2_sq: f64,
    pub adaptation_steps: usize,
    /// Non-zero when layering failed and one layer was used.
    pub layer_fallback: i32,
    pub solver_iterations: usize,
    pub converged: i32,
    pub residual: f64,
    pub objective: f64,
    pub seconds: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct TsScore {
    pub precision: f64,
    pub recall: f64,
    pub f_measure: f64,
    pub mae: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TsStatus {
    match e.root() {
        Error::Usage(_) | Error::Config(_) | Error::Spec(_) | Error::Contract(_) => TsStatus::InvalidArgument,
        Error::Io { .. } => TsStatus::Io,
        Error::Format(_) => TsStatus::Format,
        _ => TsStatus::Pipeline,
    }
}

fn fail(status: TsStatus, msg: impl Into<String>) -> TsStatus {
    set_error(msg.into());
    status
}

/// Runs `f`, turning errors and panics into status codes.
fn guard(f: impl FnOnce() -> Result<(), (TsStatus, String)>) -> TsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TsStatus::Ok,
        Ok(Err((status, msg))) => fail(status, msg),
        Err(_) => fail(TsStatus::Panic, "internal panic"),
    }
}

fn lib_err(e: Error) -> (TsStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (TsStatus, String) {
    (TsStatus::NullArgument, format!("{what} is null"))
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, (TsStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (TsStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_ptr<'a, T>(p: *mut *mut T, what: &str) -> Result<&'a mut *mut T, (TsStatus, String)> {
    let out = p.as_mut().ok_or_else(|| null(what))?;
    *out = ptr::null_mut();
    Ok(out)
}

/// Message of the last failure on this thread, or NULL. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ts_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Loads a PNG or PGM image; colour input is averaged to gray.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_image_load(path: *const c_char, out: *mut *mut TsImage) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let path = text(path, "path")?;
        let img = load_image(Path::new(path)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TsImage(img)));
        Ok(())
    })
}

/// Copies a row-major `width * height` buffer of intensities in `[0, 1]`.
///
/// # Safety
/// `data` must point to `width * height` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_image_from_buffer(
    width: usize,
    height: usize,
    data: *const f64,
    out: *mut *mut TsImage,
) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        if data.is_null() {
            return Err(null("data"));
        }
        let len = width
            .checked_mul(height)
            .ok_or((TsStatus::InvalidArgument, "image size overflows".to_string()))?;
        let pixels = std::slice::from_raw_parts(data, len).to_vec();
        let img = GrayImage::new(width, height, pixels).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TsImage(img)));
        Ok(())
    })
}

/// # Safety
/// `img` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ts_image_free(img: *mut TsImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// # Safety
/// `img` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ts_image_width(img: *const TsImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.width())
}

/// # Safety
/// `img` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ts_image_height(img: *const TsImage) -> usize {
    img.as_ref().map_or(0, |i| i.0.height())
}

/// Default configuration.
#[no_mangle]
pub extern "C" fn ts_config_new() -> *mut TsConfig {
    Box::into_raw(Box::new(TsConfig(PipelineConfig::default())))
}

/// Reads a `key = value` configuration file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ts_config_from_file(path: *const c_char, out: *mut *mut TsConfig) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let path = text(path, "path")?;
        let cfg = PipelineConfig::from_file(Path::new(path)).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TsConfig(cfg)));
        Ok(())
    })
}

/// Sets one configuration key, validating the result.
///
/// # Safety
/// `cfg` must be a valid handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn ts_config_set(cfg: *mut TsConfig, key: *const c_char, value: *const c_char) -> TsStatus {
    guard(|| {
        let cfg = cfg.as_mut().ok_or_else(|| null("cfg"))?;
        let (key, value) = (text(key, "key")?, text(value, "value")?);
        let mut next = cfg.0.clone();
        next.set(key, value).map_err(lib_err)?;
        next.validate().map_err(lib_err)?;
        cfg.0 = next;
        Ok(())
    })
}

/// # Safety
/// `cfg` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ts_config_free(cfg: *mut TsConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

/// Runs the full pipeline on `img`. A NULL `cfg` means defaults.
///
/// # Safety
/// `img` must be a valid handle, `cfg` NULL or valid, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_analyze(img: *const TsImage, cfg: *const TsConfig, out: *mut *mut TsAnalysis) -> TsStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let img = img.as_ref().ok_or_else(|| null("img"))?;
        let default;
        let cfg = match cfg.as_ref() {
            Some(c) => &c.0,
            None => {
                default = PipelineConfig::default();
                &default
            }
        };
        let a = analyze(&img.0, cfg).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(TsAnalysis(a)));
        Ok(())
    })
}

/// Copies the per-pixel saliency map (row-major) into `buf`.
///
/// # Safety
/// `a` must be a valid handle; `buf` must hold `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn ts_analysis_saliency(a: *const TsAnalysis, buf: *mut f64, len: usize) -> TsStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("analysis"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let data = &a.0.saliency.data;
        if len != data.len() {
            return Err((
                TsStatus::InvalidArgument,
                format!("buffer holds {len} values, map has {}", data.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(data);
        Ok(())
    })
}

/// # Safety
/// `a` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ts_analysis_width(a: *const TsAnalysis) -> usize {
    a.as_ref().map_or(0, |a| a.0.saliency.width)
}

/// # Safety
/// `a` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn ts_analysis_height(a: *const TsAnalysis) -> usize {
    a.as_ref().map_or(0, |a| a.0.saliency.height)
}

/// # Safety
/// `a` must be a valid handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_analysis_diagnostics(a: *const TsAnalysis, out: *mut TsDiagnostics) -> TsStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("analysis"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let d = &a.0.diagnostics;
        *out = TsDiagnostics {
            regions: d.regions,
            layer_count: d.layer_count,
            sigma2_sq: d.sigma2_sq,
            adaptation_steps: d.adaptation_steps,
            layer_fallback: i32::from(d.layer_fallback),
            solver_iterations: d.solver_iterations,
            converged: i32::from(d.converged),
            residual: d.residual,
            objective: d.objective,
            seconds: d.seconds,
        };
        Ok(())
    })
}

/// Scores the saliency map against a ground-truth mask given as one byte
/// per pixel (non-zero = tumor).
///
/// # Safety
/// `a` must be a valid handle; `mask` must hold `len` bytes; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ts_analysis_score(
    a: *const TsAnalysis,
    mask: *const u8,
    len: usize,
    out: *mut TsScore,
) -> TsStatus {
    guard(|| {
        let a = a.as_ref().ok_or_else(|| null("analysis"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        if mask.is_null() {
            return Err(null("mask"));
        }
        let map = &a.0.saliency;
        if len != map.data.len() {
            return Err((
                TsStatus::InvalidArgument,
                format!("mask holds {len} values, map has {}", map.data.len()),
            ));
        }
        let bits = std::slice::from_raw_parts(mask, len).iter().map(|&b| b != 0).collect();
        let gt = BinaryMask::new(map.width, map.height, bits).map_err(lib_err)?;
        let s = score(map, &gt).map_err(lib_err)?;
        *out = TsScore {
            precision: s.precision,
            recall: s.recall,
            f_measure: s.f_measure,
            mae: s.mae,
        };
        Ok(())
    })
}

/// # Safety
/// `a` must be NULL or a handle from this library, freed at most once.
#[no_mangle]
pub unsafe extern "C" fn ts_analysis_free(a: *mut TsAnalysis) {
    if !a.is_null() {
        drop(Box::from_raw(a));
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ts_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}
