//! C ABI for `vstrata`.
//!
//! Conventions:
//! - every fallible function returns a [`VstStatus`]; on failure a message is
//!   available from [`vst_last_error`] on the same thread until the next call;
//! - results are written through out-pointers, which are left untouched on
//!   failure;
//! - handles returned through out-pointers are owned by the caller and are
//!   released with the matching `*_free` function; `*_free(NULL)` is a no-op;
//! - masks hold one byte per pixel, row-major, values 0 or 1; gray images
//!   hold one byte per pixel, row-major.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{self, AssertUnwindSafe};
use std::path::PathBuf;

use vstrata::losses::{self, LossWeights, PredictionStack, RealMap};
use vstrata::morphology::{self, KernelSpec, MorphMode};
use vstrata::stratify::{self, ThresholdLadder};
use vstrata::{geometry, metrics, raster, BinaryMask, Error, GrayImage, PixelCoord};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VstStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    Io = 4,
    Decode = 5,
    Unsupported = 6,
    Dataset = 7,
    Panic = 8,
}

/// Binary mask handle.
pub struct VstMask(BinaryMask);

/// 8-bit grayscale image handle.
pub struct VstGray(GrayImage);

/// Ordered strata produced by `vst_stratify`.
pub struct VstStrata(Vec<BinaryMask>);

/// Pixel position on a curve.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VstPoint {
    pub row: usize,
    pub col: usize,
}

/// Pixel confusion counts.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct VstConfusion {
    pub tp: u64,
    pub tn: u64,
    pub fp: u64,
    pub fn_: u64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(VstStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e.kind() {
            "io" => VstStatus::Io,
            "decode" => VstStatus::Decode,
            "unsupported" => VstStatus::Unsupported,
            "dimension_mismatch" => VstStatus::DimensionMismatch,
            "dataset" => VstStatus::Dataset,
            _ => VstStatus::InvalidArgument,
        };
        Failure(status, e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(VstStatus::NullPointer, format!("{what} is NULL"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(VstStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> VstStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match panic::catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VstStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(&msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(&format!("internal panic: {msg}"));
            VstStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out_ptr<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path_arg(p: *const c_char) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid("path is not valid UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn pixel_count(width: usize, height: usize) -> Result<usize, Failure> {
    width
        .checked_mul(height)
        .ok_or_else(|| invalid("width * height overflows"))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread, or NULL. The pointer is
/// valid until the next `vst_` call on the same thread.
#[no_mangle]
pub extern "C" fn vst_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Static NUL-terminated version string.
#[no_mangle]
pub extern "C" fn vst_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Static NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn vst_status_name(status: VstStatus) -> *const c_char {
    let s: &'static str = match status {
        VstStatus::Ok => "ok\0",
        VstStatus::NullPointer => "null_pointer\0",
        VstStatus::InvalidArgument => "invalid_argument\0",
        VstStatus::DimensionMismatch => "dimension_mismatch\0",
        VstStatus::Io => "io\0",
        VstStatus::Decode => "decode\0",
        VstStatus::Unsupported => "unsupported\0",
        VstStatus::Dataset => "dataset\0",
        VstStatus::Panic => "panic\0",
    };
    s.as_ptr().cast()
}

// ---- masks ----

/// Creates a mask from `width * height` bytes of 0/1, or an all-zero mask
/// when `data` is NULL.
#[no_mangle]
pub unsafe extern "C" fn vst_mask_new(
    width: usize,
    height: usize,
    data: *const u8,
    out: *mut *mut VstMask,
) -> VstStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = pixel_count(width, height)?;
        let mask = if data.is_null() {
            BinaryMask::zeros(width, height)
        } else {
            BinaryMask::new(width, height, slice(data, n, "data")?.to_vec())?
        };
        *out = boxed(VstMask(mask));
        Ok(())
    })
}

/// Loads a PNG/PNM image; every nonzero pixel is foreground.
#[no_mangle]
pub unsafe extern "C" fn vst_mask_load(path: *const c_char, out: *mut *mut VstMask) -> VstStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let mask = raster::load_mask(path_arg(path)?)?;
        *out = boxed(VstMask(mask));
        Ok(())
    })
}

/// Writes an 8-bit grayscale PNG with foreground as 255.
#[no_mangle]
pub unsafe extern "C" fn vst_mask_save(mask: *const VstMask, path: *const c_char) -> VstStatus {
    guard(|| {
        let mask = deref(mask, "mask")?;
        raster::save_mask(&mask.0, path_arg(path)?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vst_mask_free(mask: *mut VstMask) {
    if !mask.is_null() {
        drop(Box::from_raw(mask));
    }
}

/// 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn vst_mask_width(mask: *const VstMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.width())
}

/// 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn vst_mask_height(mask: *const VstMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.height())
}

/// Number of foreground pixels; 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn vst_mask_count(mask: *const VstMask) -> usize {
    mask.as_ref().map_or(0, |m| m.0.count_ones())
}

/// Copies the pixels into `buf`, which must hold at least `width * height`
/// bytes.
#[no_mangle]
pub unsafe extern "C" fn vst_mask_copy_data(mask: *const VstMask, buf: *mut u8, len: usize) -> VstStatus {
    guard(|| {
        let data = deref(mask, "mask")?.0.as_slice();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < data.len() {
            return Err(invalid(format!("buffer holds {len} bytes, {} needed", data.len())));
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

/// Opening with a `kernel` × `kernel` square; `naive` selects the reference
/// implementation.
#[no_mangle]
pub unsafe extern "C" fn vst_open(
    mask: *const VstMask,
    kernel: usize,
    naive: bool,
    out: *mut *mut VstMask,
) -> VstStatus {
    guard(|| {
        let mask = deref(mask, "mask")?;
        let out = out_ptr(out, "out")?;
        if kernel == 0 {
            return Err(invalid("kernel size must be at least 1"));
        }
        let mode = if naive { MorphMode::Naive } else { MorphMode::Separable };
        *out = boxed(VstMask(morphology::open(&mask.0, KernelSpec::new(kernel), mode)));
        Ok(())
    })
}

/// Thin, stem and raw channels for threshold `d1`.
#[no_mangle]
pub unsafe extern "C" fn vst_stack3(
    mask: *const VstMask,
    d1: usize,
    thin: *mut *mut VstMask,
    stem: *mut *mut VstMask,
    raw: *mut *mut VstMask,
) -> VstStatus {
    guard(|| {
        let mask = deref(mask, "mask")?;
        let (thin, stem, raw) = (out_ptr(thin, "thin")?, out_ptr(stem, "stem")?, out_ptr(raw, "raw")?);
        let stack = stratify::stack3(&mask.0, d1)?;
        *thin = boxed(VstMask(stack.thin().clone()));
        *stem = boxed(VstMask(stack.stem().clone()));
        *raw = boxed(VstMask(stack.raw().clone()));
        Ok(())
    })
}

/// Partitions `mask` by the strictly increasing thresholds in `ladder`.
#[no_mangle]
pub unsafe extern "C" fn vst_stratify(
    mask: *const VstMask,
    ladder: *const usize,
    ladder_len: usize,
    out: *mut *mut VstStrata,
) -> VstStatus {
    guard(|| {
        let mask = deref(mask, "mask")?;
        let out = out_ptr(out, "out")?;
        let ladder = ThresholdLadder::new(slice(ladder, ladder_len, "ladder")?.to_vec())?;
        let stack = stratify::stratify(&mask.0, &ladder);
        *out = boxed(VstStrata(stack.strata().to_vec()));
        Ok(())
    })
}

/// 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn vst_strata_count(strata: *const VstStrata) -> usize {
    strata.as_ref().map_or(0, |s| s.0.len())
}

/// Copies stratum `index` (thinnest first) into a new mask handle.
#[no_mangle]
pub unsafe extern "C" fn vst_strata_get(strata: *const VstStrata, index: usize, out: *mut *mut VstMask) -> VstStatus {
    guard(|| {
        let strata = deref(strata, "strata")?;
        let out = out_ptr(out, "out")?;
        let m = strata
            .0
            .get(index)
            .ok_or_else(|| invalid(format!("stratum index {index} out of range 0..{}", strata.0.len())))?;
        *out = boxed(VstMask(m.clone()));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vst_strata_free(strata: *mut VstStrata) {
    if !strata.is_null() {
        drop(Box::from_raw(strata));
    }
}

// ---- gray images ----

/// Creates an image from `width * height` bytes, or all zeros when `data` is
/// NULL.
#[no_mangle]
pub unsafe extern "C" fn vst_gray_new(
    width: usize,
    height: usize,
    data: *const u8,
    out: *mut *mut VstGray,
) -> VstStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let n = pixel_count(width, height)?;
        let img = if data.is_null() {
            GrayImage::filled(width, height, 0)
        } else {
            GrayImage::new(width, height, slice(data, n, "data")?.to_vec())?
        };
        *out = boxed(VstGray(img));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vst_gray_load(path: *const c_char, out: *mut *mut VstGray) -> VstStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = boxed(VstGray(raster::load_gray(path_arg(path)?)?));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vst_gray_save(img: *const VstGray, path: *const c_char) -> VstStatus {
    guard(|| {
        raster::save_gray(&deref(img, "img")?.0, path_arg(path)?)?;
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vst_gray_free(img: *mut VstGray) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

#[no_mangle]
pub unsafe extern "C" fn vst_gray_width(img: *const VstGray) -> usize {
    img.as_ref().map_or(0, |g| g.0.width())
}

#[no_mangle]
pub unsafe extern "C" fn vst_gray_height(img: *const VstGray) -> usize {
    img.as_ref().map_or(0, |g| g.0.height())
}

#[no_mangle]
pub unsafe extern "C" fn vst_gray_copy_data(img: *const VstGray, buf: *mut u8, len: usize) -> VstStatus {
    guard(|| {
        let data = deref(img, "img")?.0.as_slice();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < data.len() {
            return Err(invalid(format!("buffer holds {len} bytes, {} needed", data.len())));
        }
        std::ptr::copy_nonoverlapping(data.as_ptr(), buf, data.len());
        Ok(())
    })
}

unsafe fn gray_list<'a>(maps: *const *const VstGray, count: usize) -> Result<Vec<&'a GrayImage>, Failure> {
    slice(maps, count, "maps")?
        .iter()
        .map(|&p| deref(p, "maps[i]").map(|g| &g.0))
        .collect()
}

/// Binarizes each map with `value > threshold` and ORs the results.
#[no_mangle]
pub unsafe extern "C" fn vst_fuse(
    maps: *const *const VstGray,
    count: usize,
    threshold: u8,
    out: *mut *mut VstMask,
) -> VstStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let owned: Vec<GrayImage> = gray_list(maps, count)?.into_iter().cloned().collect();
        *out = boxed(VstMask(stratify::fuse(&owned, threshold)?));
        Ok(())
    })
}

/// Pixel-wise maximum of the maps.
#[no_mangle]
pub unsafe extern "C" fn vst_fuse_soft(maps: *const *const VstGray, count: usize, out: *mut *mut VstGray) -> VstStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let owned: Vec<GrayImage> = gray_list(maps, count)?.into_iter().cloned().collect();
        *out = boxed(VstGray(stratify::fuse_soft(&owned)?));
        Ok(())
    })
}

// ---- metrics ----

/// Confusion counts of `pred` against `truth`, restricted to `fov` when it
/// is not NULL.
#[no_mangle]
pub unsafe extern "C" fn vst_confusion(
    pred: *const VstMask,
    truth: *const VstMask,
    fov: *const VstMask,
    out: *mut VstConfusion,
) -> VstStatus {
    guard(|| {
        let (pred, truth) = (deref(pred, "pred")?, deref(truth, "truth")?);
        let out = out_ptr(out, "out")?;
        let c = metrics::confusion(&pred.0, &truth.0, fov.as_ref().map(|f| &f.0))?;
        *out = VstConfusion {
            tp: c.tp,
            tn: c.tn,
            fp: c.fp,
            fn_: c.fn_,
        };
        Ok(())
    })
}

/// Area under the ROC curve of a soft map; `fov` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn vst_roc_auc(
    pred: *const VstGray,
    truth: *const VstMask,
    fov: *const VstMask,
    out: *mut f64,
) -> VstStatus {
    guard(|| {
        let (pred, truth) = (deref(pred, "pred")?, deref(truth, "truth")?);
        let out = out_ptr(out, "out")?;
        *out = metrics::roc_auc(&pred.0, &truth.0, fov.as_ref().map(|f| &f.0))?.auc;
        Ok(())
    })
}

// ---- geometry ----

unsafe fn curve(p: *const VstPoint, len: usize, what: &str) -> Result<geometry::PolylineCurve, Failure> {
    let pts = slice(p, len, what)?
        .iter()
        .map(|q| PixelCoord::new(q.row, q.col))
        .collect();
    Ok(geometry::PolylineCurve::new(pts)?)
}

/// Discrete Fréchet distance under the Chebyshev metric; both curves must be
/// nonempty.
#[no_mangle]
pub unsafe extern "C" fn vst_discrete_frechet(
    a: *const VstPoint,
    a_len: usize,
    b: *const VstPoint,
    b_len: usize,
    out: *mut usize,
) -> VstStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = geometry::discrete_frechet(&curve(a, a_len, "a")?, &curve(b, b_len, "b")?);
        Ok(())
    })
}

// ---- losses ----

/// Weighted sum of per-channel Frobenius residual norms. `pred` holds
/// `channels` row-major planes of `width * height` values; `targets` and
/// `weights` hold `channels` entries each.
#[no_mangle]
pub unsafe extern "C" fn vst_loss_gen(
    pred: *const f64,
    channels: usize,
    width: usize,
    height: usize,
    targets: *const *const VstMask,
    weights: *const f64,
    out: *mut f64,
) -> VstStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let plane = pixel_count(width, height)?;
        let values = slice(pred, pixel_count(plane, channels)?, "pred")?;
        let maps = values
            .chunks(plane.max(1))
            .take(channels)
            .map(|c| RealMap::new(width, height, c.to_vec()))
            .collect::<vstrata::Result<Vec<_>>>()?;
        let stack = PredictionStack::new(maps)?;
        let targets: Vec<BinaryMask> = slice(targets, channels, "targets")?
            .iter()
            .map(|&t| deref(t, "targets[i]").map(|m| m.0.clone()))
            .collect::<Result<_, _>>()?;
        let weights = LossWeights::new(slice(weights, channels, "weights")?.to_vec(), 0.0)?;
        *out = losses::loss_gen(&stack, &targets, &weights)?;
        Ok(())
    })
}

/// Mean log real score plus mean log of one minus fake score, with scores
/// clamped away from 0 and 1.
#[no_mangle]
pub unsafe extern "C" fn vst_cgan_loss(
    d_real: *const f64,
    real_len: usize,
    d_fake: *const f64,
    fake_len: usize,
    out: *mut f64,
) -> VstStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        *out = losses::cgan_loss(slice(d_real, real_len, "d_real")?, slice(d_fake, fake_len, "d_fake")?)?;
        Ok(())
    })
}

/// `cgan + lambda * l1`; `lambda` must be finite and non-negative.
#[no_mangle]
pub unsafe extern "C" fn vst_composite_objective(cgan: f64, l1: f64, lambda: f64, out: *mut f64) -> VstStatus {
    guard(|| {
        let out = out_ptr(out, "out")?;
        let w = LossWeights::new(Vec::new(), lambda)?;
        *out = losses::composite_objective(cgan, l1, &w);
        Ok(())
    })
}
