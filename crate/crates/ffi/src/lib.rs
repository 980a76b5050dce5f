//! C ABI over `wmlab`.
//!
//! Images and keys cross the boundary as opaque heap handles that the caller
//! releases with the matching `*_free` function. Every fallible call returns a
//! [`WmStatus`]; on failure a description is available from
//! [`wm_last_error_message`] until the next failing call on the same thread.
//! Pixel buffers are interleaved RGB `double` values in `[0, 1]`, row-major.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use wmlab::attacks::{self, RefineConfig, RegenConfig};
use wmlab::metrics;
use wmlab::watermark::{self, BitMessage, Family, WatermarkKey};
use wmlab::{Error, RasterImage};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    TooSmall = 4,
    CapacityExceeded = 5,
    WrongFamily = 6,
    Io = 7,
    Format = 8,
    Panic = 9,
    Internal = 10,
}

/// Watermark family selector for [`wm_key_new`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WmFamily {
    SpreadSpectrum = 0,
    FourierRing = 1,
    BoundaryFrame = 2,
    FourierSquare = 3,
}

impl From<WmFamily> for Family {
    fn from(f: WmFamily) -> Self {
        match f {
            WmFamily::SpreadSpectrum => Family::SpreadSpectrum,
            WmFamily::FourierRing => Family::FourierRing,
            WmFamily::BoundaryFrame => Family::BoundaryFrame,
            WmFamily::FourierSquare => Family::FourierSquare,
        }
    }
}

/// Opaque RGB image.
pub struct WmImage {
    inner: RasterImage,
}

/// Opaque watermark key.
pub struct WmKey {
    inner: WatermarkKey,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(err: &Error) -> WmStatus {
    match err {
        Error::InvalidArgument(_) | Error::Empty(_) | Error::Message(_) | Error::Config(_) => {
            WmStatus::InvalidArgument
        }
        Error::DimensionMismatch { .. } => WmStatus::DimensionMismatch,
        Error::TooSmall { .. } => WmStatus::TooSmall,
        Error::CapacityExceeded { .. } => WmStatus::CapacityExceeded,
        Error::WrongFamily { .. } => WmStatus::WrongFamily,
        Error::Io(_) => WmStatus::Io,
        Error::Image(_) | Error::AlphaChannel { .. } | Error::UnsupportedFormat { .. } => WmStatus::Format,
        _ => WmStatus::Internal,
    }
}

struct Failure(WmStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(WmStatus::NullPointer, format!("{what} is null"))
}

/// Runs `f`, converting errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> WmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => WmStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            WmStatus::Panic
        }
    }
}

unsafe fn image_ref<'a>(p: *const WmImage, what: &str) -> Result<&'a RasterImage, Failure> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null(what))
}

unsafe fn key_ref<'a>(p: *const WmKey) -> Result<&'a WatermarkKey, Failure> {
    p.as_ref().map(|h| &h.inner).ok_or_else(|| null("key"))
}

unsafe fn c_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(WmStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn put_image(out: *mut *mut WmImage, img: RasterImage) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = Box::into_raw(Box::new(WmImage { inner: img }));
    Ok(())
}

unsafe fn put_f64(out: *mut f64, v: f64) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = v;
    Ok(())
}

/// Message of the most recent failure on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn wm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn wm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Creates an image from `width * height * 3` interleaved RGB values.
///
/// # Safety
/// `rgb` must point to `len` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_image_new(
    width: usize,
    height: usize,
    rgb: *const f64,
    len: usize,
    out: *mut *mut WmImage,
) -> WmStatus {
    guard(|| {
        if rgb.is_null() {
            return Err(null("rgb"));
        }
        let data = std::slice::from_raw_parts(rgb, len).to_vec();
        put_image(out, RasterImage::new(width, height, data)?)
    })
}

/// Loads an 8- or 16-bit RGB or grayscale PNG.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_image_load_png(path: *const c_char, out: *mut *mut WmImage) -> WmStatus {
    guard(|| put_image(out, RasterImage::load_png(c_str(path, "path")?)?))
}

/// Writes an 8-bit RGB PNG.
///
/// # Safety
/// `img` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn wm_image_save_png(img: *const WmImage, path: *const c_char) -> WmStatus {
    guard(|| Ok(image_ref(img, "image")?.save_png(c_str(path, "path")?)?))
}

/// Width in pixels, or 0 for a null handle.
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wm_image_width(img: *const WmImage) -> usize {
    img.as_ref().map_or(0, |h| h.inner.width())
}

/// Height in pixels, or 0 for a null handle.
///
/// # Safety
/// `img` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn wm_image_height(img: *const WmImage) -> usize {
    img.as_ref().map_or(0, |h| h.inner.height())
}

/// Copies the pixel values into `buf`, which must hold `width * height * 3` doubles.
///
/// # Safety
/// `img` must be a live handle and `buf` must point to `len` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn wm_image_copy_data(img: *const WmImage, buf: *mut f64, len: usize) -> WmStatus {
    guard(|| {
        let data = image_ref(img, "image")?.data();
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len != data.len() {
            return Err(Failure(
                WmStatus::InvalidArgument,
                format!("buffer holds {len} values, image has {}", data.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, len).copy_from_slice(data);
        Ok(())
    })
}

/// Releases an image handle. Null is ignored.
///
/// # Safety
/// `img` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wm_image_free(img: *mut WmImage) {
    if !img.is_null() {
        drop(Box::from_raw(img));
    }
}

/// Creates a key with the family's default amplitude.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_key_new(family: WmFamily, seed: u64, out: *mut *mut WmKey) -> WmStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(WmKey {
            inner: WatermarkKey::new(family.into(), seed),
        }));
        Ok(())
    })
}

/// Parses a key from its JSON form.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn wm_key_from_json(json: *const c_char, out: *mut *mut WmKey) -> WmStatus {
    guard(|| {
        let key: WatermarkKey = serde_json::from_str(c_str(json, "json")?)
            .map_err(|e| Failure(WmStatus::InvalidArgument, e.to_string()))?;
        key.validate()?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = Box::into_raw(Box::new(WmKey { inner: key }));
        Ok(())
    })
}

/// Overrides the embedding amplitude.
///
/// # Safety
/// `key` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn wm_key_set_amplitude(key: *mut WmKey, amplitude: f64) -> WmStatus {
    guard(|| {
        let k = key.as_mut().ok_or_else(|| null("key"))?;
        let updated = k.inner.clone().with_amplitude(amplitude);
        updated.validate()?;
        k.inner = updated;
        Ok(())
    })
}

/// Releases a key handle. Null is ignored.
///
/// # Safety
/// `key` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn wm_key_free(key: *mut WmKey) {
    if !key.is_null() {
        drop(Box::from_raw(key));
    }
}

/// Embeds the key's watermark. `message_hex` is required for spread-spectrum
/// keys and ignored otherwise.
///
/// # Safety
/// Handles must be live, `message_hex` null or NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wm_embed(
    cover: *const WmImage,
    key: *const WmKey,
    message_hex: *const c_char,
    out: *mut *mut WmImage,
) -> WmStatus {
    guard(|| {
        let img = image_ref(cover, "cover")?;
        let key = key_ref(key)?;
        let marked = match key.family {
            Family::SpreadSpectrum => {
                let msg = BitMessage::from_hex(c_str(message_hex, "message_hex")?, Some(key.message_bits()))?;
                watermark::ss_embed(img, key, &msg)?
            }
            Family::FourierRing => watermark::ring_embed(img, key)?,
            Family::FourierSquare => watermark::square_embed(img, key)?,
            Family::BoundaryFrame => watermark::boundary_embed(img, key)?,
        };
        put_image(out, marked)
    })
}

/// Decodes a spread-spectrum payload and writes the normalized bit distance to
/// `message_hex`.
///
/// # Safety
/// Handles must be live, `message_hex` NUL-terminated, `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wm_ss_distance(
    img: *const WmImage,
    key: *const WmKey,
    message_hex: *const c_char,
    out: *mut f64,
) -> WmStatus {
    guard(|| {
        let decoded = watermark::ss_decode(image_ref(img, "image")?, key_ref(key)?)?;
        let reference = BitMessage::from_hex(c_str(message_hex, "message_hex")?, Some(decoded.message.len()))?;
        put_f64(out, decoded.message.distance(&reference)?)
    })
}

/// Detector statistic of a pattern key: correlation for the Fourier families,
/// frame correlation for the boundary family.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wm_pattern_score(img: *const WmImage, key: *const WmKey, out: *mut f64) -> WmStatus {
    guard(|| {
        let img = image_ref(img, "image")?;
        let key = key_ref(key)?;
        let v = match key.family {
            Family::FourierRing => watermark::ring_detect(img, key)?,
            Family::FourierSquare => watermark::square_detect(img, key)?,
            Family::BoundaryFrame => watermark::boundary_detect(img, key)?,
            Family::SpreadSpectrum => {
                return Err(Failure(
                    WmStatus::WrongFamily,
                    "spread-spectrum keys are scored with wm_ss_distance".into(),
                ))
            }
        };
        put_f64(out, v)
    })
}

/// Shifts right by `dx` and restores the uncovered columns from the input.
///
/// # Safety
/// `img` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wm_attack_translate(img: *const WmImage, dx: usize, out: *mut *mut WmImage) -> WmStatus {
    guard(|| put_image(out, attacks::translation_attack(image_ref(img, "image")?, dx)?))
}

/// Noise-injection regeneration.
///
/// # Safety
/// `img` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wm_attack_regenerate(
    img: *const WmImage,
    strength: f64,
    passes: usize,
    seed: u64,
    out: *mut *mut WmImage,
) -> WmStatus {
    guard(|| {
        let cfg = RegenConfig {
            passes,
            ..RegenConfig::with_strength(strength, seed)
        };
        put_image(out, attacks::regenerate(image_ref(img, "image")?, &cfg)?)
    })
}

/// Test-time refinement of `attacked` toward the watermarked reference.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wm_attack_refine(
    attacked: *const WmImage,
    watermarked: *const WmImage,
    steps: usize,
    out: *mut *mut WmImage,
) -> WmStatus {
    guard(|| {
        let cfg = RefineConfig {
            steps,
            ..RefineConfig::default()
        };
        let refined = attacks::refine(image_ref(attacked, "attacked")?, image_ref(watermarked, "watermarked")?, &cfg)?;
        put_image(out, refined)
    })
}

/// Matches luminance statistics and chroma of `optimized` to `watermarked`.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wm_attack_color_transfer(
    optimized: *const WmImage,
    watermarked: *const WmImage,
    out: *mut *mut WmImage,
) -> WmStatus {
    guard(|| {
        let t = attacks::color_contrast_transfer(image_ref(optimized, "optimized")?, image_ref(watermarked, "watermarked")?)?;
        put_image(out, t.image)
    })
}

/// PSNR in dB, capped at 100 for identical images.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wm_psnr(a: *const WmImage, b: *const WmImage, out: *mut f64) -> WmStatus {
    guard(|| put_f64(out, metrics::psnr(image_ref(a, "a")?, image_ref(b, "b")?)?))
}

/// Mean SSIM on luminance.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wm_ssim(a: *const WmImage, b: *const WmImage, out: *mut f64) -> WmStatus {
    guard(|| put_f64(out, metrics::ssim(image_ref(a, "a")?, image_ref(b, "b")?)?))
}

/// Normalized mutual information of 8-bit luminance.
///
/// # Safety
/// Handles must be live and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn wm_nmi(a: *const WmImage, b: *const WmImage, out: *mut f64) -> WmStatus {
    guard(|| put_f64(out, metrics::nmi(image_ref(a, "a")?, image_ref(b, "b")?)?))
}

/// Euclidean combination of a detection score and a quality aggregate.
#[no_mangle]
pub extern "C" fn wm_total_score(detection: f64, quality: f64) -> f64 {
    metrics::total_score(detection, quality)
}
