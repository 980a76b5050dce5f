//! Raster types and the spatial primitives every stage shares.

use std::path::Path;

use ::image::{DynamicImage, ImageReader, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest accepted side length.
pub const MIN_SIDE: usize = 16;

/// Rec.601 luma weights.
pub const LUMA: [f64; 3] = [0.299, 0.587, 0.114];

/// H×W×3 sRGB-encoded raster with every value in `[0, 1]`.
///
/// Pixels are stored row-major and channel-interleaved: the red value of pixel
/// `(row, col)` lives at `3 * (row * width + col)`.
#[derive(Clone, Debug, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl RasterImage {
    /// Builds an image, clamping every value into `[0, 1]`.
    pub fn new(width: usize, height: usize, mut data: Vec<f64>) -> Result<Self> {
        check_side(width, height)?;
        if data.len() != width * height * 3 {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for a {width}x{height} RGB raster, got {}",
                width * height * 3,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite pixel value".into()));
        }
        clamp_unit(&mut data);
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, rgb: [f64; 3]) -> Result<Self> {
        check_side(width, height)?;
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self::new(width, height, data)
    }

    /// Builds an image from a per-pixel `(row, col) -> rgb` function.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> [f64; 3],
    ) -> Result<Self> {
        check_side(width, height)?;
        let mut data = Vec::with_capacity(width * height * 3);
        for row in 0..height {
            for col in 0..width {
                data.extend_from_slice(&f(row, col));
            }
        }
        Self::new(width, height, data)
    }

    /// Gray image with identical channels.
    pub fn from_gray(plane: &Plane) -> Result<Self> {
        let data = plane.data.iter().flat_map(|&v| [v, v, v]).collect();
        Self::new(plane.width, plane.height, data)
    }

    /// Internal constructor for buffers already known to be valid and clamped.
    pub(crate) fn from_raw_unchecked(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * 3);
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = 3 * (row * self.width + col);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn same_dims(&self, other: &RasterImage) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::mismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }

    /// Rec.601 luminance plane.
    pub fn luminance(&self) -> Plane {
        let data = self
            .data
            .chunks_exact(3)
            .map(|p| LUMA[0] * p[0] + LUMA[1] * p[1] + LUMA[2] * p[2])
            .collect();
        Plane {
            width: self.width,
            height: self.height,
            data,
        }
    }

    /// Adds `delta` to all three channels of each pixel and clamps.
    ///
    /// Since the luma weights sum to one this shifts luminance by exactly `delta`
    /// (before clamping) and leaves the color-difference channels untouched.
    pub fn add_luminance(&self, delta: &Plane) -> Result<RasterImage> {
        if delta.width != self.width || delta.height != self.height {
            return Err(Error::mismatch(self.width, self.height, delta.width, delta.height));
        }
        let mut data = self.data.clone();
        for (px, d) in data.chunks_exact_mut(3).zip(&delta.data) {
            for v in px {
                *v = (*v + d).clamp(0.0, 1.0);
            }
        }
        Ok(Self::from_raw_unchecked(self.width, self.height, data))
    }

    /// Replaces the luminance with `target`, shifting each pixel's channels equally.
    pub fn with_luminance(&self, target: &Plane) -> Result<RasterImage> {
        let current = self.luminance();
        if target.width != self.width || target.height != self.height {
            return Err(Error::mismatch(self.width, self.height, target.width, target.height));
        }
        let delta = Plane {
            width: self.width,
            height: self.height,
            data: target.data.iter().zip(&current.data).map(|(t, c)| t - c).collect(),
        };
        self.add_luminance(&delta)
    }

    /// Quantizes to 8 bits per channel and back, as a PNG round trip would.
    pub fn quantized(&self) -> RasterImage {
        let data = self
            .data
            .iter()
            .map(|v| (v * 255.0).round() / 255.0)
            .collect();
        Self::from_raw_unchecked(self.width, self.height, data)
    }

    pub fn to_rgb8(&self) -> RgbImage {
        let bytes = self
            .data
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        RgbImage::from_raw(self.width as u32, self.height as u32, bytes)
            .expect("buffer length matches dimensions")
    }

    pub fn from_rgb8(img: &RgbImage) -> Result<Self> {
        let (w, h) = img.dimensions();
        let data = img.as_raw().iter().map(|&b| f64::from(b) / 255.0).collect();
        Self::new(w as usize, h as usize, data)
    }

    /// Reads an 8-bit RGB (or gray) PNG. Alpha channels are rejected.
    pub fn load_png(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let decoded = ImageReader::open(path)?.with_guessed_format()?.decode()?;
        match decoded {
            DynamicImage::ImageRgb8(rgb) => Self::from_rgb8(&rgb),
            DynamicImage::ImageLuma8(_) => Self::from_rgb8(&decoded.to_rgb8()),
            other if other.color().has_alpha() => Err(Error::AlphaChannel {
                path: path.to_path_buf(),
            }),
            other => Err(Error::UnsupportedFormat {
                path: path.to_path_buf(),
                format: format!("{:?}", other.color()),
            }),
        }
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<()> {
        self.to_rgb8()
            .save_with_format(path.as_ref(), ::image::ImageFormat::Png)?;
        Ok(())
    }
}

/// Single-channel real grid, not range-restricted (luminance, gradients, residuals).
#[derive(Clone, Debug, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: vec![0.0; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for row in 0..height {
            for col in 0..width {
                data.push(f(row, col));
            }
        }
        Self { width, height, data }
    }

    #[inline]
    pub fn at(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn at_mut(&mut self, row: usize, col: usize) -> &mut f64 {
        &mut self.data[row * self.width + col]
    }
}

/// CIE L*a*b* image; `l` in `[0, 100]`, `a`/`b` nominally in `[-128, 127]`.
#[derive(Clone, Debug, PartialEq)]
pub struct LabImage {
    pub width: usize,
    pub height: usize,
    pub l: Vec<f64>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

/// Population mean and standard deviation of one channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelStats {
    pub mean: f64,
    pub std: f64,
}

impl ChannelStats {
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Self {
            mean,
            std: var.max(0.0).sqrt(),
        }
    }
}

/// Shifts content `dx` columns to the right: `out(i, j) = in(i, j - dx)` for `j >= dx`.
///
/// The vacated columns `j < dx` are filled with the pre-shift column 0; callers
/// are expected to overwrite them (see [`restore_left_columns`]).
pub fn translate_right(img: &RasterImage, dx: usize) -> Result<RasterImage> {
    let (w, h) = (img.width, img.height);
    if dx >= w {
        return Err(Error::InvalidArgument(format!(
            "shift {dx} must be smaller than the image width {w}"
        )));
    }
    let mut data = vec![0.0; img.data.len()];
    for row in 0..h {
        let src = &img.data[3 * row * w..3 * (row + 1) * w];
        let dst = &mut data[3 * row * w..3 * (row + 1) * w];
        dst[3 * dx..].copy_from_slice(&src[..3 * (w - dx)]);
        for col in 0..dx {
            dst[3 * col..3 * col + 3].copy_from_slice(&src[..3]);
        }
    }
    Ok(RasterImage::from_raw_unchecked(w, h, data))
}

/// Piecewise composition: columns `j < dx` from `original`, the rest from `shifted`.
pub fn restore_left_columns(
    shifted: &RasterImage,
    original: &RasterImage,
    dx: usize,
) -> Result<RasterImage> {
    shifted.same_dims(original)?;
    let w = shifted.width;
    if dx >= w {
        return Err(Error::InvalidArgument(format!(
            "restore width {dx} must be smaller than the image width {w}"
        )));
    }
    let mut data = shifted.data.clone();
    for row in 0..shifted.height {
        let start = 3 * row * w;
        data[start..start + 3 * dx].copy_from_slice(&original.data[start..start + 3 * dx]);
    }
    Ok(RasterImage::from_raw_unchecked(w, shifted.height, data))
}

fn check_side(width: usize, height: usize) -> Result<()> {
    if width < MIN_SIDE || height < MIN_SIDE {
        return Err(Error::TooSmall {
            width,
            height,
            min: MIN_SIDE,
        });
    }
    Ok(())
}

fn clamp_unit(data: &mut [f64]) {
    for v in data {
        *v = v.clamp(0.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(w: usize, h: usize) -> RasterImage {
        RasterImage::from_fn(w, h, |r, c| {
            let v = ((r * w + c) % 251) as f64 / 250.0;
            [v, 1.0 - v, (v * 0.5) + 0.25]
        })
        .unwrap()
    }

    #[test]
    fn rejects_small_and_malformed() {
        assert!(matches!(
            RasterImage::filled(8, 32, [0.0; 3]),
            Err(Error::TooSmall { .. })
        ));
        assert!(RasterImage::new(16, 16, vec![0.0; 10]).is_err());
        assert!(RasterImage::new(16, 16, vec![f64::NAN; 768]).is_err());
    }

    #[test]
    fn constructor_clamps() {
        let img = RasterImage::new(16, 16, vec![1.7; 768]).unwrap();
        assert!(img.data().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn translate_zero_is_identity() {
        let img = ramp(20, 17);
        assert_eq!(translate_right(&img, 0).unwrap(), img);
    }

    #[test]
    fn translate_seven_on_wide_image() {
        let img = ramp(400, 16);
        let out = translate_right(&img, 7).unwrap();
        for row in 0..16 {
            assert_eq!(out.pixel(row, 7), img.pixel(row, 0));
            assert_eq!(out.pixel(row, 399), img.pixel(row, 392));
            for col in 0..7 {
                assert_eq!(out.pixel(row, col), img.pixel(row, 0));
            }
        }
    }

    #[test]
    fn translate_rejects_full_width() {
        let img = ramp(16, 16);
        assert!(translate_right(&img, 16).is_err());
    }

    #[test]
    fn restore_boundaries() {
        let a = ramp(16, 16);
        let b = RasterImage::filled(16, 16, [0.5; 3]).unwrap();
        assert_eq!(restore_left_columns(&b, &a, 0).unwrap(), b);
        let all_but_last = restore_left_columns(&b, &a, 15).unwrap();
        for row in 0..16 {
            for col in 0..15 {
                assert_eq!(all_but_last.pixel(row, col), a.pixel(row, col));
            }
            assert_eq!(all_but_last.pixel(row, 15), b.pixel(row, 15));
        }
        let other = RasterImage::filled(17, 16, [0.5; 3]).unwrap();
        assert!(restore_left_columns(&other, &a, 1).is_err());
    }

    #[test]
    fn luminance_shift_is_exact_before_clamp() {
        let img = RasterImage::filled(16, 16, [0.2, 0.4, 0.6]).unwrap();
        let delta = Plane::from_fn(16, 16, |r, _| r as f64 * 0.001);
        let out = img.add_luminance(&delta).unwrap();
        let (y0, y1) = (img.luminance(), out.luminance());
        for i in 0..y0.data.len() {
            assert!((y1.data[i] - y0.data[i] - delta.data[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn channel_stats_closed_form() {
        let s = ChannelStats::of(&[0.0, 100.0]);
        assert_eq!(s.mean, 50.0);
        assert_eq!(s.std, 50.0);
    }
}
