//! 2D Fourier analysis of luminance and the artifact detectors used to sort
//! images into removal clusters.

use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::image::{Plane, RasterImage};

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// Complex 2D DFT coefficients of one real channel, DC at index `(0, 0)`.
///
/// `coeffs[u * width + v]` holds vertical frequency `u` and horizontal frequency `v`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub width: usize,
    pub height: usize,
    pub coeffs: Vec<Complex64>,
}

impl Spectrum {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            coeffs: vec![Complex64::new(0.0, 0.0); width * height],
        }
    }

    #[inline]
    pub fn at(&self, u: usize, v: usize) -> Complex64 {
        self.coeffs[u * self.width + v]
    }

    /// Signed frequency offsets of bin `(u, v)` relative to DC.
    #[inline]
    pub fn signed_freq(&self, u: usize, v: usize) -> (i64, i64) {
        (signed(u, self.height), signed(v, self.width))
    }

    /// Euclidean distance of bin `(u, v)` from DC in bin units.
    #[inline]
    pub fn radius(&self, u: usize, v: usize) -> f64 {
        let (du, dv) = self.signed_freq(u, v);
        ((du * du + dv * dv) as f64).sqrt()
    }

    /// Index of the conjugate-mirrored bin `(-u mod H, -v mod W)`.
    #[inline]
    pub fn mirror(&self, u: usize, v: usize) -> (usize, usize) {
        ((self.height - u) % self.height, (self.width - v) % self.width)
    }

    /// `log(1 + |X|)` arranged with DC at the center.
    pub fn centered_log_magnitude(&self) -> Plane {
        let (h, w) = (self.height, self.width);
        Plane::from_fn(w, h, |row, col| {
            let u = (row + h - h / 2) % h;
            let v = (col + w - w / 2) % w;
            self.at(u, v).norm().ln_1p()
        })
    }
}

#[inline]
pub(crate) fn signed(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

/// Unnormalized forward DFT of an arbitrary real plane.
pub fn fft2_plane(plane: &Plane) -> Spectrum {
    let (w, h) = (plane.width, plane.height);
    let mut buf: Vec<Complex64> = plane.data.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    transform_2d(&mut buf, w, h, false);
    Spectrum {
        width: w,
        height: h,
        coeffs: buf,
    }
}

/// Inverse DFT with the `1 / (H·W)` normalization; returns the real part.
pub fn ifft2_plane(spec: &Spectrum) -> Plane {
    let (w, h) = (spec.width, spec.height);
    let mut buf = spec.coeffs.clone();
    transform_2d(&mut buf, w, h, true);
    let norm = 1.0 / (w * h) as f64;
    Plane {
        width: w,
        height: h,
        data: buf.iter().map(|c| c.re * norm).collect(),
    }
}

/// Forward DFT of the image's Rec.601 luminance.
pub fn fft2(img: &RasterImage) -> Spectrum {
    fft2_plane(&img.luminance())
}

/// Inverse of [`fft2`]: returns a luminance plane.
pub fn ifft2(spec: &Spectrum) -> Plane {
    ifft2_plane(spec)
}

fn transform_2d(buf: &mut [Complex64], w: usize, h: usize, inverse: bool) {
    let row_fft = plan(w, inverse);
    let mut scratch = vec![Complex64::new(0.0, 0.0); row_fft.get_inplace_scratch_len()];
    for row in buf.chunks_exact_mut(w) {
        row_fft.process_with_scratch(row, &mut scratch);
    }
    let col_fft = plan(h, inverse);
    let mut column = vec![Complex64::new(0.0, 0.0); h];
    let mut scratch = vec![Complex64::new(0.0, 0.0); col_fft.get_inplace_scratch_len()];
    for col in 0..w {
        for (row, c) in column.iter_mut().enumerate() {
            *c = buf[row * w + col];
        }
        col_fft.process_with_scratch(&mut column, &mut scratch);
        for (row, c) in column.iter().enumerate() {
            buf[row * w + col] = *c;
        }
    }
}

/// Mean `log(1 + |X|)` per integer radius; the DC bin is excluded.
///
/// Entry `r` averages every bin whose centered radius rounds to `r`. Radii
/// without any bins report the floor value `0`.
pub fn radial_profile(spec: &Spectrum) -> Vec<f64> {
    profile_with(spec, |_, _| true)
}

fn profile_with(spec: &Spectrum, keep: impl Fn(i64, i64) -> bool) -> Vec<f64> {
    let (h, w) = (spec.height, spec.width);
    let max_r = (((h / 2).pow(2) + (w / 2).pow(2)) as f64).sqrt().round() as usize;
    let mut sum = vec![0.0; max_r + 1];
    let mut count = vec![0usize; max_r + 1];
    for u in 0..h {
        for v in 0..w {
            if u == 0 && v == 0 {
                continue;
            }
            let (du, dv) = spec.signed_freq(u, v);
            if !keep(du, dv) {
                continue;
            }
            let r = spec.radius(u, v).round() as usize;
            sum[r] += spec.at(u, v).norm().ln_1p();
            count[r] += 1;
        }
    }
    sum.iter()
        .zip(&count)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect()
}

/// Per-image artifact evidence; larger means more pronounced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArtifactScores {
    pub boundary: f64,
    pub ring: f64,
    pub square: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterLabel {
    NoArtifact,
    Boundary,
    FourierRing,
    FourierSquare,
}

impl ClusterLabel {
    pub const ALL: [ClusterLabel; 4] = [
        ClusterLabel::NoArtifact,
        ClusterLabel::Boundary,
        ClusterLabel::FourierRing,
        ClusterLabel::FourierSquare,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ClusterLabel::NoArtifact => "no_artifact",
            ClusterLabel::Boundary => "boundary",
            ClusterLabel::FourierRing => "fourier_ring",
            ClusterLabel::FourierSquare => "fourier_square",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterThresholds {
    pub boundary: f64,
    pub ring: f64,
    pub square: f64,
}

impl Default for ClusterThresholds {
    fn default() -> Self {
        Self {
            boundary: 0.6,
            ring: 34.0,
            square: 16.0,
        }
    }
}

/// Width of the outer band compared against the interior by the boundary score.
pub const FRAME_WIDTH: usize = 8;
/// Half-width of the frequency cross around the DC axes ignored by the Fourier scores.
const DC_CROSS: i64 = 1;
const DETREND_WINDOW: usize = 7;
const PROMINENCE_EPS: f64 = 0.02;
/// Keeps the relative residual finite where the trend approaches zero.
const TREND_FLOOR: f64 = 0.05;

pub fn artifact_scores(img: &RasterImage) -> ArtifactScores {
    let lum = img.luminance();
    let spec = fft2_plane(&lum);
    ArtifactScores {
        boundary: boundary_score(&lum),
        ring: ring_score(&spec),
        square: square_score(&spec),
    }
}

fn boundary_score(lum: &Plane) -> f64 {
    let (w, h) = (lum.width, lum.height);
    let (mut frame, mut frame_n, mut inner, mut inner_n) = (0.0, 0usize, 0.0, 0usize);
    for row in 0..h {
        for col in 0..w {
            let here = lum.at(row, col);
            let gx = if col + 1 < w { lum.at(row, col + 1) - here } else { 0.0 };
            let gy = if row + 1 < h { lum.at(row + 1, col) - here } else { 0.0 };
            let g = gx.hypot(gy);
            let edge = row.min(col).min(h - 1 - row).min(w - 1 - col);
            if edge < FRAME_WIDTH {
                frame += g;
                frame_n += 1;
            } else {
                inner += g;
                inner_n += 1;
            }
        }
    }
    if frame_n == 0 || inner_n == 0 {
        return 0.0;
    }
    let frame = frame / frame_n as f64;
    let inner = inner / inner_n as f64;
    (frame / inner.max(1e-12) - 1.0).max(0.0)
}

fn ring_score(spec: &Spectrum) -> f64 {
    let profile = profile_with(spec, |du, dv| du.abs() > DC_CROSS && dv.abs() > DC_CROSS);
    let r_max = spec.width.min(spec.height) / 2;
    let lo = (DC_CROSS as usize + 1).min(r_max);
    prominence(&profile[lo..r_max.max(lo)])
}

fn square_score(spec: &Spectrum) -> f64 {
    let (h, w) = (spec.height, spec.width);
    let log_mag = |u: usize, v: usize| spec.at(u, v).norm().ln_1p();
    let keep = |d: i64, n: usize| d.abs() > DC_CROSS && d.abs() < (n / 2) as i64;

    // Projections ordered by signed frequency so neighbours stay adjacent.
    let rows: Vec<f64> = ordered(h)
        .filter(|&u| keep(signed(u, h), h))
        .map(|u| {
            (0..w)
                .filter(|&v| signed(v, w).abs() > DC_CROSS)
                .map(|v| log_mag(u, v))
                .fold(0.0, f64::max)
        })
        .collect();
    let cols: Vec<f64> = ordered(w)
        .filter(|&v| keep(signed(v, w), w))
        .map(|v| {
            (0..h)
                .filter(|&u| signed(u, h).abs() > DC_CROSS)
                .map(|u| log_mag(u, v))
                .fold(0.0, f64::max)
        })
        .collect();
    prominence(&rows).max(prominence(&cols))
}

/// Indices `0..n` sorted by their signed frequency.
fn ordered(n: usize) -> impl Iterator<Item = usize> {
    let half = n / 2;
    (half + 1..n).chain(0..=half)
}

/// Peak prominence of a detrended series: `(max - median) / (MAD + eps)`.
///
/// The residual is taken relative to a running median, which removes the
/// smooth 1/f fall-off of natural images and keeps fluctuations on the steep
/// low-frequency end comparable with those on the flat tail.
fn prominence(series: &[f64]) -> f64 {
    if series.len() < 3 {
        return 0.0;
    }
    let trend = running_median(series, DETREND_WINDOW);
    let residual: Vec<f64> = series
        .iter()
        .zip(&trend)
        .map(|(s, t)| (s - t) / (t + TREND_FLOOR))
        .collect();
    let med = median(&residual);
    let mad = median(&residual.iter().map(|r| (r - med).abs()).collect::<Vec<_>>());
    let peak = residual.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    ((peak - med) / (mad + PROMINENCE_EPS)).max(0.0)
}

fn running_median(series: &[f64], window: usize) -> Vec<f64> {
    let half = window / 2;
    (0..series.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(series.len());
            median(&series[lo..hi])
        })
        .collect()
}

pub(crate) fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.total_cmp(b));
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Assigns exactly one cluster; Boundary > FourierRing > FourierSquare > NoArtifact.
pub fn classify_cluster(scores: &ArtifactScores, thresholds: &ClusterThresholds) -> ClusterLabel {
    if scores.boundary > thresholds.boundary {
        ClusterLabel::Boundary
    } else if scores.ring > thresholds.ring {
        ClusterLabel::FourierRing
    } else if scores.square > thresholds.square {
        ClusterLabel::FourierSquare
    } else {
        ClusterLabel::NoArtifact
    }
}

/// Centered log-magnitude spectrum rescaled to a gray image for inspection.
pub fn spectrum_image(img: &RasterImage) -> RasterImage {
    let mut plane = fft2(img).centered_log_magnitude();
    let (lo, hi) = plane
        .data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let span = (hi - lo).max(1e-12);
    for v in &mut plane.data {
        *v = (*v - lo) / span;
    }
    RasterImage::from_gray(&plane).expect("spectrum has the image's dimensions")
}
