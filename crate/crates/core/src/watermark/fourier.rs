//! Phase-keyed Fourier-domain watermarks.
//!
//! A pattern is a set of luminance DFT bins carrying unit-magnitude complex
//! values with key-derived random phases, mirrored so the spatial signal stays
//! real. Embedding adds the pattern scaled to the requested spatial RMS;
//! detection is the normalized complex correlation
//! `ρ = Re⟨X, P⟩ / (‖X‖ ‖P‖)` over the pattern's bins, which is phase sensitive:
//! a spatial shift rotates each bin's phase and decorrelates it.

use std::f64::consts::TAU;

use rand::Rng;
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::RasterImage;
use crate::rng;
use crate::spectral::{fft2, ifft2_plane, Spectrum};
use crate::watermark::{Family, WatermarkKey};

/// Lattice half-extent (bins at `i · spacing` for `0 < |i| <= LATTICE_K`).
pub const LATTICE_K: i64 = 3;

#[derive(Clone, Debug)]
pub struct FourierPattern {
    width: usize,
    height: usize,
    /// `(bin index, unit phasor)` for every bin, mirrors included.
    bins: Vec<(usize, Complex64)>,
}

impl FourierPattern {
    /// Ring pattern on every bin whose centered radius rounds into `key.radii()`.
    pub fn ring(key: &WatermarkKey, width: usize, height: usize) -> Result<Self> {
        key.require(Family::FourierRing)?;
        let radii = key.radii();
        let limit = width.min(height) / 2;
        if let Some(&bad) = radii.iter().find(|&&r| r == 0 || r >= limit) {
            return Err(Error::InvalidArgument(format!(
                "ring radius {bad} must lie in 1..{limit} for a {width}x{height} image"
            )));
        }
        let probe = Spectrum::zeros(width, height);
        Ok(Self::build(key.seed, width, height, |u, v| {
            let r = probe.radius(u, v).round() as usize;
            radii.contains(&r)
        }))
    }

    /// Square lattice of isolated peaks at `(i·p, j·p)`, `p = min(H, W) / 8`,
    /// both offsets non-zero.
    pub fn lattice(key: &WatermarkKey, width: usize, height: usize) -> Result<Self> {
        key.require(Family::FourierSquare)?;
        let p = lattice_spacing(width, height);
        let probe = Spectrum::zeros(width, height);
        Ok(Self::build(key.seed, width, height, |u, v| {
            let (du, dv) = probe.signed_freq(u, v);
            du != 0
                && dv != 0
                && du % p == 0
                && dv % p == 0
                && (du / p).abs() <= LATTICE_K
                && (dv / p).abs() <= LATTICE_K
        }))
    }

    fn build(
        seed: u64,
        width: usize,
        height: usize,
        select: impl Fn(usize, usize) -> bool,
    ) -> Self {
        let probe = Spectrum::zeros(width, height);
        let mut rng = rng::stream(seed, 3);
        let mut bins = Vec::new();
        for u in 0..height {
            for v in 0..width {
                let idx = u * width + v;
                let (mu, mv) = probe.mirror(u, v);
                let mirror = mu * width + mv;
                // Visit each conjugate pair once; self-conjugate bins are skipped.
                if mirror <= idx || !select(u, v) {
                    continue;
                }
                let phase = Complex64::from_polar(1.0, rng.random::<f64>() * TAU);
                bins.push((idx, phase));
                bins.push((mirror, phase.conj()));
            }
        }
        Self {
            width,
            height,
            bins,
        }
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn contains(&self, idx: usize) -> bool {
        self.bins.iter().any(|&(i, _)| i == idx)
    }

    /// Adds the pattern to the luminance with spatial RMS `amplitude`, then clamps.
    pub fn embed(&self, cover: &RasterImage, amplitude: f64) -> Result<RasterImage> {
        self.check_dims(cover)?;
        if self.bins.is_empty() || amplitude == 0.0 {
            return Ok(cover.clone());
        }
        let n = (self.width * self.height) as f64;
        // Parseval: rms^2 = Σ|P|^2 / N^2 with |P| = c on every bin.
        let c = amplitude * n / (self.bins.len() as f64).sqrt();
        let mut spec = Spectrum::zeros(self.width, self.height);
        for &(idx, phasor) in &self.bins {
            spec.coeffs[idx] = phasor * c;
        }
        cover.add_luminance(&ifft2_plane(&spec))
    }

    /// Normalized complex correlation in `[-1, 1]`; zero if either side is empty.
    pub fn correlate(&self, img: &RasterImage) -> Result<f64> {
        self.check_dims(img)?;
        let spec = fft2(img);
        let (mut num, mut energy) = (0.0, 0.0);
        for &(idx, phasor) in &self.bins {
            let x = spec.coeffs[idx];
            num += (phasor.conj() * x).re;
            energy += x.norm_sqr();
        }
        let denom = energy.sqrt() * (self.bins.len() as f64).sqrt();
        if denom == 0.0 {
            return Ok(0.0);
        }
        Ok((num / denom).clamp(-1.0, 1.0))
    }

    fn check_dims(&self, img: &RasterImage) -> Result<()> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::mismatch(self.width, self.height, img.width(), img.height()));
        }
        Ok(())
    }
}

pub fn lattice_spacing(width: usize, height: usize) -> i64 {
    (width.min(height) / 8).max(1) as i64
}

pub fn ring_embed(cover: &RasterImage, key: &WatermarkKey) -> Result<RasterImage> {
    FourierPattern::ring(key, cover.width(), cover.height())?.embed(cover, key.amplitude)
}

/// Ring statistic ρ; the thresholding distance is `1 - ρ`.
pub fn ring_detect(img: &RasterImage, key: &WatermarkKey) -> Result<f64> {
    FourierPattern::ring(key, img.width(), img.height())?.correlate(img)
}

pub fn square_embed(cover: &RasterImage, key: &WatermarkKey) -> Result<RasterImage> {
    FourierPattern::lattice(key, cover.width(), cover.height())?.embed(cover, key.amplitude)
}

pub fn square_detect(img: &RasterImage, key: &WatermarkKey) -> Result<f64> {
    FourierPattern::lattice(key, img.width(), img.height())?.correlate(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::corpus::gen_corpus;
    use crate::spectral::fft2_plane;

    #[test]
    fn zero_amplitude_is_identity() {
        let cover = &gen_corpus(1, 64, 1)[0];
        let key = WatermarkKey::fourier_ring(4).with_amplitude(0.0);
        assert_eq!(&ring_embed(cover, &key).unwrap(), cover);
        let key = WatermarkKey::fourier_square(4).with_amplitude(0.0);
        assert_eq!(&square_embed(cover, &key).unwrap(), cover);
    }

    #[test]
    fn radius_limit() {
        let cover = &gen_corpus(1, 64, 1)[0];
        let mut key = WatermarkKey::fourier_ring(4);
        key.radii = Some(vec![8, 32]);
        assert!(ring_embed(cover, &key).is_err());
        key.radii = Some(vec![8, 31]);
        assert!(ring_embed(cover, &key).is_ok());
    }

    #[test]
    fn residual_is_confined_to_ring() {
        let cover = &gen_corpus(1, 128, 5)[0];
        let key = WatermarkKey::fourier_ring(6);
        let marked = ring_embed(cover, &key).unwrap();
        let pattern = FourierPattern::ring(&key, 128, 128).unwrap();
        let (a, b) = (marked.luminance(), cover.luminance());
        let mut resid = a.clone();
        for (r, v) in resid.data.iter_mut().zip(&b.data) {
            *r -= v;
        }
        let spec = fft2_plane(&resid);
        let total: f64 = spec.coeffs.iter().map(|c| c.norm_sqr()).sum();
        let on_ring: f64 = spec
            .coeffs
            .iter()
            .enumerate()
            .filter(|(i, _)| pattern.contains(*i))
            .map(|(_, c)| c.norm_sqr())
            .sum();
        assert!(on_ring / total >= 0.99, "{}", on_ring / total);
    }

    #[test]
    fn strong_pattern_correlates_fully() {
        let cover = &gen_corpus(1, 128, 2)[0];
        let key = WatermarkKey::fourier_ring(8);
        let pattern = FourierPattern::ring(&key, 128, 128).unwrap();
        // Correlate against the bare pattern, free of clamping.
        let flat = RasterImage::filled(128, 128, [0.5; 3]).unwrap();
        let marked = pattern.embed(&flat, 0.05).unwrap();
        assert!(pattern.correlate(&marked).unwrap() > 0.999);
        let weak = ring_detect(cover, &key).unwrap();
        assert!(weak.abs() < 0.3);
    }
}
