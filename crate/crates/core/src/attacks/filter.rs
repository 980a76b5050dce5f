//! Per-frequency linear removal filter learned from paired watermarked images.
//!
//! For every luminance DFT bin `k` the gain minimizes
//! `Σ_pairs |H·Xw[k] − Xi[k]|² + λ|H − 1|²`, which has the closed form
//! `H = (Σ conj(Xw)·Xi + λ) / (Σ |Xw|² + λ)`. The ridge pulls gains toward
//! identity, so frequencies the watermark never touches pass through.

use rustfft::num_complex::Complex64;
use crate::error::{Error, Result};
use crate::image::RasterImage;
use crate::spectral::{fft2, ifft2_plane, Spectrum};
use crate::watermark::PairedDataset;

#[derive(Clone, Debug, PartialEq)]
pub struct SpectralFilter {
    pub width: usize,
    pub height: usize,
    /// Gains in [`Spectrum`] layout.
    pub gains: Vec<Complex64>,
    pub ridge: f64,
    /// Fingerprint of the key the training pairs were embedded with.
    pub key_fingerprint: String,
}

impl SpectralFilter {
    /// Pass-through filter.
    pub fn identity(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            gains: vec![Complex64::new(1.0, 0.0); width * height],
            ridge: 0.0,
            key_fingerprint: String::new(),
        }
    }

    pub fn gain(&self, u: usize, v: usize) -> Complex64 {
        self.gains[u * self.width + v]
    }
}

/// Maps each watermarked image toward its inverse-message twin.
pub fn train_spectral_filter(pairs: &PairedDataset, ridge: f64) -> Result<SpectralFilter> {
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(Error::InvalidArgument(format!("ridge must be finite and >= 0, got {ridge}")));
    }
    let first = pairs.pairs.first().ok_or(Error::Empty("paired dataset"))?;
    let (w, h) = (first.watermarked.width(), first.watermarked.height());
    let mut num = vec![Complex64::new(0.0, 0.0); w * h];
    let mut den = vec![0.0; w * h];
    for pair in &pairs.pairs {
        pair.watermarked.same_dims(&first.watermarked)?;
        pair.inverse.same_dims(&first.watermarked)?;
        let xw = fft2(&pair.watermarked);
        let xi = fft2(&pair.inverse);
        for k in 0..w * h {
            num[k] += xw.coeffs[k].conj() * xi.coeffs[k];
            den[k] += xw.coeffs[k].norm_sqr();
        }
    }
    let gains = num
        .iter()
        .zip(&den)
        .map(|(&n, &d)| {
            let d = d + ridge;
            if d == 0.0 {
                Complex64::new(1.0, 0.0)
            } else {
                (n + ridge) / d
            }
        })
        .collect();
    Ok(SpectralFilter {
        width: w,
        height: h,
        gains,
        ridge,
        key_fingerprint: pairs.key.fingerprint(),
    })
}

/// Filters the luminance, leaves chroma unchanged and clamps.
pub fn apply_spectral_filter(img: &RasterImage, filter: &SpectralFilter) -> Result<RasterImage> {
    if img.width() != filter.width || img.height() != filter.height {
        return Err(Error::mismatch(filter.width, filter.height, img.width(), img.height()));
    }
    let spec = fft2(img);
    let filtered = Spectrum {
        width: spec.width,
        height: spec.height,
        coeffs: spec.coeffs.iter().zip(&filter.gains).map(|(x, g)| x * g).collect(),
    };
    img.with_luminance(&ifft2_plane(&filtered))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::corpus::gen_corpus;
    use crate::watermark::{make_paired_dataset, ImagePair, WatermarkKey};

    fn dataset(n: usize) -> PairedDataset {
        let covers = gen_corpus(n, 64, 4);
        let mut key = WatermarkKey::spread_spectrum(3);
        key.message_bits = Some(32);
        make_paired_dataset(&covers, &key, n, 1).unwrap()
    }

    #[test]
    fn identical_pairs_give_identity() {
        let mut ds = dataset(3);
        for p in &mut ds.pairs {
            p.inverse = p.watermarked.clone();
        }
        let f = train_spectral_filter(&ds, 0.0).unwrap();
        for g in &f.gains {
            assert!((g - Complex64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let img = &ds.pairs[0].watermarked;
        let out = apply_spectral_filter(img, &f).unwrap();
        for (a, b) in out.data().iter().zip(img.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn huge_ridge_approaches_identity() {
        let f = train_spectral_filter(&dataset(2), 1e30).unwrap();
        for g in &f.gains {
            assert!((g - Complex64::new(1.0, 0.0)).norm() < 1e-6);
        }
    }

    #[test]
    fn identity_filter_is_idempotent() {
        let img = &gen_corpus(1, 32, 8)[0];
        let f = SpectralFilter::identity(32, 32);
        let once = apply_spectral_filter(img, &f).unwrap();
        let twice = apply_spectral_filter(&once, &f).unwrap();
        for (a, b) in once.data().iter().zip(twice.data()) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn errors() {
        let mut ds = dataset(1);
        assert!(train_spectral_filter(&ds, -1.0).is_err());
        let f = train_spectral_filter(&ds, 0.0).unwrap();
        assert_eq!(f.key_fingerprint, ds.key.fingerprint());
        assert!(apply_spectral_filter(&gen_corpus(1, 32, 1)[0], &f).is_err());
        let other = gen_corpus(1, 32, 1).remove(0);
        ds.pairs.push(ImagePair {
            watermarked: other.clone(),
            inverse: other,
            message: ds.pairs[0].message.clone(),
        });
        assert!(train_spectral_filter(&ds, 0.0).is_err());
        ds.pairs.clear();
        assert!(matches!(train_spectral_filter(&ds, 0.0), Err(Error::Empty(_))));
    }
}
