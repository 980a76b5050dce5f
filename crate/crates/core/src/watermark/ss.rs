//! Spread-spectrum message carrier.
//!
//! The luminance plane is tiled into 8×8 blocks and every block is owned by one
//! message bit (key-derived assignment, all blocks used). Inside a block the
//! carrier is a balanced ±1 pattern: the sign of a key-derived band-passed noise
//! field, split at the block median so each block sums to exactly zero. Bit `i`
//! is written as `s_i · amplitude · P_i` with `s_i = ±1` and read back from the
//! sign of the correlation with `P_i`.

use rand::seq::SliceRandom;
use rand_distr::{Distribution, StandardNormal};
use rustfft::num_complex::Complex64;

use crate::error::{Error, Result};
use crate::image::{Plane, RasterImage};
use crate::rng;
use crate::spectral::{fft2_plane, ifft2_plane};
use crate::watermark::{BitMessage, Family, WatermarkKey};

pub const BLOCK: usize = 8;
pub const MIN_SIDE: usize = 64;

const NO_OWNER: u32 = u32::MAX;

/// Expanded carrier for one key, image size and payload length.
#[derive(Clone, Debug)]
pub struct SsCarrier {
    width: usize,
    height: usize,
    bits: usize,
    amplitude: f64,
    /// ±1 chip per pixel; 0 outside the block grid.
    chip: Vec<i8>,
    /// Owning bit per pixel, `NO_OWNER` outside the block grid.
    owner: Vec<u32>,
}

/// Hard decisions plus per-bit mean correlations.
#[derive(Clone, Debug, PartialEq)]
pub struct SsDecoding {
    pub message: BitMessage,
    pub correlations: Vec<f64>,
}

impl SsDecoding {
    pub fn distance(&self, reference: &BitMessage) -> Result<f64> {
        self.message.distance(reference)
    }
}

/// Number of bits a `width × height` image can carry.
pub fn capacity(width: usize, height: usize) -> usize {
    (width / BLOCK) * (height / BLOCK)
}

impl SsCarrier {
    pub fn expand(key: &WatermarkKey, width: usize, height: usize) -> Result<Self> {
        key.require(Family::SpreadSpectrum)?;
        if width < MIN_SIDE || height < MIN_SIDE {
            return Err(Error::TooSmall {
                width,
                height,
                min: MIN_SIDE,
            });
        }
        let bits = key.message_bits();
        let cap = capacity(width, height);
        if bits > cap {
            return Err(Error::CapacityExceeded {
                bits,
                capacity: cap,
            });
        }

        let field = band_limited_field(key, width, height);
        let (bw, bh) = (width / BLOCK, height / BLOCK);
        let mut order: Vec<usize> = (0..bw * bh).collect();
        order.shuffle(&mut rng::stream(key.seed, 2));

        let mut chip = vec![0i8; width * height];
        let mut owner = vec![NO_OWNER; width * height];
        let mut idx: Vec<usize> = Vec::with_capacity(BLOCK * BLOCK);
        for (slot, &block) in order.iter().enumerate() {
            let bit = (slot % bits) as u32;
            let (br, bc) = (block / bw, block % bw);
            idx.clear();
            for r in 0..BLOCK {
                for c in 0..BLOCK {
                    idx.push((br * BLOCK + r) * width + bc * BLOCK + c);
                }
            }
            idx.sort_by(|&a, &b| field.data[a].total_cmp(&field.data[b]).then(a.cmp(&b)));
            let half = idx.len() / 2;
            for (rank, &p) in idx.iter().enumerate() {
                chip[p] = if rank < half { -1 } else { 1 };
                owner[p] = bit;
            }
        }
        Ok(Self {
            width,
            height,
            bits,
            amplitude: key.amplitude,
            chip,
            owner,
        })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    /// Chip pattern `P_i` of one bit as a dense plane (zero off its support).
    pub fn pattern(&self, bit: usize) -> Plane {
        let mut p = Plane::zeros(self.width, self.height);
        for (i, (&o, &c)) in self.owner.iter().zip(&self.chip).enumerate() {
            if o as usize == bit {
                p.data[i] = f64::from(c);
            }
        }
        p
    }

    pub fn embed(&self, cover: &RasterImage, msg: &BitMessage) -> Result<RasterImage> {
        self.check_dims(cover)?;
        if msg.len() != self.bits {
            return Err(Error::InvalidArgument(format!(
                "key expects {} message bits, got {}",
                self.bits,
                msg.len()
            )));
        }
        let d = self.amplitude;
        let mut data = cover.data().to_vec();
        for (p, px) in data.chunks_exact_mut(3).enumerate() {
            let o = self.owner[p];
            if o == NO_OWNER {
                continue;
            }
            let s = if msg.bits()[o as usize] { 1 } else { -1 };
            let up = s * self.chip[p] > 0;
            for v in px.iter_mut() {
                // The negative branch mirrors about the cover value, so the
                // m / (1 - m) pair averages back to the cover exactly.
                let hi = *v + d;
                *v = if up { hi } else { 2.0 * *v - hi };
                *v = v.clamp(0.0, 1.0);
            }
        }
        Ok(RasterImage::from_raw_unchecked(self.width, self.height, data))
    }

    pub fn decode(&self, img: &RasterImage) -> Result<SsDecoding> {
        self.check_dims(img)?;
        let lum = img.luminance();
        let mut acc = vec![0.0; self.bits];
        let mut count = vec![0usize; self.bits];
        for (p, &y) in lum.data.iter().enumerate() {
            let o = self.owner[p];
            if o == NO_OWNER {
                continue;
            }
            acc[o as usize] += f64::from(self.chip[p]) * y;
            count[o as usize] += 1;
        }
        let correlations: Vec<f64> = acc
            .iter()
            .zip(&count)
            .map(|(a, &n)| a / n.max(1) as f64)
            .collect();
        let message = BitMessage::new(correlations.iter().map(|&c| c > 0.0).collect())?;
        Ok(SsDecoding {
            message,
            correlations,
        })
    }

    fn check_dims(&self, img: &RasterImage) -> Result<()> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::mismatch(self.width, self.height, img.width(), img.height()));
        }
        Ok(())
    }
}

/// Key-derived Gaussian noise restricted to the carrier's frequency annulus.
fn band_limited_field(key: &WatermarkKey, width: usize, height: usize) -> Plane {
    let mut rng = rng::stream(key.seed, 1);
    let noise = Plane::from_fn(width, height, |_, _| StandardNormal.sample(&mut rng));
    let mut spec = fft2_plane(&noise);
    let [lo, hi] = key.band();
    let nyquist = width.min(height) as f64 / 2.0;
    let (lo, hi) = (lo * nyquist, hi * nyquist);
    for u in 0..height {
        for v in 0..width {
            let r = spec.radius(u, v);
            if r < lo || r > hi {
                spec.coeffs[u * width + v] = Complex64::new(0.0, 0.0);
            }
        }
    }
    ifft2_plane(&spec)
}

pub fn ss_embed(cover: &RasterImage, key: &WatermarkKey, msg: &BitMessage) -> Result<RasterImage> {
    let mut key = key.clone();
    key.message_bits = Some(msg.len());
    SsCarrier::expand(&key, cover.width(), cover.height())?.embed(cover, msg)
}

pub fn ss_decode(img: &RasterImage, key: &WatermarkKey) -> Result<SsDecoding> {
    SsCarrier::expand(key, img.width(), img.height())?.decode(img)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::corpus::gen_corpus;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn patterns_are_balanced_and_disjoint() {
        let key = WatermarkKey::spread_spectrum(5);
        let carrier = SsCarrier::expand(&key, 128, 128).unwrap();
        let mut covered = vec![0usize; 128 * 128];
        for bit in 0..carrier.bits() {
            let p = carrier.pattern(bit);
            let sum: f64 = p.data.iter().sum();
            assert_eq!(sum, 0.0);
            for (i, v) in p.data.iter().enumerate() {
                if *v != 0.0 {
                    covered[i] += 1;
                    assert!(v.abs() == 1.0);
                }
            }
        }
        assert!(covered.iter().all(|&c| c == 1));
    }

    #[test]
    fn zero_amplitude_is_identity() {
        let cover = &gen_corpus(1, 128, 3)[0];
        let key = WatermarkKey::spread_spectrum(1).with_amplitude(0.0);
        let msg = BitMessage::random(100, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert_eq!(&ss_embed(cover, &key, &msg).unwrap(), cover);
    }

    #[test]
    fn capacity_and_size_limits() {
        let cover = &gen_corpus(1, 64, 3)[0];
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let key = WatermarkKey::spread_spectrum(1);
        let too_long = BitMessage::random(65, &mut rng).unwrap();
        assert!(matches!(
            ss_embed(cover, &key, &too_long),
            Err(Error::CapacityExceeded { bits: 65, capacity: 64 })
        ));
        let small = RasterImage::filled(32, 32, [0.5; 3]).unwrap();
        let msg = BitMessage::random(8, &mut rng).unwrap();
        assert!(matches!(ss_embed(&small, &key, &msg), Err(Error::TooSmall { .. })));
        let ring = WatermarkKey::fourier_ring(1);
        assert!(matches!(ss_embed(cover, &ring, &msg), Err(Error::WrongFamily { .. })));
    }

    #[test]
    fn pair_cancels_exactly() {
        let covers = gen_corpus(4, 128, 8);
        let key = WatermarkKey::spread_spectrum(77);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for cover in &covers {
            let m = BitMessage::random(100, &mut rng).unwrap();
            let a = ss_embed(cover, &key, &m).unwrap();
            let b = ss_embed(cover, &key, &m.inverse()).unwrap();
            for ((x, y), c) in a.data().iter().zip(b.data()).zip(cover.data()) {
                assert_eq!((x + y) / 2.0, *c);
            }
        }
    }

    #[test]
    fn round_trip_and_wrong_key() {
        let covers = gen_corpus(6, 128, 21);
        let key = WatermarkKey::spread_spectrum(3);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for (i, cover) in covers.iter().enumerate() {
            let m = BitMessage::random(100, &mut rng).unwrap();
            let marked = ss_embed(cover, &key, &m).unwrap();
            assert_eq!(ss_decode(&marked, &key).unwrap().distance(&m).unwrap(), 0.0);
            let wrong = key.clone().with_seed(1000 + i as u64);
            let d = ss_decode(&marked, &wrong).unwrap().distance(&m).unwrap();
            assert!((0.25..=0.75).contains(&d), "wrong-key distance {d}");
        }
    }
}
