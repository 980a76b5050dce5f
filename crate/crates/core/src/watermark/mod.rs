//! Desk-scale watermark families.
//!
//! * [`ss`]: additive spread-spectrum message carrier (the learned-encoder stand-in),
//! * [`fourier`]: phase-keyed Fourier patterns, a ring (tree-ring stand-in) and a
//!   square lattice,
//! * [`frame`]: key-derived border perturbation,
//! * [`dataset`]: paired inverse-message training data.

pub mod dataset;
pub mod fourier;
pub mod frame;
pub mod ss;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub use dataset::{make_paired_dataset, ImagePair, PairedDataset};
pub use fourier::{ring_detect, ring_embed, square_detect, square_embed, FourierPattern};
pub use frame::{boundary_detect, boundary_embed};
pub use ss::{ss_decode, ss_embed, SsCarrier, SsDecoding};

/// Default payload length.
pub const DEFAULT_MESSAGE_BITS: usize = 100;

/// Ordered bit payload. Serialized as `{"bits": n, "hex": "..."}`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "HexMessage", try_from = "HexMessage")]
pub struct BitMessage {
    bits: Vec<bool>,
}

#[derive(Serialize, Deserialize)]
struct HexMessage {
    bits: usize,
    hex: String,
}

impl From<BitMessage> for HexMessage {
    fn from(m: BitMessage) -> Self {
        Self {
            bits: m.len(),
            hex: m.to_hex(),
        }
    }
}

impl TryFrom<HexMessage> for BitMessage {
    type Error = Error;

    fn try_from(h: HexMessage) -> Result<Self> {
        BitMessage::from_hex(&h.hex, Some(h.bits))
    }
}

impl BitMessage {
    pub fn new(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() {
            return Err(Error::Empty("bit message"));
        }
        Ok(Self { bits })
    }

    pub fn random(len: usize, rng: &mut impl Rng) -> Result<Self> {
        Self::new((0..len).map(|_| rng.random::<bool>()).collect())
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Bitwise complement `1 - m`.
    pub fn inverse(&self) -> Self {
        Self {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Fractional Hamming distance in `[0, 1]`.
    pub fn distance(&self, other: &BitMessage) -> Result<f64> {
        if self.len() != other.len() {
            return Err(Error::InvalidArgument(format!(
                "cannot compare messages of {} and {} bits",
                self.len(),
                other.len()
            )));
        }
        let diff = self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count();
        Ok(diff as f64 / self.len() as f64)
    }

    /// Hex nibbles, most significant bit first; the tail is zero-padded.
    pub fn to_hex(&self) -> String {
        self.bits
            .chunks(4)
            .map(|nib| {
                let v = nib
                    .iter()
                    .enumerate()
                    .fold(0u32, |acc, (i, &b)| acc | (u32::from(b) << (3 - i)));
                char::from_digit(v, 16).expect("nibble")
            })
            .collect()
    }

    /// Parses [`BitMessage::to_hex`] output; `bits` truncates the padded tail.
    pub fn from_hex(hex: &str, bits: Option<usize>) -> Result<Self> {
        let hex = hex.trim();
        let mut out = Vec::with_capacity(hex.len() * 4);
        for ch in hex.chars() {
            let v = ch
                .to_digit(16)
                .ok_or_else(|| Error::Message(format!("invalid hex digit {ch:?}")))?;
            out.extend((0..4).rev().map(|i| (v >> i) & 1 == 1));
        }
        if let Some(n) = bits {
            if n > out.len() || out.len() - n >= 4 {
                return Err(Error::Message(format!(
                    "{} hex digits cannot hold exactly {n} bits",
                    hex.len()
                )));
            }
            out.truncate(n);
        }
        Self::new(out)
    }
}

impl fmt::Display for BitMessage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_hex())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    SpreadSpectrum,
    FourierRing,
    BoundaryFrame,
    FourierSquare,
}

impl Family {
    pub fn as_str(self) -> &'static str {
        match self {
            Family::SpreadSpectrum => "spread_spectrum",
            Family::FourierRing => "fourier_ring",
            Family::BoundaryFrame => "boundary_frame",
            Family::FourierSquare => "fourier_square",
        }
    }

    /// Default embedding strength (spatial RMS of the added signal for the
    /// additive families, per-pixel magnitude for the frame).
    pub fn default_amplitude(self) -> f64 {
        match self {
            Family::SpreadSpectrum => 0.012,
            Family::FourierRing => 0.012,
            Family::BoundaryFrame => 0.03,
            Family::FourierSquare => 0.01,
        }
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "spread_spectrum" | "ss" => Ok(Family::SpreadSpectrum),
            "fourier_ring" | "ring" => Ok(Family::FourierRing),
            "boundary_frame" | "boundary" => Ok(Family::BoundaryFrame),
            "fourier_square" | "square" => Ok(Family::FourierSquare),
            other => Err(Error::InvalidArgument(format!("unknown watermark family {other:?}"))),
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

pub const DEFAULT_BAND: [f64; 2] = [0.35, 1.0];
pub const DEFAULT_RADII: [usize; 4] = [8, 12, 16, 20];

/// Secret parameters of one watermark instance. Pattern expansion is a pure
/// function of the key and the image dimensions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WatermarkKey {
    pub seed: u64,
    pub family: Family,
    pub amplitude: f64,
    /// Annulus of the spread-spectrum carrier as fractions of `min(H, W) / 2`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<[f64; 2]>,
    /// Ring radii in frequency bins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radii: Option<Vec<usize>>,
    /// Payload length for the spread-spectrum family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_bits: Option<usize>,
}

impl WatermarkKey {
    pub fn new(family: Family, seed: u64) -> Self {
        Self {
            seed,
            family,
            amplitude: family.default_amplitude(),
            band: None,
            radii: None,
            message_bits: None,
        }
    }

    pub fn spread_spectrum(seed: u64) -> Self {
        Self::new(Family::SpreadSpectrum, seed)
    }

    pub fn fourier_ring(seed: u64) -> Self {
        Self::new(Family::FourierRing, seed)
    }

    pub fn boundary_frame(seed: u64) -> Self {
        Self::new(Family::BoundaryFrame, seed)
    }

    pub fn fourier_square(seed: u64) -> Self {
        Self::new(Family::FourierSquare, seed)
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn band(&self) -> [f64; 2] {
        self.band.unwrap_or(DEFAULT_BAND)
    }

    pub fn radii(&self) -> Vec<usize> {
        self.radii.clone().unwrap_or_else(|| DEFAULT_RADII.to_vec())
    }

    pub fn message_bits(&self) -> usize {
        self.message_bits.unwrap_or(DEFAULT_MESSAGE_BITS)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.amplitude.is_finite() || self.amplitude < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "amplitude must be finite and non-negative, got {}",
                self.amplitude
            )));
        }
        let [lo, hi] = self.band();
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.5).contains(&hi) || lo >= hi {
            return Err(Error::InvalidArgument(format!("invalid band [{lo}, {hi}]")));
        }
        if self.radii.as_ref().is_some_and(|r| r.is_empty()) {
            return Err(Error::Empty("ring radii"));
        }
        if self.message_bits == Some(0) {
            return Err(Error::Empty("message"));
        }
        Ok(())
    }

    pub(crate) fn require(&self, family: Family) -> Result<()> {
        if self.family != family {
            return Err(Error::WrongFamily {
                expected: family.as_str(),
                actual: self.family.as_str(),
            });
        }
        self.validate()
    }

    /// Short stable digest of the key's canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_vec(self).expect("key serializes");
        let digest = Sha256::digest(&json);
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let key: Self = serde_json::from_slice(&std::fs::read(path)?)?;
        key.validate()?;
        Ok(key)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn inverse_flips_every_bit() {
        let m = BitMessage::new(vec![true, false, false, true, true]).unwrap();
        let inv = m.inverse();
        assert!(m.bits().iter().zip(inv.bits()).all(|(a, b)| a != b));
        assert_eq!(m.distance(&inv).unwrap(), 1.0);
        assert_eq!(m.distance(&m).unwrap(), 0.0);
    }

    #[test]
    fn empty_message_rejected() {
        assert!(BitMessage::new(vec![]).is_err());
    }

    #[test]
    fn hex_format() {
        let m = BitMessage::new(vec![true, false, true, false, true]).unwrap();
        assert_eq!(m.to_hex(), "a8");
        assert_eq!(BitMessage::from_hex("a8", Some(5)).unwrap(), m);
        assert!(BitMessage::from_hex("a8", Some(12)).is_err());
        assert!(BitMessage::from_hex("zz", None).is_err());
    }

    #[test]
    fn key_json_round_trip() {
        let key = WatermarkKey::fourier_ring(9);
        let json = serde_json::to_string(&key).unwrap();
        assert_eq!(json, r#"{"seed":9,"family":"fourier_ring","amplitude":0.012}"#);
        let back: WatermarkKey = serde_json::from_str(&json).unwrap();
        assert_eq!(back, key);
        let parsed: WatermarkKey = serde_json::from_str(
            r#"{"seed":1,"family":"spread_spectrum","amplitude":0.02,"band":[0.2,0.9]}"#,
        )
        .unwrap();
        assert_eq!(parsed.band(), [0.2, 0.9]);
    }

    #[test]
    fn key_validation() {
        assert!(WatermarkKey::spread_spectrum(1).with_amplitude(-1.0).validate().is_err());
        let mut k = WatermarkKey::spread_spectrum(1);
        k.band = Some([0.8, 0.2]);
        assert!(k.validate().is_err());
    }

    proptest! {
        #[test]
        fn hex_round_trip(bits in proptest::collection::vec(any::<bool>(), 1..160)) {
            let m = BitMessage::new(bits.clone()).unwrap();
            let back = BitMessage::from_hex(&m.to_hex(), Some(bits.len())).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
