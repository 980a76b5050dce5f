//! Paired inverse-message training data for the learned removal filter.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::RasterImage;
use crate::rng;
use crate::watermark::{BitMessage, Family, SsCarrier, WatermarkKey};

/// Same cover carrying `message` and its complement.
#[derive(Clone, Debug)]
pub struct ImagePair {
    pub watermarked: RasterImage,
    pub inverse: RasterImage,
    pub message: BitMessage,
}

#[derive(Clone, Debug)]
pub struct PairedDataset {
    pub key: WatermarkKey,
    pub pairs: Vec<ImagePair>,
}

impl PairedDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }
}

/// Default dataset size.
pub const DEFAULT_PAIRS: usize = 1000;

/// Embeds a fresh random message and its inverse into each of the first `n` covers.
///
/// Messages come from one stream seeded by `seed`, so the dataset is a pure
/// function of `(covers, key, n, seed)`.
pub fn make_paired_dataset(
    covers: &[RasterImage],
    key: &WatermarkKey,
    n: usize,
    seed: u64,
) -> Result<PairedDataset> {
    key.require(Family::SpreadSpectrum)?;
    if covers.is_empty() {
        return Err(Error::Empty("cover list"));
    }
    if n == 0 || n > covers.len() {
        return Err(Error::InvalidArgument(format!(
            "requested {n} pairs from {} covers",
            covers.len()
        )));
    }
    let mut rng = rng::stream(seed, 5);
    let messages = (0..n)
        .map(|_| BitMessage::random(key.message_bits(), &mut rng))
        .collect::<Result<Vec<_>>>()?;
    let (w, h) = (covers[0].width(), covers[0].height());
    let carrier = SsCarrier::expand(key, w, h)?;
    let pairs = covers[..n]
        .par_iter()
        .zip(messages)
        .map(|(cover, message)| {
            Ok(ImagePair {
                watermarked: carrier.embed(cover, &message)?,
                inverse: carrier.embed(cover, &message.inverse())?,
                message,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(PairedDataset {
        key: key.clone(),
        pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::corpus::gen_corpus;

    #[test]
    fn single_pair_averages_to_cover() {
        let covers = gen_corpus(1, 64, 3);
        let key = WatermarkKey::spread_spectrum(1);
        let mut key64 = key.clone();
        key64.message_bits = Some(64);
        let ds = make_paired_dataset(&covers, &key64, 1, 9).unwrap();
        let p = &ds.pairs[0];
        for ((a, b), c) in p.watermarked.data().iter().zip(p.inverse.data()).zip(covers[0].data()) {
            assert_eq!((a + b) / 2.0, *c);
        }
    }

    #[test]
    fn deterministic() {
        let covers = gen_corpus(3, 128, 3);
        let key = WatermarkKey::spread_spectrum(1);
        let a = make_paired_dataset(&covers, &key, 3, 42).unwrap();
        let b = make_paired_dataset(&covers, &key, 3, 42).unwrap();
        for (x, y) in a.pairs.iter().zip(&b.pairs) {
            assert_eq!(x.watermarked.to_rgb8().as_raw(), y.watermarked.to_rgb8().as_raw());
            assert_eq!(x.watermarked, y.watermarked);
            assert_eq!(x.message, y.message);
        }
    }

    #[test]
    fn errors() {
        let key = WatermarkKey::spread_spectrum(1);
        assert!(matches!(make_paired_dataset(&[], &key, 1, 0), Err(Error::Empty(_))));
        let covers = gen_corpus(2, 128, 3);
        assert!(make_paired_dataset(&covers, &key, 3, 0).is_err());
        assert!(make_paired_dataset(&covers, &WatermarkKey::fourier_ring(1), 1, 0).is_err());
    }
}
