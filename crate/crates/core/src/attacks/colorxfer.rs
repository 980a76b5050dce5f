//! CIELAB color/contrast transfer: keep the structure (L) of the optimized
//! image, take chroma from the watermarked image and match L's first two
//! moments to the watermarked image.

use crate::color::{lab_to_srgb, srgb_to_lab};
use crate::error::Result;
use crate::image::{ChannelStats, LabImage, RasterImage};

/// Below this L standard deviation the contrast step is skipped.
pub const MIN_CONTRAST_STD: f64 = 1e-6;

#[derive(Clone, Debug)]
pub struct ColorTransfer {
    pub image: RasterImage,
    /// L channel before conversion back to sRGB.
    pub l_final: Vec<f64>,
    /// Set when the source L was flat and only its mean could be kept.
    pub contrast_skipped: bool,
}

pub fn color_contrast_transfer(x_opt: &RasterImage, x_w: &RasterImage) -> Result<ColorTransfer> {
    x_opt.same_dims(x_w)?;
    let opt = srgb_to_lab(x_opt);
    let target = srgb_to_lab(x_w);
    let sw = ChannelStats::of(&target.l);
    let sc = ChannelStats::of(&opt.l);
    let contrast_skipped = sc.std <= MIN_CONTRAST_STD;
    let l_final: Vec<f64> = if contrast_skipped {
        log::warn!("flat luminance (std {:.3e}); contrast transfer skipped", sc.std);
        opt.l.clone()
    } else {
        let scale = sw.std / sc.std;
        opt.l.iter().map(|l| scale * (l - sc.mean) + sw.mean).collect()
    };
    let lab = LabImage {
        width: target.width,
        height: target.height,
        l: l_final.clone(),
        a: target.a,
        b: target.b,
    };
    Ok(ColorTransfer {
        image: lab_to_srgb(&lab),
        l_final,
        contrast_skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::corpus::gen_corpus;

    #[test]
    fn self_transfer_is_identity() {
        let x = &gen_corpus(1, 32, 3)[0];
        let out = color_contrast_transfer(x, x).unwrap();
        assert!(!out.contrast_skipped);
        for (a, b) in out.image.data().iter().zip(x.data()) {
            assert!((a - b).abs() <= 1.0 / 255.0);
        }
    }

    #[test]
    fn moments_match_target() {
        let c = gen_corpus(2, 32, 5);
        let out = color_contrast_transfer(&c[0], &c[1]).unwrap();
        let got = ChannelStats::of(&out.l_final);
        let want = ChannelStats::of(&srgb_to_lab(&c[1]).l);
        assert!((got.mean - want.mean).abs() < 1e-4);
        assert!((got.std - want.std).abs() < 1e-4);
    }

    #[test]
    fn flat_source_skips_contrast() {
        let flat = RasterImage::filled(32, 32, [0.4; 3]).unwrap();
        let x_w = &gen_corpus(1, 32, 5)[0];
        let out = color_contrast_transfer(&flat, x_w).unwrap();
        assert!(out.contrast_skipped);
        assert!(out.l_final.iter().all(|&l| (l - out.l_final[0]).abs() < 1e-9));
    }
}
