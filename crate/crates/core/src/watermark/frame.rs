//! Key-derived perturbation of the outer image border.

use rand::Rng;

use crate::error::Result;
use crate::image::{Plane, RasterImage};
use crate::rng;
use crate::watermark::{Family, WatermarkKey};

/// Width of the perturbed border in pixels.
pub const FRAME: usize = 4;

fn in_frame(row: usize, col: usize, w: usize, h: usize) -> bool {
    row.min(col).min(h - 1 - row).min(w - 1 - col) < FRAME
}

/// ±1 chips on the border, 0 elsewhere.
fn chips(key: &WatermarkKey, w: usize, h: usize) -> Plane {
    let mut rng = rng::stream(key.seed, 4);
    Plane::from_fn(w, h, |r, c| {
        if in_frame(r, c, w, h) {
            if rng.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    })
}

pub fn boundary_embed(cover: &RasterImage, key: &WatermarkKey) -> Result<RasterImage> {
    key.require(Family::BoundaryFrame)?;
    let mut delta = chips(key, cover.width(), cover.height());
    for v in &mut delta.data {
        *v *= key.amplitude;
    }
    cover.add_luminance(&delta)
}

/// Normalized correlation between the frame chips and the luminance detail
/// (luminance minus its 3×3 mean) on the border.
pub fn boundary_detect(img: &RasterImage, key: &WatermarkKey) -> Result<f64> {
    key.require(Family::BoundaryFrame)?;
    let (w, h) = (img.width(), img.height());
    let lum = img.luminance();
    let chips = chips(key, w, h);
    let (mut num, mut e_detail, mut e_chip) = (0.0, 0.0, 0.0);
    for row in 0..h {
        for col in 0..w {
            let p = chips.at(row, col);
            if p == 0.0 {
                continue;
            }
            let (mut s, mut n) = (0.0, 0.0);
            for r in row.saturating_sub(1)..=(row + 1).min(h - 1) {
                for c in col.saturating_sub(1)..=(col + 1).min(w - 1) {
                    s += lum.at(r, c);
                    n += 1.0;
                }
            }
            let detail = lum.at(row, col) - s / n;
            num += p * detail;
            e_detail += detail * detail;
            e_chip += p * p;
        }
    }
    let denom = (e_detail * e_chip).sqrt();
    Ok(if denom == 0.0 { 0.0 } else { num / denom })
}
