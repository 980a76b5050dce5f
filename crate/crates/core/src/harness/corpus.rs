//! Procedural cover images.
//!
//! Each cover mixes a smooth two-color gradient, value-noise octaves, Gaussian
//! blobs and soft-edged shapes. Values are mapped into `[HEADROOM, 1 - HEADROOM]`
//! so additive watermarks at default strength never clip.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::image::RasterImage;
use crate::rng;

/// Distance kept from 0 and 1 by every generated pixel.
pub const HEADROOM: f64 = 0.04;
/// Width in pixels of the smoothstep transition at shape edges.
const EDGE_SOFTNESS: f64 = 12.0;
/// Minimum mean-level difference between the two gradient end colors.
const MIN_GRADIENT_CONTRAST: f64 = 0.25;

/// `n` deterministic `size × size` covers; image `i` uses its own stream of `seed`.
pub fn gen_corpus(n: usize, size: usize, seed: u64) -> Vec<RasterImage> {
    gen_range(0..n, size, seed)
}

/// Covers with indices in `range`, identical to the matching slice of [`gen_corpus`].
pub fn gen_range(range: std::ops::Range<usize>, size: usize, seed: u64) -> Vec<RasterImage> {
    range
        .into_par_iter()
        .map(|i| gen_cover(size, seed, i as u64))
        .collect()
}

pub fn gen_cover(size: usize, seed: u64, index: u64) -> RasterImage {
    let mut rng = rng::stream(seed, index);
    let s = size as f64;
    let mut img = vec![[0.0f64; 3]; size * size];

    // Gradient between two random colors along a random direction.
    let c0 = random_color(&mut rng, 0.15, 0.85);
    let mut c1 = random_color(&mut rng, 0.15, 0.85);
    while (mean(c1) - mean(c0)).abs() < MIN_GRADIENT_CONTRAST {
        c1 = random_color(&mut rng, 0.15, 0.85);
    }
    let theta = rng.random::<f64>() * std::f64::consts::TAU;
    let (dx, dy) = (theta.cos(), theta.sin());
    for (p, px) in img.iter_mut().enumerate() {
        let (r, c) = ((p / size) as f64 / s - 0.5, (p % size) as f64 / s - 0.5);
        let t = ((c * dx + r * dy) / std::f64::consts::SQRT_2 + 0.5).clamp(0.0, 1.0);
        for ch in 0..3 {
            px[ch] = c0[ch] + (c1[ch] - c0[ch]) * t;
        }
    }

    // Value-noise octaves, shared luminance with a random tint.
    let tint = random_color(&mut rng, 0.6, 1.0);
    let octaves = [(4usize, 0.16), (8, 0.08), (16, 0.04)];
    for (cells, amp) in octaves {
        let lattice = ValueNoise::new(&mut rng, cells);
        for (p, px) in img.iter_mut().enumerate() {
            let v = lattice.sample((p / size) as f64 / s, (p % size) as f64 / s) - 0.5;
            for ch in 0..3 {
                px[ch] += amp * v * tint[ch];
            }
        }
    }

    // Gaussian blobs.
    for _ in 0..rng.random_range(2..=5) {
        let (cy, cx) = (rng.random::<f64>() * s, rng.random::<f64>() * s);
        let sigma = s * rng.random_range(1.0 / 16.0..1.0 / 5.0);
        let color = random_color(&mut rng, -0.3, 0.3);
        let inv = 1.0 / (2.0 * sigma * sigma);
        for (p, px) in img.iter_mut().enumerate() {
            let (r, c) = ((p / size) as f64, (p % size) as f64);
            let w = (-((r - cy).powi(2) + (c - cx).powi(2)) * inv).exp();
            for ch in 0..3 {
                px[ch] += w * color[ch];
            }
        }
    }

    // Soft-edged shapes, alpha blended.
    for _ in 0..rng.random_range(1..=3) {
        let shape = Shape::random(&mut rng, s);
        let color = random_color(&mut rng, 0.1, 0.9);
        let alpha = rng.random_range(0.4..0.9);
        for (p, px) in img.iter_mut().enumerate() {
            let (r, c) = ((p / size) as f64 + 0.5, (p % size) as f64 + 0.5);
            let cover = shape.coverage(r, c) * alpha;
            for ch in 0..3 {
                px[ch] += cover * (color[ch] - px[ch]);
            }
        }
    }

    let data = img
        .iter()
        .flat_map(|px| px.map(|v| HEADROOM + (1.0 - 2.0 * HEADROOM) * v.clamp(0.0, 1.0)))
        .collect();
    RasterImage::new(size, size, data).expect("generated cover is valid")
}

fn mean(c: [f64; 3]) -> f64 {
    (c[0] + c[1] + c[2]) / 3.0
}

fn random_color(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> [f64; 3] {
    [
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
        rng.random_range(lo..hi),
    ]
}

struct ValueNoise {
    cells: usize,
    values: Vec<f64>,
}

impl ValueNoise {
    fn new(rng: &mut ChaCha8Rng, cells: usize) -> Self {
        let n = cells + 1;
        Self {
            cells,
            values: (0..n * n).map(|_| rng.random::<f64>()).collect(),
        }
    }

    /// Smoothstep-interpolated lattice value at unit-square coordinates.
    fn sample(&self, y: f64, x: f64) -> f64 {
        let n = self.cells + 1;
        let (fy, fx) = (y * self.cells as f64, x * self.cells as f64);
        let (iy, ix) = (fy.floor() as usize, fx.floor() as usize);
        let (ty, tx) = (smooth(fy - iy as f64), smooth(fx - ix as f64));
        let (iy1, ix1) = ((iy + 1).min(self.cells), (ix + 1).min(self.cells));
        let v = |r: usize, c: usize| self.values[r * n + c];
        let top = v(iy, ix) + (v(iy, ix1) - v(iy, ix)) * tx;
        let bottom = v(iy1, ix) + (v(iy1, ix1) - v(iy1, ix)) * tx;
        top + (bottom - top) * ty
    }
}

fn smooth(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

enum Shape {
    Disc { cy: f64, cx: f64, radius: f64 },
    Rect { cy: f64, cx: f64, hh: f64, hw: f64, cos: f64, sin: f64 },
}

impl Shape {
    fn random(rng: &mut ChaCha8Rng, s: f64) -> Self {
        let (cy, cx) = (rng.random_range(0.15..0.85) * s, rng.random_range(0.15..0.85) * s);
        if rng.random::<bool>() {
            Shape::Disc {
                cy,
                cx,
                radius: rng.random_range(0.08..0.25) * s,
            }
        } else {
            let angle = rng.random::<f64>() * std::f64::consts::PI;
            Shape::Rect {
                cy,
                cx,
                hh: rng.random_range(0.06..0.22) * s,
                hw: rng.random_range(0.06..0.22) * s,
                cos: angle.cos(),
                sin: angle.sin(),
            }
        }
    }

    /// Soft inside-ness in `[0, 1]` from a signed distance.
    fn coverage(&self, r: f64, c: f64) -> f64 {
        let sd = match *self {
            Shape::Disc { cy, cx, radius } => ((r - cy).powi(2) + (c - cx).powi(2)).sqrt() - radius,
            Shape::Rect { cy, cx, hh, hw, cos, sin } => {
                let (y, x) = (r - cy, c - cx);
                let (u, v) = ((x * cos + y * sin).abs() - hw, (-x * sin + y * cos).abs() - hh);
                let outside = (u.max(0.0).powi(2) + v.max(0.0).powi(2)).sqrt();
                outside + u.max(v).min(0.0)
            }
        };
        1.0 - smooth(sd / EDGE_SOFTNESS + 0.5)
    }
}
