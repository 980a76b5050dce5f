//! sRGB <-> CIE L*a*b* (D65) conversions.
//!
//! The reference white is the sRGB→XYZ matrix applied to (1, 1, 1), so white
//! maps to exactly L=100, a=b=0.

use crate::image::{ChannelStats, LabImage, RasterImage};

const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const DELTA: f64 = 6.0 / 29.0;

fn white() -> [f64; 3] {
    let mut w = [0.0; 3];
    for (i, row) in RGB_TO_XYZ.iter().enumerate() {
        w[i] = row.iter().sum();
    }
    w
}

fn xyz_to_rgb_matrix() -> [[f64; 3]; 3] {
    let m = RGB_TO_XYZ;
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let mut inv = [[0.0; 3]; 3];
    for (r, inv_row) in inv.iter_mut().enumerate() {
        for (c, v) in inv_row.iter_mut().enumerate() {
            // cofactor of (c, r)
            let (r0, r1) = match c {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let (c0, c1) = match r {
                0 => (1, 2),
                1 => (0, 2),
                _ => (0, 1),
            };
            let minor = m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
            let sign = if (r + c) % 2 == 0 { 1.0 } else { -1.0 };
            *v = sign * minor / det;
        }
    }
    inv
}

#[inline]
fn decode_gamma(c: f64) -> f64 {
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn encode_gamma(c: f64) -> f64 {
    if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

#[inline]
fn lab_f_inv(t: f64) -> f64 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

/// Converts one sRGB pixel (unit interval) to `[L, a, b]`.
pub fn rgb_to_lab_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let lin = rgb.map(decode_gamma);
    let w = white();
    let mut f = [0.0; 3];
    for i in 0..3 {
        let xyz = RGB_TO_XYZ[i][0] * lin[0] + RGB_TO_XYZ[i][1] * lin[1] + RGB_TO_XYZ[i][2] * lin[2];
        f[i] = lab_f(xyz / w[i]);
    }
    [116.0 * f[1] - 16.0, 500.0 * (f[0] - f[1]), 200.0 * (f[1] - f[2])]
}

/// Converts `[L, a, b]` back to unclamped linear-encoded sRGB components.
fn lab_to_rgb_unclamped(lab: [f64; 3], inv: &[[f64; 3]; 3], w: &[f64; 3]) -> [f64; 3] {
    let fy = (lab[0] + 16.0) / 116.0;
    let fx = fy + lab[1] / 500.0;
    let fz = fy - lab[2] / 200.0;
    let xyz = [w[0] * lab_f_inv(fx), w[1] * lab_f_inv(fy), w[2] * lab_f_inv(fz)];
    let mut rgb = [0.0; 3];
    for (i, out) in rgb.iter_mut().enumerate() {
        let lin = inv[i][0] * xyz[0] + inv[i][1] * xyz[1] + inv[i][2] * xyz[2];
        *out = encode_gamma(lin.clamp(0.0, 1.0));
    }
    rgb
}

/// Converts one `[L, a, b]` value to sRGB, clamping out-of-gamut colors.
pub fn lab_to_rgb_pixel(lab: [f64; 3]) -> [f64; 3] {
    lab_to_rgb_unclamped(lab, &xyz_to_rgb_matrix(), &white()).map(|c| c.clamp(0.0, 1.0))
}

pub fn srgb_to_lab(img: &RasterImage) -> LabImage {
    let n = img.pixel_count();
    let (mut l, mut a, mut b) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    for px in img.data().chunks_exact(3) {
        let lab = rgb_to_lab_pixel([px[0], px[1], px[2]]);
        l.push(lab[0]);
        a.push(lab[1]);
        b.push(lab[2]);
    }
    LabImage {
        width: img.width(),
        height: img.height(),
        l,
        a,
        b,
    }
}

/// Inverse of [`srgb_to_lab`]; out-of-gamut values are clamped into `[0, 1]`.
pub fn lab_to_srgb(img: &LabImage) -> RasterImage {
    let inv = xyz_to_rgb_matrix();
    let w = white();
    let mut data = Vec::with_capacity(img.l.len() * 3);
    for i in 0..img.l.len() {
        let rgb = lab_to_rgb_unclamped([img.l[i], img.a[i], img.b[i]], &inv, &w);
        data.extend(rgb.iter().map(|c| c.clamp(0.0, 1.0)));
    }
    RasterImage::from_raw_unchecked(img.width, img.height, data)
}

pub fn luminance_stats(img: &LabImage) -> ChannelStats {
    ChannelStats::of(&img.l)
}
