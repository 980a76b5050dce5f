//! Fidelity metrics (PSNR, SSIM with its analytic gradient, NMI), the quality
//! aggregate and the Euclidean total score.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{Plane, RasterImage, LUMA};

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 100.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;
const C1: f64 = K1 * K1;
const C2: f64 = K2 * K2;

/// `10·log10(1 / MSE)` over all channel values, capped at [`PSNR_CAP`].
pub fn psnr(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    a.same_dims(b)?;
    let mse = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    Ok((10.0 * (1.0 / mse).log10()).min(PSNR_CAP))
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.map(|v| v / s)
}

/// Separable "valid" correlation: output is `(W - 10) × (H - 10)`.
fn filter_valid(p: &Plane, k: &[f64; SSIM_WINDOW]) -> Plane {
    let ow = p.width + 1 - SSIM_WINDOW;
    let oh = p.height + 1 - SSIM_WINDOW;
    let mut tmp = Plane::zeros(ow, p.height);
    for r in 0..p.height {
        for c in 0..ow {
            *tmp.at_mut(r, c) = (0..SSIM_WINDOW).map(|i| k[i] * p.at(r, c + i)).sum();
        }
    }
    let mut out = Plane::zeros(ow, oh);
    for r in 0..oh {
        for c in 0..ow {
            *out.at_mut(r, c) = (0..SSIM_WINDOW).map(|i| k[i] * tmp.at(r + i, c)).sum();
        }
    }
    out
}

/// Adjoint of [`filter_valid`]: scatters a window map back onto `w × h`.
fn filter_valid_adjoint(m: &Plane, k: &[f64; SSIM_WINDOW], w: usize, h: usize) -> Plane {
    let mut tmp = Plane::zeros(m.width, h);
    for r in 0..m.height {
        for c in 0..m.width {
            let v = m.at(r, c);
            for i in 0..SSIM_WINDOW {
                *tmp.at_mut(r + i, c) += k[i] * v;
            }
        }
    }
    let mut out = Plane::zeros(w, h);
    for r in 0..h {
        for c in 0..m.width {
            let v = tmp.at(r, c);
            for i in 0..SSIM_WINDOW {
                *out.at_mut(r, c + i) += k[i] * v;
            }
        }
    }
    out
}

struct SsimTerms {
    mu_x: Plane,
    mu_y: Plane,
    exx: Plane,
    eyy: Plane,
    exy: Plane,
}

fn product(a: &Plane, b: &Plane) -> Plane {
    Plane {
        width: a.width,
        height: a.height,
        data: a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect(),
    }
}

fn ssim_terms(x: &Plane, y: &Plane) -> SsimTerms {
    let k = gaussian_kernel();
    SsimTerms {
        mu_x: filter_valid(x, &k),
        mu_y: filter_valid(y, &k),
        exx: filter_valid(&product(x, x), &k),
        eyy: filter_valid(&product(y, y), &k),
        exy: filter_valid(&product(x, y), &k),
    }
}

fn check_ssim_dims(a: &RasterImage, b: &RasterImage) -> Result<()> {
    a.same_dims(b)?;
    if a.width() < SSIM_WINDOW || a.height() < SSIM_WINDOW {
        return Err(Error::TooSmall {
            width: a.width(),
            height: a.height(),
            min: SSIM_WINDOW,
        });
    }
    Ok(())
}

/// Mean SSIM of the luminance planes over all fully-contained 11×11 windows.
pub fn ssim(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    check_ssim_dims(a, b)?;
    Ok(ssim_planes(&a.luminance(), &b.luminance()))
}

pub fn ssim_planes(x: &Plane, y: &Plane) -> f64 {
    let t = ssim_terms(x, y);
    let n = t.mu_x.data.len();
    let mut acc = 0.0;
    for i in 0..n {
        let (mx, my) = (t.mu_x.data[i], t.mu_y.data[i]);
        let sxx = t.exx.data[i] - mx * mx;
        let syy = t.eyy.data[i] - my * my;
        let sxy = t.exy.data[i] - mx * my;
        acc += ((2.0 * mx * my + C1) * (2.0 * sxy + C2))
            / ((mx * mx + my * my + C1) * (sxx + syy + C2));
    }
    acc / n as f64
}

/// Exact gradient of mean luminance SSIM with respect to the luminance of `x`.
pub fn ssim_grad_planes(x: &Plane, y: &Plane) -> Plane {
    let k = gaussian_kernel();
    let t = ssim_terms(x, y);
    let n = t.mu_x.data.len();
    let inv_n = 1.0 / n as f64;
    let (mut d_mu, mut d_exx, mut d_exy) = (t.mu_x.clone(), t.mu_x.clone(), t.mu_x.clone());
    for i in 0..n {
        let (mx, my) = (t.mu_x.data[i], t.mu_y.data[i]);
        let sxx = t.exx.data[i] - mx * mx;
        let syy = t.eyy.data[i] - my * my;
        let sxy = t.exy.data[i] - mx * my;
        let a1 = 2.0 * mx * my + C1;
        let a2 = 2.0 * sxy + C2;
        let b1 = mx * mx + my * my + C1;
        let b2 = sxx + syy + C2;
        let s = a1 * a2 / (b1 * b2);
        d_mu.data[i] = inv_n * s * (2.0 * my / a1 - 2.0 * my / a2 - 2.0 * mx / b1 + 2.0 * mx / b2);
        d_exx.data[i] = -inv_n * s / b2;
        d_exy.data[i] = inv_n * 2.0 * s / a2;
    }
    let (w, h) = (x.width, x.height);
    let g_mu = filter_valid_adjoint(&d_mu, &k, w, h);
    let g_xx = filter_valid_adjoint(&d_exx, &k, w, h);
    let g_xy = filter_valid_adjoint(&d_exy, &k, w, h);
    Plane {
        width: w,
        height: h,
        data: (0..w * h)
            .map(|q| g_mu.data[q] + 2.0 * x.data[q] * g_xx.data[q] + y.data[q] * g_xy.data[q])
            .collect(),
    }
}

/// Gradient of [`ssim`] with respect to every channel value of `a`, in the
/// image's interleaved layout.
pub fn ssim_grad(a: &RasterImage, b: &RasterImage) -> Result<Vec<f64>> {
    check_ssim_dims(a, b)?;
    let g = ssim_grad_planes(&a.luminance(), &b.luminance());
    Ok(g.data.iter().flat_map(|&v| LUMA.map(|w| w * v)).collect())
}

const NMI_BINS: usize = 256;

fn bin_of(y: f64) -> usize {
    ((y * NMI_BINS as f64).floor() as usize).min(NMI_BINS - 1)
}

/// Shannon entropy (bits) of a count table, summed in sorted order so the
/// result does not depend on table orientation.
fn entropy(counts: impl Iterator<Item = u32>, total: f64) -> f64 {
    let mut nz: Vec<u32> = counts.filter(|&c| c > 0).collect();
    nz.sort_unstable();
    nz.iter()
        .map(|&c| {
            let p = f64::from(c) / total;
            -p * p.log2()
        })
        .sum()
}

/// Normalized mutual information `2·I(A;B) / (H(A) + H(B))` of 256-bin
/// luminance histograms.
pub fn nmi(a: &RasterImage, b: &RasterImage) -> Result<f64> {
    a.same_dims(b)?;
    let (la, lb) = (a.luminance(), b.luminance());
    let mut ha = vec![0u32; NMI_BINS];
    let mut hb = vec![0u32; NMI_BINS];
    let mut joint = vec![0u32; NMI_BINS * NMI_BINS];
    for (&x, &y) in la.data.iter().zip(&lb.data) {
        let (i, j) = (bin_of(x), bin_of(y));
        ha[i] += 1;
        hb[j] += 1;
        joint[i * NMI_BINS + j] += 1;
    }
    let total = la.data.len() as f64;
    let h_a = entropy(ha.into_iter(), total);
    let h_b = entropy(hb.into_iter(), total);
    let h_ab = entropy(joint.into_iter(), total);
    let marginals = h_a + h_b;
    if marginals == 0.0 {
        // Both images constant: each fully determines the other.
        return Ok(1.0);
    }
    Ok((2.0 * (marginals - h_ab) / marginals).clamp(0.0, 1.0))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityVector {
    pub psnr: f64,
    pub ssim: f64,
    pub nmi: f64,
}

impl QualityVector {
    /// Fidelity of `candidate` against `reference`.
    pub fn measure(reference: &RasterImage, candidate: &RasterImage) -> Result<Self> {
        Ok(Self {
            psnr: psnr(reference, candidate)?,
            ssim: ssim(reference, candidate)?,
            nmi: nmi(reference, candidate)?,
        })
    }

    pub fn mean(items: &[QualityVector]) -> Option<Self> {
        if items.is_empty() {
            return None;
        }
        let n = items.len() as f64;
        Some(Self {
            psnr: items.iter().map(|q| q.psnr).sum::<f64>() / n,
            ssim: items.iter().map(|q| q.ssim).sum::<f64>() / n,
            nmi: items.iter().map(|q| q.nmi).sum::<f64>() / n,
        })
    }
}

/// `(best, worst)` reference values used to normalize one metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRange {
    pub best: f64,
    pub worst: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityConfig {
    /// Weights for (psnr, ssim, nmi); must sum to 1.
    pub weights: [f64; 3],
    pub psnr: MetricRange,
    pub ssim: MetricRange,
    pub nmi: MetricRange,
}

impl Default for QualityConfig {
    fn default() -> Self {
        Self {
            weights: [1.0 / 3.0; 3],
            psnr: MetricRange { best: 45.0, worst: 15.0 },
            ssim: MetricRange { best: 1.0, worst: 0.5 },
            nmi: MetricRange { best: 1.0, worst: 0.1 },
        }
    }
}

impl QualityConfig {
    pub fn validate(&self) -> Result<()> {
        let sum: f64 = self.weights.iter().sum();
        if (sum - 1.0).abs() > 1e-9 || self.weights.iter().any(|w| *w < 0.0) {
            return Err(Error::Config(format!("quality weights must be non-negative and sum to 1, got {sum}")));
        }
        for (name, r) in [("psnr", self.psnr), ("ssim", self.ssim), ("nmi", self.nmi)] {
            if r.best == r.worst {
                return Err(Error::Config(format!("{name} range has best == worst")));
            }
        }
        Ok(())
    }
}

/// Weighted normalized degradation in `[0, 1]`; 0 means perfect fidelity.
pub fn quality_aggregate(q: &QualityVector, cfg: &QualityConfig) -> f64 {
    let norm = |m: f64, r: MetricRange| ((r.best - m) / (r.best - r.worst)).clamp(0.0, 1.0);
    cfg.weights[0] * norm(q.psnr, cfg.psnr)
        + cfg.weights[1] * norm(q.ssim, cfg.ssim)
        + cfg.weights[2] * norm(q.nmi, cfg.nmi)
}

/// Euclidean combination of detection and quality scores.
pub fn total_score(detection: f64, quality: f64) -> f64 {
    (detection * detection + quality * quality).sqrt()
}
