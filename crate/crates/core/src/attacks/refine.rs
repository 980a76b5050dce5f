//! Pixel-space refinement pulling an attacked image back toward the original
//! watermarked image while a proximity term keeps it near the attack output.
//!
//! Objective over all channel values:
//! `L(x) = Σ(x − x_w)² + w·(1 − SSIM(x, x_w)) + γ·Σ(x − x_att)²`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::RasterImage;
use crate::metrics::{ssim, ssim_grad};

/// Step halvings tried before the descent gives up.
pub const MAX_HALVINGS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefineConfig {
    pub steps: usize,
    pub step_size: f64,
    pub ssim_weight: f64,
    pub proximity: f64,
}

impl Default for RefineConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            step_size: 0.05,
            ssim_weight: 0.5,
            proximity: 2.0,
        }
    }
}

impl RefineConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.steps > 0 && self.step_size > 0.0 && self.ssim_weight > 0.0 && self.proximity > 0.0;
        if !ok {
            return Err(Error::InvalidArgument(format!("refine parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

pub fn refine_objective(
    x: &RasterImage,
    x_w: &RasterImage,
    x_att: &RasterImage,
    cfg: &RefineConfig,
) -> Result<f64> {
    x.same_dims(x_w)?;
    x.same_dims(x_att)?;
    let (mut fid, mut prox) = (0.0, 0.0);
    for ((v, w), a) in x.data().iter().zip(x_w.data()).zip(x_att.data()) {
        fid += (v - w).powi(2);
        prox += (v - a).powi(2);
    }
    Ok(fid + cfg.ssim_weight * (1.0 - ssim(x, x_w)?) + cfg.proximity * prox)
}

/// Analytic gradient of [`refine_objective`] in interleaved channel layout.
pub fn refine_gradient(
    x: &RasterImage,
    x_w: &RasterImage,
    x_att: &RasterImage,
    cfg: &RefineConfig,
) -> Result<Vec<f64>> {
    x.same_dims(x_att)?;
    let gs = ssim_grad(x, x_w)?;
    Ok(x.data()
        .iter()
        .zip(x_w.data())
        .zip(x_att.data())
        .zip(gs)
        .map(|(((v, w), a), g)| 2.0 * (v - w) - cfg.ssim_weight * g + 2.0 * cfg.proximity * (v - a))
        .collect())
}

#[derive(Clone, Debug)]
pub struct RefineTrace {
    pub image: RasterImage,
    /// Objective at the start and after each accepted step.
    pub objective: Vec<f64>,
}

pub fn refine(x_att: &RasterImage, x_w: &RasterImage, cfg: &RefineConfig) -> Result<RasterImage> {
    Ok(refine_with_trace(x_att, x_w, cfg)?.image)
}

/// Projected gradient descent from `x_att` with step halving on increase.
pub fn refine_with_trace(x_att: &RasterImage, x_w: &RasterImage, cfg: &RefineConfig) -> Result<RefineTrace> {
    cfg.validate()?;
    x_att.same_dims(x_w)?;
    let mut x = x_att.clone();
    let mut loss = refine_objective(&x, x_w, x_att, cfg)?;
    let mut history = vec![loss];
    'outer: for _ in 0..cfg.steps {
        let grad = refine_gradient(&x, x_w, x_att, cfg)?;
        if grad.iter().all(|g| *g == 0.0) {
            break;
        }
        let mut eta = cfg.step_size;
        for _ in 0..=MAX_HALVINGS {
            let data = x.data().iter().zip(&grad).map(|(v, g)| v - eta * g).collect();
            let candidate = RasterImage::new(x.width(), x.height(), data)?;
            let next = refine_objective(&candidate, x_w, x_att, cfg)?;
            if next <= loss {
                x = candidate;
                loss = next;
                history.push(loss);
                continue 'outer;
            }
            eta *= 0.5;
        }
        break;
    }
    Ok(RefineTrace {
        image: x,
        objective: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::corpus::gen_corpus;
    use crate::metrics::psnr;

    #[test]
    fn fixed_point_at_target() {
        let x = &gen_corpus(1, 32, 1)[0];
        let out = refine(x, x, &RefineConfig::default()).unwrap();
        assert_eq!(&out, x);
    }

    #[test]
    fn monotone_and_closer() {
        let c = gen_corpus(2, 32, 4);
        let (x_w, x_att) = (&c[0], &c[1]);
        let trace = refine_with_trace(x_att, x_w, &RefineConfig::default()).unwrap();
        assert!(trace.objective.windows(2).all(|p| p[1] <= p[0]));
        assert!(psnr(&trace.image, x_w).unwrap() > psnr(x_att, x_w).unwrap());
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let c = gen_corpus(3, 16, 6);
        let cfg = RefineConfig::default();
        let g = refine_gradient(&c[0], &c[1], &c[2], &cfg).unwrap();
        let h = 1e-4;
        for &i in &[0usize, 100, 377, 700] {
            let bump = |d: f64| {
                let mut data = c[0].data().to_vec();
                data[i] += d;
                RasterImage::new(16, 16, data).unwrap()
            };
            let fd = (refine_objective(&bump(h), &c[1], &c[2], &cfg).unwrap()
                - refine_objective(&bump(-h), &c[1], &c[2], &cfg).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-3 * g[i].abs().max(1e-3), "{i}: {fd} vs {}", g[i]);
        }
    }
}
