//! Distance-space detectors and fixed-FPR threshold calibration.
//!
//! Every detector reports a distance where smaller means "more watermark".
//! A threshold is the empirical `fpr` quantile of distances on unwatermarked
//! images and an image is flagged iff its distance is strictly below it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::corpus::gen_range;
use crate::image::RasterImage;
use crate::watermark::{BitMessage, Family, FourierPattern, SsCarrier, WatermarkKey};
use crate::watermark::boundary_detect;

/// Smallest calibration set accepted.
pub const MIN_CALIBRATION: usize = 100;
pub const DEFAULT_FPR: f64 = 0.001;
pub const DEFAULT_CALIBRATION_N: usize = 10_000;
/// Calibration images generated per batch, bounding peak memory.
const BATCH: usize = 512;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "family")]
pub enum DetectorSpec {
    /// Bit distance between the decoded message and `reference`.
    SpreadSpectrum { key: WatermarkKey, reference: BitMessage },
    /// `1 − ρ` of the ring correlation.
    FourierRing { key: WatermarkKey },
    /// `1 − ρ` of the lattice correlation.
    FourierSquare { key: WatermarkKey },
    /// `1 − c` of the border chip correlation.
    BoundaryFrame { key: WatermarkKey },
}

impl DetectorSpec {
    pub fn family(&self) -> Family {
        match self {
            DetectorSpec::SpreadSpectrum { .. } => Family::SpreadSpectrum,
            DetectorSpec::FourierRing { .. } => Family::FourierRing,
            DetectorSpec::FourierSquare { .. } => Family::FourierSquare,
            DetectorSpec::BoundaryFrame { .. } => Family::BoundaryFrame,
        }
    }

    pub fn key(&self) -> &WatermarkKey {
        match self {
            DetectorSpec::SpreadSpectrum { key, .. }
            | DetectorSpec::FourierRing { key }
            | DetectorSpec::FourierSquare { key }
            | DetectorSpec::BoundaryFrame { key } => key,
        }
    }
}

enum Prepared {
    Ss(SsCarrier, BitMessage),
    Pattern(FourierPattern),
    Boundary(WatermarkKey),
}

/// A detector with its key material expanded for one image size.
pub struct Detector {
    spec: DetectorSpec,
    width: usize,
    height: usize,
    prepared: Prepared,
}

impl Detector {
    pub fn new(spec: DetectorSpec, width: usize, height: usize) -> Result<Self> {
        let prepared = match &spec {
            DetectorSpec::SpreadSpectrum { key, reference } => {
                let carrier = SsCarrier::expand(key, width, height)?;
                if reference.len() != carrier.bits() {
                    return Err(Error::InvalidArgument(format!(
                        "reference has {} bits, key carries {}",
                        reference.len(),
                        carrier.bits()
                    )));
                }
                Prepared::Ss(carrier, reference.clone())
            }
            DetectorSpec::FourierRing { key } => Prepared::Pattern(FourierPattern::ring(key, width, height)?),
            DetectorSpec::FourierSquare { key } => Prepared::Pattern(FourierPattern::lattice(key, width, height)?),
            DetectorSpec::BoundaryFrame { key } => {
                key.require(Family::BoundaryFrame)?;
                Prepared::Boundary(key.clone())
            }
        };
        Ok(Self {
            spec,
            width,
            height,
            prepared,
        })
    }

    pub fn spec(&self) -> &DetectorSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.spec.family()
    }

    pub fn distance(&self, img: &RasterImage) -> Result<f64> {
        if img.width() != self.width || img.height() != self.height {
            return Err(Error::mismatch(self.width, self.height, img.width(), img.height()));
        }
        match &self.prepared {
            Prepared::Ss(carrier, reference) => carrier.decode(img)?.distance(reference),
            Prepared::Pattern(p) => Ok(1.0 - p.correlate(img)?),
            Prepared::Boundary(key) => Ok(1.0 - boundary_detect(img, key)?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DetectionThreshold {
    pub value: f64,
    pub fpr_target: f64,
    pub calibration_n: usize,
    pub family: Family,
}

impl DetectionThreshold {
    pub fn flags(&self, distance: f64) -> bool {
        distance < self.value
    }
}

/// Threshold from precomputed unwatermarked distances: the `⌈fpr·n⌉`-th smallest.
pub fn threshold_from_distances(distances: &[f64], fpr: f64, family: Family) -> Result<DetectionThreshold> {
    if !(fpr > 0.0 && fpr <= 1.0) {
        return Err(Error::InvalidArgument(format!("fpr {fpr} outside (0, 1]")));
    }
    let n = distances.len();
    if n < MIN_CALIBRATION {
        return Err(Error::InvalidArgument(format!(
            "calibration needs at least {MIN_CALIBRATION} images, got {n}"
        )));
    }
    if distances.iter().any(|d| d.is_nan()) {
        return Err(Error::InvalidArgument("NaN distance in calibration set".into()));
    }
    if (n as f64) * fpr < 1.0 {
        log::warn!("n·fpr = {} < 1; threshold is the minimum distance", n as f64 * fpr);
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((fpr * n as f64).ceil() as usize).clamp(1, n);
    Ok(DetectionThreshold {
        value: sorted[rank - 1],
        fpr_target: fpr,
        calibration_n: n,
        family,
    })
}

/// Distances of the detector on `n` fresh `size × size` covers drawn from `seed`.
pub fn null_distances(detector: &Detector, n: usize, size: usize, seed: u64) -> Result<Vec<f64>> {
    use rayon::prelude::*;
    let mut out = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        let end = (start + BATCH).min(n);
        let batch = gen_range(start..end, size, seed);
        let d = batch
            .par_iter()
            .map(|img| detector.distance(img))
            .collect::<Result<Vec<_>>>()?;
        out.extend(d);
        start = end;
    }
    Ok(out)
}

/// Calibrates on `n` fresh unwatermarked covers the size the detector was built for.
pub fn calibrate_threshold(detector: &Detector, n: usize, fpr: f64, seed: u64) -> Result<DetectionThreshold> {
    if n < MIN_CALIBRATION {
        return Err(Error::InvalidArgument(format!(
            "calibration needs at least {MIN_CALIBRATION} images, got {n}"
        )));
    }
    if detector.width != detector.height {
        return Err(Error::InvalidArgument("calibration covers are square".into()));
    }
    let distances = null_distances(detector, n, detector.width, seed)?;
    threshold_from_distances(&distances, fpr, detector.family())
}

/// Fraction of `distances` flagged by `thr`.
pub fn detection_score(distances: &[f64], thr: &DetectionThreshold) -> Result<f64> {
    if distances.is_empty() {
        return Err(Error::Empty("detection set"));
    }
    let flagged = distances.iter().filter(|&&d| thr.flags(d)).count();
    Ok(flagged as f64 / distances.len() as f64)
}

/// [`detection_score`] on images, computing distances with `detector`.
pub fn detection_score_images(images: &[RasterImage], detector: &Detector, thr: &DetectionThreshold) -> Result<f64> {
    let d = images.iter().map(|img| detector.distance(img)).collect::<Result<Vec<_>>>()?;
    detection_score(&d, thr)
}
