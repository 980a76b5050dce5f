//! Watermark robustness laboratory.
//!
//! Desk-scale watermark embedders (spread-spectrum message carrier, phase-sensitive
//! Fourier ring, synthetic boundary/lattice artifacts), the removal attacks that
//! target them (translation with restoration, learned spectral removal filter,
//! noise-injection regeneration, test-time refinement, CIELAB color/contrast
//! transfer, artifact-cluster dispatch) and a scoring harness that reports the
//! detection score at a fixed false-positive rate, an aggregate quality score and
//! their Euclidean total.

pub mod attacks;
pub mod color;
pub mod error;
pub mod harness;
pub mod image;
pub mod metrics;
mod rng;
pub mod spectral;
pub mod watermark;

pub use crate::error::{Error, Result};
pub use crate::image::{ChannelStats, LabImage, Plane, RasterImage};
