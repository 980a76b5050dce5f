//! Watermark removal attacks and the cluster-dispatch pipeline.

mod colorxfer;
mod filter;
mod pipeline;
mod refine;
mod regen;

pub use colorxfer::{color_contrast_transfer, ColorTransfer, MIN_CONTRAST_STD};
pub use filter::{apply_spectral_filter, train_spectral_filter, SpectralFilter};
pub use pipeline::{
    blackbox_pipeline, route, train_pipeline_filter, ManifestEntry, PipelineConfig, PipelineOutput, Route,
};
pub use refine::{refine, refine_gradient, refine_objective, refine_with_trace, RefineConfig, RefineTrace};
pub use regen::{haar_denoise, regenerate, RegenConfig};

use crate::error::Result;
use crate::image::{restore_left_columns, translate_right, RasterImage};

/// Default horizontal shift of the translation attack.
pub const DEFAULT_SHIFT: usize = 7;

/// Shifts content `dx` columns right and restores the vacated columns from `x_w`.
pub fn translation_attack(x_w: &RasterImage, dx: usize) -> Result<RasterImage> {
    restore_left_columns(&translate_right(x_w, dx)?, x_w, dx)
}
