//! Black-box removal: classify each image by its visible artifact and apply
//! the attack chain assigned to that cluster.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    apply_spectral_filter, color_contrast_transfer, refine, regenerate, train_spectral_filter,
    translation_attack, RefineConfig, RegenConfig, SpectralFilter, DEFAULT_SHIFT,
};
use crate::error::{Error, Result};
use crate::harness::corpus::gen_corpus;
use crate::image::RasterImage;
use crate::spectral::{artifact_scores, classify_cluster, ArtifactScores, ClusterLabel, ClusterThresholds};
use crate::watermark::{make_paired_dataset, WatermarkKey};

/// Attack chain applied to one cluster.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Route {
    /// Regeneration at the given strength.
    Regenerate { strength: f64 },
    /// Learned filter, then refinement, then color/contrast transfer.
    FilterRefineTransfer,
    /// Mild regeneration followed by the translation attack.
    RegenerateTranslate { strength: f64, shift: usize },
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::Regenerate { .. } => "regenerate",
            Route::FilterRefineTransfer => "filter_refine_transfer",
            Route::RegenerateTranslate { .. } => "regenerate_translate",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub thresholds: ClusterThresholds,
    pub master_seed: u64,
    /// Key of the toolkit's own embedder used to synthesize filter training pairs.
    pub filter_key: WatermarkKey,
    pub filter_pairs: usize,
    pub filter_cover_seed: u64,
    pub ridge: f64,
    pub refine: RefineConfig,
    pub clean_strength: f64,
    pub square_strength: f64,
    pub shift: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            thresholds: ClusterThresholds::default(),
            master_seed: 0,
            filter_key: WatermarkKey::spread_spectrum(0x7001_6b17),
            filter_pairs: 200,
            filter_cover_seed: 0xc0de,
            ridge: 1.0,
            refine: RefineConfig::default(),
            clean_strength: 0.16,
            square_strength: 0.04,
            shift: DEFAULT_SHIFT,
        }
    }
}

/// Cluster → attack chain.
pub fn route(label: ClusterLabel, cfg: &PipelineConfig) -> Route {
    match label {
        ClusterLabel::NoArtifact => Route::Regenerate {
            strength: cfg.clean_strength,
        },
        ClusterLabel::Boundary | ClusterLabel::FourierRing => Route::FilterRefineTransfer,
        ClusterLabel::FourierSquare => Route::RegenerateTranslate {
            strength: cfg.square_strength,
            shift: cfg.shift,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub index: usize,
    pub cluster: ClusterLabel,
    pub scores: ArtifactScores,
    pub route: Route,
    pub seed: u64,
    pub contrast_skipped: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default)]
pub struct PipelineOutput {
    /// Attacked image per input; `None` where the manifest records an error.
    pub images: Vec<Option<RasterImage>>,
    pub manifest: Vec<ManifestEntry>,
}

impl PipelineOutput {
    pub fn failures(&self) -> usize {
        self.manifest.iter().filter(|e| e.error.is_some()).count()
    }
}

/// Runs the cluster-specific attack on every image in parallel.
///
/// Image `i` draws its randomness from `master_seed ^ i`, so results do not
/// depend on batch order or thread count. Filters are trained once per
/// distinct image size among images routed to the learned filter.
pub fn blackbox_pipeline(images: &[RasterImage], cfg: &PipelineConfig) -> PipelineOutput {
    let classified: Vec<(ArtifactScores, ClusterLabel)> = images
        .par_iter()
        .map(|img| {
            let scores = artifact_scores(img);
            (scores, classify_cluster(&scores, &cfg.thresholds))
        })
        .collect();

    let mut sizes: BTreeMap<(usize, usize), std::result::Result<SpectralFilter, String>> = BTreeMap::new();
    for (img, (_, label)) in images.iter().zip(&classified) {
        if route(*label, cfg) == Route::FilterRefineTransfer {
            sizes.entry((img.width(), img.height())).or_insert(Err(String::new()));
        }
    }
    for (&(w, h), slot) in sizes.iter_mut() {
        *slot = train_pipeline_filter(w, h, cfg).map_err(|e| e.to_string());
    }

    let results: Vec<(Option<RasterImage>, ManifestEntry)> = images
        .par_iter()
        .zip(classified)
        .enumerate()
        .map(|(index, (img, (scores, cluster)))| {
            let seed = cfg.master_seed ^ index as u64;
            let route = route(cluster, cfg);
            let filter = sizes.get(&(img.width(), img.height()));
            let (image, contrast_skipped, error) = match attack_one(img, route, seed, filter, cfg) {
                Ok((out, skipped)) => (Some(out), skipped, None),
                Err(e) => {
                    log::warn!("image {index}: {e}");
                    (None, false, Some(e.to_string()))
                }
            };
            let entry = ManifestEntry {
                index,
                cluster,
                scores,
                route,
                seed,
                contrast_skipped,
                error,
            };
            (image, entry)
        })
        .collect();
    let (images, manifest) = results.into_iter().unzip();
    PipelineOutput { images, manifest }
}

/// Trains the pipeline's learned filter on self-generated `w × h` pairs.
pub fn train_pipeline_filter(w: usize, h: usize, cfg: &PipelineConfig) -> Result<SpectralFilter> {
    if w != h {
        return Err(Error::InvalidArgument(format!(
            "filter training covers are square; got a {w}x{h} image"
        )));
    }
    let covers = gen_corpus(cfg.filter_pairs, w, cfg.filter_cover_seed);
    let pairs = make_paired_dataset(&covers, &cfg.filter_key, cfg.filter_pairs, cfg.filter_cover_seed)?;
    train_spectral_filter(&pairs, cfg.ridge)
}

fn attack_one(
    img: &RasterImage,
    route: Route,
    seed: u64,
    filter: Option<&std::result::Result<SpectralFilter, String>>,
    cfg: &PipelineConfig,
) -> Result<(RasterImage, bool)> {
    match route {
        Route::Regenerate { strength } => Ok((regenerate(img, &RegenConfig::with_strength(strength, seed))?, false)),
        Route::RegenerateTranslate { strength, shift } => {
            let regen = regenerate(img, &RegenConfig::with_strength(strength, seed))?;
            Ok((translation_attack(&regen, shift)?, false))
        }
        Route::FilterRefineTransfer => {
            let filter = match filter {
                Some(Ok(f)) => f,
                Some(Err(msg)) => return Err(Error::FilterUnavailable(msg.clone())),
                None => return Err(Error::FilterUnavailable("no filter trained for this size".into())),
            };
            let filtered = apply_spectral_filter(img, filter)?;
            let refined = refine(&filtered, img, &cfg.refine)?;
            let transfer = color_contrast_transfer(&refined, img)?;
            Ok((transfer.image, transfer.contrast_skipped))
        }
    }
}
