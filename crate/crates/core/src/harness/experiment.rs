//! End-to-end experiment: calibrate, generate, embed, attack, score, report.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::attacks::{
    apply_spectral_filter, blackbox_pipeline, color_contrast_transfer, refine, regenerate,
    train_pipeline_filter, translation_attack, PipelineConfig, RegenConfig, SpectralFilter,
};
use crate::error::{Error, Result};
use crate::harness::calibrate::{
    calibrate_threshold, detection_score, DetectionThreshold, Detector, DetectorSpec, DEFAULT_CALIBRATION_N,
    DEFAULT_FPR,
};
use crate::harness::corpus::gen_corpus;
use crate::image::RasterImage;
use crate::metrics::{quality_aggregate, total_score, QualityConfig, QualityVector};
use crate::rng;
use crate::spectral::{spectrum_image, ClusterLabel};
use crate::watermark::{
    boundary_embed, ring_embed, square_embed, ss_embed, BitMessage, Family, WatermarkKey,
};

/// Cluster mix of the black-box corpus: clean, boundary, ring, square.
pub const DEFAULT_PROPORTIONS: [usize; 4] = [102, 49, 49, 100];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum CorpusKind {
    /// Every cover carries only the configured watermark.
    Single,
    /// The configured watermark plus a visible artifact, split across clusters
    /// in the given proportions (clean, boundary, ring, square).
    Mixed { proportions: [usize; 4] },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "method")]
pub enum AttackSpec {
    Identity,
    Translate { shift: usize },
    Filter,
    FilterRefine,
    FilterRefineTransfer,
    Regenerate { strength: f64, passes: usize },
    Blackbox,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    /// Directory receiving `report.json` and `rows.csv`.
    pub dir: Option<PathBuf>,
    /// Number of attacked images whose log spectra are written as PNG.
    pub spectra: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub corpus_size: usize,
    pub image_size: usize,
    pub corpus: CorpusKind,
    pub key: WatermarkKey,
    pub attack: AttackSpec,
    pub fpr_target: f64,
    pub calibration_n: usize,
    pub quality: QualityConfig,
    pub pipeline: PipelineConfig,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            corpus_size: 200,
            image_size: 128,
            corpus: CorpusKind::Single,
            key: WatermarkKey::spread_spectrum(1),
            attack: AttackSpec::Identity,
            fpr_target: DEFAULT_FPR,
            calibration_n: DEFAULT_CALIBRATION_N,
            quality: QualityConfig::default(),
            pipeline: PipelineConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.corpus_size == 0 {
            return Err(Error::Config("corpus_size must be at least 1".into()));
        }
        if !(self.fpr_target > 0.0 && self.fpr_target < 1.0) {
            return Err(Error::Config(format!("fpr_target {} outside (0, 1)", self.fpr_target)));
        }
        if let CorpusKind::Mixed { proportions } = &self.corpus {
            if proportions.iter().sum::<usize>() == 0 {
                return Err(Error::Config("mixed corpus proportions are all zero".into()));
            }
        }
        self.key.validate()?;
        self.quality.validate()
    }

    /// Short hash of the canonical JSON form.
    pub fn fingerprint(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageRow {
    pub index: usize,
    pub injected: Option<ClusterLabel>,
    pub cluster: Option<ClusterLabel>,
    pub route: Option<String>,
    pub distance: f64,
    pub flagged: bool,
    pub psnr: f64,
    pub ssim: f64,
    pub nmi: f64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub detection_score: f64,
    pub quality: QualityVector,
    pub quality_aggregate: f64,
    pub total: f64,
    pub threshold: DetectionThreshold,
    pub quality_config: QualityConfig,
    /// Channel the SSIM term is computed on.
    pub ssim_channel: String,
    pub config_fingerprint: String,
    pub seed: u64,
    pub partial: bool,
    pub failures: usize,
    pub rows: Vec<ImageRow>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json()? + "\n")?;
        let mut w = csv::Writer::from_path(dir.join("rows.csv"))?;
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Cluster assigned to each index of a mixed corpus, in contiguous blocks
/// sized by largest-remainder apportionment.
pub fn mixed_assignment(n: usize, proportions: [usize; 4]) -> Vec<ClusterLabel> {
    let total: usize = proportions.iter().sum();
    let mut counts: Vec<usize> = proportions.iter().map(|p| p * n / total).collect();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by_key(|&i| std::cmp::Reverse((proportions[i] * n) % total));
    let mut missing = n - counts.iter().sum::<usize>();
    for &i in order.iter().cycle() {
        if missing == 0 {
            break;
        }
        counts[i] += 1;
        missing -= 1;
    }
    ClusterLabel::ALL
        .iter()
        .zip(counts)
        .flat_map(|(&label, c)| std::iter::repeat_n(label, c))
        .collect()
}

/// Keys of the visible artifacts added to a mixed corpus.
pub fn artifact_keys(seed: u64) -> [WatermarkKey; 3] {
    [
        WatermarkKey::boundary_frame(rng::mix(seed, 0xb0)),
        WatermarkKey::fourier_ring(rng::mix(seed, 0xb1)),
        WatermarkKey::fourier_square(rng::mix(seed, 0xb2)),
    ]
}

/// The fixed payload the experiment embeds when the key is spread-spectrum.
pub fn experiment_message(cfg: &ExperimentConfig) -> Result<BitMessage> {
    let mut r = rng::stream(rng::mix(cfg.seed, 0x5e), 5);
    BitMessage::random(cfg.key.message_bits(), &mut r)
}

pub fn detector_spec(cfg: &ExperimentConfig) -> Result<DetectorSpec> {
    let key = cfg.key.clone();
    Ok(match key.family {
        Family::SpreadSpectrum => DetectorSpec::SpreadSpectrum {
            reference: experiment_message(cfg)?,
            key,
        },
        Family::FourierRing => DetectorSpec::FourierRing { key },
        Family::FourierSquare => DetectorSpec::FourierSquare { key },
        Family::BoundaryFrame => DetectorSpec::BoundaryFrame { key },
    })
}

/// Embeds the configured watermark and, for mixed corpora, the cluster artifact.
pub fn watermark_corpus(cfg: &ExperimentConfig) -> Result<(Vec<RasterImage>, Vec<Option<ClusterLabel>>)> {
    let covers = gen_corpus(cfg.corpus_size, cfg.image_size, rng::mix(cfg.seed, 0xc0));
    let labels: Vec<Option<ClusterLabel>> = match &cfg.corpus {
        CorpusKind::Single => vec![None; covers.len()],
        CorpusKind::Mixed { proportions } => mixed_assignment(covers.len(), *proportions)
            .into_iter()
            .map(Some)
            .collect(),
    };
    let message = experiment_message(cfg)?;
    let [boundary, ring, square] = artifact_keys(cfg.seed);
    let images = covers
        .par_iter()
        .zip(&labels)
        .map(|(cover, label)| {
            let marked = match cfg.key.family {
                Family::SpreadSpectrum => ss_embed(cover, &cfg.key, &message)?,
                Family::FourierRing => ring_embed(cover, &cfg.key)?,
                Family::FourierSquare => square_embed(cover, &cfg.key)?,
                Family::BoundaryFrame => boundary_embed(cover, &cfg.key)?,
            };
            match label {
                None | Some(ClusterLabel::NoArtifact) => Ok(marked),
                Some(ClusterLabel::Boundary) => boundary_embed(&marked, &boundary),
                Some(ClusterLabel::FourierRing) => ring_embed(&marked, &ring),
                Some(ClusterLabel::FourierSquare) => square_embed(&marked, &square),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((images, labels))
}

struct Attacked {
    image: Option<RasterImage>,
    cluster: Option<ClusterLabel>,
    route: Option<String>,
    error: Option<String>,
}

fn attack_all(images: &[RasterImage], cfg: &ExperimentConfig) -> Result<Vec<Attacked>> {
    let single = |f: &(dyn Fn(usize, &RasterImage) -> Result<RasterImage> + Sync)| -> Vec<Attacked> {
        images
            .par_iter()
            .enumerate()
            .map(|(i, img)| match f(i, img) {
                Ok(out) => Attacked {
                    image: Some(out),
                    cluster: None,
                    route: None,
                    error: None,
                },
                Err(e) => Attacked {
                    image: None,
                    cluster: None,
                    route: None,
                    error: Some(e.to_string()),
                },
            })
            .collect()
    };
    let filter = || -> Result<SpectralFilter> { train_pipeline_filter(cfg.image_size, cfg.image_size, &cfg.pipeline) };
    let refine_cfg = cfg.pipeline.refine;
    let seed_of = |i: usize| cfg.seed ^ i as u64;
    Ok(match cfg.attack {
        AttackSpec::Identity => single(&|_, img| Ok(img.clone())),
        AttackSpec::Translate { shift } => single(&|_, img| translation_attack(img, shift)),
        AttackSpec::Regenerate { strength, passes } => single(&|i, img| {
            let rc = RegenConfig {
                passes,
                ..RegenConfig::with_strength(strength, seed_of(i))
            };
            regenerate(img, &rc)
        }),
        AttackSpec::Filter => {
            let f = filter()?;
            single(&|_, img| apply_spectral_filter(img, &f))
        }
        AttackSpec::FilterRefine => {
            let f = filter()?;
            single(&|_, img| refine(&apply_spectral_filter(img, &f)?, img, &refine_cfg))
        }
        AttackSpec::FilterRefineTransfer => {
            let f = filter()?;
            single(&|_, img| {
                let refined = refine(&apply_spectral_filter(img, &f)?, img, &refine_cfg)?;
                Ok(color_contrast_transfer(&refined, img)?.image)
            })
        }
        AttackSpec::Blackbox => {
            let pcfg = PipelineConfig {
                master_seed: cfg.seed,
                ..cfg.pipeline.clone()
            };
            let out = blackbox_pipeline(images, &pcfg);
            out.images
                .into_iter()
                .zip(out.manifest)
                .map(|(image, entry)| Attacked {
                    image,
                    cluster: Some(entry.cluster),
                    route: Some(entry.route.name().to_string()),
                    error: entry.error,
                })
                .collect()
        }
    })
}

/// Runs the whole protocol. Images whose attack fails are scored unattacked
/// and the report is marked partial.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    let detector = Detector::new(detector_spec(cfg)?, cfg.image_size, cfg.image_size)?;
    let threshold = calibrate_threshold(&detector, cfg.calibration_n, cfg.fpr_target, rng::mix(cfg.seed, 0xca1))?;
    let (marked, injected) = watermark_corpus(cfg)?;
    let attacked = attack_all(&marked, cfg)?;

    let rows = marked
        .par_iter()
        .zip(attacked.par_iter())
        .zip(injected.par_iter())
        .enumerate()
        .map(|(index, ((x_w, att), injected))| {
            let out = att.image.as_ref().unwrap_or(x_w);
            let distance = detector.distance(out)?;
            let q = QualityVector::measure(x_w, out)?;
            Ok(ImageRow {
                index,
                injected: *injected,
                cluster: att.cluster,
                route: att.route.clone(),
                distance,
                flagged: threshold.flags(distance),
                psnr: q.psnr,
                ssim: q.ssim,
                nmi: q.nmi,
                error: att.error.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    if let Some(dir) = &cfg.output.dir {
        std::fs::create_dir_all(dir)?;
        for (i, (att, x_w)) in attacked.iter().zip(&marked).take(cfg.output.spectra).enumerate() {
            let img = att.image.as_ref().unwrap_or(x_w);
            spectrum_image(img).save_png(dir.join(format!("spectrum_{i:04}.png")))?;
        }
    }

    let distances: Vec<f64> = rows.iter().map(|r| r.distance).collect();
    let det = detection_score(&distances, &threshold)?;
    let qs: Vec<QualityVector> = rows
        .iter()
        .map(|r| QualityVector {
            psnr: r.psnr,
            ssim: r.ssim,
            nmi: r.nmi,
        })
        .collect();
    let quality = QualityVector::mean(&qs).ok_or(Error::Empty("report rows"))?;
    let agg = quality_aggregate(&quality, &cfg.quality);
    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    let report = EvalReport {
        detection_score: det,
        quality,
        quality_aggregate: agg,
        total: total_score(det, agg),
        threshold,
        quality_config: cfg.quality,
        ssim_channel: "luminance".into(),
        config_fingerprint: cfg.fingerprint(),
        seed: cfg.seed,
        partial: failures > 0,
        failures,
        rows,
    };
    if let Some(dir) = &cfg.output.dir {
        report.write(dir)?;
    }
    Ok(report)
}
