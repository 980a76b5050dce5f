use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::json;

use wmlab::attacks::{
    apply_spectral_filter, blackbox_pipeline, color_contrast_transfer, refine, regenerate,
    train_pipeline_filter, translation_attack, PipelineConfig, RefineConfig, RegenConfig,
    DEFAULT_SHIFT,
};
use wmlab::harness::calibrate::{calibrate_threshold, Detector, DetectorSpec, DEFAULT_FPR};
use wmlab::harness::experiment::{run_experiment, EvalReport, ExperimentConfig};
use wmlab::spectral::{artifact_scores, classify_cluster, spectrum_image, ClusterThresholds};
use wmlab::watermark::{
    boundary_detect, boundary_embed, ring_detect, ring_embed, square_detect, square_embed,
    ss_decode, ss_embed, BitMessage, Family, WatermarkKey,
};
use wmlab::{Error, RasterImage, Result};

#[derive(Parser)]
#[command(name = "wm", version, about = "Watermark embedding, removal attacks and scoring")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a new key file.
    Keygen {
        #[arg(long, default_value = "spread_spectrum")]
        family: Family,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        amplitude: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Embed a watermark into a PNG.
    Embed {
        #[arg(long)]
        key: PathBuf,
        /// Hex payload (spread-spectrum only).
        #[arg(long)]
        message: Option<String>,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the detector output for a PNG as JSON.
    Decode {
        #[arg(long)]
        key: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        /// Reference payload; adds the bit distance to the output.
        #[arg(long)]
        reference: Option<String>,
    },
    /// Run a removal attack.
    Attack {
        #[arg(long, value_enum)]
        method: Method,
        /// Input PNGs; `auto` accepts several.
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        /// Output PNG, or a directory for `auto`.
        #[arg(long)]
        out: PathBuf,
        /// Watermarked reference for `refine` and `colorxfer`.
        #[arg(long)]
        reference: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SHIFT)]
        dx: usize,
        #[arg(long, default_value_t = 0.16)]
        strength: f64,
        #[arg(long, default_value_t = 1)]
        passes: usize,
        #[arg(long, default_value_t = 50)]
        steps: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// TOML file with pipeline settings for `filter` and `auto`.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Score artifacts and assign clusters; writes a JSON manifest.
    Cluster {
        #[arg(long = "in", required = true, num_args = 1..)]
        input: Vec<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Directory for log-magnitude spectrum PNGs.
        #[arg(long)]
        spectra: Option<PathBuf>,
    },
    /// Calibrate a detection threshold on fresh unwatermarked covers.
    Calibrate {
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        reference: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = DEFAULT_FPR)]
        fpr: f64,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run an experiment from a TOML config.
    Evaluate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Summarize a report.json.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Method {
    Translate,
    Filter,
    Regen,
    Refine,
    Colorxfer,
    Auto,
}

/// Outcome classes mapped to process exit codes.
enum Outcome {
    Done,
    Partial,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Partial) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn print_json(value: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

fn payload(key: &WatermarkKey, hex: Option<&str>) -> Result<BitMessage> {
    let hex = hex.ok_or_else(|| Error::InvalidArgument("--message is required for spread-spectrum keys".into()))?;
    BitMessage::from_hex(hex, Some(key.message_bits()))
}

fn pipeline_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => toml::from_str(&std::fs::read_to_string(p)?).map_err(|e| Error::Config(e.to_string())),
        None => Ok(PipelineConfig::default()),
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Keygen {
            family,
            seed,
            amplitude,
            out,
        } => {
            let mut key = WatermarkKey::new(family, seed);
            if let Some(a) = amplitude {
                key = key.with_amplitude(a);
            }
            key.validate()?;
            key.save(out)?;
        }
        Command::Embed {
            key,
            message,
            input,
            out,
        } => {
            let key = WatermarkKey::load(key)?;
            let img = RasterImage::load_png(input)?;
            let marked = match key.family {
                Family::SpreadSpectrum => ss_embed(&img, &key, &payload(&key, message.as_deref())?)?,
                Family::FourierRing => ring_embed(&img, &key)?,
                Family::FourierSquare => square_embed(&img, &key)?,
                Family::BoundaryFrame => boundary_embed(&img, &key)?,
            };
            marked.save_png(out)?;
        }
        Command::Decode { key, input, reference } => {
            let key = WatermarkKey::load(key)?;
            let img = RasterImage::load_png(input)?;
            let value = match key.family {
                Family::SpreadSpectrum => {
                    let d = ss_decode(&img, &key)?;
                    let distance = match reference.as_deref() {
                        Some(hex) => Some(d.distance(&BitMessage::from_hex(hex, Some(d.message.len()))?)?),
                        None => None,
                    };
                    json!({ "message": d.message.to_hex(), "correlations": d.correlations, "distance": distance })
                }
                Family::FourierRing => json!({ "rho": ring_detect(&img, &key)? }),
                Family::FourierSquare => json!({ "rho": square_detect(&img, &key)? }),
                Family::BoundaryFrame => json!({ "correlation": boundary_detect(&img, &key)? }),
            };
            print_json(&value)?;
        }
        Command::Attack {
            method,
            input,
            out,
            reference,
            dx,
            strength,
            passes,
            steps,
            seed,
            config,
        } => {
            if let Method::Auto = method {
                let mut cfg = pipeline_config(config.as_deref())?;
                cfg.master_seed = seed;
                let images = input.iter().map(RasterImage::load_png).collect::<Result<Vec<_>>>()?;
                let result = blackbox_pipeline(&images, &cfg);
                std::fs::create_dir_all(&out)?;
                let mut manifest = Vec::new();
                for ((path, entry), img) in input.iter().zip(&result.manifest).zip(&result.images) {
                    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                    if let Some(img) = img {
                        img.save_png(out.join(&name))?;
                    }
                    manifest.push(json!({ "image": name, "entry": entry }));
                }
                write_json(&out.join("manifest.json"), &manifest)?;
                return Ok(if result.failures() > 0 { Outcome::Partial } else { Outcome::Done });
            }
            let [path] = input.as_slice() else {
                return Err(Error::InvalidArgument("this method takes exactly one --in image".into()));
            };
            let img = RasterImage::load_png(path)?;
            let reference_img = || -> Result<RasterImage> {
                let p = reference
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArgument("--reference is required for this method".into()))?;
                RasterImage::load_png(p)
            };
            let attacked = match method {
                Method::Translate => translation_attack(&img, dx)?,
                Method::Regen => regenerate(
                    &img,
                    &RegenConfig {
                        passes,
                        ..RegenConfig::with_strength(strength, seed)
                    },
                )?,
                Method::Filter => {
                    let cfg = pipeline_config(config.as_deref())?;
                    let filter = train_pipeline_filter(img.width(), img.height(), &cfg)?;
                    apply_spectral_filter(&img, &filter)?
                }
                Method::Refine => refine(
                    &img,
                    &reference_img()?,
                    &RefineConfig {
                        steps,
                        ..RefineConfig::default()
                    },
                )?,
                Method::Colorxfer => {
                    let t = color_contrast_transfer(&img, &reference_img()?)?;
                    if t.contrast_skipped {
                        eprintln!("warning: flat luminance, contrast step skipped");
                    }
                    t.image
                }
                Method::Auto => unreachable!("handled above"),
            };
            attacked.save_png(out)?;
        }
        Command::Cluster { input, out, spectra } => {
            if let Some(dir) = &spectra {
                std::fs::create_dir_all(dir)?;
            }
            let thresholds = ClusterThresholds::default();
            let mut manifest = Vec::new();
            let mut failures = 0;
            for path in &input {
                let name = path.display().to_string();
                match RasterImage::load_png(path) {
                    Ok(img) => {
                        let scores = artifact_scores(&img);
                        let label = classify_cluster(&scores, &thresholds);
                        if let Some(dir) = &spectra {
                            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
                            spectrum_image(&img).save_png(dir.join(format!("{stem}_spectrum.png")))?;
                        }
                        manifest.push(json!({ "image": name, "scores": scores, "label": label }));
                    }
                    Err(e) => {
                        failures += 1;
                        manifest.push(json!({ "image": name, "error": e.to_string() }));
                    }
                }
            }
            match out {
                Some(p) => write_json(&p, &manifest)?,
                None => print_json(&manifest)?,
            }
            if failures > 0 {
                return Ok(Outcome::Partial);
            }
        }
        Command::Calibrate {
            key,
            reference,
            n,
            fpr,
            size,
            seed,
            out,
        } => {
            let key = WatermarkKey::load(key)?;
            let spec = match key.family {
                Family::SpreadSpectrum => DetectorSpec::SpreadSpectrum {
                    reference: payload(&key, reference.as_deref())?,
                    key,
                },
                Family::FourierRing => DetectorSpec::FourierRing { key },
                Family::FourierSquare => DetectorSpec::FourierSquare { key },
                Family::BoundaryFrame => DetectorSpec::BoundaryFrame { key },
            };
            let detector = Detector::new(spec, size, size)?;
            let thr = calibrate_threshold(&detector, n, fpr, seed)?;
            match out {
                Some(p) => write_json(&p, &thr)?,
                None => print_json(&thr)?,
            }
        }
        Command::Evaluate { config, seed, out } => {
            let mut cfg = ExperimentConfig::load(config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if out.is_some() {
                cfg.output.dir = out;
            }
            let report = run_experiment(&cfg)?;
            print_summary(&report);
            if report.partial {
                return Ok(Outcome::Partial);
            }
        }
        Command::Report { input } => {
            let report: EvalReport = serde_json::from_str(&std::fs::read_to_string(input)?)?;
            print_summary(&report);
        }
    }
    Ok(Outcome::Done)
}

fn print_summary(r: &EvalReport) {
    let q = &r.quality_config;
    println!(
        "quality ranges: psnr ({}, {}) ssim ({}, {}) nmi ({}, {}); weights {:?}; ssim on {}",
        q.psnr.best, q.psnr.worst, q.ssim.best, q.ssim.worst, q.nmi.best, q.nmi.worst, q.weights, r.ssim_channel
    );
    println!(
        "threshold {:.4} ({} family, fpr {}, n {})",
        r.threshold.value, r.threshold.family, r.threshold.fpr_target, r.threshold.calibration_n
    );
    println!("images {} failures {}", r.rows.len(), r.failures);
    println!(
        "psnr {:.2} dB  ssim {:.4}  nmi {:.4}",
        r.quality.psnr, r.quality.ssim, r.quality.nmi
    );
    println!(
        "detection {:.4}  quality {:.4}  total {:.4}",
        r.detection_score, r.quality_aggregate, r.total
    );
}
