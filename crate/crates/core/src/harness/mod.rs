//! Corpus generation, detector calibration and experiment orchestration.

pub mod calibrate;
pub mod corpus;
pub mod experiment;

pub use calibrate::{
    calibrate_threshold, detection_score, threshold_from_distances, DetectionThreshold, Detector,
    DetectorSpec,
};
pub use corpus::gen_corpus;
pub use experiment::{run_experiment, AttackSpec, CorpusKind, EvalReport, ExperimentConfig, ImageRow};
