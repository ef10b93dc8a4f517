//! Experiment engine: configuration, dataset ingestion and synthesis, the
//! assembled classification pipeline, learning-curve evaluation, the
//! moment-histogram and combined-feature-space baselines, and CSV/SVG
//! export.

mod baselines;
mod config;
mod curve;
mod export;
mod io;
mod pipeline;
mod synth;

pub use baselines::{cfs_baseline, mh_baseline, mh_features, response_moments, FusionMode};
pub use config::{BaseClassifier, ExperimentConfig, SyntheticKind, SyntheticSpec};
pub use curve::{derive_seed, run_learning_curve, CurveBundle, LearningCurve};
pub use export::{export_curves, export_results, parse_curve_csv, write_chart, write_curve_csv};
pub use io::{load_grayscale, write_pgm};
pub use pipeline::{
    prepare_experiment, run_pipeline_once, run_pipeline_once_prepared, subset_ids, ExperimentData,
    PipelineOutcome, SubsetId,
};
pub use synth::synth_texture;
