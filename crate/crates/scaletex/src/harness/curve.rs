//! Learning-curve evaluation: the pipeline is rerun over a grid of
//! training sizes with several seeded repetitions each, in parallel, and
//! the per-repetition error rates are collected into named curves.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::pipeline::{
    group_labels_for_mode, prepare_experiment, run_with_mode, subset_ids, FeatureMode,
    PipelineOutcome,
};
use crate::error::Result;

/// Mixes a master seed with two stream coordinates into an independent
/// 64-bit seed (SplitMix64-style finalizers), so repetitions, training
/// sizes, and synthesized classes all get decorrelated RNG streams that
/// are stable regardless of execution order.
pub fn derive_seed(master: u64, a: u64, b: u64) -> u64 {
    fn mix(mut z: u64) -> u64 {
        z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }
    mix(master ^ mix(a ^ mix(b)))
}

/// One named error curve: `rep_errors[i][r]` is the error rate of
/// repetition `r` at `sizes[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningCurve {
    pub name: String,
    pub sizes: Vec<usize>,
    pub rep_errors: Vec<Vec<f64>>,
}

impl LearningCurve {
    /// Mean error over repetitions at size index `i`.
    pub fn mean(&self, i: usize) -> f64 {
        let reps = &self.rep_errors[i];
        reps.iter().sum::<f64>() / reps.len() as f64
    }

    /// Population standard deviation over repetitions at size index `i`
    /// (divides by the repetition count; repetitions are the whole
    /// population of runs, not a sample from one).
    pub fn std(&self, i: usize) -> f64 {
        let reps = &self.rep_errors[i];
        let mean = self.mean(i);
        (reps.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / reps.len() as f64).sqrt()
    }

    /// Number of repetitions per size.
    pub fn repetitions(&self) -> usize {
        self.rep_errors.first().map_or(0, Vec::len)
    }

    /// Largest single-repetition error anywhere on the curve.
    pub fn max_observed(&self) -> f64 {
        self.rep_errors
            .iter()
            .flatten()
            .copied()
            .fold(0.0_f64, f64::max)
    }
}

/// Every curve one experiment produces: the combined classifier, each
/// stand-alone subset, and each stage-1 (or fused) group.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveBundle {
    pub combined: LearningCurve,
    pub subsets: Vec<LearningCurve>,
    pub groups: Vec<LearningCurve>,
}

impl CurveBundle {
    /// All curves in presentation order: combined, groups, subsets.
    pub fn all_curves(&self) -> Vec<&LearningCurve> {
        let mut curves = vec![&self.combined];
        curves.extend(self.groups.iter());
        curves.extend(self.subsets.iter());
        curves
    }
}

/// Runs every (size, repetition) task in parallel and returns the
/// outcomes as `[size][repetition]`, plus the group labels in effect.
///
/// A repetition whose covariance estimate collapses (too few samples for
/// an unregularized QDC) is recorded at chance level `1 - 1/c` across all
/// of its curves, with a warning on stderr; any other failure aborts.
pub(crate) fn evaluate_curves(
    config: &ExperimentConfig,
    mode: FeatureMode,
) -> Result<(Vec<Vec<PipelineOutcome>>, Vec<String>)> {
    config.validate()?;
    let data = prepare_experiment(config)?;
    let c = data.num_classes();
    let chance = 1.0 - 1.0 / c as f64;
    let group_labels = group_labels_for_mode(config, mode);
    let n_subsets = config.num_scales() * 6;

    let tasks: Vec<(usize, usize)> = (0..config.training_sizes.len())
        .flat_map(|si| (0..config.repetitions).map(move |rep| (si, rep)))
        .collect();
    let flat: Vec<PipelineOutcome> = tasks
        .par_iter()
        .map(|&(si, rep)| -> Result<PipelineOutcome> {
            let size = config.training_sizes[si];
            let seed = derive_seed(config.rng_seed, size as u64, rep as u64);
            match run_with_mode(&data, config, size, seed, mode) {
                Ok(outcome) => Ok(outcome),
                Err(e) if e.is_singular_covariance() => {
                    eprintln!(
                        "warning: size {size}, repetition {rep}: {e}; recording \
                         chance-level error {chance:.4} for this repetition"
                    );
                    Ok(PipelineOutcome {
                        combined_error: chance,
                        subset_errors: if mode == FeatureMode::PerSubset {
                            vec![chance; n_subsets]
                        } else {
                            Vec::new()
                        },
                        group_errors: vec![chance; group_labels.len()],
                        group_labels: group_labels.clone(),
                        pca_dims: Vec::new(),
                    })
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut outcomes: Vec<Vec<PipelineOutcome>> = Vec::with_capacity(config.training_sizes.len());
    let mut it = flat.into_iter();
    for _ in 0..config.training_sizes.len() {
        outcomes.push((&mut it).take(config.repetitions).collect());
    }
    Ok((outcomes, group_labels))
}

fn curve_from<F: Fn(&PipelineOutcome) -> f64>(
    name: String,
    sizes: &[usize],
    outcomes: &[Vec<PipelineOutcome>],
    pick: F,
) -> LearningCurve {
    LearningCurve {
        name,
        sizes: sizes.to_vec(),
        rep_errors: outcomes
            .iter()
            .map(|reps| reps.iter().map(&pick).collect())
            .collect(),
    }
}

/// Evaluates the full learning-curve experiment described by `config`.
pub fn run_learning_curve(config: &ExperimentConfig) -> Result<CurveBundle> {
    let mode = FeatureMode::from_topology(config.combiner.topology);
    let (outcomes, group_labels) = evaluate_curves(config, mode)?;
    let sizes = &config.training_sizes;

    let combined = curve_from("combined".to_string(), sizes, &outcomes, |o| {
        o.combined_error
    });
    let subsets = if mode == FeatureMode::PerSubset {
        subset_ids(config.num_scales())
            .iter()
            .enumerate()
            .map(|(i, id)| curve_from(id.label(), sizes, &outcomes, |o| o.subset_errors[i]))
            .collect()
    } else {
        Vec::new()
    };
    let groups = group_labels
        .iter()
        .enumerate()
        .map(|(g, label)| curve_from(label.clone(), sizes, &outcomes, |o| o.group_errors[g]))
        .collect();
    Ok(CurveBundle {
        combined,
        subsets,
        groups,
    })
}
