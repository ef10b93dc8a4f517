//! Reference methods the combined classifier is measured against:
//! a moment-summary baseline (four distribution moments per filter
//! response, nearest-neighbor rule) and fused-feature variants that
//! concatenate reduced subsets into bigger classifiers instead of
//! combining decisions.

use std::str::FromStr;

use ndarray::Array2;
use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::curve::{derive_seed, evaluate_curves, LearningCurve};
use super::pipeline::{draw_split, prepare_experiment, ExperimentData, FeatureMode};
use crate::classifiers::{neighbor_confidences, train_neighbor, NeighborMode};
use crate::combiners::argmax_class;
use crate::error::{Error, Result};
use crate::patching::preprocess_patch;
use crate::scale_space::compute_njet;

/// Mean, standard deviation (`n-1` convention), skewness and kurtosis of
/// a response's value distribution. Skewness is `m3 / m2^1.5` and
/// kurtosis `m4 / m2^2` with population central moments; both are 0 for
/// a (numerically) constant input.
pub fn response_moments(values: &[f64]) -> [f64; 4] {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    for v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
    }
    let sample_variance = if values.len() > 1 {
        m2 / (n - 1.0)
    } else {
        0.0
    };
    m2 /= n;
    m3 /= n;
    m4 /= n;
    let (skewness, kurtosis) = if m2 > 1e-24 {
        (m3 / m2.powf(1.5), m4 / (m2 * m2))
    } else {
        (0.0, 0.0)
    };
    [mean, sample_variance.sqrt(), skewness, kurtosis]
}

/// The moment-summary feature vector of one patch: four moments of every
/// full (uncropped) filter response, in canonical subset order — with the
/// default three scales, 6 derivatives x 3 scales x 4 moments = 72
/// features. Keeping the full response is deliberate: this baseline
/// summarizes distributions, so boundary-affected pixels only perturb the
/// summary instead of dominating a feature dimension.
pub fn mh_features(patch: &Array2<f64>, sigmas: &[f64]) -> Result<Vec<f64>> {
    let (standardized, _constant) = preprocess_patch(patch)?;
    let jet = compute_njet(&standardized, sigmas, 2)?;
    let mut features = Vec::with_capacity(jet.len() * 4);
    for (_, _, response) in jet.iter() {
        let values: Vec<f64> = response.iter().copied().collect();
        features.extend_from_slice(&response_moments(&values));
    }
    Ok(features)
}

/// Z-scores every column using the training set's statistics (`n-1`
/// variance). A column with (numerically) zero variance carries no
/// information and is zeroed in both sets.
fn standardize_columns(train: &mut [Vec<f64>], test: &mut [Vec<f64>]) {
    let d = train.first().map_or(0, Vec::len);
    let n = train.len() as f64;
    for j in 0..d {
        let mean = train.iter().map(|row| row[j]).sum::<f64>() / n;
        let variance = train.iter().map(|row| (row[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        if variance > 1e-24 {
            let std = variance.sqrt();
            for row in train.iter_mut().chain(test.iter_mut()) {
                row[j] = (row[j] - mean) / std;
            }
        } else {
            for row in train.iter_mut().chain(test.iter_mut()) {
                row[j] = 0.0;
            }
        }
    }
}

fn mh_run_once(
    data: &ExperimentData,
    config: &ExperimentConfig,
    training_size: usize,
    seed: u64,
) -> Result<f64> {
    let drawn = draw_split(data, config, training_size, seed)?;
    if data.num_classes() == 1 {
        return Ok(0.0);
    }
    let featurize = |patches: &[&Array2<f64>]| -> Result<Vec<Vec<f64>>> {
        patches
            .par_iter()
            .map(|p| mh_features(p, &config.sigmas))
            .collect()
    };
    let mut train = featurize(&drawn.train_patches)?;
    let mut test = featurize(&drawn.test_patches)?;
    standardize_columns(&mut train, &mut test);
    let model = train_neighbor(&train, &drawn.train_labels, NeighborMode::Nn1, None)?;
    let mut wrong = 0usize;
    for (x, &label) in test.iter().zip(&drawn.test_labels) {
        let confidences = neighbor_confidences(&model, x)?;
        if argmax_class(&confidences)? != label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / test.len() as f64)
}

/// Learning curve of the moment-summary baseline. It shares the main
/// pipeline's patch pools, seeds and draw procedure, so its curve is
/// point-for-point comparable with the combined classifier's.
pub fn mh_baseline(config: &ExperimentConfig) -> Result<LearningCurve> {
    config.validate()?;
    let data = prepare_experiment(config)?;
    let tasks: Vec<(usize, usize)> = (0..config.training_sizes.len())
        .flat_map(|si| (0..config.repetitions).map(move |rep| (si, rep)))
        .collect();
    let flat: Vec<f64> = tasks
        .par_iter()
        .map(|&(si, rep)| {
            let size = config.training_sizes[si];
            let seed = derive_seed(config.rng_seed, size as u64, rep as u64);
            mh_run_once(&data, config, size, seed)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut rep_errors = Vec::with_capacity(config.training_sizes.len());
    let mut it = flat.into_iter();
    for _ in 0..config.training_sizes.len() {
        rep_errors.push((&mut it).take(config.repetitions).collect());
    }
    Ok(LearningCurve {
        name: "mh".to_string(),
        sizes: config.training_sizes.clone(),
        rep_errors,
    })
}

/// How the fused-feature baseline concatenates the PCA-reduced subsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FusionMode {
    /// All subsets into one classifier.
    All,
    /// One classifier per derivative (its scales concatenated), decisions
    /// combined across derivatives.
    PerDerivative,
    /// One classifier per scale (its derivatives concatenated), decisions
    /// combined across scales.
    PerScale,
}

impl FusionMode {
    /// Stable name used in curve and file names.
    pub fn name(self) -> &'static str {
        match self {
            FusionMode::All => "all",
            FusionMode::PerDerivative => "per_derivative",
            FusionMode::PerScale => "per_scale",
        }
    }

    fn feature_mode(self) -> FeatureMode {
        match self {
            FusionMode::All => FeatureMode::FusedAll,
            FusionMode::PerDerivative => FeatureMode::FusedByDerivative,
            FusionMode::PerScale => FeatureMode::FusedByScale,
        }
    }
}

impl FromStr for FusionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "all" => Ok(FusionMode::All),
            "per-derivative" | "per_derivative" => Ok(FusionMode::PerDerivative),
            "per-scale" | "per_scale" => Ok(FusionMode::PerScale),
            other => Err(Error::Config(format!(
                "unknown fusion mode '{other}'; expected all, per-derivative or per-scale"
            ))),
        }
    }
}

/// Learning curve of the fused-feature baseline: subsets are concatenated
/// (after their per-subset PCA) into one classifier per fused group, and
/// group decisions are merged with the configured stage-2 rule. Shares
/// pools, seeds and draws with the main pipeline.
pub fn cfs_baseline(config: &ExperimentConfig, fusion: FusionMode) -> Result<LearningCurve> {
    let (outcomes, _) = evaluate_curves(config, fusion.feature_mode())?;
    Ok(LearningCurve {
        name: format!("cfs_{}", fusion.name()),
        sizes: config.training_sizes.clone(),
        rep_errors: outcomes
            .iter()
            .map(|reps| reps.iter().map(|o| o.combined_error).collect())
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::config::{BaseClassifier, SyntheticKind, SyntheticSpec};

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            synthetic: vec![
                SyntheticSpec {
                    kind: SyntheticKind::Sinusoid {
                        wavelength: 8.0,
                        angle: 0.0,
                        noise_amplitude: 5.0,
                    },
                    size: 96,
                    seed: None,
                },
                SyntheticSpec {
                    kind: SyntheticKind::FilteredNoise { sigma: 2.0 },
                    size: 96,
                    seed: None,
                },
            ],
            base_classifier: BaseClassifier::Knn,
            training_sizes: vec![3, 5],
            test_size: 6,
            repetitions: 2,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn moment_oracle_on_a_bernoulli_sample() {
        // {0,0,0,1}: mean 1/4, sample std 1/2, skewness 2/sqrt(3),
        // kurtosis 7/3 — all derivable by hand from the definitions.
        let [mean, std, skew, kurt] = response_moments(&[0.0, 0.0, 0.0, 1.0]);
        assert!((mean - 0.25).abs() < 1e-12);
        assert!((std - 0.5).abs() < 1e-12);
        assert!((skew - 2.0 / 3.0_f64.sqrt()).abs() < 1e-12);
        assert!((kurt - 7.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn constant_input_has_safe_moments() {
        let [mean, std, skew, kurt] = response_moments(&[5.0; 9]);
        assert_eq!(mean, 5.0);
        assert_eq!(std, 0.0);
        assert_eq!(skew, 0.0);
        assert_eq!(kurt, 0.0);
    }

    #[test]
    fn moment_features_have_four_per_subset() {
        let patch = Array2::from_shape_fn((32, 32), |(y, x)| ((y * 31 + x * 17) % 13) as f64);
        let sigmas = [1.0, 2.0, 7.0_f64.sqrt()];
        let features = mh_features(&patch, &sigmas).unwrap();
        assert_eq!(features.len(), 72);
        assert!(features.iter().all(|v| v.is_finite()));
        assert_eq!(features, mh_features(&patch, &sigmas).unwrap());
    }

    #[test]
    fn column_standardization_zeroes_dead_columns() {
        let mut train = vec![vec![1.0, 7.0], vec![3.0, 7.0]];
        let mut test = vec![vec![2.0, 100.0]];
        standardize_columns(&mut train, &mut test);
        // Column 0: mean 2, sample std sqrt(2).
        let s = 2.0_f64.sqrt();
        assert!((train[0][0] + 1.0 / s).abs() < 1e-12);
        assert!((train[1][0] - 1.0 / s).abs() < 1e-12);
        assert_eq!(train[0][1], 0.0);
        assert_eq!(
            test[0][1], 0.0,
            "dead column must be zeroed in the test set too"
        );
        assert!((test[0][0] - 0.0).abs() < 1e-12);
    }

    #[test]
    fn mh_baseline_is_reproducible() {
        let config = tiny_config();
        let a = mh_baseline(&config).unwrap();
        let b = mh_baseline(&config).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.name, "mh");
        assert_eq!(a.sizes, vec![3, 5]);
        assert_eq!(a.repetitions(), 2);
        for reps in &a.rep_errors {
            for e in reps {
                assert!((0.0..=1.0).contains(e));
            }
        }
    }

    #[test]
    fn fusion_modes_parse_and_run() {
        assert_eq!("all".parse::<FusionMode>().unwrap(), FusionMode::All);
        assert_eq!(
            "per-derivative".parse::<FusionMode>().unwrap(),
            FusionMode::PerDerivative
        );
        assert_eq!(
            "per_scale".parse::<FusionMode>().unwrap(),
            FusionMode::PerScale
        );
        assert!("everything".parse::<FusionMode>().is_err());

        let config = tiny_config();
        let curve = cfs_baseline(&config, FusionMode::All).unwrap();
        assert_eq!(curve.name, "cfs_all");
        assert_eq!(curve.sizes, vec![3, 5]);
        assert_eq!(curve, cfs_baseline(&config, FusionMode::All).unwrap());

        let per_scale = cfs_baseline(&config, FusionMode::PerScale).unwrap();
        assert_eq!(per_scale.name, "cfs_per_scale");
    }
}
