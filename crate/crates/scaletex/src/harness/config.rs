//! Experiment configuration: a flat, TOML-serializable description of the
//! dataset, feature settings, classifiers, combiner, and evaluation grid.
//! Every field has a default; the dataset (image paths or synthetic recipes)
//! is the only part that must be supplied.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::combiners::{CombineRule, CombinerSpec, Topology};
use crate::error::{Error, Result};

/// Which base classifier each feature subset gets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaseClassifier {
    Qdc,
    Knn,
    Parzen,
}

impl BaseClassifier {
    /// Stable lowercase name.
    pub fn name(self) -> &'static str {
        match self {
            BaseClassifier::Qdc => "qdc",
            BaseClassifier::Knn => "knn",
            BaseClassifier::Parzen => "parzen",
        }
    }
}

impl std::str::FromStr for BaseClassifier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qdc" => Ok(BaseClassifier::Qdc),
            "knn" => Ok(BaseClassifier::Knn),
            "parzen" => Ok(BaseClassifier::Parzen),
            other => Err(Error::Config(format!(
                "unknown base classifier {other:?}; expected qdc|knn|parzen"
            ))),
        }
    }
}

/// One synthetic texture family and its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SyntheticKind {
    /// Oriented grating: `127.5 * sin(2π (x sinθ + y cosθ) / wavelength)`
    /// plus Gaussian pixel noise. Angle 0 makes every row constant.
    Sinusoid {
        wavelength: f64,
        #[serde(default)]
        angle: f64,
        #[serde(default = "default_noise_amplitude")]
        noise_amplitude: f64,
    },
    /// Axis-aligned checkerboard with `cell`-pixel squares plus noise.
    Checkerboard {
        cell: usize,
        #[serde(default = "default_noise_amplitude")]
        noise_amplitude: f64,
    },
    /// White Gaussian noise smoothed by a Gaussian of scale `sigma`.
    FilteredNoise { sigma: f64 },
    /// Smoothed noise thresholded at the given quantile into two levels.
    Blobs {
        sigma: f64,
        #[serde(default = "default_blob_threshold")]
        threshold: f64,
    },
}

fn default_noise_amplitude() -> f64 {
    20.0
}

fn default_blob_threshold() -> f64 {
    0.5
}

/// A synthetic class image: family, side length, and an optional fixed seed
/// (derived from the experiment seed when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    #[serde(flatten)]
    pub kind: SyntheticKind,
    #[serde(default = "default_synth_size")]
    pub size: usize,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_synth_size() -> usize {
    640
}

/// Complete description of one experiment. TOML files mirror these field
/// names exactly, and each field can be overridden by a same-named CLI flag.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// One grayscale image per class (portable graymap or PNG). Mutually
    /// exclusive with `synthetic`.
    pub class_image_paths: Vec<PathBuf>,
    /// One synthetic recipe per class. Mutually exclusive with
    /// `class_image_paths`.
    pub synthetic: Vec<SyntheticSpec>,
    /// Gaussian scales, strictly increasing. Default sigma^2 = 1, 4, 7.
    pub sigmas: Vec<f64>,
    /// Central crop side per scale. Default 18/24/30.
    pub crop_sizes: Vec<usize>,
    /// Keep-every-n subsampling per scale. Default 1 (off) everywhere.
    pub subsample_strides: Vec<usize>,
    /// Side of the square patches cut from each half.
    pub patch_size: usize,
    /// Grid stride of patch extraction.
    pub patch_stride: usize,
    /// Variance fraction each per-subset PCA retains.
    pub pca_fraction: f64,
    /// Per-scale QDC shrinkage `(eta, lambda)`. Default regularizes only
    /// the finest scale with (0.01, 0.01).
    pub regularization: Vec<(f64, f64)>,
    /// Base classifier applied to every subset.
    pub base_classifier: BaseClassifier,
    /// How subset decisions are combined.
    pub combiner: CombinerSpec,
    /// Training sizes, per class.
    pub training_sizes: Vec<usize>,
    /// Total test patches, split evenly across classes (remainder to the
    /// lowest class indices).
    pub test_size: usize,
    /// Repetitions per training size.
    pub repetitions: usize,
    /// Master seed; every repetition derives its own stream from it.
    pub rng_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            class_image_paths: Vec::new(),
            synthetic: Vec::new(),
            sigmas: vec![1.0, 2.0, 7.0_f64.sqrt()],
            crop_sizes: vec![18, 24, 30],
            subsample_strides: vec![1, 1, 1],
            patch_size: 32,
            patch_stride: 10,
            pca_fraction: 0.95,
            regularization: vec![(0.01, 0.01), (0.0, 0.0), (0.0, 0.0)],
            base_classifier: BaseClassifier::Qdc,
            combiner: CombinerSpec {
                topology: Topology::DerivativesThenScales,
                rule_stage1: CombineRule::Mean,
                rule_stage2: CombineRule::Mean,
            },
            training_sizes: vec![10, 20, 40, 60, 100, 150, 200, 300, 500, 700, 1000, 1500],
            test_size: 900,
            repetitions: 5,
            rng_seed: 42,
        }
    }
}

impl ExperimentConfig {
    /// The bundled four-class synthetic dataset: two sinusoid orientations,
    /// a checkerboard, and smoothed noise, each 640x640 with shared noise
    /// amplitude. Seeds derive from `rng_seed` unless set explicitly.
    pub fn four_class_preset() -> Self {
        ExperimentConfig {
            synthetic: four_class_recipes(640),
            ..ExperimentConfig::default()
        }
    }

    /// Number of classes described by the dataset fields.
    pub fn num_classes(&self) -> usize {
        if self.class_image_paths.is_empty() {
            self.synthetic.len()
        } else {
            self.class_image_paths.len()
        }
    }

    /// Number of scales.
    pub fn num_scales(&self) -> usize {
        self.sigmas.len()
    }

    /// Parses a TOML document into a config.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        Ok(config)
    }

    /// Reads and parses a TOML config file.
    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Serializes the config as TOML.
    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Checks internal consistency. Pool-size constraints (training sizes
    /// vs. available patches) depend on the images and are checked when the
    /// experiment data is prepared.
    pub fn validate(&self) -> Result<()> {
        if self.class_image_paths.is_empty() && self.synthetic.is_empty() {
            return Err(Error::Config(
                "no dataset: set class_image_paths or synthetic".into(),
            ));
        }
        if !self.class_image_paths.is_empty() && !self.synthetic.is_empty() {
            return Err(Error::Config(
                "class_image_paths and synthetic are mutually exclusive".into(),
            ));
        }
        let ns = self.sigmas.len();
        if ns == 0 {
            return Err(Error::Config("sigmas must be nonempty".into()));
        }
        if self.sigmas.iter().any(|s| !(*s > 0.0)) {
            return Err(Error::Config("sigmas must be positive".into()));
        }
        if self.sigmas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("sigmas must be strictly increasing".into()));
        }
        for (name, len) in [
            ("crop_sizes", self.crop_sizes.len()),
            ("subsample_strides", self.subsample_strides.len()),
            ("regularization", self.regularization.len()),
        ] {
            if len != ns {
                return Err(Error::Config(format!(
                    "{name} has {len} entries but there are {ns} sigmas"
                )));
            }
        }
        if self.patch_size == 0 || self.patch_stride == 0 {
            return Err(Error::Config(
                "patch_size and patch_stride must be at least 1".into(),
            ));
        }
        for &crop in &self.crop_sizes {
            if crop == 0 || crop > self.patch_size {
                return Err(Error::Config(format!(
                    "crop size {crop} must lie in [1, patch_size={}]",
                    self.patch_size
                )));
            }
            if !(self.patch_size - crop).is_multiple_of(2) {
                return Err(Error::Config(format!(
                    "crop size {crop} cannot be centered in patch_size {}",
                    self.patch_size
                )));
            }
        }
        if self.subsample_strides.contains(&0) {
            return Err(Error::Config("subsample_strides must be at least 1".into()));
        }
        if !(self.pca_fraction > 0.0 && self.pca_fraction <= 1.0) {
            return Err(Error::Config(format!(
                "pca_fraction must lie in (0, 1], got {}",
                self.pca_fraction
            )));
        }
        for &(eta, lambda) in &self.regularization {
            if eta < 0.0 || lambda < 0.0 || eta + lambda >= 1.0 {
                return Err(Error::Config(format!(
                    "regularization (eta={eta}, lambda={lambda}) must be nonnegative with eta + lambda < 1"
                )));
            }
        }
        if self.training_sizes.is_empty() || self.training_sizes.contains(&0) {
            return Err(Error::Config(
                "training_sizes must be nonempty positive counts".into(),
            ));
        }
        if self.test_size == 0 {
            return Err(Error::Config("test_size must be at least 1".into()));
        }
        if self.repetitions == 0 {
            return Err(Error::Config("repetitions must be at least 1".into()));
        }
        for spec in &self.synthetic {
            if spec.size < 64 {
                return Err(Error::Config(format!(
                    "synthetic size {} is below the minimum of 64",
                    spec.size
                )));
            }
            if spec.size < 2 * self.patch_size {
                return Err(Error::Config(format!(
                    "synthetic size {} cannot hold a {}-pixel patch in each half",
                    spec.size, self.patch_size
                )));
            }
        }
        Ok(())
    }
}

/// The four synthetic class recipes of the bundled preset.
///
/// Pattern periods are chosen incommensurate with the patch stride (10):
/// a period that divides into the stride grid makes every patch of a half
/// sample the same handful of pattern phases, and the two halves can end up
/// sampling *different* phases, which turns the train/test split into a
/// distribution shift. Wavelength 13 and cell 7 (period 14) cycle through
/// every reachable phase in both halves.
pub(crate) fn four_class_recipes(size: usize) -> Vec<SyntheticSpec> {
    let noise = 20.0;
    vec![
        SyntheticSpec {
            kind: SyntheticKind::Sinusoid {
                wavelength: 13.0,
                angle: 0.0,
                noise_amplitude: noise,
            },
            size,
            seed: None,
        },
        SyntheticSpec {
            kind: SyntheticKind::Sinusoid {
                wavelength: 13.0,
                angle: std::f64::consts::FRAC_PI_2,
                noise_amplitude: noise,
            },
            size,
            seed: None,
        },
        SyntheticSpec {
            kind: SyntheticKind::Checkerboard {
                cell: 7,
                noise_amplitude: noise,
            },
            size,
            seed: None,
        },
        SyntheticSpec {
            kind: SyntheticKind::FilteredNoise { sigma: 3.0 },
            size,
            seed: None,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal_synthetic() -> ExperimentConfig {
        ExperimentConfig {
            synthetic: vec![
                SyntheticSpec {
                    kind: SyntheticKind::FilteredNoise { sigma: 1.0 },
                    size: 128,
                    seed: Some(1),
                },
                SyntheticSpec {
                    kind: SyntheticKind::Checkerboard {
                        cell: 8,
                        noise_amplitude: 5.0,
                    },
                    size: 128,
                    seed: Some(2),
                },
            ],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn defaults_describe_the_standard_setup() {
        let config = ExperimentConfig::default();
        assert_eq!(config.sigmas.len(), 3);
        assert!((config.sigmas[2] * config.sigmas[2] - 7.0).abs() < 1e-12);
        assert_eq!(config.crop_sizes, vec![18, 24, 30]);
        assert_eq!(config.patch_size, 32);
        assert_eq!(config.patch_stride, 10);
        assert_eq!(config.test_size, 900);
        assert_eq!(config.repetitions, 5);
        assert_eq!(config.training_sizes.len(), 12);
        assert_eq!(config.regularization[0], (0.01, 0.01));
        assert_eq!(config.regularization[1], (0.0, 0.0));
    }

    #[test]
    fn toml_round_trip_preserves_the_config() {
        let config = ExperimentConfig::four_class_preset();
        let text = config.to_toml_string().unwrap();
        let parsed = ExperimentConfig::from_toml_str(&text).unwrap();
        assert_eq!(parsed, config);
    }

    #[test]
    fn toml_accepts_partial_documents() {
        let config = ExperimentConfig::from_toml_str(
            r#"
            rng_seed = 7
            test_size = 100

            [[synthetic]]
            kind = "sinusoid"
            wavelength = 9.0
            size = 256
            "#,
        )
        .unwrap();
        assert_eq!(config.rng_seed, 7);
        assert_eq!(config.test_size, 100);
        assert_eq!(config.synthetic.len(), 1);
        match &config.synthetic[0].kind {
            SyntheticKind::Sinusoid {
                wavelength,
                angle,
                noise_amplitude,
            } => {
                assert_eq!(*wavelength, 9.0);
                assert_eq!(*angle, 0.0);
                assert_eq!(*noise_amplitude, 20.0);
            }
            other => panic!("wrong kind: {other:?}"),
        }
        // Untouched fields fall back to defaults.
        assert_eq!(config.patch_size, 32);
    }

    #[test]
    fn toml_rejects_unknown_fields() {
        let err = ExperimentConfig::from_toml_str("patchsize = 32").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn validate_requires_exactly_one_dataset() {
        let mut config = ExperimentConfig::default();
        assert!(config.validate().is_err());
        config = minimal_synthetic();
        assert!(config.validate().is_ok());
        config.class_image_paths = vec![PathBuf::from("x.pgm")];
        assert!(config.validate().is_err());
    }

    #[test]
    fn validate_checks_per_scale_lists_and_bounds() {
        let mut config = minimal_synthetic();
        config.crop_sizes = vec![18, 24];
        assert!(config.validate().is_err());

        let mut config = minimal_synthetic();
        config.crop_sizes = vec![17, 24, 30]; // parity violation
        assert!(config.validate().is_err());

        let mut config = minimal_synthetic();
        config.regularization = vec![(0.6, 0.5), (0.0, 0.0), (0.0, 0.0)];
        assert!(config.validate().is_err());

        let mut config = minimal_synthetic();
        config.sigmas = vec![2.0, 1.0, 3.0];
        config.validate().unwrap_err();

        let mut config = minimal_synthetic();
        config.pca_fraction = 1.5;
        assert!(config.validate().is_err());

        let mut config = minimal_synthetic();
        config.synthetic[0].size = 40;
        assert!(config.validate().is_err());
    }

    #[test]
    fn preset_has_four_distinct_classes() {
        let config = ExperimentConfig::four_class_preset();
        assert_eq!(config.num_classes(), 4);
        config.validate().unwrap();
        let kinds: Vec<_> = config.synthetic.iter().map(|s| &s.kind).collect();
        assert_ne!(kinds[0], kinds[1]); // same family, different angle
    }
}
