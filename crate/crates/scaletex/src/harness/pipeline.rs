//! The end-to-end experiment pipeline: class images are split into
//! training and test halves once; each evaluation run then samples patch
//! subsets, computes multiscale derivative features, reduces every subset
//! with its own PCA, trains one base classifier per subset (or per fused
//! group), and combines the resulting decision profile into a single
//! prediction.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{BaseClassifier, ExperimentConfig};
use super::io::load_grayscale;
use crate::classifiers::{
    neighbor_confidences, qdc_confidences, train_neighbor, train_qdc, NeighborMode, NeighborModel,
    QdcModel,
};
use crate::combiners::{
    argmax_class, build_decision_profile, combine, combine_one_stage, majority_vote, CombineRule,
    Topology,
};
use crate::error::{Error, Result};
use crate::features::{fit_pca, pca_transform_batch, PcaModel};
use crate::patching::{
    crop_and_vectorize, extract_patches, preprocess_patch, split_halves, HalfId, PatchGrid,
};
use crate::scale_space::{compute_njet, DerivativeId};
use crate::Image;

/// Identifies one feature subset: a derivative filter at one scale.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubsetId {
    pub derivative: DerivativeId,
    pub scale_index: usize,
}

impl SubsetId {
    /// Human-readable name, e.g. `Lxy_s2` for the cross derivative at the
    /// second scale.
    pub fn label(&self) -> String {
        format!("{}_s{}", self.derivative.label(), self.scale_index + 1)
    }
}

/// All subsets in canonical order: derivative-major with the scale index
/// varying fastest, so subset `i` sits at decision-profile row
/// `s + k * ns`.
pub fn subset_ids(num_scales: usize) -> Vec<SubsetId> {
    let mut ids = Vec::with_capacity(DerivativeId::ALL.len() * num_scales);
    for derivative in DerivativeId::ALL {
        for scale_index in 0..num_scales {
            ids.push(SubsetId {
                derivative,
                scale_index,
            });
        }
    }
    ids
}

/// Patch pools prepared once per experiment: the upper image half feeds
/// training draws, the lower half feeds test draws, so the two sets can
/// never share pixels.
pub struct ExperimentData {
    upper: Vec<PatchGrid>,
    lower: Vec<PatchGrid>,
}

impl ExperimentData {
    /// Number of classes.
    pub fn num_classes(&self) -> usize {
        self.upper.len()
    }

    /// Training-pool size (patch count) for one class.
    pub fn training_pool_len(&self, class: usize) -> usize {
        self.upper[class].len()
    }

    /// Test-pool size (patch count) for one class.
    pub fn test_pool_len(&self, class: usize) -> usize {
        self.lower[class].len()
    }
}

/// Loads (or synthesizes) the class images and cuts both halves of each
/// into dense patch pools. Fails early if any pool cannot cover the
/// configured training sizes or test quota.
pub fn prepare_experiment(config: &ExperimentConfig) -> Result<ExperimentData> {
    config.validate()?;
    let images: Vec<Image> = if config.class_image_paths.is_empty() {
        config
            .synthetic
            .iter()
            .enumerate()
            .map(|(class, spec)| spec.generate(config.rng_seed, class))
            .collect::<Result<_>>()?
    } else {
        config
            .class_image_paths
            .iter()
            .map(load_grayscale)
            .collect::<Result<_>>()?
    };

    let mut upper = Vec::with_capacity(images.len());
    let mut lower = Vec::with_capacity(images.len());
    for image in &images {
        let (top, bottom) = split_halves(image)?;
        upper.push(extract_patches(
            &top,
            config.patch_size,
            config.patch_stride,
            HalfId::Upper,
        )?);
        lower.push(extract_patches(
            &bottom,
            config.patch_size,
            config.patch_stride,
            HalfId::Lower,
        )?);
    }

    let c = images.len();
    let max_train = config.training_sizes.iter().copied().max().unwrap_or(0);
    let (base, rem) = (config.test_size / c, config.test_size % c);
    for class in 0..c {
        if max_train > upper[class].len() {
            return Err(Error::InsufficientData(format!(
                "class {class}: training pool holds {} patches but the largest \
                 training size is {max_train}",
                upper[class].len()
            )));
        }
        let quota = base + usize::from(class < rem);
        if quota > lower[class].len() {
            return Err(Error::InsufficientData(format!(
                "class {class}: test pool holds {} patches but its share of \
                 test_size={} is {quota}",
                lower[class].len(),
                config.test_size
            )));
        }
    }
    Ok(ExperimentData { upper, lower })
}

/// One evaluation run's results.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    /// Misclassification rate of the combined classifier.
    pub combined_error: f64,
    /// Misclassification rate of each stand-alone subset classifier, in
    /// canonical subset order. Empty when subsets are fused before
    /// classification (no stand-alone subset classifiers exist then).
    pub subset_errors: Vec<f64>,
    /// Misclassification rate of each stage-1 group (two-stage topologies)
    /// or fused-group classifier. Empty for the plain one-stage topology.
    pub group_errors: Vec<f64>,
    /// Names aligned with `group_errors`.
    pub group_labels: Vec<String>,
    /// Retained PCA dimension per subset, canonical order.
    pub pca_dims: Vec<usize>,
}

/// How subset features reach the classifiers: one classifier per subset,
/// or concatenated (fused) groups feeding one classifier each.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum FeatureMode {
    PerSubset,
    FusedByDerivative,
    FusedByScale,
    FusedAll,
}

impl FeatureMode {
    pub(crate) fn from_topology(topology: Topology) -> FeatureMode {
        match topology {
            Topology::OneStage
            | Topology::ScalesThenDerivatives
            | Topology::DerivativesThenScales => FeatureMode::PerSubset,
            Topology::FuseScalesThenCombine => FeatureMode::FusedByDerivative,
            Topology::FuseDerivativesThenCombine => FeatureMode::FusedByScale,
        }
    }
}

pub(crate) struct Drawn<'a> {
    pub(crate) train_patches: Vec<&'a Array2<f64>>,
    pub(crate) train_labels: Vec<usize>,
    pub(crate) test_patches: Vec<&'a Array2<f64>>,
    pub(crate) test_labels: Vec<usize>,
}

/// Draws a balanced training sample (per-class, without replacement, from
/// the upper pools) and a test sample of `test_size` patches total from
/// the lower pools (even split, remainder to the lowest class indices).
/// Fully determined by `seed`.
pub(crate) fn draw_split<'a>(
    data: &'a ExperimentData,
    config: &ExperimentConfig,
    training_size: usize,
    seed: u64,
) -> Result<Drawn<'a>> {
    let c = data.num_classes();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (base, rem) = (config.test_size / c, config.test_size % c);
    let mut drawn = Drawn {
        train_patches: Vec::with_capacity(training_size * c),
        train_labels: Vec::with_capacity(training_size * c),
        test_patches: Vec::with_capacity(config.test_size),
        test_labels: Vec::with_capacity(config.test_size),
    };
    for class in 0..c {
        let pool = &data.upper[class];
        if training_size > pool.len() {
            return Err(Error::InsufficientData(format!(
                "class {class}: requested {training_size} training patches from \
                 a pool of {}",
                pool.len()
            )));
        }
        let mut indices: Vec<usize> = (0..pool.len()).collect();
        indices.shuffle(&mut rng);
        for &i in &indices[..training_size] {
            drawn.train_patches.push(&pool.patches()[i]);
            drawn.train_labels.push(class);
        }

        let quota = base + usize::from(class < rem);
        let pool = &data.lower[class];
        if quota > pool.len() {
            return Err(Error::InsufficientData(format!(
                "class {class}: requested {quota} test patches from a pool of {}",
                pool.len()
            )));
        }
        let mut indices: Vec<usize> = (0..pool.len()).collect();
        indices.shuffle(&mut rng);
        for &i in &indices[..quota] {
            drawn.test_patches.push(&pool.patches()[i]);
            drawn.test_labels.push(class);
        }
    }
    Ok(drawn)
}

/// Computes the per-subset feature vectors for every patch and returns
/// them subset-major: `table[subset][patch]`.
fn subset_feature_table(
    patches: &[&Array2<f64>],
    config: &ExperimentConfig,
) -> Result<Vec<Vec<Vec<f64>>>> {
    let per_patch: Vec<Vec<Vec<f64>>> = patches
        .par_iter()
        .map(|patch| -> Result<Vec<Vec<f64>>> {
            let (standardized, _constant) = preprocess_patch(patch)?;
            let jet = compute_njet(&standardized, &config.sigmas, 2)?;
            let mut subsets = Vec::with_capacity(jet.len());
            for (derivative, scale_index, response) in jet.iter() {
                let subset = crop_and_vectorize(
                    response,
                    derivative,
                    scale_index,
                    config.crop_sizes[scale_index],
                    config.subsample_strides[scale_index],
                )?;
                subsets.push(subset.values);
            }
            Ok(subsets)
        })
        .collect::<Result<Vec<_>>>()?;

    let n_subsets = per_patch.first().map_or(0, Vec::len);
    let mut table = vec![Vec::with_capacity(per_patch.len()); n_subsets];
    for mut row in per_patch {
        for (i, values) in row.drain(..).enumerate() {
            table[i].push(values);
        }
    }
    Ok(table)
}

enum TrainedBase {
    Qdc(QdcModel),
    Neighbor(NeighborModel),
}

fn train_base(
    kind: BaseClassifier,
    data: &[Vec<f64>],
    labels: &[usize],
    regularization: (f64, f64),
) -> Result<TrainedBase> {
    match kind {
        BaseClassifier::Qdc => {
            train_qdc(data, labels, regularization.0, regularization.1).map(TrainedBase::Qdc)
        }
        BaseClassifier::Knn => {
            train_neighbor(data, labels, NeighborMode::Knn, None).map(TrainedBase::Neighbor)
        }
        BaseClassifier::Parzen => {
            train_neighbor(data, labels, NeighborMode::Parzen, None).map(TrainedBase::Neighbor)
        }
    }
}

fn base_confidences(model: &TrainedBase, x: &[f64]) -> Result<Vec<f64>> {
    match model {
        TrainedBase::Qdc(m) => qdc_confidences(m, x),
        TrainedBase::Neighbor(m) => neighbor_confidences(m, x),
    }
}

fn misclassification_rate(confidences: &[Vec<f64>], labels: &[usize]) -> Result<f64> {
    let mut wrong = 0usize;
    for (conf, &label) in confidences.iter().zip(labels) {
        if argmax_class(conf)? != label {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / labels.len() as f64)
}

fn tag_singular(e: Error, unit: &str) -> Error {
    match e {
        Error::SingularCovariance { context } => Error::SingularCovariance {
            context: format!("{context} [unit {unit}]"),
        },
        other => other,
    }
}

/// One trained classification unit (a subset or a fused group) evaluated
/// on the test sample.
struct UnitOutput {
    confidences: Vec<Vec<f64>>,
    error: f64,
}

fn evaluate_unit(
    unit_label: &str,
    train: &[Vec<f64>],
    test: &[Vec<f64>],
    train_labels: &[usize],
    test_labels: &[usize],
    kind: BaseClassifier,
    regularization: (f64, f64),
) -> Result<UnitOutput> {
    let model = train_base(kind, train, train_labels, regularization)
        .map_err(|e| tag_singular(e, unit_label))?;
    let confidences: Vec<Vec<f64>> = test
        .iter()
        .map(|x| base_confidences(&model, x))
        .collect::<Result<_>>()?;
    let error = misclassification_rate(&confidences, test_labels)?;
    Ok(UnitOutput { confidences, error })
}

/// Reduces confidence rows to one support vector with a plain rule, or by
/// plurality vote (which yields a one-hot vector).
fn reduce_rows(
    rows: &[Vec<f64>],
    ns: usize,
    nd: usize,
    rule: CombineRule,
    num_classes: usize,
) -> Result<Vec<f64>> {
    let dp = build_decision_profile(rows, ns, nd)?;
    if rule == CombineRule::Vote {
        let mut one_hot = vec![0.0; num_classes];
        one_hot[majority_vote(&dp)] = 1.0;
        Ok(one_hot)
    } else {
        combine_one_stage(&dp, rule)
    }
}

fn derivative_groups(ns: usize) -> Vec<(String, Vec<usize>)> {
    DerivativeId::ALL
        .iter()
        .enumerate()
        .map(|(k, d)| {
            let members = (0..ns).map(|s| s + k * ns).collect();
            (format!("group_{}", d.label()), members)
        })
        .collect()
}

fn scale_groups(ns: usize) -> Vec<(String, Vec<usize>)> {
    (0..ns)
        .map(|s| {
            let members = (0..DerivativeId::ALL.len()).map(|k| s + k * ns).collect();
            (format!("group_s{}", s + 1), members)
        })
        .collect()
}

/// Stage-1 diagnostic groups of a two-stage topology (None for one-stage).
fn stage1_groups(topology: Topology, ns: usize) -> Option<Vec<(String, Vec<usize>)>> {
    match topology {
        Topology::ScalesThenDerivatives => Some(derivative_groups(ns)),
        Topology::DerivativesThenScales => Some(scale_groups(ns)),
        _ => None,
    }
}

fn fused_groups(mode: FeatureMode, ns: usize) -> Vec<(String, Vec<usize>)> {
    match mode {
        FeatureMode::FusedByDerivative => derivative_groups(ns),
        FeatureMode::FusedByScale => scale_groups(ns),
        FeatureMode::FusedAll => vec![(
            "group_all".to_string(),
            (0..ns * DerivativeId::ALL.len()).collect(),
        )],
        FeatureMode::PerSubset => unreachable!("per-subset mode has no fused groups"),
    }
}

/// Names of the group curves an experiment will produce under `mode`,
/// without running anything (used to shape result tables up front).
pub(crate) fn group_labels_for_mode(config: &ExperimentConfig, mode: FeatureMode) -> Vec<String> {
    let ns = config.num_scales();
    match mode {
        FeatureMode::PerSubset => stage1_groups(config.combiner.topology, ns)
            .map(|groups| groups.into_iter().map(|(label, _)| label).collect())
            .unwrap_or_default(),
        mode => fused_groups(mode, ns)
            .into_iter()
            .map(|(label, _)| label)
            .collect(),
    }
}

fn concat_members(tables: &[Vec<Vec<f64>>], members: &[usize]) -> Vec<Vec<f64>> {
    let n = tables[members[0]].len();
    (0..n)
        .map(|j| {
            members
                .iter()
                .flat_map(|&i| tables[i][j].iter().copied())
                .collect()
        })
        .collect()
}

/// Runs one full train/evaluate cycle on prepared data. Deterministic in
/// `seed`.
pub fn run_pipeline_once_prepared(
    data: &ExperimentData,
    config: &ExperimentConfig,
    training_size: usize,
    seed: u64,
) -> Result<PipelineOutcome> {
    run_with_mode(
        data,
        config,
        training_size,
        seed,
        FeatureMode::from_topology(config.combiner.topology),
    )
}

pub(crate) fn run_with_mode(
    data: &ExperimentData,
    config: &ExperimentConfig,
    training_size: usize,
    seed: u64,
    mode: FeatureMode,
) -> Result<PipelineOutcome> {
    let ns = config.num_scales();
    let nd = DerivativeId::ALL.len();
    let n_subsets = ns * nd;
    let c = data.num_classes();
    let drawn = draw_split(data, config, training_size, seed)?;

    if c == 1 {
        // A single class is always predicted correctly; nothing to train.
        return Ok(PipelineOutcome {
            combined_error: 0.0,
            subset_errors: vec![0.0; n_subsets],
            group_errors: Vec::new(),
            group_labels: Vec::new(),
            pca_dims: vec![0; n_subsets],
        });
    }

    let train_table = subset_feature_table(&drawn.train_patches, config)?;
    let test_table = subset_feature_table(&drawn.test_patches, config)?;
    let ids = subset_ids(ns);

    // Per-subset PCA is shared by every mode: fused groups concatenate the
    // reduced subsets rather than re-deriving a joint basis.
    type SubsetReduction = (PcaModel, Vec<Vec<f64>>, Vec<Vec<f64>>);
    let reductions: Vec<SubsetReduction> = (0..n_subsets)
        .into_par_iter()
        .map(|i| -> Result<SubsetReduction> {
            let pca = fit_pca(&train_table[i], config.pca_fraction)?;
            let train_red = pca_transform_batch(&pca, &train_table[i])?;
            let test_red = pca_transform_batch(&pca, &test_table[i])?;
            Ok((pca, train_red, test_red))
        })
        .collect::<Result<Vec<_>>>()?;
    let pca_dims: Vec<usize> = reductions
        .iter()
        .map(|(p, _, _)| p.num_components())
        .collect();
    let train_red: Vec<Vec<Vec<f64>>> = reductions.iter().map(|(_, tr, _)| tr.clone()).collect();
    let test_red: Vec<Vec<Vec<f64>>> = reductions.into_iter().map(|(_, _, te)| te).collect();

    let n_test = drawn.test_labels.len();
    match mode {
        FeatureMode::PerSubset => {
            let units: Vec<UnitOutput> = (0..n_subsets)
                .into_par_iter()
                .map(|i| {
                    evaluate_unit(
                        &ids[i].label(),
                        &train_red[i],
                        &test_red[i],
                        &drawn.train_labels,
                        &drawn.test_labels,
                        config.base_classifier,
                        config.regularization[ids[i].scale_index],
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let subset_errors: Vec<f64> = units.iter().map(|u| u.error).collect();

            let spec = &config.combiner;
            let diagnostics = stage1_groups(spec.topology, ns);
            let mut combined_wrong = 0usize;
            let mut group_wrong = vec![0usize; diagnostics.as_ref().map_or(0, Vec::len)];
            for t in 0..n_test {
                let rows: Vec<Vec<f64>> = units.iter().map(|u| u.confidences[t].clone()).collect();
                let dp = build_decision_profile(&rows, ns, nd)?;
                let fused = combine(&dp, spec)?;
                if argmax_class(&fused)? != drawn.test_labels[t] {
                    combined_wrong += 1;
                }
                if let Some(groups) = &diagnostics {
                    for (g, (_, members)) in groups.iter().enumerate() {
                        let member_rows: Vec<Vec<f64>> =
                            members.iter().map(|&i| rows[i].clone()).collect();
                        let support =
                            reduce_rows(&member_rows, member_rows.len(), 1, spec.rule_stage1, c)?;
                        if argmax_class(&support)? != drawn.test_labels[t] {
                            group_wrong[g] += 1;
                        }
                    }
                }
            }
            let group_labels: Vec<String> = diagnostics
                .map(|groups| groups.into_iter().map(|(label, _)| label).collect())
                .unwrap_or_default();
            Ok(PipelineOutcome {
                combined_error: combined_wrong as f64 / n_test as f64,
                subset_errors,
                group_errors: group_wrong
                    .into_iter()
                    .map(|w| w as f64 / n_test as f64)
                    .collect(),
                group_labels,
                pca_dims,
            })
        }
        _ => {
            let groups = fused_groups(mode, ns);
            let units: Vec<UnitOutput> = groups
                .par_iter()
                .map(|(label, members)| {
                    let train_cat = concat_members(&train_red, members);
                    let test_cat = concat_members(&test_red, members);
                    // The fused classifier is regularized like its finest
                    // contained scale.
                    let finest = members.iter().map(|&i| ids[i].scale_index).min().unwrap();
                    evaluate_unit(
                        label,
                        &train_cat,
                        &test_cat,
                        &drawn.train_labels,
                        &drawn.test_labels,
                        config.base_classifier,
                        config.regularization[finest],
                    )
                })
                .collect::<Result<Vec<_>>>()?;

            let (gns, gnd) = match mode {
                FeatureMode::FusedByDerivative => (1, groups.len()),
                FeatureMode::FusedByScale => (groups.len(), 1),
                FeatureMode::FusedAll => (1, 1),
                FeatureMode::PerSubset => unreachable!(),
            };
            let mut combined_wrong = 0usize;
            for t in 0..n_test {
                let rows: Vec<Vec<f64>> = units.iter().map(|u| u.confidences[t].clone()).collect();
                let support = reduce_rows(&rows, gns, gnd, config.combiner.rule_stage2, c)?;
                if argmax_class(&support)? != drawn.test_labels[t] {
                    combined_wrong += 1;
                }
            }
            Ok(PipelineOutcome {
                combined_error: combined_wrong as f64 / n_test as f64,
                subset_errors: Vec::new(),
                group_errors: units.iter().map(|u| u.error).collect(),
                group_labels: groups.into_iter().map(|(label, _)| label).collect(),
                pca_dims,
            })
        }
    }
}

/// Prepares the experiment data and runs a single evaluation, returning
/// the combined classifier's error rate.
pub fn run_pipeline_once(
    config: &ExperimentConfig,
    training_size: usize,
    repetition_seed: u64,
) -> Result<f64> {
    let data = prepare_experiment(config)?;
    Ok(run_pipeline_once_prepared(&data, config, training_size, repetition_seed)?.combined_error)
}
