//! Nearest-neighbor and Parzen-window classifiers with leave-one-out
//! parameter selection.
//!
//! - `knn`: k is chosen from a grid (default: odd values 1..=25 capped at
//!   n-1) by minimizing leave-one-out classification error; confidences are
//!   class fractions among the k nearest training points.
//! - `parzen`: the Gaussian bandwidth h is chosen the same way from a
//!   geometric grid (default: 16 values spanning [0.05, 5] times the median
//!   pairwise training distance); confidences are normalized per-class
//!   kernel sums. The held-out point's own kernel contribution is excluded
//!   during selection.
//! - `nn1`: k fixed to 1, no selection.
//!
//! All ties — equal distances, equal vote counts, equal leave-one-out
//! errors — resolve deterministically: distances by training index, votes by
//! lowest class index, selection by smallest parameter.

use crate::error::{Error, Result};

/// Which neighbor classifier to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NeighborMode {
    Knn,
    Parzen,
    Nn1,
}

/// Candidate parameters for leave-one-out selection.
#[derive(Debug, Clone)]
pub enum SelectionGrid {
    /// Neighbor counts for `knn`.
    KValues(Vec<usize>),
    /// Gaussian bandwidths for `parzen`.
    Bandwidths(Vec<f64>),
}

/// The selected parameter of a trained neighbor model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NeighborParam {
    K(usize),
    Bandwidth(f64),
}

/// A trained (memorized) neighbor classifier.
#[derive(Debug, Clone)]
pub struct NeighborModel {
    data: Vec<Vec<f64>>,
    labels: Vec<usize>,
    num_classes: usize,
    mode: NeighborMode,
    param: NeighborParam,
}

impl NeighborModel {
    /// Number of classes.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.data[0].len()
    }

    /// Training-set size.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// True when the model holds no training points (never constructed).
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Mode the model was trained in.
    pub fn mode(&self) -> NeighborMode {
        self.mode
    }

    /// The selected k or h.
    pub fn param(&self) -> NeighborParam {
        self.param
    }
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum()
}

/// Plurality label among `(class, weight)` votes; ties to the lowest class.
fn weighted_argmax(votes: &[f64]) -> usize {
    let mut best = 0;
    for (j, v) in votes.iter().enumerate().skip(1) {
        if *v > votes[best] {
            best = j;
        }
    }
    best
}

/// The k nearest training indices to `x` (optionally excluding one index),
/// ordered by (distance, index).
fn nearest_indices(data: &[Vec<f64>], x: &[f64], k: usize, exclude: Option<usize>) -> Vec<usize> {
    let mut scored: Vec<(f64, usize)> = data
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != exclude)
        .map(|(i, p)| (squared_distance(x, p), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    scored.truncate(k);
    scored.into_iter().map(|(_, i)| i).collect()
}

fn knn_vote(labels: &[usize], neighbors: &[usize], num_classes: usize) -> Vec<f64> {
    let mut votes = vec![0.0; num_classes];
    for &i in neighbors {
        votes[labels[i]] += 1.0;
    }
    let total: f64 = votes.iter().sum();
    votes.iter().map(|v| v / total).collect()
}

/// Per-class Gaussian kernel sums around `x`, optionally excluding one
/// training index. Not normalized.
fn parzen_sums(
    data: &[Vec<f64>],
    labels: &[usize],
    num_classes: usize,
    x: &[f64],
    h: f64,
    exclude: Option<usize>,
) -> Vec<f64> {
    let mut sums = vec![0.0; num_classes];
    let scale = -0.5 / (h * h);
    for (i, p) in data.iter().enumerate() {
        if Some(i) == exclude {
            continue;
        }
        sums[labels[i]] += (squared_distance(x, p) * scale).exp();
    }
    sums
}

fn normalize_or_uniform(mut sums: Vec<f64>) -> Vec<f64> {
    let total: f64 = sums.iter().sum();
    if total > 0.0 {
        for v in &mut sums {
            *v /= total;
        }
        sums
    } else {
        let c = sums.len();
        vec![1.0 / c as f64; c]
    }
}

/// Default k grid: odd values 1, 3, …, 25 capped at n-1.
fn default_k_grid(n: usize) -> Vec<usize> {
    (1..=25).step_by(2).filter(|&k| k < n).collect()
}

/// Median pairwise distance over an (at most 512-point) evenly strided
/// subsample of the training set; 1.0 when the points coincide.
fn median_pairwise_distance(data: &[Vec<f64>]) -> f64 {
    let n = data.len();
    let stride = n.div_ceil(512);
    let subset: Vec<&Vec<f64>> = data.iter().step_by(stride).collect();
    let mut dists = Vec::with_capacity(subset.len() * (subset.len() - 1) / 2);
    for i in 0..subset.len() {
        for j in (i + 1)..subset.len() {
            dists.push(squared_distance(subset[i], subset[j]).sqrt());
        }
    }
    if dists.is_empty() {
        return 1.0;
    }
    dists.sort_by(f64::total_cmp);
    let mid = dists.len() / 2;
    let median = if dists.len() % 2 == 1 {
        dists[mid]
    } else {
        (dists[mid - 1] + dists[mid]) / 2.0
    };
    if median > 0.0 {
        median
    } else {
        1.0
    }
}

/// Default bandwidth grid: 16 geometric values spanning
/// `[0.05, 5] * median pairwise distance`.
fn default_h_grid(data: &[Vec<f64>]) -> Vec<f64> {
    let median = median_pairwise_distance(data);
    let lo = 0.05 * median;
    let hi = 5.0 * median;
    let ratio = (hi / lo).powf(1.0 / 15.0);
    (0..16).map(|i| lo * ratio.powi(i)).collect()
}

fn validate_training_set(data: &[Vec<f64>], labels: &[usize]) -> Result<usize> {
    if data.is_empty() {
        return Err(Error::InsufficientData(
            "neighbor classifiers require training data".into(),
        ));
    }
    if data.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} labels",
            data.len(),
            labels.len()
        )));
    }
    let dim = data[0].len();
    if dim == 0 {
        return Err(Error::invalid("neighbor samples must be nonempty vectors"));
    }
    if let Some(bad) = data.iter().find(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "neighbor samples mix dimensions {dim} and {}",
            bad.len()
        )));
    }
    let num_classes = labels.iter().max().unwrap() + 1;
    for class in 0..num_classes {
        if !labels.contains(&class) {
            return Err(Error::InsufficientData(format!(
                "class {class} has no training samples"
            )));
        }
    }
    Ok(num_classes)
}

/// Leave-one-out classification error (fraction wrong) of k-NN at one k.
fn loo_error_knn(data: &[Vec<f64>], labels: &[usize], num_classes: usize, k: usize) -> f64 {
    let mut wrong = 0usize;
    for i in 0..data.len() {
        let neighbors = nearest_indices(data, &data[i], k, Some(i));
        let votes = knn_vote(labels, &neighbors, num_classes);
        if weighted_argmax(&votes) != labels[i] {
            wrong += 1;
        }
    }
    wrong as f64 / data.len() as f64
}

/// Leave-one-out classification error of the Parzen classifier at one h.
fn loo_error_parzen(data: &[Vec<f64>], labels: &[usize], num_classes: usize, h: f64) -> f64 {
    let mut wrong = 0usize;
    for i in 0..data.len() {
        let sums = parzen_sums(data, labels, num_classes, &data[i], h, Some(i));
        let conf = normalize_or_uniform(sums);
        if weighted_argmax(&conf) != labels[i] {
            wrong += 1;
        }
    }
    wrong as f64 / data.len() as f64
}

/// Trains a neighbor classifier, selecting its parameter from
/// `selection_grid` (or the documented defaults when `None`) by minimizing
/// leave-one-out error; ties resolve to the smallest parameter. Mode `nn1`
/// fixes k = 1 and ignores the grid.
pub fn train_neighbor(
    data: &[Vec<f64>],
    labels: &[usize],
    mode: NeighborMode,
    selection_grid: Option<SelectionGrid>,
) -> Result<NeighborModel> {
    let num_classes = validate_training_set(data, labels)?;
    let n = data.len();
    let param = match mode {
        NeighborMode::Nn1 => NeighborParam::K(1),
        NeighborMode::Knn => {
            if n < 2 {
                return Err(Error::InsufficientData(
                    "k-NN selection needs at least 2 training samples".into(),
                ));
            }
            let grid = match selection_grid {
                None => default_k_grid(n),
                Some(SelectionGrid::KValues(ks)) => ks,
                Some(SelectionGrid::Bandwidths(_)) => {
                    return Err(Error::invalid(
                        "knn mode takes a k-value grid, not bandwidths",
                    ));
                }
            };
            if grid.is_empty() {
                return Err(Error::invalid("selection grid must be nonempty"));
            }
            if let Some(&bad) = grid.iter().find(|&&k| k == 0 || k > n - 1) {
                return Err(Error::invalid(format!(
                    "candidate k={bad} outside valid range [1, {}]",
                    n - 1
                )));
            }
            let mut candidates = grid;
            candidates.sort_unstable();
            candidates.dedup();
            let mut best = (candidates[0], f64::INFINITY);
            for &k in &candidates {
                let err = loo_error_knn(data, labels, num_classes, k);
                if err < best.1 {
                    best = (k, err);
                }
            }
            NeighborParam::K(best.0)
        }
        NeighborMode::Parzen => {
            if n < 2 {
                return Err(Error::InsufficientData(
                    "Parzen selection needs at least 2 training samples".into(),
                ));
            }
            let grid = match selection_grid {
                None => default_h_grid(data),
                Some(SelectionGrid::Bandwidths(hs)) => hs,
                Some(SelectionGrid::KValues(_)) => {
                    return Err(Error::invalid(
                        "parzen mode takes a bandwidth grid, not k values",
                    ));
                }
            };
            if grid.is_empty() {
                return Err(Error::invalid("selection grid must be nonempty"));
            }
            if let Some(&bad) = grid.iter().find(|&&h| !(h > 0.0)) {
                return Err(Error::invalid(format!(
                    "candidate bandwidth {bad} must be positive"
                )));
            }
            let mut candidates = grid;
            candidates.sort_by(f64::total_cmp);
            candidates.dedup();
            let mut best = (candidates[0], f64::INFINITY);
            for &h in &candidates {
                let err = loo_error_parzen(data, labels, num_classes, h);
                if err < best.1 {
                    best = (h, err);
                }
            }
            NeighborParam::Bandwidth(best.0)
        }
    };
    Ok(NeighborModel {
        data: data.to_vec(),
        labels: labels.to_vec(),
        num_classes,
        mode,
        param,
    })
}

/// Class confidences for `x`: neighbor-vote fractions (`knn`/`nn1`) or
/// normalized per-class kernel sums (`parzen`). Sums to 1; degenerate
/// all-zero kernel sums fall back to the uniform vector.
pub fn neighbor_confidences(model: &NeighborModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.dim() {
        return Err(Error::DimensionMismatch(format!(
            "neighbor model expects dimension {}, got {}",
            model.dim(),
            x.len()
        )));
    }
    match model.param {
        NeighborParam::K(k) => {
            let k = k.min(model.data.len());
            let neighbors = nearest_indices(&model.data, x, k, None);
            Ok(knn_vote(&model.labels, &neighbors, model.num_classes))
        }
        NeighborParam::Bandwidth(h) => {
            let sums = parzen_sums(&model.data, &model.labels, model.num_classes, x, h, None);
            Ok(normalize_or_uniform(sums))
        }
    }
}
