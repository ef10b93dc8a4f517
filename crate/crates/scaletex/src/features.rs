//! Per-subset PCA: maps raw subset vectors to uncorrelated coordinates that
//! retain a configured fraction of the pooled training variance.
//!
//! Numerical design:
//!
//! - The sample covariance uses the `n-1` denominator.
//! - Two algebraically equivalent decomposition routes: the `d x d`
//!   covariance eigendecomposition when `d <= n`, and the `n x n` Gram
//!   matrix route (eigenvectors mapped back through the data matrix) when
//!   `d > n`. A unit test pins their equivalence to 1e-8.
//! - Eigenvalue dust below `1e-12 * lambda_max` is clamped to zero so the
//!   smallest-k rule cannot be pushed past the true rank by rounding noise.
//! - Sign convention: each component's largest-magnitude entry (first
//!   occurrence on ties) is made positive, for reproducible output.
//! - Data with zero total variance degenerates to a single canonical axis
//!   with eigenvalue 0, keeping the model total.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative threshold below which an eigenvalue is treated as exactly zero.
const EIGENVALUE_DUST: f64 = 1e-12;

/// A fitted PCA basis for one feature subset.
#[derive(Debug, Clone)]
pub struct PcaModel {
    mean: DVector<f64>,
    /// `k x d`, rows orthonormal, descending eigenvalue order.
    components: DMatrix<f64>,
    /// `k` nonincreasing, nonnegative values.
    eigenvalues: Vec<f64>,
    retained_fraction: f64,
    total_variance: f64,
}

impl PcaModel {
    /// Sample mean of the training data (length `d`).
    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    /// Orthonormal component rows (`k x d`).
    pub fn components(&self) -> &DMatrix<f64> {
        &self.components
    }

    /// Variances along the retained components, nonincreasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Number of retained components `k`.
    pub fn num_components(&self) -> usize {
        self.components.nrows()
    }

    /// Input dimension `d`.
    pub fn input_dim(&self) -> usize {
        self.components.ncols()
    }

    /// The fraction that was requested at fit time.
    pub fn retained_fraction(&self) -> f64 {
        self.retained_fraction
    }

    /// Total variance of the training data (sum over all eigenvalues, not
    /// just the retained ones).
    pub fn total_variance(&self) -> f64 {
        self.total_variance
    }

    /// Fraction of the total variance actually captured by the retained
    /// components (1.0 for degenerate zero-variance data).
    pub fn empirical_retained_fraction(&self) -> f64 {
        if self.total_variance <= 0.0 {
            return 1.0;
        }
        self.eigenvalues.iter().sum::<f64>() / self.total_variance
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    /// Eigendecomposition of the `d x d` covariance matrix.
    Covariance,
    /// Eigendecomposition of the `n x n` Gram matrix, mapped back through
    /// the centered data matrix. Preferred when `d > n`.
    Gram,
}

/// Fits PCA on pooled samples (rows of one subset across all classes),
/// retaining the smallest number of leading components whose cumulative
/// eigenvalue fraction reaches `retained_fraction`.
pub fn fit_pca(samples: &[Vec<f64>], retained_fraction: f64) -> Result<PcaModel> {
    let route = if dimension_of(samples)? <= samples.len() {
        Route::Covariance
    } else {
        Route::Gram
    };
    fit_pca_via(samples, retained_fraction, route)
}

fn dimension_of(samples: &[Vec<f64>]) -> Result<usize> {
    let Some(first) = samples.first() else {
        return Err(Error::InsufficientData(
            "PCA requires at least 2 samples, got 0".into(),
        ));
    };
    let d = first.len();
    if d == 0 {
        return Err(Error::invalid("PCA samples must be nonempty vectors"));
    }
    if let Some(bad) = samples.iter().find(|s| s.len() != d) {
        return Err(Error::DimensionMismatch(format!(
            "PCA samples mix dimensions {d} and {}",
            bad.len()
        )));
    }
    Ok(d)
}

fn fit_pca_via(samples: &[Vec<f64>], retained_fraction: f64, route: Route) -> Result<PcaModel> {
    let d = dimension_of(samples)?;
    let n = samples.len();
    if n < 2 {
        return Err(Error::InsufficientData(format!(
            "PCA requires at least 2 samples, got {n}"
        )));
    }
    if !(retained_fraction > 0.0 && retained_fraction <= 1.0) {
        return Err(Error::invalid(format!(
            "retained_fraction must lie in (0, 1], got {retained_fraction}"
        )));
    }

    let mut mean = DVector::zeros(d);
    for s in samples {
        for (j, v) in s.iter().enumerate() {
            mean[j] += v;
        }
    }
    mean /= n as f64;
    let centered = DMatrix::from_fn(n, d, |i, j| samples[i][j] - mean[j]);
    let denom = (n - 1) as f64;

    // Eigenvalues sorted descending, paired with a closure that yields the
    // corresponding unit component in the original d-space.
    type ComponentFn = Box<dyn Fn(usize) -> DVector<f64>>;
    let (mut spectrum, make_component): (Vec<f64>, ComponentFn) = match route {
        Route::Covariance => {
            let cov = centered.transpose() * &centered / denom;
            let eig = cov.symmetric_eigen();
            let mut order: Vec<usize> = (0..d).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let spectrum = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors = eig.eigenvectors;
            (
                spectrum,
                Box::new(move |rank| vectors.column(order[rank]).into_owned()),
            )
        }
        Route::Gram => {
            let gram = &centered * centered.transpose() / denom;
            let eig = gram.symmetric_eigen();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let spectrum = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors = eig.eigenvectors;
            let data = centered.clone();
            (
                spectrum,
                Box::new(move |rank| {
                    let u = vectors.column(order[rank]);
                    let v = data.transpose() * u;
                    let norm = v.norm();
                    v / norm
                }),
            )
        }
    };

    // Clamp negative rounding noise, then zero out dust relative to the top
    // eigenvalue so the smallest-k rule stops at the true rank.
    for v in &mut spectrum {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let cutoff = spectrum.first().copied().unwrap_or(0.0) * EIGENVALUE_DUST;
    for v in &mut spectrum {
        if *v < cutoff {
            *v = 0.0;
        }
    }
    let total_variance: f64 = spectrum.iter().sum();

    if total_variance <= 0.0 {
        // All samples identical: no variance to retain. Degenerate model
        // with one canonical axis so downstream dimensions stay valid.
        let mut components = DMatrix::zeros(1, d);
        components[(0, 0)] = 1.0;
        return Ok(PcaModel {
            mean,
            components,
            eigenvalues: vec![0.0],
            retained_fraction,
            total_variance: 0.0,
        });
    }

    let max_k = d.min(n - 1);
    let mut k = max_k;
    let mut cumulative = 0.0;
    for (i, v) in spectrum.iter().take(max_k).enumerate() {
        cumulative += v;
        if cumulative / total_variance >= retained_fraction {
            k = i + 1;
            break;
        }
    }

    let mut components = DMatrix::zeros(k, d);
    for rank in 0..k {
        let mut v = make_component(rank);
        // Sign convention: first occurrence of the largest-magnitude entry
        // is made positive.
        let mut best = 0;
        for j in 1..d {
            if v[j].abs() > v[best].abs() {
                best = j;
            }
        }
        if v[best] < 0.0 {
            v = -v;
        }
        components.row_mut(rank).copy_from(&v.transpose());
    }

    Ok(PcaModel {
        mean,
        components,
        eigenvalues: spectrum[..k].to_vec(),
        retained_fraction,
        total_variance,
    })
}

/// Projects `x` into the retained subspace: `components * (x - mean)`.
pub fn pca_transform(model: &PcaModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.input_dim() {
        return Err(Error::DimensionMismatch(format!(
            "PCA expects dimension {}, got {}",
            model.input_dim(),
            x.len()
        )));
    }
    let centered = DVector::from_fn(x.len(), |i, _| x[i] - model.mean[i]);
    let projected = &model.components * centered;
    Ok(projected.iter().copied().collect())
}

/// Projects a batch of samples; a convenience wrapper over
/// [`pca_transform`].
pub fn pca_transform_batch(model: &PcaModel, samples: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    samples.iter().map(|s| pca_transform(model, s)).collect()
}
