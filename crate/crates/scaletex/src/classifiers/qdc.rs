//! Regularized quadratic discriminant classifier.
//!
//! Per class, the sample covariance is shrunk toward its diagonal and toward
//! a scaled identity:
//!
//! ```text
//! S_hat = (1 - eta - lambda) * S  +  eta * diag(S)  +  lambda * (tr(S)/n) * I
//! ```
//!
//! with `n` the feature dimension. Posteriors are prior-weighted Gaussian
//! densities evaluated in the log domain with max-subtraction, so they stay
//! finite arbitrarily far from the means. A covariance whose Cholesky
//! factorization fails is reported as a loud error instead of being silently
//! ridged: small-sample peaking is part of the behavior under study, and the
//! caller decides how to react.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// A trained quadratic discriminant model.
#[derive(Debug, Clone)]
pub struct QdcModel {
    means: Vec<DVector<f64>>,
    factorizations: Vec<Cholesky<f64, Dyn>>,
    log_dets: Vec<f64>,
    priors: Vec<f64>,
    eta: f64,
    lambda: f64,
    dim: usize,
}

impl QdcModel {
    /// Number of classes.
    pub fn num_classes(&self) -> usize {
        self.means.len()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Class priors (relative frequencies), summing to 1.
    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    /// Mean of class `j`.
    pub fn mean(&self, j: usize) -> &DVector<f64> {
        &self.means[j]
    }

    /// Diagonal-shrinkage weight.
    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Identity-shrinkage weight.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// Applies the two-parameter shrinkage to a sample covariance:
/// `(1 - eta - lambda) * cov + eta * diag(cov) + lambda * (tr(cov)/n) * I`
/// with `n` the matrix dimension.
pub fn regularize_covariance(cov: &DMatrix<f64>, eta: f64, lambda: f64) -> DMatrix<f64> {
    let n = cov.nrows();
    let trace_scale = lambda * cov.trace() / n as f64;
    let mut out = cov * (1.0 - eta - lambda);
    for i in 0..n {
        out[(i, i)] += eta * cov[(i, i)] + trace_scale;
    }
    out
}

/// A Cholesky pivot whose square falls below this fraction of the largest
/// squared pivot marks the covariance as numerically singular. The floor
/// sits ~3 decades above f64 rounding noise (eps ~ 2e-16), so honestly
/// positive-definite matrices are never rejected while rank-deficient ones
/// reliably are.
const RELATIVE_PIVOT_FLOOR: f64 = 1e-12;

fn check_regularization(eta: f64, lambda: f64) -> Result<()> {
    if !(eta >= 0.0) || !(lambda >= 0.0) {
        return Err(Error::invalid(format!(
            "regularization weights must be nonnegative, got eta={eta}, lambda={lambda}"
        )));
    }
    if eta + lambda >= 1.0 {
        return Err(Error::invalid(format!(
            "eta + lambda must be < 1, got {eta} + {lambda}"
        )));
    }
    Ok(())
}

/// Trains a QDC on labeled vectors. Labels must cover `0..=max_label`, every
/// class needs at least two samples, and all vectors share one dimension.
/// Priors are the class frequencies.
pub fn train_qdc(data: &[Vec<f64>], labels: &[usize], eta: f64, lambda: f64) -> Result<QdcModel> {
    check_regularization(eta, lambda)?;
    if data.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} samples but {} labels",
            data.len(),
            labels.len()
        )));
    }
    let Some(first) = data.first() else {
        return Err(Error::InsufficientData("QDC requires training data".into()));
    };
    let dim = first.len();
    if dim == 0 {
        return Err(Error::invalid("QDC samples must be nonempty vectors"));
    }
    if let Some(bad) = data.iter().find(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch(format!(
            "QDC samples mix dimensions {dim} and {}",
            bad.len()
        )));
    }
    let num_classes = labels.iter().max().unwrap() + 1;
    if num_classes < 2 {
        return Err(Error::InsufficientData(
            "QDC requires at least two classes".into(),
        ));
    }

    // Validate every class's sample count before any numeric work, so a
    // sparsely populated class is always reported as such, not as a
    // singular covariance in some earlier class.
    let mut class_members: Vec<Vec<&Vec<f64>>> = vec![Vec::new(); num_classes];
    for (sample, &label) in data.iter().zip(labels) {
        class_members[label].push(sample);
    }
    if let Some((class, members)) = class_members.iter().enumerate().find(|(_, m)| m.len() < 2) {
        return Err(Error::InsufficientData(format!(
            "class {class} has {} samples; QDC needs at least 2 per class",
            members.len()
        )));
    }

    let mut means = Vec::with_capacity(num_classes);
    let mut factorizations = Vec::with_capacity(num_classes);
    let mut log_dets = Vec::with_capacity(num_classes);
    let mut priors = Vec::with_capacity(num_classes);
    for (class, members) in class_members.iter().enumerate() {
        let count = members.len();
        let mut mean = DVector::zeros(dim);
        for s in members {
            for (j, v) in s.iter().enumerate() {
                mean[j] += v;
            }
        }
        mean /= count as f64;
        let mut cov = DMatrix::zeros(dim, dim);
        for s in members {
            let centered = DVector::from_fn(dim, |j, _| s[j] - mean[j]);
            cov.ger(1.0, &centered, &centered, 1.0);
        }
        cov /= (count - 1) as f64;
        let regularized = regularize_covariance(&cov, eta, lambda);
        let singular = || Error::SingularCovariance {
            context: format!("QDC class {class} (dim {dim}, {count} samples)"),
        };
        let factorization = Cholesky::new(regularized).ok_or_else(singular)?;
        // The factorization alone is not proof of positive definiteness:
        // rounding can turn the zero pivots of a rank-deficient covariance
        // into tiny positives. Treat pivots below the relative floor as
        // singular rather than silently inverting noise.
        let pivots2: Vec<f64> = factorization
            .l_dirty()
            .diagonal()
            .iter()
            .map(|v| v * v)
            .collect();
        let max_pivot2 = pivots2.iter().copied().fold(0.0, f64::max);
        if !pivots2
            .iter()
            .all(|&p2| p2 > max_pivot2 * RELATIVE_PIVOT_FLOOR)
        {
            return Err(singular());
        }
        let log_det = 2.0
            * factorization
                .l_dirty()
                .diagonal()
                .iter()
                .map(|v| v.ln())
                .sum::<f64>();
        means.push(mean);
        factorizations.push(factorization);
        log_dets.push(log_det);
        priors.push(count as f64 / data.len() as f64);
    }

    Ok(QdcModel {
        means,
        factorizations,
        log_dets,
        priors,
        eta,
        lambda,
        dim,
    })
}

/// Posterior class probabilities of `x`: prior-weighted Gaussian densities,
/// normalized. Computed in the log domain with max-subtraction.
pub fn qdc_confidences(model: &QdcModel, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != model.dim {
        return Err(Error::DimensionMismatch(format!(
            "QDC expects dimension {}, got {}",
            model.dim,
            x.len()
        )));
    }
    let c = model.num_classes();
    let mut log_scores = Vec::with_capacity(c);
    for j in 0..c {
        let diff = DVector::from_fn(model.dim, |i, _| x[i] - model.means[j][i]);
        let solved = model.factorizations[j].solve(&diff);
        let quad = diff.dot(&solved);
        log_scores.push(model.priors[j].ln() - 0.5 * (model.log_dets[j] + quad));
    }
    let max = log_scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut out: Vec<f64> = log_scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = out.iter().sum();
    for v in &mut out {
        *v /= sum;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Two well-separated classes in 3D: means at +/- `offset`, six samples
    /// each perturbed along every axis so covariances have full rank.
    fn separated_classes(offset: f64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let mut data = Vec::new();
        let mut labels = Vec::new();
        for (class, sign) in [(0usize, 1.0), (1usize, -1.0)] {
            for axis in 0..3 {
                for delta in [-0.5, 0.5] {
                    let mut v = vec![sign * offset; 3];
                    v[axis] += delta;
                    data.push(v);
                    labels.push(class);
                }
            }
        }
        (data, labels)
    }

    fn sample_covariance(members: &[&Vec<f64>]) -> DMatrix<f64> {
        let dim = members[0].len();
        let count = members.len();
        let mut mean = vec![0.0; dim];
        for s in members {
            for j in 0..dim {
                mean[j] += s[j];
            }
        }
        for m in &mut mean {
            *m /= count as f64;
        }
        let mut cov = DMatrix::zeros(dim, dim);
        for s in members {
            for a in 0..dim {
                for b in 0..dim {
                    cov[(a, b)] += (s[a] - mean[a]) * (s[b] - mean[b]);
                }
            }
        }
        cov / (count - 1) as f64
    }

    // ---- regularize_covariance ---------------------------------------------

    #[test]
    fn zero_weights_leave_covariance_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let raw = DMatrix::from_fn(5, 5, |_, _| rng.random::<f64>());
        let cov = &raw * raw.transpose();
        let out = regularize_covariance(&cov, 0.0, 0.0);
        for (a, b) in out.iter().zip(cov.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_is_a_fixed_point() {
        let eye = DMatrix::<f64>::identity(4, 4);
        let out = regularize_covariance(&eye, 0.0, 0.5);
        for (a, b) in out.iter().zip(eye.iter()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn shrinkage_matches_direct_formula_on_a_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let raw = DMatrix::from_fn(6, 6, |_, _| rng.random::<f64>() - 0.5);
        let cov = &raw * raw.transpose();
        let trace: f64 = (0..6).map(|i| cov[(i, i)]).sum();
        for eta in [0.0, 0.01, 0.3] {
            for lambda in [0.0, 0.01, 0.5] {
                let out = regularize_covariance(&cov, eta, lambda);
                for a in 0..6 {
                    for b in 0..6 {
                        let diag = if a == b { cov[(a, a)] } else { 0.0 };
                        let ident = if a == b { trace / 6.0 } else { 0.0 };
                        let want = (1.0 - eta - lambda) * cov[(a, b)] + eta * diag + lambda * ident;
                        assert!(
                            (out[(a, b)] - want).abs() < 1e-12,
                            "eta={eta} lambda={lambda} at ({a},{b})"
                        );
                    }
                }
            }
        }
    }

    // ---- train_qdc -----------------------------------------------------------

    #[test]
    fn priors_are_class_frequencies() {
        let data = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.5],
            vec![0.5, 1.0],
            vec![0.2, 0.8],
            vec![5.0, 5.0],
            vec![6.0, 4.5],
        ];
        let labels = vec![0, 0, 0, 0, 1, 1];
        let model = train_qdc(&data, &labels, 0.1, 0.1).unwrap();
        assert!((model.priors()[0] - 4.0 / 6.0).abs() < 1e-12);
        assert!((model.priors()[1] - 2.0 / 6.0).abs() < 1e-12);
        assert_eq!(model.num_classes(), 2);
        assert_eq!(model.dim(), 2);
    }

    #[test]
    fn train_rejects_bad_regularization_and_data() {
        let (data, labels) = separated_classes(1.0);
        assert!(matches!(
            train_qdc(&data, &labels, -0.1, 0.0),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            train_qdc(&data, &labels, 0.5, 0.5),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            train_qdc(&data, &labels[..data.len() - 1], 0.0, 0.0),
            Err(Error::DimensionMismatch(_))
        ));
        assert!(matches!(
            train_qdc(&[], &[], 0.0, 0.0),
            Err(Error::InsufficientData(_))
        ));
        // Single class.
        let one_class = vec![vec![1.0, 2.0], vec![2.0, 1.0], vec![0.0, 0.0]];
        assert!(matches!(
            train_qdc(&one_class, &[0, 0, 0], 0.0, 0.0),
            Err(Error::InsufficientData(_))
        ));
        // Class 1 has a single sample.
        let data = vec![vec![0.0, 1.0], vec![1.0, 0.0], vec![5.0, 5.0]];
        assert!(matches!(
            train_qdc(&data, &[0, 0, 1], 0.0, 0.0),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn rank_deficient_class_fails_loudly_without_regularization() {
        // Two samples in 3D give a rank-1 covariance.
        let data = vec![
            vec![0.0, 0.0, 0.0],
            vec![1.0, 1.0, 1.0],
            vec![10.0, 0.0, 0.0],
            vec![11.0, 1.0, 1.0],
        ];
        let labels = vec![0, 0, 1, 1];
        let err = train_qdc(&data, &labels, 0.0, 0.0).unwrap_err();
        assert!(err.is_singular_covariance(), "got {err}");
        assert!(err.to_string().contains("eta/lambda"));
        // Identity shrinkage restores positive-definiteness.
        assert!(train_qdc(&data, &labels, 0.01, 0.01).is_ok());
    }

    // ---- qdc_confidences --------------------------------------------------------

    #[test]
    fn confidences_sum_to_one_everywhere() {
        let (data, labels) = separated_classes(2.0);
        let model = train_qdc(&data, &labels, 0.0, 0.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: Vec<f64> = (0..3)
                .map(|_| 2000.0 * (rng.random::<f64>() - 0.5))
                .collect();
            let conf = qdc_confidences(&model, &x).unwrap();
            let sum: f64 = conf.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12, "sum = {sum}");
            assert!(conf
                .iter()
                .all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn far_separated_means_give_near_certain_posteriors() {
        let (data, labels) = separated_classes(10.0);
        let model = train_qdc(&data, &labels, 0.0, 0.0).unwrap();
        let at_a = qdc_confidences(&model, &[10.0, 10.0, 10.0]).unwrap();
        let at_b = qdc_confidences(&model, &[-10.0, -10.0, -10.0]).unwrap();
        assert!(at_a[0] > 0.999, "posterior at class-0 mean: {}", at_a[0]);
        assert!(at_b[1] > 0.999, "posterior at class-1 mean: {}", at_b[1]);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn confidences_match_an_explicit_density_oracle() {
        // Oracle path: explicit matrix inverse + determinant, densities in
        // the linear domain — none of the Cholesky machinery.
        let (data, labels) = separated_classes(3.0);
        let model = train_qdc(&data, &labels, 0.0, 0.0).unwrap();
        let mut covs = Vec::new();
        for class in 0..2 {
            let members: Vec<&Vec<f64>> = data
                .iter()
                .zip(&labels)
                .filter(|(_, &l)| l == class)
                .map(|(s, _)| s)
                .collect();
            covs.push(sample_covariance(&members));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let x: Vec<f64> = (0..3).map(|_| 8.0 * (rng.random::<f64>() - 0.5)).collect();
            let mut densities = Vec::new();
            for class in 0..2 {
                let inv = covs[class].clone().try_inverse().unwrap();
                let det = covs[class].determinant();
                let diff = DVector::from_fn(3, |i, _| x[i] - model.mean(class)[i]);
                let quad = (diff.transpose() * &inv * &diff)[(0, 0)];
                let norm = 1.0 / ((2.0 * std::f64::consts::PI).powi(3) * det).sqrt();
                densities.push(model.priors()[class] * norm * (-0.5 * quad).exp());
            }
            let total: f64 = densities.iter().sum();
            let conf = qdc_confidences(&model, &x).unwrap();
            for (got, want) in conf.iter().zip(densities.iter().map(|d| d / total)) {
                assert!((got - want).abs() < 1e-10, "got {got}, want {want}");
            }
        }
    }

    #[test]
    fn identical_classes_split_the_posterior_evenly() {
        let cluster = vec![
            vec![0.0, 0.0],
            vec![1.0, 0.2],
            vec![0.2, 1.0],
            vec![0.8, 0.9],
        ];
        let mut data = cluster.clone();
        data.extend(cluster);
        let labels = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let model = train_qdc(&data, &labels, 0.0, 0.0).unwrap();
        let conf = qdc_confidences(&model, &[0.4, 0.3]).unwrap();
        assert!((conf[0] - 0.5).abs() < 1e-12);
        assert!((conf[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn confidences_reject_wrong_dimension() {
        let (data, labels) = separated_classes(1.0);
        let model = train_qdc(&data, &labels, 0.0, 0.0).unwrap();
        assert!(matches!(
            qdc_confidences(&model, &[1.0, 2.0]),
            Err(Error::DimensionMismatch(_))
        ));
    }
}
