//! Shared helpers for the integration suites: independent numerical oracles
//! (dense reflective convolution, a Jacobi eigensolver, Gaussian densities,
//! direct moment formulas) and the acceptance-criterion reporter.
//!
//! Every oracle here deliberately recomputes its quantity from first
//! principles — double loops, textbook formulas — so that agreement with the
//! library is evidence, not circularity.

#![allow(dead_code)]

use std::time::{Duration, Instant};

use ndarray::Array2;

/// Runs one acceptance criterion and prints exactly one PASS/FAIL line.
///
/// `budget` is the wall-clock limit stated for the criterion; exceeding it
/// fails the criterion even if the checks themselves hold.
pub fn criterion(
    number: u32,
    desc: &str,
    budget: Option<Duration>,
    body: impl FnOnce() -> Result<String, String>,
) {
    let start = Instant::now();
    let outcome = body();
    let elapsed = start.elapsed();
    match outcome {
        Ok(detail) => {
            if let Some(limit) = budget {
                if elapsed > limit {
                    println!(
                        "acceptance criterion {number}: FAIL — {desc}: checks passed but took \
                         {elapsed:.2?} (budget {limit:?})"
                    );
                    panic!("criterion {number} exceeded its runtime budget");
                }
            }
            println!("acceptance criterion {number}: PASS ({elapsed:.2?}) — {desc}: {detail}");
        }
        Err(msg) => {
            println!("acceptance criterion {number}: FAIL — {desc}: {msg}");
            panic!("criterion {number} failed: {msg}");
        }
    }
}

/// Prints the one-line SKIPPED marker for a conditional criterion whose
/// external inputs are absent.
pub fn criterion_skipped(number: u32, desc: &str, reason: &str) {
    println!("acceptance criterion {number}: SKIPPED — {desc}: {reason}");
}

/// Converts a failed comparison into an `Err` for the criterion reporter.
macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !($cond) {
            return Err(format!($($fmt)+));
        }
    };
}
pub(crate) use ensure;

/// Mirrors an out-of-range index back into `[0, n)` about the edge samples
/// without repeating them: -1 -> 1, n -> n-2. Folds until in range.
pub fn reflect_index(mut i: isize, n: usize) -> usize {
    let n = n as isize;
    loop {
        if i < 0 {
            i = -i;
        } else if i >= n {
            i = 2 * n - 2 - i;
        } else {
            return i as usize;
        }
    }
}

/// Dense double-loop true convolution with reflective boundaries:
/// `out[p] = sum_q in [-r, r]^2 patch[reflect(p - q)] * k2[q]`, where the 2D
/// kernel is the outer product `k2[qy][qx] = profile_y[qy + r] * profile_x[qx + r]`.
pub fn brute_force_convolve(
    patch: &Array2<f64>,
    profile_y: &[f64],
    profile_x: &[f64],
) -> Array2<f64> {
    assert_eq!(profile_y.len(), profile_x.len());
    assert_eq!(profile_y.len() % 2, 1);
    let r = (profile_y.len() / 2) as isize;
    let (rows, cols) = patch.dim();
    Array2::from_shape_fn((rows, cols), |(y, x)| {
        let mut acc = 0.0;
        for qy in -r..=r {
            for qx in -r..=r {
                let w = profile_y[(qy + r) as usize] * profile_x[(qx + r) as usize];
                let sy = reflect_index(y as isize - qy, rows);
                let sx = reflect_index(x as isize - qx, cols);
                acc += patch[[sy, sx]] * w;
            }
        }
        acc
    })
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
///
/// Returns `(eigenvalues, eigenvectors)` sorted by descending eigenvalue;
/// `eigenvectors[r]` is the unit eigenvector paired with `eigenvalues[r]`.
// Index-paired (k, p, q) loops mirror the textbook rotation formulas.
#[allow(clippy::needless_range_loop)]
pub fn jacobi_eigen(a: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = a.len();
    assert!(n > 0);
    for row in a {
        assert_eq!(row.len(), n, "matrix must be square");
    }
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();

    let frob: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .map(|x| x * x)
        .sum::<f64>()
        .sqrt();
    let stop = (1e-15 * frob.max(1e-300)).powi(2);

    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|p| ((p + 1)..n).map(move |q| (p, q)))
            .map(|(p, q)| m[p][q] * m[p][q])
            .sum();
        if off <= stop {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = m[p][q];
                if apq == 0.0 {
                    continue;
                }
                // Rotation angle that annihilates m[p][q] (symmetric Schur).
                let tau = (m[q][q] - m[p][p]) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (tau * tau + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                // m <- J^T m J with the rotation in the (p, q) plane.
                for k in 0..n {
                    let mkp = m[k][p];
                    let mkq = m[k][q];
                    m[k][p] = c * mkp - s * mkq;
                    m[k][q] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[p][k];
                    let mqk = m[q][k];
                    m[p][k] = c * mpk - s * mqk;
                    m[q][k] = s * mpk + c * mqk;
                }
                // Accumulate eigenvectors as columns of v, then read rows of
                // the transpose below.
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| m[y][y].total_cmp(&m[x][x]));
    let values: Vec<f64> = order.iter().map(|&i| m[i][i]).collect();
    let vectors: Vec<Vec<f64>> = order
        .iter()
        .map(|&col| (0..n).map(|row| v[row][col]).collect())
        .collect();
    (values, vectors)
}

/// Sample mean and unbiased (n-1) covariance computed with plain loops.
pub fn sample_mean_cov(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = samples.len();
    let d = samples[0].len();
    assert!(n >= 2);
    let mut mean = vec![0.0; d];
    for s in samples {
        for (j, x) in s.iter().enumerate() {
            mean[j] += x;
        }
    }
    for mj in &mut mean {
        *mj /= n as f64;
    }
    let mut cov = vec![vec![0.0; d]; d];
    for s in samples {
        for a in 0..d {
            for b in 0..d {
                cov[a][b] += (s[a] - mean[a]) * (s[b] - mean[b]);
            }
        }
    }
    let denom = (n - 1) as f64;
    for row in &mut cov {
        for x in row.iter_mut() {
            *x /= denom;
        }
    }
    (mean, cov)
}

/// Multivariate Gaussian density evaluated through the Jacobi
/// eigendecomposition of the covariance (inverse and determinant both come
/// from the spectrum, never from the library under test).
pub fn gaussian_density(x: &[f64], mean: &[f64], cov: &[Vec<f64>]) -> f64 {
    let d = x.len();
    let (values, vectors) = jacobi_eigen(cov);
    let mut quad = 0.0;
    let mut log_det = 0.0;
    for (lambda, vec) in values.iter().zip(vectors.iter()) {
        assert!(*lambda > 0.0, "oracle covariance must be positive definite");
        let proj: f64 = (0..d).map(|j| vec[j] * (x[j] - mean[j])).sum();
        quad += proj * proj / lambda;
        log_det += lambda.ln();
    }
    let log_norm = -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
    (log_norm - 0.5 * quad).exp()
}

/// Direct textbook moments of a sample: mean, (n-1) standard deviation,
/// standardized third and fourth population central moments.
pub fn direct_moments(xs: &[f64]) -> [f64; 4] {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let central = |p: i32| xs.iter().map(|x| (x - mean).powi(p)).sum::<f64>() / n;
    let m2 = central(2);
    let m3 = central(3);
    let m4 = central(4);
    let sample_var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    [mean, sample_var.sqrt(), m3 / m2.powf(1.5), m4 / (m2 * m2)]
}

/// The smallest-k variance-retention rule on an already cleaned descending
/// spectrum: the fewest leading eigenvalues whose share of the total reaches
/// `fraction`, capped at `max_k`.
pub fn smallest_k(spectrum: &[f64], fraction: f64, max_k: usize) -> usize {
    let total: f64 = spectrum.iter().sum();
    let mut cumulative = 0.0;
    for (i, v) in spectrum.iter().take(max_k).enumerate() {
        cumulative += v;
        if cumulative / total >= fraction {
            return i + 1;
        }
    }
    max_k
}
