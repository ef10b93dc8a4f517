//! Gaussian scale space: derivative kernels, reflective convolution, N-jets.
//!
//! Conventions used throughout this module:
//!
//! - Arrays index `[row, col]` = `[y, x]`; `order_x` differentiates along
//!   columns, `order_y` along rows.
//! - Kernels are separable products of 1D sampled Gaussian-derivative
//!   profiles in Hermite-polynomial closed form, truncated at
//!   `radius = ceil(truncation * sigma)` (default truncation 4).
//! - Discrete calibration of the sampled profiles: order-0 profiles are
//!   renormalized to unit sum; order-1 profiles are rescaled so their
//!   discrete first moment is exactly -1 (linear ramps differentiate to 1);
//!   order-2 profiles have their mean subtracted so constants map to 0.
//!   Without the calibration, truncation leaves residuals of order 1e-4
//!   that would break the exactness of derivative responses on polynomials.
//! - `convolve_reflective` computes a true convolution
//!   `out[p] = sum_q patch[reflect(p - q)] * kernel[q]`; out-of-range indices
//!   mirror about the edge sample without repeating it (index -1 maps to 1),
//!   folding repeatedly for kernels wider than the patch.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use ndarray::Array2;

use crate::error::{Error, Result};

/// Default kernel truncation: support cut at `ceil(4 * sigma)` samples, which
/// keeps the discarded Gaussian mass below 1e-4.
pub const DEFAULT_TRUNCATION: f64 = 4.0;

/// Default pipeline scales: sigma^2 = 1, 4, 7.
pub fn default_sigmas() -> Vec<f64> {
    vec![1.0, 2.0, 7.0_f64.sqrt()]
}

/// The six N-jet derivative channels up to total order two, in canonical
/// order. The declaration order defines the row layout of decision profiles:
/// all scales of `L` first, then all scales of `Lx`, and so on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DerivativeId {
    /// Smoothed image, order (0,0).
    L,
    /// First derivative along x (columns), order (1,0).
    Lx,
    /// First derivative along y (rows), order (0,1).
    Ly,
    /// Second derivative along x, order (2,0).
    Lxx,
    /// Mixed derivative, order (1,1).
    Lxy,
    /// Second derivative along y, order (0,2).
    Lyy,
}

impl DerivativeId {
    /// All channels in canonical order.
    pub const ALL: [DerivativeId; 6] = [
        DerivativeId::L,
        DerivativeId::Lx,
        DerivativeId::Ly,
        DerivativeId::Lxx,
        DerivativeId::Lxy,
        DerivativeId::Lyy,
    ];

    /// Derivative orders along (x, y).
    pub fn orders(self) -> (u8, u8) {
        match self {
            DerivativeId::L => (0, 0),
            DerivativeId::Lx => (1, 0),
            DerivativeId::Ly => (0, 1),
            DerivativeId::Lxx => (2, 0),
            DerivativeId::Lxy => (1, 1),
            DerivativeId::Lyy => (0, 2),
        }
    }

    /// Stable text label, used in curve names and file names.
    pub fn label(self) -> &'static str {
        match self {
            DerivativeId::L => "L",
            DerivativeId::Lx => "Lx",
            DerivativeId::Ly => "Ly",
            DerivativeId::Lxx => "Lxx",
            DerivativeId::Lxy => "Lxy",
            DerivativeId::Lyy => "Lyy",
        }
    }

    /// Position of the channel inside [`DerivativeId::ALL`].
    pub fn index(self) -> usize {
        DerivativeId::ALL.iter().position(|d| *d == self).unwrap()
    }
}

/// A separable 2D Gaussian-derivative kernel.
///
/// `values[y][x] = profile_y[y] * profile_x[x]`; both views are kept so that
/// callers can either convolve separably (two 1D passes) or use the dense
/// 2D array directly.
#[derive(Debug, Clone)]
pub struct Kernel2D {
    /// Scale in pixels.
    pub sigma: f64,
    /// Derivative order along columns.
    pub order_x: u8,
    /// Derivative order along rows.
    pub order_y: u8,
    /// Half-width; side length is `2 * radius + 1`.
    pub radius: usize,
    values: Array2<f64>,
    profile_x: Vec<f64>,
    profile_y: Vec<f64>,
}

impl Kernel2D {
    /// Dense 2D kernel values, side `2 * radius + 1`.
    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    /// 1D profile applied along columns.
    pub fn profile_x(&self) -> &[f64] {
        &self.profile_x
    }

    /// 1D profile applied along rows.
    pub fn profile_y(&self) -> &[f64] {
        &self.profile_y
    }
}

/// Samples the `order`-th derivative of the 1D Gaussian
/// `g(t) = exp(-t^2 / 2 sigma^2) / (sqrt(2 pi) sigma)` on integer taps
/// `t in [-radius, radius]`.
fn sampled_profile(sigma: f64, order: u8, radius: usize) -> Vec<f64> {
    let s2 = sigma * sigma;
    let norm = 1.0 / ((2.0 * PI).sqrt() * sigma);
    (-(radius as isize)..=radius as isize)
        .map(|i| {
            let t = i as f64;
            let g = norm * (-t * t / (2.0 * s2)).exp();
            match order {
                0 => g,
                1 => -t / s2 * g,
                2 => (t * t / (s2 * s2) - 1.0 / s2) * g,
                _ => unreachable!("orders above 2 rejected before sampling"),
            }
        })
        .collect()
}

/// Applies the discrete calibration described in the module docs.
fn calibrate_profile(mut profile: Vec<f64>, order: u8) -> Vec<f64> {
    let radius = (profile.len() - 1) / 2;
    match order {
        0 => {
            let sum: f64 = profile.iter().sum();
            for v in &mut profile {
                *v /= sum;
            }
        }
        1 => {
            // Scale so the discrete first moment sum(t * p(t)) is exactly -1;
            // antisymmetry already makes the plain sum vanish.
            let m1: f64 = profile
                .iter()
                .enumerate()
                .map(|(i, v)| (i as f64 - radius as f64) * v)
                .sum();
            let scale = -1.0 / m1;
            for v in &mut profile {
                *v *= scale;
            }
        }
        2 => {
            // Remove the truncation-induced DC component so constants map to 0.
            let mean: f64 = profile.iter().sum::<f64>() / profile.len() as f64;
            for v in &mut profile {
                *v -= mean;
            }
        }
        _ => unreachable!("orders above 2 rejected before calibration"),
    }
    profile
}

/// Builds the separable Gaussian-derivative kernel at scale `sigma` with
/// derivative orders `(order_x, order_y)`, truncated at
/// `radius = ceil(truncation * sigma)`.
///
/// Only total orders up to two are supported. The order-(0,0) kernel is
/// renormalized to unit sum; derivative kernels keep the sampled Hermite
/// form up to the discrete calibration described in the module docs.
pub fn gaussian_derivative_kernel(
    sigma: f64,
    order_x: u8,
    order_y: u8,
    truncation: f64,
) -> Result<Kernel2D> {
    if !(sigma > 0.0) {
        return Err(Error::invalid(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    if !(truncation > 0.0) {
        return Err(Error::invalid(format!(
            "truncation must be positive, got {truncation}"
        )));
    }
    if order_x + order_y > 2 {
        return Err(Error::UnsupportedOrder {
            order_x,
            order_y,
            max: 2,
        });
    }
    let radius = ((truncation * sigma).ceil() as usize).max(1);
    let profile_x = calibrate_profile(sampled_profile(sigma, order_x, radius), order_x);
    let profile_y = calibrate_profile(sampled_profile(sigma, order_y, radius), order_y);
    let side = 2 * radius + 1;
    let values = Array2::from_shape_fn((side, side), |(y, x)| profile_y[y] * profile_x[x]);
    Ok(Kernel2D {
        sigma,
        order_x,
        order_y,
        radius,
        values,
        profile_x,
        profile_y,
    })
}

/// Maps an out-of-range index into `[0, n)` by mirroring about the edge
/// samples without repeating them: index -1 maps to 1, index n maps to n-2.
/// Folds repeatedly, so it stays well-defined for kernels wider than the
/// patch.
fn reflect(index: isize, n: usize) -> usize {
    debug_assert!(n > 0);
    if n == 1 {
        return 0;
    }
    let n = n as isize;
    let period = 2 * (n - 1);
    let i = index.rem_euclid(period);
    if i < n {
        i as usize
    } else {
        (period - i) as usize
    }
}

/// 1D convolution of every row (`along_x = true`) or column of `input` with
/// `profile`, using reflected indexing at the borders.
fn convolve_axis(input: &Array2<f64>, profile: &[f64], along_x: bool) -> Array2<f64> {
    let (rows, cols) = input.dim();
    let radius = (profile.len() - 1) / 2;
    let mut out = Array2::zeros((rows, cols));
    if along_x {
        for r in 0..rows {
            for c in 0..cols {
                let mut acc = 0.0;
                for (qi, w) in profile.iter().enumerate() {
                    let q = qi as isize - radius as isize;
                    acc += input[[r, reflect(c as isize - q, cols)]] * w;
                }
                out[[r, c]] = acc;
            }
        }
    } else {
        for c in 0..cols {
            for r in 0..rows {
                let mut acc = 0.0;
                for (qi, w) in profile.iter().enumerate() {
                    let q = qi as isize - radius as isize;
                    acc += input[[reflect(r as isize - q, rows), c]] * w;
                }
                out[[r, c]] = acc;
            }
        }
    }
    out
}

/// Convolves `patch` with `kernel` under reflective boundary handling,
/// returning an array of the same size.
///
/// The output satisfies `out[p] = sum_q patch[reflect(p - q)] * kernel[q]`
/// (a true convolution; the kernel argument indexes offsets from its
/// center). Implemented as two 1D passes over the kernel's separable
/// profiles, which is exactly equivalent to the dense 2D sum because
/// reflection acts on each axis independently.
pub fn convolve_reflective(patch: &Array2<f64>, kernel: &Kernel2D) -> Result<Array2<f64>> {
    if patch.is_empty() {
        return Err(Error::invalid("cannot convolve an empty patch"));
    }
    let x_pass = convolve_axis(patch, &kernel.profile_x, true);
    Ok(convolve_axis(&x_pass, &kernel.profile_y, false))
}

/// The N-jet of one patch: a map from (derivative channel, scale index) to
/// the response array, each sized like the input patch.
#[derive(Debug, Clone)]
pub struct NJetResponse {
    num_scales: usize,
    responses: BTreeMap<(DerivativeId, usize), Array2<f64>>,
}

impl NJetResponse {
    /// Response for one (derivative, scale) pair.
    pub fn get(&self, derivative: DerivativeId, scale_index: usize) -> Option<&Array2<f64>> {
        self.responses.get(&(derivative, scale_index))
    }

    /// Responses in canonical order: all scales of `L`, then all scales of
    /// `Lx`, and so on — the row layout expected by decision profiles.
    pub fn iter(&self) -> impl Iterator<Item = (DerivativeId, usize, &Array2<f64>)> {
        self.responses.iter().map(|(&(d, s), arr)| (d, s, arr))
    }

    /// Number of (derivative, scale) entries.
    pub fn len(&self) -> usize {
        self.responses.len()
    }

    /// True when no responses are stored (never the case for a successful
    /// [`compute_njet`] call).
    pub fn is_empty(&self) -> bool {
        self.responses.is_empty()
    }

    /// Number of scales the jet was computed at.
    pub fn num_scales(&self) -> usize {
        self.num_scales
    }
}

/// Computes the N-jet of `patch` at the given scales: the six derivative
/// channels {(0,0), (1,0), (0,1), (2,0), (1,1), (0,2)} at every sigma, via
/// reflective convolution with the corresponding kernels (truncation 4).
///
/// `max_order` must be 2; it is a forward-compatibility knob for higher jets.
pub fn compute_njet(patch: &Array2<f64>, sigmas: &[f64], max_order: u8) -> Result<NJetResponse> {
    if max_order != 2 {
        return Err(Error::UnsupportedOrder {
            order_x: max_order,
            order_y: 0,
            max: 2,
        });
    }
    if patch.is_empty() {
        return Err(Error::invalid("cannot compute the N-jet of an empty patch"));
    }
    if sigmas.is_empty() {
        return Err(Error::invalid("sigma list must be nonempty"));
    }
    if sigmas.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid(format!(
            "sigmas must be strictly increasing, got {sigmas:?}"
        )));
    }
    if sigmas.iter().any(|s| !(*s > 0.0)) {
        return Err(Error::invalid("sigmas must be positive"));
    }
    let mut responses = BTreeMap::new();
    for (scale_index, &sigma) in sigmas.iter().enumerate() {
        for derivative in DerivativeId::ALL {
            let (ox, oy) = derivative.orders();
            let kernel = gaussian_derivative_kernel(sigma, ox, oy, DEFAULT_TRUNCATION)?;
            let response = convolve_reflective(patch, &kernel)?;
            responses.insert((derivative, scale_index), response);
        }
    }
    Ok(NJetResponse {
        num_scales: sigmas.len(),
        responses,
    })
}

/// First-order steering: the derivative in orientation `theta` is
/// `cos(theta) * Lx + sin(theta) * Ly`, elementwise.
///
/// Exposed for completeness; the default pipeline uses the six fixed
/// derivative channels rather than steered orientations.
pub fn steer_first_order(lx: &Array2<f64>, ly: &Array2<f64>, theta: f64) -> Result<Array2<f64>> {
    if lx.dim() != ly.dim() {
        return Err(Error::DimensionMismatch(format!(
            "Lx is {:?} but Ly is {:?}",
            lx.dim(),
            ly.dim()
        )));
    }
    let (c, s) = (theta.cos(), theta.sin());
    Ok(lx * c + ly * s)
}
