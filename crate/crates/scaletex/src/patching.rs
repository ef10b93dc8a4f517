//! Patch extraction and normalization.
//!
//! Each class image is split into an upper and a lower half so that training
//! and test patches never overlap spatially. Patches are taken on a regular
//! grid from top-left to bottom-right, standardized to zero mean and unit
//! variance (so classes differing only in brightness or contrast become
//! indistinguishable), and — after the N-jet is computed — each response is
//! centrally cropped and vectorized into one subset vector per
//! (derivative, scale) pair.

use ndarray::{s, Array2};

use crate::error::{Error, Result};
use crate::scale_space::DerivativeId;
use crate::Image;

/// Which half of a class image a patch grid was taken from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum HalfId {
    /// Rows `[0, floor(H/2))`.
    Upper,
    /// Rows `[floor(H/2), H)`; receives the extra row when the height is odd.
    Lower,
}

/// A regular grid of square patches cut from one image half, ordered
/// top-left to bottom-right (row-major in their origins).
#[derive(Debug, Clone)]
pub struct PatchGrid {
    patches: Vec<Array2<f64>>,
    origins: Vec<(usize, usize)>,
    source_half: HalfId,
    patch_size: usize,
}

impl PatchGrid {
    /// Patches in extraction order.
    pub fn patches(&self) -> &[Array2<f64>] {
        &self.patches
    }

    /// Top-left (row, col) coordinate of each patch within its half.
    pub fn origins(&self) -> &[(usize, usize)] {
        &self.origins
    }

    /// Which half the grid came from.
    pub fn source_half(&self) -> HalfId {
        self.source_half
    }

    /// Side length of every patch.
    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    /// Number of patches.
    pub fn len(&self) -> usize {
        self.patches.len()
    }

    /// True when the grid holds no patches (never after a successful
    /// [`extract_patches`] call).
    pub fn is_empty(&self) -> bool {
        self.patches.is_empty()
    }
}

/// One feature subset for one sample: the vectorized central crop of a
/// single (derivative, scale) response.
#[derive(Debug, Clone)]
pub struct SubsetVector {
    /// Row-major crop values, subsampled by `subsample_stride` per axis.
    pub values: Vec<f64>,
    /// Derivative channel the response came from.
    pub derivative_id: DerivativeId,
    /// Scale index the response came from.
    pub scale_index: usize,
    /// Side length of the central crop before subsampling.
    pub crop_size: usize,
    /// Keep-every-n subsampling stride (1 = keep everything).
    pub subsample_stride: usize,
}

/// Splits an image into its upper half (rows `[0, floor(H/2))`) and lower
/// half (rows `[floor(H/2), H)`). Odd heights give the extra row to the
/// lower half.
pub fn split_halves(image: &Image) -> Result<(Image, Image)> {
    let (rows, _) = image.dim();
    if rows < 2 {
        return Err(Error::invalid(format!(
            "image must have at least 2 rows to split, got {rows}"
        )));
    }
    let mid = rows / 2;
    let upper = image.slice(s![..mid, ..]).to_owned();
    let lower = image.slice(s![mid.., ..]).to_owned();
    Ok((upper, lower))
}

/// Extracts all `patch_size`-sided patches whose origins lie on the grid
/// `{0, stride, 2*stride, …}` in both axes and that fit entirely inside
/// `half`. Yields `(floor((H-p)/s)+1) * (floor((W-p)/s)+1)` patches in
/// row-major origin order.
pub fn extract_patches(
    half: &Image,
    patch_size: usize,
    stride: usize,
    source_half: HalfId,
) -> Result<PatchGrid> {
    let (rows, cols) = half.dim();
    if patch_size == 0 {
        return Err(Error::invalid("patch_size must be at least 1"));
    }
    if stride == 0 {
        return Err(Error::invalid("stride must be at least 1"));
    }
    if patch_size > rows || patch_size > cols {
        return Err(Error::invalid(format!(
            "patch of size {patch_size} does not fit in a {rows}x{cols} half"
        )));
    }
    let steps = |extent: usize| (extent - patch_size) / stride + 1;
    let (row_steps, col_steps) = (steps(rows), steps(cols));
    let mut patches = Vec::with_capacity(row_steps * col_steps);
    let mut origins = Vec::with_capacity(row_steps * col_steps);
    for ri in 0..row_steps {
        let r = ri * stride;
        for ci in 0..col_steps {
            let c = ci * stride;
            patches.push(
                half.slice(s![r..r + patch_size, c..c + patch_size])
                    .to_owned(),
            );
            origins.push((r, c));
        }
    }
    Ok(PatchGrid {
        patches,
        origins,
        source_half,
        patch_size,
    })
}

/// Variance below this is treated as zero (a constant patch); the sample
/// variance of a genuinely constant patch is not exactly 0 in floating
/// point, only ~1e-30.
const DEGENERATE_VARIANCE: f64 = 1e-24;

/// Standardizes a patch to sample mean 0 and sample variance 1 (the
/// `n-1` convention). Constant patches cannot be standardized; they map to
/// the all-zero patch with the degenerate flag set, so preprocessing stays
/// total and downstream code can keep the sample.
pub fn preprocess_patch(patch: &Array2<f64>) -> Result<(Array2<f64>, bool)> {
    let n = patch.len();
    if n == 0 {
        return Err(Error::invalid("cannot preprocess an empty patch"));
    }
    let mean = patch.sum() / n as f64;
    if n == 1 {
        return Ok((Array2::zeros(patch.dim()), true));
    }
    let variance = patch.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    if variance < DEGENERATE_VARIANCE {
        return Ok((Array2::zeros(patch.dim()), true));
    }
    let std = variance.sqrt();
    Ok((patch.mapv(|v| (v - mean) / std), false))
}

/// Crops the central `crop_size`-sided window of a response (the margin
/// `(side - crop_size) / 2` must be integral), keeps every
/// `subsample_stride`-th pixel per axis, and flattens row-major.
///
/// The resulting vector has length `ceil(crop_size / subsample_stride)^2`.
pub fn crop_and_vectorize(
    response: &Array2<f64>,
    derivative_id: DerivativeId,
    scale_index: usize,
    crop_size: usize,
    subsample_stride: usize,
) -> Result<SubsetVector> {
    let (rows, cols) = response.dim();
    if rows != cols {
        return Err(Error::invalid(format!(
            "response must be square, got {rows}x{cols}"
        )));
    }
    if crop_size == 0 || crop_size > rows {
        return Err(Error::invalid(format!(
            "crop size {crop_size} must lie in [1, {rows}]"
        )));
    }
    if !(rows - crop_size).is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "crop size {crop_size} is not centered in side {rows}: margin must be even"
        )));
    }
    if subsample_stride == 0 {
        return Err(Error::invalid("subsample_stride must be at least 1"));
    }
    let offset = (rows - crop_size) / 2;
    let kept = crop_size.div_ceil(subsample_stride);
    let mut values = Vec::with_capacity(kept * kept);
    for r in (0..crop_size).step_by(subsample_stride) {
        for c in (0..crop_size).step_by(subsample_stride) {
            values.push(response[[offset + r, offset + c]]);
        }
    }
    debug_assert_eq!(values.len(), kept * kept);
    Ok(SubsetVector {
        values,
        derivative_id,
        scale_index,
        crop_size,
        subsample_stride,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn coordinate_image(rows: usize, cols: usize) -> Image {
        // Unique value per pixel so slicing bugs cannot cancel out.
        Array2::from_shape_fn((rows, cols), |(r, c)| (r * cols + c) as f64)
    }

    // ---- split_halves -----------------------------------------------------

    #[test]
    fn split_even_height_in_half() {
        let image = coordinate_image(640, 640);
        let (upper, lower) = split_halves(&image).unwrap();
        assert_eq!(upper.dim(), (320, 640));
        assert_eq!(lower.dim(), (320, 640));
        assert_eq!(upper[[0, 0]], image[[0, 0]]);
        assert_eq!(lower[[0, 0]], image[[320, 0]]);
        assert_eq!(lower[[319, 639]], image[[639, 639]]);
    }

    #[test]
    fn split_smallest_legal_image() {
        let image = coordinate_image(2, 2);
        let (upper, lower) = split_halves(&image).unwrap();
        assert_eq!(upper.dim(), (1, 2));
        assert_eq!(lower.dim(), (1, 2));
    }

    #[test]
    fn split_odd_height_gives_extra_row_to_lower() {
        let image = coordinate_image(5, 4);
        let (upper, lower) = split_halves(&image).unwrap();
        assert_eq!(upper.dim(), (2, 4));
        assert_eq!(lower.dim(), (3, 4));
        assert_eq!(lower[[0, 0]], image[[2, 0]]);
    }

    #[test]
    fn split_rejects_single_row() {
        let image = coordinate_image(1, 8);
        assert!(matches!(
            split_halves(&image),
            Err(Error::InvalidArgument(_))
        ));
    }

    // ---- extract_patches ----------------------------------------------------

    #[test]
    fn default_half_yields_1769_patches() {
        let half = Array2::zeros((320, 640));
        let grid = extract_patches(&half, 32, 10, HalfId::Upper).unwrap();
        assert_eq!(grid.len(), 1769); // 29 rows * 61 cols of origins
        assert_eq!(grid.origins()[0], (0, 0));
        assert_eq!(*grid.origins().last().unwrap(), (280, 600));
    }

    #[test]
    fn origins_are_strictly_increasing_row_major() {
        let half = Array2::zeros((64, 96));
        let grid = extract_patches(&half, 32, 10, HalfId::Lower).unwrap();
        assert_eq!(grid.source_half(), HalfId::Lower);
        for pair in grid.origins().windows(2) {
            assert!(pair[0] < pair[1], "origins out of order: {pair:?}");
        }
        for &(r, c) in grid.origins() {
            assert!(r + 32 <= 64 && c + 32 <= 96);
        }
    }

    #[test]
    fn exact_fit_yields_single_patch() {
        let half = coordinate_image(32, 32);
        let grid = extract_patches(&half, 32, 7, HalfId::Upper).unwrap();
        assert_eq!(grid.len(), 1);
        assert_eq!(grid.origins()[0], (0, 0));
        assert_eq!(grid.patches()[0], half);
    }

    #[test]
    fn exact_tiling_yields_disjoint_patches_with_correct_content() {
        let half = coordinate_image(64, 64);
        let grid = extract_patches(&half, 32, 32, HalfId::Upper).unwrap();
        assert_eq!(grid.len(), 4);
        for (patch, &(r0, c0)) in grid.patches().iter().zip(grid.origins()) {
            for r in 0..32 {
                for c in 0..32 {
                    assert_eq!(patch[[r, c]], half[[r0 + r, c0 + c]]);
                }
            }
        }
    }

    #[test]
    fn extract_rejects_oversized_patch_and_zero_stride() {
        let half = Array2::zeros((20, 40));
        assert!(matches!(
            extract_patches(&half, 32, 10, HalfId::Upper),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            extract_patches(&half, 10, 0, HalfId::Upper),
            Err(Error::InvalidArgument(_))
        ));
    }

    // ---- preprocess_patch ---------------------------------------------------

    #[test]
    fn preprocessing_standardizes_mean_and_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let patch = Array2::from_shape_fn((32, 32), |_| 200.0 * rng.random::<f64>() + 30.0);
        let (out, degenerate) = preprocess_patch(&patch).unwrap();
        assert!(!degenerate);
        let n = out.len() as f64;
        let mean = out.sum() / n;
        let var = out.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!(mean.abs() < 1e-12, "mean = {mean}");
        assert!((var - 1.0).abs() < 1e-9, "variance = {var}");
    }

    #[test]
    fn constant_patch_maps_to_zeros_with_flag() {
        let patch = Array2::from_elem((16, 16), 123.456);
        let (out, degenerate) = preprocess_patch(&patch).unwrap();
        assert!(degenerate);
        assert!(out.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn preprocessing_is_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let patch = Array2::from_shape_fn((16, 16), |_| rng.random::<f64>());
        let (once, _) = preprocess_patch(&patch).unwrap();
        let (twice, degenerate) = preprocess_patch(&once).unwrap();
        assert!(!degenerate);
        for (a, b) in once.iter().zip(twice.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn preprocessing_removes_affine_differences() {
        // Two patches differing only in brightness/contrast standardize to
        // the same thing.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let base = Array2::from_shape_fn((16, 16), |_| rng.random::<f64>());
        let shifted = base.mapv(|v| 3.0 * v + 17.0);
        let (a, _) = preprocess_patch(&base).unwrap();
        let (b, _) = preprocess_patch(&shifted).unwrap();
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    // ---- crop_and_vectorize ---------------------------------------------------

    #[test]
    fn central_crop_has_correct_offset_and_length() {
        let response = coordinate_image(32, 32);
        let sv = crop_and_vectorize(&response, DerivativeId::Lx, 0, 18, 1).unwrap();
        assert_eq!(sv.values.len(), 324);
        assert_eq!(sv.derivative_id, DerivativeId::Lx);
        assert_eq!(sv.scale_index, 0);
        // offset (32-18)/2 = 7; row-major flattening
        for r in 0..18 {
            for c in 0..18 {
                assert_eq!(sv.values[r * 18 + c], response[[7 + r, 7 + c]]);
            }
        }
    }

    #[test]
    fn default_crop_lengths_match_their_sizes() {
        let response = Array2::zeros((32, 32));
        for (crop, expected) in [(18, 324), (24, 576), (30, 900)] {
            let sv = crop_and_vectorize(&response, DerivativeId::L, 0, crop, 1).unwrap();
            assert_eq!(sv.values.len(), expected);
        }
    }

    #[test]
    fn subsampling_keeps_every_nth_pixel() {
        let response = coordinate_image(32, 32);
        let sv = crop_and_vectorize(&response, DerivativeId::L, 1, 18, 3).unwrap();
        assert_eq!(sv.values.len(), 36); // ceil(18/3)^2
        let mut i = 0;
        for r in (0..18).step_by(3) {
            for c in (0..18).step_by(3) {
                assert_eq!(sv.values[i], response[[7 + r, 7 + c]]);
                i += 1;
            }
        }
    }

    #[test]
    fn stride_one_crop_is_lossless() {
        let response = coordinate_image(32, 32);
        let sv = crop_and_vectorize(&response, DerivativeId::Lyy, 2, 30, 1).unwrap();
        let rebuilt = Array2::from_shape_vec((30, 30), sv.values.clone()).unwrap();
        assert_eq!(rebuilt, response.slice(s![1..31, 1..31]).to_owned());
    }

    #[test]
    fn crop_rejects_bad_geometry() {
        let response = Array2::zeros((32, 32));
        assert!(matches!(
            crop_and_vectorize(&response, DerivativeId::L, 0, 40, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            crop_and_vectorize(&response, DerivativeId::L, 0, 17, 1),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            crop_and_vectorize(&response, DerivativeId::L, 0, 18, 0),
            Err(Error::InvalidArgument(_))
        ));
        let rect = Array2::zeros((32, 30));
        assert!(matches!(
            crop_and_vectorize(&rect, DerivativeId::L, 0, 18, 1),
            Err(Error::InvalidArgument(_))
        ));
    }
}
