//! Multiscale texture classification from Gaussian-derivative patch features.
//!
//! The library implements a complete patch-classification pipeline:
//!
//! 1. [`scale_space`] — Gaussian derivative kernels, reflective-boundary
//!    convolution, and the N-jet (L, Lx, Ly, Lxx, Lxy, Lyy) of a patch at a
//!    set of scales.
//! 2. [`patching`] — train/test half splits, overlapping patch extraction,
//!    DC-cancellation + variance normalization, and scale-dependent central
//!    crops flattened into per-(derivative, scale) feature subsets.
//! 3. [`features`] — per-subset PCA retaining a configured variance fraction.
//! 4. [`classifiers`] — regularized quadratic discriminant, k-NN, and Parzen
//!    base classifiers emitting normalized per-class confidences.
//! 5. [`combiners`] — decision profiles and the combiner algebra: fixed
//!    one-stage rules, majority vote, both two-stage topologies, and
//!    trainable decision templates.
//! 6. [`harness`] — experiment configuration, synthetic texture generation,
//!    image ingestion, the end-to-end pipeline, learning curves, the
//!    multiresolution-histogram and combined-feature-space baselines, and
//!    CSV/SVG export.
//!
//! Everything is deterministic given the experiment seed: learning curves are
//! pure functions of their configuration.

// Validation guards are written as `!(x > 0.0)` on purpose: the negated form
// rejects NaN along with non-positive values, which `x <= 0.0` would let
// through silently.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classifiers;
pub mod combiners;
pub mod error;
pub mod features;
pub mod harness;
pub mod patching;
pub mod scale_space;

pub use error::{Error, Result};

/// 2D grayscale intensity raster stored as reals; index order is
/// `[row, col]` = `[y, x]`. Source images are 8-bit, so values lie in
/// `[0, 255]`, but all arithmetic is done in `f64`.
pub type Image = ndarray::Array2<f64>;
