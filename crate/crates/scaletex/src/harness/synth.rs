//! Seeded synthetic texture generation: a redistributable stand-in for
//! copyrighted texture albums. Every generator is a pure function of
//! (kind, size, seed); outputs are integer-valued grayscale images in
//! [0, 255].

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{SyntheticKind, SyntheticSpec};
use super::curve::derive_seed;
use crate::error::{Error, Result};
use crate::scale_space::{convolve_reflective, gaussian_derivative_kernel, DEFAULT_TRUNCATION};
use crate::Image;

/// Seed stream for class images derived from the experiment master seed,
/// so the same master always synthesizes the same dataset regardless of
/// training sizes or repetition counts.
pub(crate) fn class_seed(master: u64, class_index: usize) -> u64 {
    derive_seed(master, 0x73796e74, class_index as u64)
}

impl SyntheticSpec {
    /// Generates this class image, deriving the seed from `master_seed`
    /// when the recipe does not fix one.
    pub fn generate(&self, master_seed: u64, class_index: usize) -> Result<Image> {
        let seed = self
            .seed
            .unwrap_or_else(|| class_seed(master_seed, class_index));
        synth_texture(&self.kind, self.size, seed)
    }
}

fn gaussian_field(rng: &mut ChaCha8Rng, size: usize) -> Array2<f64> {
    Array2::from_shape_fn((size, size), |_| StandardNormal.sample(rng))
}

/// Rescales to [0, 255] by min-max and rounds to integer levels, mimicking
/// an 8-bit acquisition. A constant field maps to all zeros.
fn quantize(raw: &Array2<f64>) -> Image {
    let min = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let max = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(max - min > 0.0) {
        return Array2::zeros(raw.dim());
    }
    raw.mapv(|v| ((v - min) / (max - min) * 255.0).round())
}

fn smoothed_noise(size: usize, sigma: f64, rng: &mut ChaCha8Rng) -> Result<Array2<f64>> {
    let field = gaussian_field(rng, size);
    let kernel = gaussian_derivative_kernel(sigma, 0, 0, DEFAULT_TRUNCATION)?;
    convolve_reflective(&field, &kernel)
}

/// Generates one synthetic texture, deterministic in (kind, size, seed).
pub fn synth_texture(kind: &SyntheticKind, size: usize, seed: u64) -> Result<Image> {
    if size < 64 {
        return Err(Error::invalid(format!(
            "synthetic size must be at least 64, got {size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let raw = match kind {
        SyntheticKind::Sinusoid {
            wavelength,
            angle,
            noise_amplitude,
        } => {
            if !(*wavelength > 0.0) {
                return Err(Error::invalid("sinusoid wavelength must be positive"));
            }
            if *noise_amplitude < 0.0 {
                return Err(Error::invalid("noise amplitude must be nonnegative"));
            }
            let (sin_a, cos_a) = angle.sin_cos();
            let omega = 2.0 * std::f64::consts::PI / wavelength;
            Array2::from_shape_fn((size, size), |(y, x)| {
                let phase = omega * (x as f64 * sin_a + y as f64 * cos_a);
                let noise: f64 = StandardNormal.sample(&mut rng);
                127.5 * phase.sin() + noise_amplitude * noise
            })
        }
        SyntheticKind::Checkerboard {
            cell,
            noise_amplitude,
        } => {
            if *cell == 0 {
                return Err(Error::invalid("checkerboard cell must be at least 1"));
            }
            if *noise_amplitude < 0.0 {
                return Err(Error::invalid("noise amplitude must be nonnegative"));
            }
            Array2::from_shape_fn((size, size), |(y, x)| {
                let parity = ((x / cell) + (y / cell)) % 2;
                let noise: f64 = StandardNormal.sample(&mut rng);
                parity as f64 * 255.0 + noise_amplitude * noise
            })
        }
        SyntheticKind::FilteredNoise { sigma } => {
            if !(*sigma > 0.0) {
                return Err(Error::invalid("filtered-noise sigma must be positive"));
            }
            smoothed_noise(size, *sigma, &mut rng)?
        }
        SyntheticKind::Blobs { sigma, threshold } => {
            if !(*sigma > 0.0) {
                return Err(Error::invalid("blob sigma must be positive"));
            }
            if !(*threshold > 0.0 && *threshold < 1.0) {
                return Err(Error::invalid(format!(
                    "blob threshold is a quantile and must lie in (0, 1), got {threshold}"
                )));
            }
            let smooth = smoothed_noise(size, *sigma, &mut rng)?;
            let mut sorted: Vec<f64> = smooth.iter().copied().collect();
            sorted.sort_by(f64::total_cmp);
            let cut = sorted[((sorted.len() - 1) as f64 * threshold).round() as usize];
            smooth.mapv(|v| if v > cut { 255.0 } else { 0.0 })
        }
    };
    Ok(quantize(&raw))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lag_autocorrelation(image: &Image, lag: usize) -> f64 {
        let (rows, cols) = image.dim();
        let n = (rows * cols) as f64;
        let mean = image.sum() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for y in 0..rows {
            for x in 0..cols {
                let d = image[[y, x]] - mean;
                den += d * d;
                if x + lag < cols {
                    num += d * (image[[y, x + lag]] - mean);
                }
            }
        }
        num / den
    }

    #[test]
    fn generation_is_deterministic() {
        let kind = SyntheticKind::FilteredNoise { sigma: 2.0 };
        let a = synth_texture(&kind, 96, 7).unwrap();
        let b = synth_texture(&kind, 96, 7).unwrap();
        assert_eq!(a, b);
        let c = synth_texture(&kind, 96, 8).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn values_are_integer_8_bit_levels() {
        for kind in [
            SyntheticKind::Sinusoid {
                wavelength: 12.0,
                angle: 0.3,
                noise_amplitude: 20.0,
            },
            SyntheticKind::Checkerboard {
                cell: 10,
                noise_amplitude: 20.0,
            },
            SyntheticKind::FilteredNoise { sigma: 3.0 },
        ] {
            let image = synth_texture(&kind, 64, 3).unwrap();
            for v in image.iter() {
                assert!((0.0..=255.0).contains(v));
                assert_eq!(v.fract(), 0.0, "non-integer level {v}");
            }
        }
    }

    #[test]
    fn axis_aligned_sinusoid_has_constant_rows() {
        let kind = SyntheticKind::Sinusoid {
            wavelength: 16.0,
            angle: 0.0,
            noise_amplitude: 0.0,
        };
        let image = synth_texture(&kind, 64, 1).unwrap();
        for y in 0..64 {
            for x in 1..64 {
                assert_eq!(image[[y, x]], image[[y, 0]], "row {y} varies");
            }
        }
        // ... and the column direction does vary.
        assert!((0..64).any(|y| image[[y, 0]] != image[[0, 0]]));
    }

    #[test]
    fn wider_smoothing_widens_the_autocorrelation() {
        let narrow = synth_texture(&SyntheticKind::FilteredNoise { sigma: 1.0 }, 128, 5).unwrap();
        let wide = synth_texture(&SyntheticKind::FilteredNoise { sigma: 3.0 }, 128, 5).unwrap();
        let r_narrow = lag_autocorrelation(&narrow, 3);
        let r_wide = lag_autocorrelation(&wide, 3);
        assert!(
            r_wide > r_narrow,
            "lag-3 autocorrelation: sigma=3 gives {r_wide}, sigma=1 gives {r_narrow}"
        );
    }

    #[test]
    fn blobs_are_binary_with_the_requested_fill() {
        let kind = SyntheticKind::Blobs {
            sigma: 3.0,
            threshold: 0.3,
        };
        let image = synth_texture(&kind, 128, 9).unwrap();
        let mut white = 0usize;
        for v in image.iter() {
            assert!(*v == 0.0 || *v == 255.0, "non-binary level {v}");
            if *v == 255.0 {
                white += 1;
            }
        }
        let fill = white as f64 / (128.0 * 128.0);
        assert!((fill - 0.7).abs() < 0.05, "white fraction {fill}");
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        assert!(synth_texture(
            &SyntheticKind::Sinusoid {
                wavelength: 0.0,
                angle: 0.0,
                noise_amplitude: 1.0
            },
            64,
            0
        )
        .is_err());
        assert!(synth_texture(
            &SyntheticKind::Checkerboard {
                cell: 0,
                noise_amplitude: 1.0
            },
            64,
            0
        )
        .is_err());
        assert!(synth_texture(&SyntheticKind::FilteredNoise { sigma: 0.0 }, 64, 0).is_err());
        assert!(synth_texture(
            &SyntheticKind::Blobs {
                sigma: 1.0,
                threshold: 1.0
            },
            64,
            0
        )
        .is_err());
        assert!(synth_texture(&SyntheticKind::FilteredNoise { sigma: 1.0 }, 32, 0).is_err());
    }

    #[test]
    fn spec_seed_resolution_prefers_the_explicit_seed() {
        let spec = SyntheticSpec {
            kind: SyntheticKind::FilteredNoise { sigma: 1.0 },
            size: 64,
            seed: Some(11),
        };
        let fixed = spec.generate(999, 0).unwrap();
        let direct = synth_texture(&spec.kind, 64, 11).unwrap();
        assert_eq!(fixed, direct);

        let derived_spec = SyntheticSpec { seed: None, ..spec };
        let a = derived_spec.generate(999, 0).unwrap();
        let b = derived_spec.generate(999, 1).unwrap();
        assert_ne!(a, b, "different classes must get different derived seeds");
    }
}
