//! Image ingestion and export. Readers accept PNG and PGM/PPM files and
//! convert everything to a grayscale matrix of reals in [0, 255]; the
//! writer emits binary 8-bit PGM.

use std::io::Write as _;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::Image;

fn ingestion_error(path: &Path, reason: impl std::fmt::Display) -> Error {
    Error::Ingestion {
        path: path.display().to_string(),
        reason: reason.to_string(),
    }
}

/// Loads an image file as a grayscale matrix. 8-bit grayscale maps
/// directly; 8-bit color collapses via the luminance weights
/// 0.299 R + 0.587 G + 0.114 B; alpha is dropped. Anything else
/// (16-bit, float formats) is rejected loudly rather than silently
/// truncated.
pub fn load_grayscale(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let decoded = image::ImageReader::open(path)
        .map_err(|e| ingestion_error(path, e))?
        .decode()
        .map_err(|e| ingestion_error(path, e))?;

    let (width, height) = (decoded.width() as usize, decoded.height() as usize);
    if width == 0 || height == 0 {
        return Err(ingestion_error(path, "image has zero pixels"));
    }
    let mut out = Array2::zeros((height, width));
    match decoded {
        image::DynamicImage::ImageLuma8(buf) => {
            for (x, y, pixel) in buf.enumerate_pixels() {
                out[[y as usize, x as usize]] = pixel.0[0] as f64;
            }
        }
        image::DynamicImage::ImageLumaA8(buf) => {
            for (x, y, pixel) in buf.enumerate_pixels() {
                out[[y as usize, x as usize]] = pixel.0[0] as f64;
            }
        }
        image::DynamicImage::ImageRgb8(buf) => {
            for (x, y, pixel) in buf.enumerate_pixels() {
                let [r, g, b] = pixel.0;
                out[[y as usize, x as usize]] =
                    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
            }
        }
        image::DynamicImage::ImageRgba8(buf) => {
            for (x, y, pixel) in buf.enumerate_pixels() {
                let [r, g, b, _] = pixel.0;
                out[[y as usize, x as usize]] =
                    0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64;
            }
        }
        other => {
            return Err(ingestion_error(
                path,
                format!(
                    "unsupported pixel format {:?}; expected 8-bit grayscale or color",
                    other.color()
                ),
            ));
        }
    }
    Ok(out)
}

/// Writes a matrix as a binary 8-bit PGM file. Values are clamped to
/// [0, 255] and rounded.
pub fn write_pgm(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    let (rows, cols) = image.dim();
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("cannot write an empty image"));
    }
    let mut bytes = Vec::with_capacity(rows * cols + 32);
    write!(&mut bytes, "P5\n{cols} {rows}\n255\n")?;
    for v in image.iter() {
        bytes.push(v.round().clamp(0.0, 255.0) as u8);
    }
    std::fs::write(path, bytes)?;
    Ok(())
}
