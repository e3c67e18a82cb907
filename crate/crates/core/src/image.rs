//! Single-channel floating-point images, PGM I/O, AWGN corruption and
//! quality metrics.

use std::path::PathBuf;

use thiserror::Error;

mod metrics;
mod noise;
mod pgm;

pub use metrics::{mse, psnr, ssim, MetricTriple, SSIM_WINDOW};
pub use noise::{add_awgn, NoiseSpec};
pub use pgm::{load_image, read_pgm, save_image, write_pgm};

/// Largest representable intensity.
pub const MAX_INTENSITY: f64 = 255.0;

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("invalid image: {0}")]
    Invalid(String),
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("image {width}x{height} smaller than required {min}x{min}")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("malformed PGM header: {0}")]
    BadHeader(String),
    #[error("unsupported PGM maxval {0} (only 255 is supported)")]
    UnsupportedMaxval(u32),
    #[error("truncated PGM payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Row-major, single-channel intensity grid with nominal range `[0, 255]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if width == 0 || height == 0 {
            return Err(ImageError::Invalid(format!("zero dimension {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(ImageError::Invalid(format!("data length {} != {width}x{height}", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(ImageError::Invalid(format!("non-finite value at index {i}")));
        }
        Ok(Self { width, height, data })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        assert!(width > 0 && height > 0 && value.is_finite());
        Self { width, height, data: vec![value; width * height] }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(width > 0 && height > 0);
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(y, x));
            }
        }
        Self::new(width, height, data).expect("from_fn produced non-finite value")
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Clamps every value to `[0, 255]`.
    pub fn clamped(mut self) -> Self {
        for v in &mut self.data {
            *v = v.clamp(0.0, MAX_INTENSITY);
        }
        self
    }

    /// Rounds to the 8-bit values a PGM export would store.
    pub fn quantized(&self) -> Self {
        let data = self.data.iter().map(|&v| f64::from(quantize(v))).collect();
        Self { width: self.width, height: self.height, data }
    }

    /// Copies out a `width x height` window with top-left corner `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Result<Self, ImageError> {
        if width == 0 || height == 0 || row + height > self.height || col + width > self.width {
            return Err(ImageError::Invalid(format!(
                "crop {width}x{height}@({row},{col}) outside {}x{}",
                self.width, self.height
            )));
        }
        Ok(Self::from_fn(width, height, |y, x| self.get(row + y, col + x)))
    }

    pub(crate) fn ensure_same_dims(&self, other: &Image) -> Result<(), ImageError> {
        if self.width != other.width || self.height != other.height {
            return Err(ImageError::DimensionMismatch(self.width, self.height, other.width, other.height));
        }
        Ok(())
    }
}

/// Clamp to `[0, 255]` then round half away from zero.
pub fn quantize(v: f64) -> u8 {
    v.clamp(0.0, MAX_INTENSITY).round() as u8
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_construction() {
        assert!(Image::new(0, 1, vec![]).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
        assert!(Image::new(1, 1, vec![f64::NAN]).is_err());
        assert!(Image::new(1, 1, vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn quantize_rules() {
        assert_eq!(quantize(255.7), 255);
        assert_eq!(quantize(127.5), 128);
        assert_eq!(quantize(-3.0), 0);
        assert_eq!(quantize(0.49), 0);
    }

    #[test]
    fn crop_bounds() {
        let img = Image::from_fn(4, 3, |y, x| (y * 4 + x) as f64);
        let c = img.crop(1, 2, 2, 2).unwrap();
        assert_eq!(c.data(), &[6.0, 7.0, 10.0, 11.0]);
        assert!(img.crop(2, 0, 1, 2).is_err());
    }
}
