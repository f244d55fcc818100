use crate::error::{Error, Result};
use crate::linalg::RealVector;

/// Row-major grayscale image with intensities nominally in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    width: usize,
    height: usize,
    pixels: RealVector,
}

impl ImageGrid {
    pub fn new(width: usize, height: usize, pixels: RealVector) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid("width/height", "image sides must be positive"));
        }
        crate::linalg::check_dim("pixels", width * height, pixels.dim())?;
        Ok(Self { width, height, pixels })
    }

    pub fn from_vec(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        Self::new(width, height, RealVector::new(pixels)?)
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_vec(width, height, vec![value; width * height])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.width * self.height
    }

    pub fn pixels(&self) -> &RealVector {
        &self.pixels
    }

    pub fn into_pixels(self) -> RealVector {
        self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.pixels[y * self.width + x]
    }
}

/// Half-sample symmetric extension: `… 1 0 | 0 1 … n−1 | n−1 n−2 …`.
/// Valid for any offset, including ones larger than `n`.
pub(crate) fn reflect(i: isize, n: usize) -> usize {
    let period = 2 * n as isize;
    let m = i.rem_euclid(period) as usize;
    if m < n {
        m
    } else {
        2 * n - 1 - m
    }
}
