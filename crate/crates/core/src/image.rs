//! Image-shaped containers: RGB inputs, per-pixel class probability maps and
//! binary foreground maps. All of them are row-major and immutable once built.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Maximum deviation of a per-pixel probability vector's sum from 1.
pub const SIMPLEX_TOLERANCE: f64 = 1e-5;

fn check_dims(height: usize, width: usize) -> Result<()> {
    if height == 0 || width == 0 {
        return Err(Error::EmptyDimensions { height, width });
    }
    Ok(())
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DataLength { expected, found });
    }
    Ok(())
}

/// An `h x w x 3` image with channel values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl RgbImage {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        check_len(height * width * 3, data.len())?;
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange { index, value });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Image filled with a single color.
    pub fn filled(height: usize, width: usize, rgb: [f64; 3]) -> Result<Self> {
        let mut data = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            data.extend_from_slice(&rgb);
        }
        Self::new(height, width, data)
    }

    /// Builds an image from a per-pixel color function. Values are clamped to
    /// `[0, 1]`.
    pub fn from_fn<F>(height: usize, width: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> [f64; 3],
    {
        check_dims(height, width)?;
        let mut data = Vec::with_capacity(height * width * 3);
        for r in 0..height {
            for c in 0..width {
                data.extend(f(r, c).iter().map(|v| v.clamp(0.0, 1.0)));
            }
        }
        Self::new(height, width, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Flattened `h * w * 3` view, the classifier input layout.
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = [f64; 3]> + '_ {
        self.data.chunks_exact(3).map(|p| [p[0], p[1], p[2]])
    }
}

/// Per-pixel probabilities over `num_classes` classes plus a trailing
/// background label (index `num_classes`).
#[derive(Debug, Clone, PartialEq)]
pub struct SegMap {
    height: usize,
    width: usize,
    num_classes: usize,
    data: Vec<f64>,
}

impl SegMap {
    /// Validates the simplex invariant. On violation the worst pixel (largest
    /// deviation of its sum from 1) is reported.
    pub fn new(height: usize, width: usize, num_classes: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        if num_classes == 0 {
            return Err(Error::InvalidParameter("num_classes must be at least 1"));
        }
        let depth = num_classes + 1;
        check_len(height * width * depth, data.len())?;
        if let Some((index, &value)) = data
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::OutOfRange { index, value });
        }
        let mut worst: Option<(usize, f64)> = None;
        for (p, q) in data.chunks_exact(depth).enumerate() {
            let sum: f64 = q.iter().sum();
            let dev = (sum - 1.0).abs();
            if dev > SIMPLEX_TOLERANCE && worst.is_none_or(|(_, s)| dev > (s - 1.0).abs()) {
                worst = Some((p, sum));
            }
        }
        if let Some((p, sum)) = worst {
            return Err(Error::SimplexViolation {
                row: p / width,
                col: p % width,
                sum,
            });
        }
        Ok(Self {
            height,
            width,
            num_classes,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of classes, excluding background.
    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn background_index(&self) -> usize {
        self.num_classes
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn pixel(&self, row: usize, col: usize) -> &[f64] {
        let depth = self.num_classes + 1;
        let i = (row * self.width + col) * depth;
        &self.data[i..i + depth]
    }

    /// Per-pixel vectors in row-major order.
    pub fn pixels(&self) -> core::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.num_classes + 1)
    }
}

/// `h x w` map of `{0, 1}`; 1 marks semantically relevant pixels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BinaryMap {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl BinaryMap {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        check_dims(height, width)?;
        check_len(height * width, data.len())?;
        if let Some((index, &value)) = data.iter().enumerate().find(|(_, v)| **v > 1) {
            return Err(Error::NotBinary { index, value });
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn zeros(height: usize, width: usize) -> Result<Self> {
        Self::new(height, width, vec![0; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.data
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.data[row * self.width + col]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v == 1).count()
    }
}

/// Single-channel real-valued map.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayMap {
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(height, width)?;
        check_len(height * width, data.len())?;
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Read access to a single-channel map, as consumed by SSIM.
pub trait Plane {
    fn height(&self) -> usize;
    fn width(&self) -> usize;
    /// Value at row-major index `i`.
    fn at(&self, i: usize) -> f64;
}

impl Plane for BinaryMap {
    fn height(&self) -> usize {
        self.height
    }
    fn width(&self) -> usize {
        self.width
    }
    fn at(&self, i: usize) -> f64 {
        f64::from(self.data[i])
    }
}

impl Plane for GrayMap {
    fn height(&self) -> usize {
        self.height
    }
    fn width(&self) -> usize {
        self.width
    }
    fn at(&self, i: usize) -> f64 {
        self.data[i]
    }
}
