//! Color-prototype segmenter used as a stand-in segmentation network.
//!
//! Per pixel the class logits are `-beta * |pixel - prototype_i|` and the
//! background logit is `-beta * d0`; the probabilities are their softmax.
//! A pixel is therefore foreground exactly when some prototype lies within
//! `d0` of it.

use alloc::vec::Vec;
use core::convert::Infallible;

use crate::error::{Error, Result};
use crate::image::{RgbImage, SegMap};
use crate::math;
use crate::odin::softmax_t;
use crate::segscore::SegmentationBackend;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ToySegmenter {
    prototypes: Vec<[f64; 3]>,
    sharpness: f64,
    background_distance: f64,
}

impl ToySegmenter {
    pub fn new(prototypes: Vec<[f64; 3]>, sharpness: f64, background_distance: f64) -> Result<Self> {
        if prototypes.is_empty() {
            return Err(Error::InvalidParameter("toy segmenter needs at least one prototype"));
        }
        for (i, p) in prototypes.iter().enumerate() {
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParameter("prototype colors must be finite"));
            }
            if prototypes[..i].contains(p) {
                return Err(Error::InvalidParameter("prototype colors must be distinct"));
            }
        }
        if !(sharpness > 0.0 && sharpness.is_finite()) {
            return Err(Error::InvalidParameter("sharpness must be > 0"));
        }
        if !(background_distance > 0.0 && background_distance.is_finite()) {
            return Err(Error::InvalidParameter("background distance must be > 0"));
        }
        Ok(Self {
            prototypes,
            sharpness,
            background_distance,
        })
    }

    pub fn prototypes(&self) -> &[[f64; 3]] {
        &self.prototypes
    }

    pub fn sharpness(&self) -> f64 {
        self.sharpness
    }

    pub fn background_distance(&self) -> f64 {
        self.background_distance
    }

    pub fn num_classes(&self) -> usize {
        self.prototypes.len()
    }

    /// Probability vector of one pixel.
    pub fn pixel_probabilities(&self, rgb: [f64; 3]) -> Vec<f64> {
        let mut logits: Vec<f64> = self
            .prototypes
            .iter()
            .map(|p| {
                let d2: f64 = p.iter().zip(&rgb).map(|(a, b)| (a - b) * (a - b)).sum();
                -self.sharpness * math::sqrt(d2)
            })
            .collect();
        logits.push(-self.sharpness * self.background_distance);
        softmax_t(&logits, 1.0).expect("finite logits")
    }

    pub fn segment_image(&self, x: &RgbImage) -> SegMap {
        let mut data = Vec::with_capacity(x.height() * x.width() * (self.num_classes() + 1));
        for p in x.pixels() {
            data.extend(self.pixel_probabilities(p));
        }
        SegMap::new(x.height(), x.width(), self.num_classes(), data).expect("softmax rows are on the simplex")
    }
}

impl SegmentationBackend for ToySegmenter {
    type Error = Infallible;

    fn segment(&self, image: &RgbImage) -> core::result::Result<SegMap, Infallible> {
        Ok(self.segment_image(image))
    }
}
