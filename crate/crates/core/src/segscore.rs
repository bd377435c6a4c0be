//! Foreground scoring of segmentation maps.
//!
//! A pixel belongs to the foreground when its most probable label is one of
//! the classes rather than background. The baseline score (BLS) of a map is
//! the mean winning probability over foreground pixels; the ODIN score (ODS)
//! is the BLS of the segmentation of an ODIN-perturbed input.

use core::convert::Infallible;
use core::fmt;

use crate::error::Error;
use crate::image::{RgbImage, SegMap};
use crate::odin::{self, Classifier, OdinParams};

/// Which detector produced a score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum ScoreKind {
    Bls,
    Ods,
    #[cfg_attr(feature = "serde", serde(rename = "ssim"))]
    SsimMax,
    Baseline,
    Odin,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 5] = [
        ScoreKind::Bls,
        ScoreKind::Ods,
        ScoreKind::SsimMax,
        ScoreKind::Baseline,
        ScoreKind::Odin,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreKind::Bls => "bls",
            ScoreKind::Ods => "ods",
            ScoreKind::SsimMax => "ssim",
            ScoreKind::Baseline => "baseline",
            ScoreKind::Odin => "odin",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A score in `[0, 1]`; higher means more in-distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScore {
    pub value: f64,
    pub kind: ScoreKind,
}

/// Detector output. `Ood` corresponds to the algorithmic output 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    InDistribution,
    Ood,
}

impl Verdict {
    /// Flags OOD iff `score < epsilon`.
    pub fn from_score(score: f64, epsilon: f64) -> Self {
        if score < epsilon {
            Verdict::Ood
        } else {
            Verdict::InDistribution
        }
    }

    pub fn as_u8(self) -> u8 {
        match self {
            Verdict::InDistribution => 0,
            Verdict::Ood => 1,
        }
    }

    pub fn is_ood(self) -> bool {
        self == Verdict::Ood
    }
}

/// Anything that maps an image to per-pixel class probabilities.
pub trait SegmentationBackend {
    type Error;

    fn segment(&self, image: &RgbImage) -> Result<SegMap, Self::Error>;
}

impl<S: SegmentationBackend + ?Sized> SegmentationBackend for &S {
    type Error = S::Error;

    fn segment(&self, image: &RgbImage) -> Result<SegMap, Self::Error> {
        (**self).segment(image)
    }
}

/// Failure of a scoring pipeline: either the inputs were inconsistent or the
/// segmentation backend failed.
#[derive(Debug, Clone, PartialEq)]
pub enum PipelineError<E> {
    Core(Error),
    Backend(E),
}

impl<E: fmt::Display> fmt::Display for PipelineError<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PipelineError::Core(e) => write!(f, "{e}"),
            PipelineError::Backend(e) => write!(f, "segmentation backend: {e}"),
        }
    }
}

impl<E: fmt::Debug + fmt::Display> core::error::Error for PipelineError<E> {}

impl From<PipelineError<Infallible>> for Error {
    fn from(e: PipelineError<Infallible>) -> Self {
        match e {
            PipelineError::Core(e) => e,
            PipelineError::Backend(never) => match never {},
        }
    }
}

/// Winning probability of a pixel vector when a class wins, 0 when the
/// background (last entry) wins. A tie between a class and background goes to
/// the class.
pub fn v_score(q: &[f64]) -> f64 {
    let Some((&background, classes)) = q.split_last() else {
        return 0.0;
    };
    let best = classes.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if best >= background {
        best
    } else {
        0.0
    }
}

/// Mean of [`v_score`] over foreground pixels; 0 when there is no foreground.
pub fn bls(map: &SegMap) -> DetectionScore {
    let mut sum = 0.0;
    let mut count = 0usize;
    for q in map.pixels() {
        let v = v_score(q);
        if v != 0.0 {
            sum += v;
            count += 1;
        }
    }
    let value = if count == 0 { 0.0 } else { sum / count as f64 };
    DetectionScore {
        value,
        kind: ScoreKind::Bls,
    }
}

/// Segments `image` with `seg` and returns its BLS.
pub fn bls_image<S: SegmentationBackend>(
    image: &RgbImage,
    seg: &S,
) -> Result<DetectionScore, PipelineError<S::Error>> {
    let map = seg.segment(image).map_err(PipelineError::Backend)?;
    Ok(bls(&map))
}

/// BLS of the segmentation of the ODIN-perturbed input. The perturbation uses
/// the classifier's gradient; the segmentation backend only sees the result.
pub fn ods<C, S>(
    image: &RgbImage,
    classifier: &C,
    seg: &S,
    params: &OdinParams,
) -> Result<DetectionScore, PipelineError<S::Error>>
where
    C: Classifier + ?Sized,
    S: SegmentationBackend,
{
    let perturbed = odin::perturb(image, classifier, params).map_err(PipelineError::Core)?;
    let map = seg.segment(&perturbed).map_err(PipelineError::Backend)?;
    Ok(DetectionScore {
        value: bls(&map).value,
        kind: ScoreKind::Ods,
    })
}

/// Detection score choice for segmentation-based detection.
#[derive(Debug, Clone, Copy)]
pub enum SegDetector<'a, C: ?Sized> {
    Bls,
    Ods {
        classifier: &'a C,
        params: OdinParams,
    },
}

impl<C: Classifier + ?Sized> SegDetector<'_, C> {
    pub fn score<S: SegmentationBackend>(
        &self,
        image: &RgbImage,
        seg: &S,
    ) -> Result<DetectionScore, PipelineError<S::Error>> {
        match self {
            SegDetector::Bls => bls_image(image, seg),
            SegDetector::Ods { classifier, params } => ods(image, *classifier, seg, params),
        }
    }
}

/// Segmentation-network detector: OOD iff the chosen score is below `epsilon`.
pub fn detect_with_segmentation<C, S>(
    image: &RgbImage,
    seg: &S,
    detector: &SegDetector<'_, C>,
    epsilon: f64,
) -> Result<(Verdict, DetectionScore), PipelineError<S::Error>>
where
    C: Classifier + ?Sized,
    S: SegmentationBackend,
{
    if !(0.0..=1.0).contains(&epsilon) {
        return Err(PipelineError::Core(Error::InvalidParameter(
            "epsilon must lie in [0, 1]",
        )));
    }
    let score = detector.score(image, seg)?;
    Ok((Verdict::from_score(score.value, epsilon), score))
}
