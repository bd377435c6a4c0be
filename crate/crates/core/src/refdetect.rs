//! Reference-set detection: one binarized representative per class, and a
//! detector that thresholds the best SSIM of an input's relevant part against
//! those representatives.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::felzseg::RelevanceExtractor;
use crate::image::{BinaryMap, RgbImage};
use crate::segscore::Verdict;
use crate::ssim::{ssim, SsimParams};

/// Labeled images; labels index the class set `0..num_classes`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledCorpus {
    pub items: Vec<(RgbImage, usize)>,
}

impl LabeledCorpus {
    pub fn new(items: Vec<(RgbImage, usize)>) -> Self {
        Self { items }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Items of one class, in corpus order.
    pub fn class_items(&self, label: usize) -> impl Iterator<Item = &RgbImage> {
        self.items.iter().filter(move |(_, l)| *l == label).map(|(x, _)| x)
    }
}

/// One binary map per class label, sorted by label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferenceSet {
    entries: Vec<(usize, BinaryMap)>,
    seed: u64,
}

impl ReferenceSet {
    /// Checks labels are distinct and maps share one shape; entries are
    /// stored sorted by label.
    pub fn from_entries(mut entries: Vec<(usize, BinaryMap)>, seed: u64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptySample);
        }
        entries.sort_by_key(|(l, _)| *l);
        if entries.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidParameter("reference labels must be distinct"));
        }
        let shape = (entries[0].1.height(), entries[0].1.width());
        if entries.iter().any(|(_, m)| (m.height(), m.width()) != shape) {
            return Err(Error::ShapeMismatch("reference maps differ in size"));
        }
        Ok(Self { entries, seed })
    }

    pub fn entries(&self) -> &[(usize, BinaryMap)] {
        &self.entries
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.entries[0].1.height(), self.entries[0].1.width())
    }
}

/// Strategy for choosing the per-class representative.
pub trait ReferenceSampler {
    /// Index into `candidates` (non-empty, corpus order) for one class.
    fn pick(&mut self, label: usize, candidates: &[&RgbImage]) -> usize;
}

/// One uniform draw per class from a seeded ChaCha8 stream.
#[derive(Debug, Clone)]
pub struct UniformSampler {
    rng: ChaCha8Rng,
}

impl UniformSampler {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl ReferenceSampler for UniformSampler {
    fn pick(&mut self, _label: usize, candidates: &[&RgbImage]) -> usize {
        self.rng.random_range(0..candidates.len())
    }
}

/// Builds the reference set for classes `0..num_classes` with a custom
/// sampler. Classes are visited in ascending order.
pub fn build_reference_set_with<E, S>(
    corpus: &LabeledCorpus,
    num_classes: usize,
    extractor: &E,
    sampler: &mut S,
    seed: u64,
) -> Result<ReferenceSet>
where
    E: RelevanceExtractor + ?Sized,
    S: ReferenceSampler + ?Sized,
{
    if let Some(&(_, label)) = corpus.items.iter().find(|(_, l)| *l >= num_classes) {
        return Err(Error::UnknownLabel { label, num_classes });
    }
    let mut entries = Vec::with_capacity(num_classes);
    for label in 0..num_classes {
        let candidates: Vec<&RgbImage> = corpus.class_items(label).collect();
        if candidates.is_empty() {
            return Err(Error::EmptyClass(label));
        }
        let pick = sampler.pick(label, &candidates);
        entries.push((label, extractor.extract(candidates[pick])?));
    }
    ReferenceSet::from_entries(entries, seed)
}

/// Uniformly sampled reference set; deterministic given corpus and seed.
pub fn build_reference_set<E: RelevanceExtractor + ?Sized>(
    corpus: &LabeledCorpus,
    num_classes: usize,
    extractor: &E,
    seed: u64,
) -> Result<ReferenceSet> {
    build_reference_set_with(corpus, num_classes, extractor, &mut UniformSampler::new(seed), seed)
}

/// Result of reference-set detection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOutcome {
    pub verdict: Verdict,
    /// Best SSIM against the reference set.
    pub score: f64,
    /// Label of the best-matching reference; ties go to the smallest label.
    pub nearest: usize,
}

/// Best SSIM of an already extracted relevance map against the references.
pub fn ssim_max(relevant: &BinaryMap, refs: &ReferenceSet, p: &SsimParams) -> Result<(f64, usize)> {
    if (relevant.height(), relevant.width()) != refs.shape() {
        return Err(Error::ShapeMismatch("relevance map and references differ in size"));
    }
    let mut best = (f64::NEG_INFINITY, usize::MAX);
    for (label, r) in &refs.entries {
        let v = ssim(r, relevant, p)?;
        if v > best.0 || (v == best.0 && *label < best.1) {
            best = (v, *label);
        }
    }
    Ok(best)
}

/// Extracts the relevant part of `t`, scores it with [`ssim_max`] and flags
/// OOD iff the score is strictly below `epsilon`.
pub fn detect_with_references<E: RelevanceExtractor + ?Sized>(
    t: &RgbImage,
    extractor: &E,
    refs: &ReferenceSet,
    p: &SsimParams,
    epsilon: f64,
) -> Result<ReferenceOutcome> {
    let relevant = extractor.extract(t)?;
    let (score, nearest) = ssim_max(&relevant, refs, p)?;
    Ok(ReferenceOutcome {
        verdict: Verdict::from_score(score, epsilon),
        score,
        nearest,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn bars(width: usize) -> RgbImage {
        RgbImage::from_fn(8, 8, |_, c| if c < width { [1.0; 3] } else { [0.0; 3] }).unwrap()
    }

    /// Relevance = white pixels.
    fn threshold(x: &RgbImage) -> Result<BinaryMap> {
        let data = x.pixels().map(|p| u8::from(p[0] > 0.5)).collect();
        BinaryMap::new(x.height(), x.width(), data)
    }

    #[test]
    fn singleton_classes_pick_their_item() {
        let corpus = LabeledCorpus::new(vec![(bars(2), 0), (bars(5), 1)]);
        for seed in [0, 1, 99] {
            let r = build_reference_set(&corpus, 2, &threshold, seed).unwrap();
            assert_eq!(r.entries()[0].1, threshold(&bars(2)).unwrap());
            assert_eq!(r.entries()[1].1, threshold(&bars(5)).unwrap());
            assert_eq!(r.seed(), seed);
        }
    }

    #[test]
    fn empty_class_is_reported() {
        let corpus = LabeledCorpus::new(vec![(bars(2), 0), (bars(5), 2)]);
        assert_eq!(
            build_reference_set(&corpus, 3, &threshold, 0),
            Err(Error::EmptyClass(1))
        );
        assert!(matches!(
            build_reference_set(&corpus, 2, &threshold, 0),
            Err(Error::UnknownLabel { label: 2, .. })
        ));
    }

    #[test]
    fn same_seed_same_reference_set() {
        let corpus = LabeledCorpus::new((0..12).map(|i| (bars(1 + i % 6), i % 2)).collect());
        let a = build_reference_set(&corpus, 2, &threshold, 7).unwrap();
        let b = build_reference_set(&corpus, 2, &threshold, 7).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn exact_match_scores_one() {
        let corpus = LabeledCorpus::new(vec![(bars(2), 0), (bars(5), 1)]);
        let refs = build_reference_set(&corpus, 2, &threshold, 0).unwrap();
        let out = detect_with_references(&bars(5), &threshold, &refs, &SsimParams::default(), 1.0).unwrap();
        assert!((out.score - 1.0).abs() < 1e-12);
        assert_eq!(out.nearest, 1);
        assert_eq!(out.verdict, Verdict::InDistribution);
    }

    #[test]
    fn zero_epsilon_never_flags() {
        let corpus = LabeledCorpus::new(vec![(bars(2), 0), (bars(5), 1)]);
        let refs = build_reference_set(&corpus, 2, &threshold, 0).unwrap();
        let out = detect_with_references(&bars(0), &threshold, &refs, &SsimParams::default(), 0.0).unwrap();
        assert_eq!(out.verdict, Verdict::InDistribution);
    }

    #[test]
    fn ties_go_to_smallest_label() {
        let m = threshold(&bars(3)).unwrap();
        let refs = ReferenceSet::from_entries(vec![(4, m.clone()), (2, m.clone())], 0).unwrap();
        let (score, nearest) = ssim_max(&m, &refs, &SsimParams::default()).unwrap();
        assert_eq!(nearest, 2);
        assert!((score - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let refs = ReferenceSet::from_entries(vec![(0, BinaryMap::zeros(8, 8).unwrap())], 0).unwrap();
        let t = BinaryMap::zeros(9, 8).unwrap();
        assert!(matches!(
            ssim_max(&t, &refs, &SsimParams::default()),
            Err(Error::ShapeMismatch(_))
        ));
        assert!(ReferenceSet::from_entries(
            vec![(0, BinaryMap::zeros(8, 8).unwrap()), (0, BinaryMap::zeros(8, 8).unwrap())],
            0
        )
        .is_err());
    }
}
