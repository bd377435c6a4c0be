//! Threshold-free detection metrics.
//!
//! In-distribution samples are positives and OOD samples negatives. A sample
//! is accepted at threshold `eps` when `score >= eps`, so the detector flags
//! exactly the samples with `score < eps`. Thresholds are the distinct
//! observed scores plus the two infinite sentinels.

use alloc::string::String;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Truth {
    InDistribution,
    Ood,
}

impl Truth {
    pub fn name(self) -> &'static str {
        match self {
            Truth::InDistribution => "in_distribution",
            Truth::Ood => "ood",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoredSample {
    /// Higher means more in-distribution.
    pub score: f64,
    pub truth: Truth,
    pub tag: String,
}

impl ScoredSample {
    pub fn new(score: f64, truth: Truth, tag: impl Into<String>) -> Self {
        Self {
            score,
            truth,
            tag: tag.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RocPoint {
    pub fpr: f64,
    pub tpr: f64,
}

/// Accepted counts at one threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Counts {
    tp: u64,
    fp: u64,
}

struct Sweep {
    positives: u64,
    negatives: u64,
    /// Cumulative accepted counts for thresholds from +inf down to -inf.
    steps: Vec<Counts>,
    /// Threshold of `steps[i]`; the sentinels are +inf / -inf.
    thresholds: Vec<f64>,
}

fn sweep(samples: &[ScoredSample]) -> Result<Sweep> {
    if let Some(index) = samples.iter().position(|s| !s.score.is_finite()) {
        return Err(Error::NonFiniteScore { index });
    }
    let positives = samples.iter().filter(|s| s.truth == Truth::InDistribution).count() as u64;
    let negatives = samples.len() as u64 - positives;
    if positives == 0 || negatives == 0 {
        return Err(Error::DegenerateLabels);
    }
    let mut order: Vec<(f64, Truth)> = samples.iter().map(|s| (s.score, s.truth)).collect();
    order.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut steps = Vec::with_capacity(order.len() + 2);
    let mut thresholds = Vec::with_capacity(order.len() + 2);
    steps.push(Counts { tp: 0, fp: 0 });
    thresholds.push(f64::INFINITY);
    let mut acc = Counts { tp: 0, fp: 0 };
    let mut i = 0;
    while i < order.len() {
        let value = order[i].0;
        // equal scores (including -0.0 == 0.0) form one block
        while i < order.len() && order[i].0 == value {
            match order[i].1 {
                Truth::InDistribution => acc.tp += 1,
                Truth::Ood => acc.fp += 1,
            }
            i += 1;
        }
        steps.push(acc);
        thresholds.push(value);
    }
    steps.push(acc);
    thresholds.push(f64::NEG_INFINITY);
    Ok(Sweep {
        positives,
        negatives,
        steps,
        thresholds,
    })
}

/// ROC points from `(0, 0)` to `(1, 1)`, sorted by FPR then TPR, with
/// consecutive duplicates removed.
pub fn roc_curve(samples: &[ScoredSample]) -> Result<Vec<RocPoint>> {
    let s = sweep(samples)?;
    let mut points: Vec<RocPoint> = Vec::with_capacity(s.steps.len());
    for c in &s.steps {
        let p = RocPoint {
            fpr: c.fp as f64 / s.negatives as f64,
            tpr: c.tp as f64 / s.positives as f64,
        };
        if points.last() != Some(&p) {
            points.push(p);
        }
    }
    Ok(points)
}

/// AUROC as an exact fraction `(numerator, denominator)`, from the
/// trapezoidal rule on integer counts: `sum dFP * (TP_i + TP_{i+1}) / (2 P N)`.
pub fn auroc_fraction(samples: &[ScoredSample]) -> Result<(u64, u64)> {
    let s = sweep(samples)?;
    let twice_area: u64 = s
        .steps
        .windows(2)
        .map(|w| (w[1].fp - w[0].fp) * (w[0].tp + w[1].tp))
        .sum();
    Ok((twice_area, 2 * s.positives * s.negatives))
}

/// Trapezoidal area under the ROC curve.
pub fn auroc(samples: &[ScoredSample]) -> Result<f64> {
    let (num, den) = auroc_fraction(samples)?;
    Ok(num as f64 / den as f64)
}

/// Largest observed score `eps` whose acceptance rate `#{pos >= eps} / #pos`
/// reaches `target_tpr`. `target_tpr` must lie in `(0, 1]`.
pub fn calibrate_epsilon(positive_scores: &[f64], target_tpr: f64) -> Result<f64> {
    if !(target_tpr > 0.0 && target_tpr <= 1.0) {
        return Err(Error::InvalidParameter("target_tpr must lie in (0, 1]"));
    }
    if positive_scores.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(index) = positive_scores.iter().position(|s| !s.is_finite()) {
        return Err(Error::NonFiniteScore { index });
    }
    let mut sorted = positive_scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let n = sorted.len() as f64;
    let mut i = 0;
    while i < sorted.len() {
        let value = sorted[i];
        while i < sorted.len() && sorted[i] == value {
            i += 1;
        }
        if i as f64 / n >= target_tpr {
            return Ok(value);
        }
    }
    unreachable!("the smallest score accepts every positive")
}

/// TNR at the threshold of [`tnr_at_tpr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TnrAtTpr {
    pub tnr: f64,
    pub epsilon: f64,
    /// TPR actually reached at `epsilon`.
    pub tpr: f64,
}

/// `eps` is the largest threshold among observed scores with TPR at least
/// `target_tpr`; TNR is the fraction of negatives scoring below it.
pub fn tnr_at_tpr(samples: &[ScoredSample], target_tpr: f64) -> Result<TnrAtTpr> {
    if !(target_tpr > 0.0 && target_tpr <= 1.0) {
        return Err(Error::InvalidParameter("target_tpr must lie in (0, 1]"));
    }
    let s = sweep(samples)?;
    // thresholds[1..len-1] are the observed scores, descending
    for (c, &eps) in s.steps.iter().zip(&s.thresholds).skip(1) {
        if eps == f64::NEG_INFINITY {
            break;
        }
        let tpr = c.tp as f64 / s.positives as f64;
        if tpr >= target_tpr {
            return Ok(TnrAtTpr {
                tnr: (s.negatives - c.fp) as f64 / s.negatives as f64,
                epsilon: eps,
                tpr,
            });
        }
    }
    unreachable!("the smallest observed score accepts every positive")
}

/// Summary of one detector on one evaluation split.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub roc: Vec<RocPoint>,
    pub auroc: f64,
    pub tnr_at_95tpr: f64,
    pub epsilon_at_95tpr: f64,
    pub positives: usize,
    pub negatives: usize,
}

pub fn evaluate(samples: &[ScoredSample]) -> Result<EvalReport> {
    let roc = roc_curve(samples)?;
    let auroc = auroc(samples)?;
    let t = tnr_at_tpr(samples, 0.95)?;
    let positives = samples.iter().filter(|s| s.truth == Truth::InDistribution).count();
    Ok(EvalReport {
        roc,
        auroc,
        tnr_at_95tpr: t.tnr,
        epsilon_at_95tpr: t.epsilon,
        positives,
        negatives: samples.len() - positives,
    })
}
