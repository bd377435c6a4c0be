//! Temperature-scaled softmax, the ODIN input perturbation and the
//! classifier-level baseline/ODIN detectors.
//!
//! The perturbation moves every input coordinate by `zeta` in the direction
//! that increases the log of the maximum temperature-scaled softmax
//! probability, then clamps the result back into `[0, 1]`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::RgbImage;
use crate::math;
use crate::segscore::{DetectionScore, ScoreKind};

/// Perturbation magnitude and softmax temperature.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct OdinParams {
    pub zeta: f64,
    pub temperature: f64,
}

impl Default for OdinParams {
    fn default() -> Self {
        Self {
            zeta: 0.0014,
            temperature: 1000.0,
        }
    }
}

impl OdinParams {
    pub fn new(zeta: f64, temperature: f64) -> Result<Self> {
        let p = Self { zeta, temperature };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zeta >= 0.0 && self.zeta.is_finite()) {
            return Err(Error::InvalidParameter("zeta must be finite and >= 0"));
        }
        if !(self.temperature > 0.0) {
            return Err(Error::InvalidParameter("temperature must be > 0"));
        }
        Ok(())
    }
}

/// A differentiable classifier over flattened images.
pub trait Classifier {
    fn num_classes(&self) -> usize;

    fn input_dim(&self) -> usize;

    fn logits(&self, x: &[f64]) -> Vec<f64>;

    /// Vector-Jacobian product: the gradient of `sum_i upstream[i] * f_i(x)`
    /// with respect to `x`.
    fn logits_vjp(&self, x: &[f64], upstream: &[f64]) -> Vec<f64>;

    /// `sum_{j != winner} probs[j] * grad (f_winner - f_j)`, which equals
    /// `grad f_winner - sum_j probs[j] grad f_j` when `probs` sums to 1.
    /// Implementations should return exact zeros when all logit gradients
    /// coincide.
    fn gap_vjp(&self, x: &[f64], winner: usize, probs: &[f64]) -> Vec<f64> {
        let mut upstream: Vec<f64> = probs.iter().map(|p| -p).collect();
        upstream[winner] = probs
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != winner)
            .map(|(_, p)| p)
            .sum();
        self.logits_vjp(x, &upstream)
    }
}

/// Multinomial-logistic classifier `f(x) = W x + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    num_classes: usize,
    input_dim: usize,
    /// Row-major `num_classes x input_dim`.
    weights: Vec<f64>,
    bias: Vec<f64>,
}

impl LinearClassifier {
    pub fn new(num_classes: usize, input_dim: usize, weights: Vec<f64>, bias: Vec<f64>) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::InvalidParameter("classifier needs at least 2 classes"));
        }
        if input_dim == 0 {
            return Err(Error::InvalidParameter("classifier input dimension must be >= 1"));
        }
        if weights.len() != num_classes * input_dim {
            return Err(Error::DataLength {
                expected: num_classes * input_dim,
                found: weights.len(),
            });
        }
        if bias.len() != num_classes {
            return Err(Error::DataLength {
                expected: num_classes,
                found: bias.len(),
            });
        }
        if weights.iter().chain(&bias).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("classifier parameters must be finite"));
        }
        Ok(Self {
            num_classes,
            input_dim,
            weights,
            bias,
        })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.weights[i * self.input_dim..(i + 1) * self.input_dim]
    }
}

impl Classifier for LinearClassifier {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn logits(&self, x: &[f64]) -> Vec<f64> {
        (0..self.num_classes)
            .map(|i| {
                let dot: f64 = self.row(i).iter().zip(x).map(|(w, v)| w * v).sum();
                dot + self.bias[i]
            })
            .collect()
    }

    fn logits_vjp(&self, _x: &[f64], upstream: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.input_dim];
        for (i, &u) in upstream.iter().enumerate() {
            if u == 0.0 {
                continue;
            }
            for (gj, w) in g.iter_mut().zip(self.row(i)) {
                *gj += u * w;
            }
        }
        g
    }

    fn gap_vjp(&self, _x: &[f64], winner: usize, probs: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.input_dim];
        let top = self.row(winner);
        for (j, &p) in probs.iter().enumerate() {
            if j == winner || p == 0.0 {
                continue;
            }
            for ((gi, wc), wj) in g.iter_mut().zip(top).zip(self.row(j)) {
                *gi += p * (wc - wj);
            }
        }
        g
    }
}

/// `exp(f_i / T) / sum_j exp(f_j / T)` with max-subtraction.
pub fn softmax_t(logits: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature > 0.0) {
        return Err(Error::InvalidParameter("temperature must be > 0"));
    }
    if let Some(index) = logits.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteLogit { index });
    }
    if logits.is_empty() {
        return Ok(Vec::new());
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits
        .iter()
        .map(|&f| math::exp((f - max) / temperature))
        .collect();
    let total: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / total).collect())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

fn check_input<C: Classifier + ?Sized>(x: &RgbImage, clf: &C) -> Result<()> {
    if x.as_slice().len() != clf.input_dim() {
        return Err(Error::ShapeMismatch(
            "classifier input dimension does not match the flattened image",
        ));
    }
    Ok(())
}

/// Gradient of `log max_i softmax_t(f(x), T)_i` with respect to the flattened
/// image: `(1/T) (grad f_c - sum_j p_j grad f_j)` for the winning class `c`.
pub fn grad_log_max_softmax<C: Classifier + ?Sized>(
    x: &RgbImage,
    clf: &C,
    temperature: f64,
) -> Result<Vec<f64>> {
    check_input(x, clf)?;
    let probs = softmax_t(&clf.logits(x.as_slice()), temperature)?;
    let winner = argmax(&probs);
    let mut g = clf.gap_vjp(x.as_slice(), winner, &probs);
    g.iter_mut().for_each(|v| *v /= temperature);
    Ok(g)
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// `clamp(x - zeta * sign(-g), 0, 1)` with `g` the gradient of the log max
/// softmax and `sign(0) = 0`.
pub fn perturb<C: Classifier + ?Sized>(x: &RgbImage, clf: &C, params: &OdinParams) -> Result<RgbImage> {
    params.validate()?;
    let g = grad_log_max_softmax(x, clf, params.temperature)?;
    let data: Vec<f64> = x
        .as_slice()
        .iter()
        .zip(&g)
        .map(|(&v, &gi)| (v - params.zeta * sign(-gi)).clamp(0.0, 1.0))
        .collect();
    RgbImage::new(x.height(), x.width(), data)
}

/// Maximum softmax probability of the classifier at temperature 1.
pub fn baseline_score<C: Classifier + ?Sized>(x: &RgbImage, clf: &C) -> Result<DetectionScore> {
    check_input(x, clf)?;
    let probs = softmax_t(&clf.logits(x.as_slice()), 1.0)?;
    Ok(DetectionScore {
        value: probs.iter().copied().fold(0.0, f64::max),
        kind: ScoreKind::Baseline,
    })
}

/// Maximum temperature-scaled softmax probability of the perturbed input.
pub fn odin_score<C: Classifier + ?Sized>(x: &RgbImage, clf: &C, params: &OdinParams) -> Result<DetectionScore> {
    let perturbed = perturb(x, clf, params)?;
    let probs = softmax_t(&clf.logits(perturbed.as_slice()), params.temperature)?;
    Ok(DetectionScore {
        value: probs.iter().copied().fold(0.0, f64::max),
        kind: ScoreKind::Odin,
    })
}

/// Full-batch gradient descent settings for [`fit_linear_classifier`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FitConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            epochs: 60,
            learning_rate: 0.5,
            l2: 1e-4,
        }
    }
}

/// Fits a softmax-regression classifier on flattened images by full-batch
/// gradient descent on the mean cross-entropy. Deterministic: weights start
/// at zero and samples are visited in input order.
pub fn fit_linear_classifier(
    samples: &[(&RgbImage, usize)],
    num_classes: usize,
    cfg: &FitConfig,
) -> Result<LinearClassifier> {
    let Some((first, _)) = samples.first() else {
        return Err(Error::EmptySample);
    };
    let dim = first.as_slice().len();
    for &(img, label) in samples {
        if img.as_slice().len() != dim {
            return Err(Error::ShapeMismatch("training images differ in size"));
        }
        if label >= num_classes {
            return Err(Error::UnknownLabel { label, num_classes });
        }
    }
    let mut clf = LinearClassifier::new(num_classes, dim, vec![0.0; num_classes * dim], vec![0.0; num_classes])?;
    let n = samples.len() as f64;
    let mut grad_w = vec![0.0; num_classes * dim];
    let mut grad_b = vec![0.0; num_classes];
    for _ in 0..cfg.epochs {
        grad_w.iter_mut().for_each(|g| *g = 0.0);
        grad_b.iter_mut().for_each(|g| *g = 0.0);
        for &(img, label) in samples {
            let x = img.as_slice();
            let probs = softmax_t(&clf.logits(x), 1.0)?;
            for (i, &p) in probs.iter().enumerate() {
                let err = p - if i == label { 1.0 } else { 0.0 };
                grad_b[i] += err;
                for (g, &v) in grad_w[i * dim..(i + 1) * dim].iter_mut().zip(x) {
                    *g += err * v;
                }
            }
        }
        for (w, g) in clf.weights.iter_mut().zip(&grad_w) {
            *w -= cfg.learning_rate * (g / n + cfg.l2 * *w);
        }
        for (b, g) in clf.bias.iter_mut().zip(&grad_b) {
            *b -= cfg.learning_rate * g / n;
        }
    }
    Ok(clf)
}
