//! Naive reference implementations used as test oracles. They follow the
//! textbook definitions directly and share no code with the library.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random probability vectors: softmax of random logits, with some exact
/// class/background ties and some pixels pinned to the background.
pub fn random_segmap_data(r: &mut ChaCha8Rng, h: usize, w: usize, n: usize) -> Vec<f64> {
    let mut data = Vec::with_capacity(h * w * (n + 1));
    for _ in 0..h * w {
        let mode = r.random_range(0..10);
        let mut q: Vec<f64> = if mode == 0 {
            // exact tie between class 0 and background
            let mut q = vec![0.0; n + 1];
            q[0] = 0.5;
            q[n] = 0.5;
            q
        } else {
            let logits: Vec<f64> = (0..=n).map(|_| r.random_range(-4.0..4.0)).collect();
            let m = logits.iter().cloned().fold(f64::MIN, f64::max);
            let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        };
        if mode == 1 {
            q.iter_mut().for_each(|v| *v = 0.0);
            q[n] = 1.0;
        }
        data.extend(q);
    }
    data
}

/// BLS by a double loop over rows and columns.
pub fn naive_bls(h: usize, w: usize, n: usize, data: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut count = 0usize;
    for row in 0..h {
        for col in 0..w {
            let base = (row * w + col) * (n + 1);
            let mut best_class = 0;
            for c in 1..n {
                if data[base + c] > data[base + best_class] {
                    best_class = c;
                }
            }
            let class_value = data[base + best_class];
            let background = data[base + n];
            // the class wins ties with the background
            if class_value >= background && class_value != 0.0 {
                total += class_value;
                count += 1;
            }
        }
    }
    if count == 0 {
        0.0
    } else {
        total / count as f64
    }
}

/// `log max_i softmax(logits / T)_i`, computed with a plain log-sum-exp.
pub fn log_max_softmax(logits: &[f64], t: f64) -> f64 {
    let scaled: Vec<f64> = logits.iter().map(|l| l / t).collect();
    let m = scaled.iter().cloned().fold(f64::MIN, f64::max);
    let lse = m + scaled.iter().map(|s| (s - m).exp()).sum::<f64>().ln();
    m - lse
}

pub fn linear_logits(w: &[f64], b: &[f64], x: &[f64]) -> Vec<f64> {
    let d = x.len();
    b.iter()
        .enumerate()
        .map(|(i, bi)| bi + (0..d).map(|j| w[i * d + j] * x[j]).sum::<f64>())
        .collect()
}

/// Central finite differences of `log max softmax(f(x) / T)` for a linear model.
pub fn finite_difference_gradient(w: &[f64], b: &[f64], x: &[f64], t: f64, step: f64) -> Vec<f64> {
    let mut g = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        xp[j] = x[j] + step;
        let up = log_max_softmax(&linear_logits(w, b, &xp), t);
        xp[j] = x[j] - step;
        let down = log_max_softmax(&linear_logits(w, b, &xp), t);
        xp[j] = x[j];
        g[j] = (up - down) / (2.0 * step);
    }
    g
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Non-negative SSIM by direct per-window evaluation: two-pass moments over
/// each window, clamp, then the plain mean over windows.
#[allow(clippy::too_many_arguments)]
pub fn naive_ssim(a: &[f64], b: &[f64], h: usize, w: usize, win: usize, k1: f64, k2: f64, l: f64) -> f64 {
    let c1 = (k1 * l) * (k1 * l);
    let c2 = (k2 * l) * (k2 * l);
    let n = (win * win) as f64;
    let mut total = 0.0;
    let mut windows = 0usize;
    for top in 0..=h - win {
        for left in 0..=w - win {
            let mut ma = 0.0;
            let mut mb = 0.0;
            for r in top..top + win {
                for c in left..left + win {
                    ma += a[r * w + c];
                    mb += b[r * w + c];
                }
            }
            ma /= n;
            mb /= n;
            let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
            for r in top..top + win {
                for c in left..left + win {
                    let da = a[r * w + c] - ma;
                    let db = b[r * w + c] - mb;
                    va += da * da;
                    vb += db * db;
                    cov += da * db;
                }
            }
            va /= n;
            vb /= n;
            cov /= n;
            let s1 = (2.0 * ma * mb + c1) / (ma * ma + mb * mb + c1);
            let s2 = (2.0 * cov + c2) / (va + vb + c2);
            total += (s1 * s2).max(0.0);
            windows += 1;
        }
    }
    total / windows as f64
}

/// Mann-Whitney AUROC as an exact fraction: `(2 * #greater + #equal, 2 P N)`.
pub fn mann_whitney_fraction(pos: &[f64], neg: &[f64]) -> (u64, u64) {
    let mut num = 0u64;
    for p in pos {
        for n in neg {
            if p > n {
                num += 2;
            } else if p == n {
                num += 1;
            }
        }
    }
    (num, 2 * pos.len() as u64 * neg.len() as u64)
}

/// Largest observed score whose TPR reaches `target`, with the TNR there,
/// found by trying every observed score.
pub fn exhaustive_tnr_at_tpr(pos: &[f64], neg: &[f64], target: f64) -> (f64, f64) {
    let mut best: Option<f64> = None;
    for &eps in pos.iter().chain(neg) {
        let tpr = pos.iter().filter(|&&s| s >= eps).count() as f64 / pos.len() as f64;
        if tpr >= target && best.is_none_or(|b| eps > b) {
            best = Some(eps);
        }
    }
    let eps = best.expect("the smallest score accepts every positive");
    let tnr = neg.iter().filter(|&&s| s < eps).count() as f64 / neg.len() as f64;
    (tnr, eps)
}

/// Random binary map with a few filled rectangles.
pub fn random_blobs(r: &mut ChaCha8Rng, h: usize, w: usize) -> Vec<u8> {
    let mut m = vec![0u8; h * w];
    for _ in 0..r.random_range(0..4) {
        let top = r.random_range(0..h);
        let left = r.random_range(0..w);
        let bh = r.random_range(1..=h - top);
        let bw = r.random_range(1..=w - left);
        for row in top..top + bh {
            for col in left..left + bw {
                m[row * w + col] = 1;
            }
        }
    }
    m
}
