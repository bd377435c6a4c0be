//! Non-negative structural similarity between two single-channel maps.
//!
//! Statistics come from a uniform square window slid with stride 1 over the
//! valid positions. Each window contributes
//! `max(0, S1 * S2)` with the luminance term
//! `S1 = (2 mu_a mu_b + C1) / (mu_a^2 + mu_b^2 + C1)` and the combined
//! contrast-correlation term
//! `S2 = (2 s_ab + C2) / (s_a^2 + s_b^2 + C2)`, using population moments.
//! The result is the mean over windows, summed in row-major window order with
//! compensated summation.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::Plane;
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SsimParams {
    /// Odd window side, at least 3.
    pub window: usize,
    pub k1: f64,
    pub k2: f64,
    /// Value span `L` of the inputs.
    pub dynamic_range: f64,
}

impl Default for SsimParams {
    fn default() -> Self {
        Self {
            window: 7,
            k1: 0.01,
            k2: 0.03,
            dynamic_range: 1.0,
        }
    }
}

impl SsimParams {
    pub fn validate(&self) -> Result<()> {
        if self.window < 3 || self.window.is_multiple_of(2) {
            return Err(Error::InvalidParameter("window must be odd and >= 3"));
        }
        if !(self.k1 > 0.0 && self.k2 > 0.0) {
            return Err(Error::InvalidParameter("k1 and k2 must be > 0"));
        }
        if !(self.dynamic_range > 0.0) {
            return Err(Error::InvalidParameter("dynamic_range must be > 0"));
        }
        Ok(())
    }

    pub fn c1(&self) -> f64 {
        let v = self.k1 * self.dynamic_range;
        v * v
    }

    pub fn c2(&self) -> f64 {
        let v = self.k2 * self.dynamic_range;
        v * v
    }
}

/// Horizontal window sums of `values` (row-major `h x w`), one per valid
/// column start.
fn row_window_sums(values: &[f64], h: usize, w: usize, win: usize) -> Vec<f64> {
    let out_w = w - win + 1;
    let mut out = vec![0.0; h * out_w];
    for r in 0..h {
        let row = &values[r * w..(r + 1) * w];
        for c in 0..out_w {
            out[r * out_w + c] = row[c..c + win].iter().sum();
        }
    }
    out
}

/// Full window sums from the horizontal sums.
fn box_sums(values: &[f64], h: usize, w: usize, win: usize) -> Vec<f64> {
    let rows = row_window_sums(values, h, w, win);
    let out_w = w - win + 1;
    let out_h = h - win + 1;
    let mut out = vec![0.0; out_h * out_w];
    for r in 0..out_h {
        for c in 0..out_w {
            out[r * out_w + c] = (r..r + win).map(|rr| rows[rr * out_w + c]).sum();
        }
    }
    out
}

/// Mean non-negative SSIM over all valid window positions.
pub fn ssim<A: Plane + ?Sized, B: Plane + ?Sized>(a: &A, b: &B, p: &SsimParams) -> Result<f64> {
    p.validate()?;
    let (h, w) = (a.height(), a.width());
    if (h, w) != (b.height(), b.width()) {
        return Err(Error::ShapeMismatch("ssim inputs differ in size"));
    }
    if h < p.window || w < p.window {
        return Err(Error::WindowTooLarge {
            window: p.window,
            height: h,
            width: w,
        });
    }
    let n = h * w;
    let av: Vec<f64> = (0..n).map(|i| a.at(i)).collect();
    let bv: Vec<f64> = (0..n).map(|i| b.at(i)).collect();
    let aa: Vec<f64> = av.iter().map(|v| v * v).collect();
    let bb: Vec<f64> = bv.iter().map(|v| v * v).collect();
    let ab: Vec<f64> = av.iter().zip(&bv).map(|(x, y)| x * y).collect();

    let win = p.window;
    let sa = box_sums(&av, h, w, win);
    let sb = box_sums(&bv, h, w, win);
    let saa = box_sums(&aa, h, w, win);
    let sbb = box_sums(&bb, h, w, win);
    let sab = box_sums(&ab, h, w, win);

    let count = (win * win) as f64;
    let (c1, c2) = (p.c1(), p.c2());
    let values = (0..sa.len()).map(|i| {
        let mu_a = sa[i] / count;
        let mu_b = sb[i] / count;
        let var_a = saa[i] / count - mu_a * mu_a;
        let var_b = sbb[i] / count - mu_b * mu_b;
        let cov = sab[i] / count - mu_a * mu_b;
        let s1 = (2.0 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
        let s2 = (2.0 * cov + c2) / (var_a + var_b + c2);
        (s1 * s2).max(0.0)
    });
    let total = math::compensated_sum(values);
    Ok(total / sa.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::image::{BinaryMap, GrayMap};

    #[test]
    fn identical_maps_score_one() {
        let data: Vec<f64> = (0..100).map(|i| ((i * 37) % 11) as f64 / 10.0).collect();
        let m = GrayMap::new(10, 10, data).unwrap();
        assert!((ssim(&m, &m, &SsimParams::default()).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn zeros_against_ones_is_tiny() {
        // mu_a = 0, mu_b = 1, no variance: S1 = C1 / (1 + C1), S2 = 1.
        let z = BinaryMap::zeros(7, 7).unwrap();
        let o = BinaryMap::new(7, 7, vec![1; 49]).unwrap();
        let p = SsimParams::default();
        let v = ssim(&z, &o, &p).unwrap();
        let expect = p.c1() / (1.0 + p.c1());
        assert!((v - expect).abs() < 1e-15);
        assert!(v < 0.01);
    }

    #[test]
    fn errors() {
        let a = BinaryMap::zeros(7, 7).unwrap();
        let b = BinaryMap::zeros(7, 8).unwrap();
        assert_eq!(
            ssim(&a, &b, &SsimParams::default()),
            Err(Error::ShapeMismatch("ssim inputs differ in size"))
        );
        let c = BinaryMap::zeros(5, 5).unwrap();
        assert!(matches!(
            ssim(&c, &c, &SsimParams::default()),
            Err(Error::WindowTooLarge { .. })
        ));
        let even = SsimParams { window: 4, ..Default::default() };
        assert!(ssim(&a, &a, &even).is_err());
    }

    #[test]
    fn anti_correlated_windows_clamp_to_zero() {
        // Complementary stripes with mean 0.5: S2 is negative in every window.
        let a: Vec<u8> = (0..49).map(|i| ((i % 7) % 2) as u8).collect();
        let b: Vec<u8> = a.iter().map(|v| 1 - v).collect();
        let a = BinaryMap::new(7, 7, a).unwrap();
        let b = BinaryMap::new(7, 7, b).unwrap();
        assert_eq!(ssim(&a, &b, &SsimParams::default()).unwrap(), 0.0);
    }
}
