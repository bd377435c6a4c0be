//! Expert-guided relevance extraction: graph-based segmentation on the
//! 8-connected pixel grid, then removal of segments away from the image
//! center, then binarization.
//!
//! Edge weights are Euclidean RGB distances on the 8-bit scale (channel
//! values multiplied by 255), so `k` has the same meaning as in the usual
//! 0-255 formulation of the algorithm.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::image::{BinaryMap, RgbImage};
use crate::math;

/// Segmentation parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct FelzParams {
    /// Scale of observation; larger values favour larger segments.
    pub k: f64,
    /// Segments smaller than this are merged into a neighbour.
    pub min_size: usize,
    /// Standard deviation of the Gaussian pre-smoothing; 0 disables it.
    pub smoothing_sigma: f64,
}

impl Default for FelzParams {
    fn default() -> Self {
        Self {
            k: 100.0,
            min_size: 5,
            smoothing_sigma: 0.0,
        }
    }
}

impl FelzParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(Error::InvalidParameter("k must be > 0"));
        }
        if self.min_size == 0 {
            return Err(Error::InvalidParameter("min_size must be >= 1"));
        }
        if !(self.smoothing_sigma >= 0.0 && self.smoothing_sigma.is_finite()) {
            return Err(Error::InvalidParameter("smoothing_sigma must be >= 0"));
        }
        Ok(())
    }
}

/// Background-removal parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct CenterParams {
    /// Side of the central box as a fraction of the image side.
    pub rho: f64,
    /// Treat any segment touching the image border as background.
    pub drop_border_touching: bool,
}

impl Default for CenterParams {
    fn default() -> Self {
        Self {
            rho: 0.6,
            drop_border_touching: true,
        }
    }
}

impl CenterParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return Err(Error::InvalidParameter("rho must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Dense segment labels, renumbered by first row-major occurrence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SegmentLabeling {
    height: usize,
    width: usize,
    labels: Vec<u32>,
    num_segments: usize,
}

impl SegmentLabeling {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn num_segments(&self) -> usize {
        self.num_segments
    }

    /// Pixel count of every segment.
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.num_segments];
        for &l in &self.labels {
            sizes[l as usize] += 1;
        }
        sizes
    }
}

struct DisjointSet {
    parent: Vec<u32>,
    rank: Vec<u8>,
    size: Vec<u32>,
    /// Largest edge weight inside the component (its MST maximum).
    internal: Vec<f64>,
}

impl DisjointSet {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n as u32).collect(),
            rank: vec![0; n],
            size: vec![1; n],
            internal: vec![0.0; n],
        }
    }

    fn find(&mut self, mut x: u32) -> u32 {
        let mut root = x;
        while self.parent[root as usize] != root {
            root = self.parent[root as usize];
        }
        while self.parent[x as usize] != root {
            let next = self.parent[x as usize];
            self.parent[x as usize] = root;
            x = next;
        }
        root
    }

    /// Joins two roots; the new internal difference is `weight`.
    fn union(&mut self, a: u32, b: u32, weight: f64) -> u32 {
        let (a, b) = if self.rank[a as usize] < self.rank[b as usize] {
            (b, a)
        } else {
            (a, b)
        };
        self.parent[b as usize] = a;
        if self.rank[a as usize] == self.rank[b as usize] {
            self.rank[a as usize] += 1;
        }
        self.size[a as usize] += self.size[b as usize];
        self.internal[a as usize] = weight;
        a
    }
}

struct Edge {
    a: u32,
    b: u32,
    w: f64,
}

fn color_distance(p: [f64; 3], q: [f64; 3]) -> f64 {
    let d: f64 = p.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum();
    255.0 * math::sqrt(d)
}

/// Grid edges in construction order: row-major source pixel, then E, S, SE, SW.
/// The stable sort keeps that order among equal weights.
fn grid_edges(x: &RgbImage) -> Vec<Edge> {
    let (h, w) = (x.height(), x.width());
    let mut edges = Vec::with_capacity(h * w * 4);
    for r in 0..h {
        for c in 0..w {
            let a = (r * w + c) as u32;
            let p = x.pixel(r, c);
            let mut push = |rr: usize, cc: usize| {
                edges.push(Edge {
                    a,
                    b: (rr * w + cc) as u32,
                    w: color_distance(p, x.pixel(rr, cc)),
                });
            };
            if c + 1 < w {
                push(r, c + 1);
            }
            if r + 1 < h {
                push(r + 1, c);
                if c + 1 < w {
                    push(r + 1, c + 1);
                }
                if c > 0 {
                    push(r + 1, c - 1);
                }
            }
        }
    }
    edges.sort_by(|e, f| e.w.total_cmp(&f.w));
    edges
}

/// Graph-based segmentation of `x`. Smoothing is not applied here; see
/// [`n_r`].
pub fn felzenszwalb(x: &RgbImage, p: &FelzParams) -> Result<SegmentLabeling> {
    p.validate()?;
    let (h, w) = (x.height(), x.width());
    let edges = grid_edges(x);
    let mut set = DisjointSet::new(h * w);

    for e in &edges {
        let ra = set.find(e.a);
        let rb = set.find(e.b);
        if ra == rb {
            continue;
        }
        let ta = set.internal[ra as usize] + p.k / f64::from(set.size[ra as usize]);
        let tb = set.internal[rb as usize] + p.k / f64::from(set.size[rb as usize]);
        if e.w <= ta.min(tb) {
            set.union(ra, rb, e.w);
        }
    }

    // Small segments are absorbed through their cheapest boundary edge.
    let min_size = p.min_size as u32;
    for e in &edges {
        let ra = set.find(e.a);
        let rb = set.find(e.b);
        if ra != rb && (set.size[ra as usize] < min_size || set.size[rb as usize] < min_size) {
            let keep = set.internal[ra as usize].max(set.internal[rb as usize]).max(e.w);
            set.union(ra, rb, keep);
        }
    }

    let mut dense = vec![u32::MAX; h * w];
    let mut labels = Vec::with_capacity(h * w);
    let mut next = 0u32;
    for i in 0..h * w {
        let root = set.find(i as u32) as usize;
        if dense[root] == u32::MAX {
            dense[root] = next;
            next += 1;
        }
        labels.push(dense[root]);
    }
    Ok(SegmentLabeling {
        height: h,
        width: w,
        labels,
        num_segments: next as usize,
    })
}

/// Marks a segment as background when its centroid lies outside the closed
/// central box of side `rho * h` by `rho * w`, or (optionally) when it
/// touches the image border. Remaining pixels become 1.
pub fn remove_background(s: &SegmentLabeling, c: &CenterParams) -> Result<BinaryMap> {
    c.validate()?;
    let (h, w) = (s.height, s.width);
    let n = s.num_segments;
    let mut sum_r = vec![0.0f64; n];
    let mut sum_c = vec![0.0f64; n];
    let mut count = vec![0usize; n];
    let mut touches = vec![false; n];
    for r in 0..h {
        for col in 0..w {
            let l = s.labels[r * w + col] as usize;
            // pixel centers sit at half-integer coordinates
            sum_r[l] += r as f64 + 0.5;
            sum_c[l] += col as f64 + 0.5;
            count[l] += 1;
            if r == 0 || col == 0 || r + 1 == h || col + 1 == w {
                touches[l] = true;
            }
        }
    }
    let (cy, cx) = (h as f64 / 2.0, w as f64 / 2.0);
    let (hy, hx) = (c.rho * h as f64 / 2.0, c.rho * w as f64 / 2.0);
    let keep: Vec<bool> = (0..n)
        .map(|l| {
            let my = sum_r[l] / count[l] as f64;
            let mx = sum_c[l] / count[l] as f64;
            let inside = (my - cy).abs() <= hy && (mx - cx).abs() <= hx;
            inside && !(c.drop_border_touching && touches[l])
        })
        .collect();
    let data = s.labels.iter().map(|&l| u8::from(keep[l as usize])).collect();
    BinaryMap::new(h, w, data)
}

/// Separable Gaussian blur with radius `ceil(3 sigma)` and clamped edges.
pub fn gaussian_smooth(x: &RgbImage, sigma: f64) -> Result<RgbImage> {
    if sigma == 0.0 {
        return Ok(x.clone());
    }
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter("smoothing_sigma must be >= 0"));
    }
    let radius = math::ceil(3.0 * sigma) as isize;
    let mut kernel: Vec<f64> = (-radius..=radius)
        .map(|i| math::exp(-((i * i) as f64) / (2.0 * sigma * sigma)))
        .collect();
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|k| *k /= total);

    let (h, w) = (x.height() as isize, x.width() as isize);
    let src = x.as_slice();
    let idx = |r: isize, c: isize, ch: usize| ((r * w + c) as usize) * 3 + ch;
    let mut tmp = vec![0.0; src.len()];
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                tmp[idx(r, c, ch)] = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, wt)| wt * src[idx(r, (c + k as isize - radius).clamp(0, w - 1), ch)])
                    .sum();
            }
        }
    }
    let mut out = vec![0.0; src.len()];
    for r in 0..h {
        for c in 0..w {
            for ch in 0..3 {
                let v: f64 = kernel
                    .iter()
                    .enumerate()
                    .map(|(k, wt)| wt * tmp[idx((r + k as isize - radius).clamp(0, h - 1), c, ch)])
                    .sum();
                out[idx(r, c, ch)] = v.clamp(0.0, 1.0);
            }
        }
    }
    RgbImage::new(x.height(), x.width(), out)
}

/// Smoothing, segmentation and background removal in one step.
pub fn n_r(x: &RgbImage, p: &FelzParams, c: &CenterParams) -> Result<BinaryMap> {
    p.validate()?;
    let smoothed = gaussian_smooth(x, p.smoothing_sigma)?;
    let labels = felzenszwalb(&smoothed, p)?;
    remove_background(&labels, c)
}

/// Maps an image to its binarized relevant part.
pub trait RelevanceExtractor {
    fn extract(&self, x: &RgbImage) -> Result<BinaryMap>;
}

/// The expert-guided pipeline as a [`RelevanceExtractor`].
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct ExpertSegmenter {
    pub felz: FelzParams,
    pub center: CenterParams,
}

impl RelevanceExtractor for ExpertSegmenter {
    fn extract(&self, x: &RgbImage) -> Result<BinaryMap> {
        n_r(x, &self.felz, &self.center)
    }
}

impl<F: Fn(&RgbImage) -> Result<BinaryMap>> RelevanceExtractor for F {
    fn extract(&self, x: &RgbImage) -> Result<BinaryMap> {
        self(x)
    }
}
