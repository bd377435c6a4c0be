//! Seeded synthetic corpora with controlled spurious features.
//!
//! Every in-distribution image is a class glyph drawn in its class color on a
//! flat background. In the training-style split the background color is tied
//! to the class (a spurious feature a whole-image classifier can latch on
//! to); the shifted split draws the same glyphs over a disjoint background
//! palette. The OOD split alternates background-only images with the
//! training palette and glyphs that belong to no class.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::{BinaryMap, RgbImage};
use crate::refdetect::LabeledCorpus;

const GLYPH_W: usize = 5;
const GLYPH_H: usize = 7;

/// 5x7 bitmaps; `#` is ink.
fn glyph(ch: char) -> Option<[&'static str; GLYPH_H]> {
    Some(match ch {
        '0' => [".###.", "#...#", "#..##", "#.#.#", "##..#", "#...#", ".###."],
        '1' => ["..#..", ".##..", "..#..", "..#..", "..#..", "..#..", ".###."],
        '2' => [".###.", "#...#", "....#", "...#.", "..#..", ".#...", "#####"],
        '3' => ["#####", "...#.", "..#..", "...#.", "....#", "#...#", ".###."],
        '4' => ["...#.", "..##.", ".#.#.", "#..#.", "#####", "...#.", "...#."],
        '5' => ["#####", "#....", "####.", "....#", "....#", "#...#", ".###."],
        '6' => ["..##.", ".#...", "#....", "####.", "#...#", "#...#", ".###."],
        '7' => ["#####", "....#", "...#.", "..#..", ".#...", ".#...", ".#..."],
        '8' => [".###.", "#...#", "#...#", ".###.", "#...#", "#...#", ".###."],
        '9' => [".###.", "#...#", "#...#", ".####", "....#", "...#.", ".##.."],
        'H' => ["#...#", "#...#", "#...#", "#####", "#...#", "#...#", "#...#"],
        'K' => ["#...#", "#..#.", "#.#..", "##...", "#.#..", "#..#.", "#...#"],
        'M' => ["#...#", "##.##", "#.#.#", "#.#.#", "#...#", "#...#", "#...#"],
        'W' => ["#...#", "#...#", "#...#", "#.#.#", "#.#.#", "#.#.#", ".#.#."],
        'X' => ["#...#", "#...#", ".#.#.", "..#..", ".#.#.", "#...#", "#...#"],
        _ => return None,
    })
}

/// Which of the three corpora an item belongs to, plus the OOD sub-kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SampleKind {
    InDistTrain,
    InDistShifted,
    OodSpurious,
    OodNovel,
}

impl SampleKind {
    pub fn tag(self) -> &'static str {
        match self {
            SampleKind::InDistTrain => "in_dist_train",
            SampleKind::InDistShifted => "in_dist_shifted",
            SampleKind::OodSpurious => "ood_spurious",
            SampleKind::OodNovel => "ood_novel",
        }
    }

    pub fn from_tag(tag: &str) -> Option<Self> {
        [
            SampleKind::InDistTrain,
            SampleKind::InDistShifted,
            SampleKind::OodSpurious,
            SampleKind::OodNovel,
        ]
        .into_iter()
        .find(|k| k.tag() == tag)
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default))]
pub struct SynthSpec {
    pub num_classes: usize,
    /// Image side in pixels (images are square).
    pub side: usize,
    pub samples_per_split: usize,
    /// Glyph drawn for class `i` is `class_glyphs[i]`.
    pub class_glyphs: String,
    /// Glyphs used for novel-class OOD images.
    pub novel_glyphs: String,
    /// Glyph pixel size in image pixels.
    pub glyph_scale: usize,
    /// Maximum glyph offset from the center, per axis.
    pub jitter: usize,
    pub class_colors: Vec<[f64; 3]>,
    /// Training backgrounds; class `i` uses `palette_a[i % len]`.
    pub palette_a: Vec<[f64; 3]>,
    /// Backgrounds of the shifted in-distribution split.
    pub palette_b: Vec<[f64; 3]>,
    /// Per-channel uniform noise amplitude, in `[0, 1)`.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            num_classes: 10,
            side: 28,
            samples_per_split: 200,
            class_glyphs: String::from("0123456789"),
            novel_glyphs: String::from("HKMWX"),
            glyph_scale: 3,
            jitter: 0,
            class_colors: alloc::vec![
                [1.0, 0.0, 0.0],
                [0.0, 1.0, 0.0],
                [0.0, 0.0, 1.0],
                [1.0, 1.0, 0.0],
                [1.0, 0.0, 1.0],
                [0.0, 1.0, 1.0],
                [1.0, 0.5, 0.0],
                [0.5, 0.0, 1.0],
                [0.0, 1.0, 0.5],
                [1.0, 0.0, 0.5],
            ],
            palette_a: alloc::vec![
                [0.0, 0.0, 0.0],
                [0.5, 0.5, 0.5],
                [0.0, 0.5, 0.0],
                [0.0, 0.0, 0.5],
                [0.5, 0.0, 0.0],
            ],
            palette_b: alloc::vec![
                [1.0, 1.0, 1.0],
                [1.0, 1.0, 0.5],
                [0.5, 1.0, 1.0],
                [1.0, 0.5, 1.0],
                [0.5, 0.5, 0.0],
            ],
            noise: 0.05,
            seed: 42,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.samples_per_split == 0 || self.glyph_scale == 0 {
            return Err(Error::InvalidParameter("synthetic counts must be >= 1"));
        }
        let class_glyphs: Vec<char> = self.class_glyphs.chars().collect();
        if class_glyphs.len() < self.num_classes || self.class_colors.len() < self.num_classes {
            return Err(Error::InvalidParameter("need one glyph and one color per class"));
        }
        if class_glyphs[..self.num_classes].iter().enumerate().any(|(i, c)| class_glyphs[..i].contains(c)) {
            return Err(Error::InvalidParameter("class glyphs must be distinct"));
        }
        if self.novel_glyphs.is_empty() {
            return Err(Error::InvalidParameter("need at least one novel glyph"));
        }
        if self
            .novel_glyphs
            .chars()
            .chain(class_glyphs.iter().copied())
            .any(|c| glyph(c).is_none())
        {
            return Err(Error::InvalidParameter("unknown glyph (use 0-9, H, K, M, W, X)"));
        }
        if self.novel_glyphs.chars().any(|c| class_glyphs[..self.num_classes].contains(&c)) {
            return Err(Error::InvalidParameter("novel glyphs must not be class glyphs"));
        }
        if self.palette_a.is_empty() || self.palette_b.is_empty() {
            return Err(Error::InvalidParameter("palettes must be non-empty"));
        }
        let colors = self.class_colors.iter().chain(&self.palette_a).chain(&self.palette_b);
        if colors.flatten().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidParameter("colors must lie in [0, 1]"));
        }
        if !(0.0..1.0).contains(&self.noise) {
            return Err(Error::InvalidParameter("noise must lie in [0, 1)"));
        }
        let gh = GLYPH_H * self.glyph_scale + 2 * self.jitter;
        let gw = GLYPH_W * self.glyph_scale + 2 * self.jitter;
        if gh > self.side || gw > self.side {
            return Err(Error::InvalidParameter("glyph plus jitter does not fit the image"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthItem {
    pub image: RgbImage,
    /// Ground-truth glyph pixels (all zero for background-only images).
    pub mask: BinaryMap,
    /// Class label for in-distribution items.
    pub label: Option<usize>,
    pub kind: SampleKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub in_dist_train: Vec<SynthItem>,
    pub in_dist_shifted: Vec<SynthItem>,
    pub ood: Vec<SynthItem>,
}

/// Labeled view of in-distribution items; items without a label are skipped.
pub fn labeled(items: &[SynthItem]) -> LabeledCorpus {
    LabeledCorpus::new(
        items
            .iter()
            .filter_map(|it| it.label.map(|l| (it.image.clone(), l)))
            .collect(),
    )
}

struct Painter<'a> {
    spec: &'a SynthSpec,
    rng: ChaCha8Rng,
}

impl Painter<'_> {
    fn glyph_mask(&mut self, ch: char) -> BinaryMap {
        let s = self.spec;
        let rows = glyph(ch).expect("validated glyph");
        let (gh, gw) = (GLYPH_H * s.glyph_scale, GLYPH_W * s.glyph_scale);
        let j = s.jitter as i64;
        let dy = if j > 0 { self.rng.random_range(-j..=j) } else { 0 };
        let dx = if j > 0 { self.rng.random_range(-j..=j) } else { 0 };
        let top = ((s.side - gh) / 2) as i64 + dy;
        let left = ((s.side - gw) / 2) as i64 + dx;
        let mut data = alloc::vec![0u8; s.side * s.side];
        for (gr, row) in rows.iter().enumerate() {
            for (gc, cell) in row.bytes().enumerate() {
                if cell != b'#' {
                    continue;
                }
                for r in 0..s.glyph_scale {
                    for c in 0..s.glyph_scale {
                        let y = (top + (gr * s.glyph_scale + r) as i64) as usize;
                        let x = (left + (gc * s.glyph_scale + c) as i64) as usize;
                        data[y * s.side + x] = 1;
                    }
                }
            }
        }
        BinaryMap::new(s.side, s.side, data).expect("binary by construction")
    }

    fn paint(&mut self, mask: &BinaryMap, ink: [f64; 3], background: [f64; 3]) -> RgbImage {
        let side = self.spec.side;
        let noise = self.spec.noise;
        let mut data = Vec::with_capacity(side * side * 3);
        for &m in mask.as_slice() {
            let base = if m == 1 { ink } else { background };
            for v in base {
                let jitter = if noise > 0.0 {
                    self.rng.random_range(-noise..=noise)
                } else {
                    0.0
                };
                data.push((v + jitter).clamp(0.0, 1.0));
            }
        }
        RgbImage::new(side, side, data).expect("clamped channels")
    }

    fn pick<T: Copy>(&mut self, xs: &[T]) -> T {
        xs[self.rng.random_range(0..xs.len())]
    }
}

/// Generates the three splits. Deterministic given the spec (including its
/// seed).
pub fn generate_synthetic(spec: &SynthSpec) -> Result<SynthCorpus> {
    spec.validate()?;
    let mut painter = Painter {
        spec,
        rng: ChaCha8Rng::seed_from_u64(spec.seed),
    };
    let class_glyphs: Vec<char> = spec.class_glyphs.chars().collect();
    let novel_glyphs: Vec<char> = spec.novel_glyphs.chars().collect();
    let n = spec.samples_per_split;
    let k = spec.num_classes;

    let mut in_dist_train = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % k;
        let mask = painter.glyph_mask(class_glyphs[label]);
        let bg = spec.palette_a[label % spec.palette_a.len()];
        let image = painter.paint(&mask, spec.class_colors[label], bg);
        in_dist_train.push(SynthItem {
            image,
            mask,
            label: Some(label),
            kind: SampleKind::InDistTrain,
        });
    }

    let mut in_dist_shifted = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % k;
        let mask = painter.glyph_mask(class_glyphs[label]);
        let bg = painter.pick(&spec.palette_b);
        let image = painter.paint(&mask, spec.class_colors[label], bg);
        in_dist_shifted.push(SynthItem {
            image,
            mask,
            label: Some(label),
            kind: SampleKind::InDistShifted,
        });
    }

    let mut ood = Vec::with_capacity(n);
    for i in 0..n {
        let bg = painter.pick(&spec.palette_a);
        if i % 2 == 0 {
            let mask = BinaryMap::zeros(spec.side, spec.side)?;
            let image = painter.paint(&mask, bg, bg);
            ood.push(SynthItem {
                image,
                mask,
                label: None,
                kind: SampleKind::OodSpurious,
            });
        } else {
            let ch = painter.pick(&novel_glyphs);
            let ink = painter.pick(&spec.class_colors[..k]);
            let mask = painter.glyph_mask(ch);
            let image = painter.paint(&mask, ink, bg);
            ood.push(SynthItem {
                image,
                mask,
                label: None,
                kind: SampleKind::OodNovel,
            });
        }
    }

    Ok(SynthCorpus {
        in_dist_train,
        in_dist_shifted,
        ood,
    })
}
