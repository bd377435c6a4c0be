//! Synthetic corpora on disk.
//!
//! Layout: `<dir>/<split>/<index>.ppm` for images, `<index>.mask.pgm` for
//! the ground-truth glyph masks, and `<dir>/manifest.json` listing every item
//! with its split, kind and label. Splits are `in_dist_train`,
//! `in_dist_shifted` and `ood`.

use std::fs;
use std::path::{Path, PathBuf};

use oidd_core::refdetect::LabeledCorpus;
use oidd_core::synth::{SampleKind, SynthCorpus, SynthItem, SynthSpec};
use oidd_core::{BinaryMap, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{read_json, write_json};
use crate::tensorio;

pub const MANIFEST: &str = "manifest.json";
pub const SPLITS: [&str; 3] = ["in_dist_train", "in_dist_shifted", "ood"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemRecord {
    pub split: String,
    pub kind: String,
    pub label: Option<usize>,
    pub image: String,
    pub mask: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub spec: SynthSpec,
    pub items: Vec<ItemRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusItem {
    pub record: ItemRecord,
    pub image: RgbImage,
    pub mask: BinaryMap,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusDir {
    pub root: PathBuf,
    pub spec: SynthSpec,
    pub items: Vec<CorpusItem>,
}

impl CorpusDir {
    /// Items of one split, or of one OOD kind (`ood_spurious`, `ood_novel`).
    pub fn select(&self, name: &str) -> Result<Vec<&CorpusItem>> {
        let by_split = SPLITS.contains(&name);
        let by_kind = matches!(name, "ood_spurious" | "ood_novel");
        if !by_split && !by_kind {
            return Err(Error::MissingSplit(name.into()));
        }
        Ok(self
            .items
            .iter()
            .filter(|it| if by_split { it.record.split == name } else { it.record.kind == name })
            .collect())
    }

    pub fn labeled(&self, split: &str) -> Result<LabeledCorpus> {
        Ok(LabeledCorpus::new(
            self.select(split)?
                .into_iter()
                .filter_map(|it| it.record.label.map(|l| (it.image.clone(), l)))
                .collect(),
        ))
    }
}

fn write_split(dir: &Path, split: &str, items: &[SynthItem], records: &mut Vec<ItemRecord>) -> Result<()> {
    let sub = dir.join(split);
    fs::create_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
    for (i, item) in items.iter().enumerate() {
        let image = format!("{split}/{i:04}.ppm");
        let mask = format!("{split}/{i:04}.mask.pgm");
        tensorio::write_image(dir.join(&image), &item.image)?;
        tensorio::write_binary_pgm(dir.join(&mask), &item.mask)?;
        records.push(ItemRecord {
            split: split.into(),
            kind: item.kind.tag().into(),
            label: item.label,
            image,
            mask,
        });
    }
    Ok(())
}

pub fn write_corpus(dir: impl AsRef<Path>, spec: &SynthSpec, corpus: &SynthCorpus) -> Result<CorpusManifest> {
    let dir = dir.as_ref();
    let mut items = Vec::new();
    write_split(dir, SPLITS[0], &corpus.in_dist_train, &mut items)?;
    write_split(dir, SPLITS[1], &corpus.in_dist_shifted, &mut items)?;
    write_split(dir, SPLITS[2], &corpus.ood, &mut items)?;
    let manifest = CorpusManifest {
        spec: spec.clone(),
        items,
    };
    write_json(dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn read_corpus(dir: impl AsRef<Path>) -> Result<CorpusDir> {
    let dir = dir.as_ref();
    let manifest: CorpusManifest = read_json(dir.join(MANIFEST))?;
    let mut items = Vec::with_capacity(manifest.items.len());
    for record in manifest.items {
        if !SPLITS.contains(&record.split.as_str()) {
            return Err(Error::MissingSplit(record.split));
        }
        if SampleKind::from_tag(&record.kind).is_none() {
            return Err(Error::Invalid(format!("unknown item kind `{}`", record.kind)));
        }
        let image = tensorio::read_image(dir.join(&record.image))?;
        let mask = tensorio::read_binary_pgm(dir.join(&record.mask))?;
        items.push(CorpusItem { record, image, mask });
    }
    Ok(CorpusDir {
        root: dir.to_path_buf(),
        spec: manifest.spec,
        items,
    })
}
