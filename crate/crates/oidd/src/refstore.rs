//! Reference sets on disk: one OIDT binary map per class plus
//! `manifest.json`.
//!
//! ```json
//! {
//!   "seed": 42,
//!   "ssim_params": {"window": 7, "k1": 0.01, "k2": 0.03, "dynamic_range": 1.0},
//!   "felz_params": {"k": 100.0, "min_size": 5, "smoothing_sigma": 0.0},
//!   "center_params": {"rho": 0.6, "drop_border_touching": true},
//!   "params_hash": "<sha256 of the three parameter blocks>",
//!   "entries": [{"label": 0, "path": "ref_0.oidt"}, ...]
//! }
//! ```

use std::fs;
use std::path::Path;

use oidd_core::felzseg::{CenterParams, FelzParams};
use oidd_core::refdetect::ReferenceSet;
use oidd_core::ssim::SsimParams;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::params::{read_json, write_json, DetectorParams};
use crate::tensorio;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub label: usize,
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefManifest {
    pub seed: u64,
    pub ssim_params: SsimParams,
    pub felz_params: FelzParams,
    pub center_params: CenterParams,
    pub params_hash: String,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Serialize)]
struct HashedParams<'a> {
    ssim_params: &'a SsimParams,
    felz_params: &'a FelzParams,
    center_params: &'a CenterParams,
}

/// Hex SHA-256 of the compact JSON encoding of the parameters that shape a
/// reference set.
pub fn params_hash(ssim: &SsimParams, felz: &FelzParams, center: &CenterParams) -> String {
    let json = serde_json::to_vec(&HashedParams {
        ssim_params: ssim,
        felz_params: felz,
        center_params: center,
    })
    .expect("parameter structs serialize");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

impl RefManifest {
    /// Fails when the reference set was built with different parameters.
    pub fn check_params(&self, p: &DetectorParams) -> Result<()> {
        if self.params_hash != params_hash(&p.ssim, &p.felz, &p.center) {
            return Err(Error::Invalid(
                "reference set was built with different ssim/felz/center parameters".into(),
            ));
        }
        Ok(())
    }
}

pub fn save_reference_set(dir: impl AsRef<Path>, refs: &ReferenceSet, p: &DetectorParams) -> Result<RefManifest> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(refs.len());
    for (label, map) in refs.entries() {
        let name = format!("ref_{label}.oidt");
        tensorio::write_binary_map(dir.join(&name), map)?;
        entries.push(ManifestEntry {
            label: *label,
            path: name,
        });
    }
    let manifest = RefManifest {
        seed: refs.seed(),
        ssim_params: p.ssim,
        felz_params: p.felz,
        center_params: p.center,
        params_hash: params_hash(&p.ssim, &p.felz, &p.center),
        entries,
    };
    write_json(dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

pub fn load_reference_set(dir: impl AsRef<Path>) -> Result<(ReferenceSet, RefManifest)> {
    let dir = dir.as_ref();
    let manifest: RefManifest = read_json(dir.join(MANIFEST))?;
    let expected = params_hash(&manifest.ssim_params, &manifest.felz_params, &manifest.center_params);
    if manifest.params_hash != expected {
        return Err(Error::Invalid(format!(
            "{}: params_hash does not match the stored parameters",
            dir.join(MANIFEST).display()
        )));
    }
    let mut entries = Vec::with_capacity(manifest.entries.len());
    for e in &manifest.entries {
        entries.push((e.label, tensorio::read_binary_map(dir.join(&e.path))?));
    }
    let refs = ReferenceSet::from_entries(entries, manifest.seed)?;
    Ok((refs, manifest))
}
