//! Detector parameters as read from and written to JSON.

use std::path::Path;

use oidd_core::felzseg::{CenterParams, ExpertSegmenter, FelzParams};
use oidd_core::odin::{FitConfig, OdinParams};
use oidd_core::ssim::SsimParams;
use oidd_core::synth::SynthSpec;
use oidd_core::toyseg::ToySegmenter;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyParams {
    /// Class prototype colors; `None` uses the synthetic class colors.
    pub prototypes: Option<Vec<[f64; 3]>>,
    pub sharpness: f64,
    pub background_distance: f64,
}

impl Default for ToyParams {
    fn default() -> Self {
        Self {
            prototypes: None,
            sharpness: 20.0,
            background_distance: 0.25,
        }
    }
}

/// Everything a detector needs besides learned state (classifier, reference
/// set). Missing fields take their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorParams {
    pub num_classes: usize,
    pub felz: FelzParams,
    pub center: CenterParams,
    pub ssim: SsimParams,
    pub odin: OdinParams,
    pub toy: ToyParams,
    pub fit: FitConfig,
}

impl Default for DetectorParams {
    fn default() -> Self {
        Self {
            num_classes: 10,
            felz: FelzParams::default(),
            center: CenterParams::default(),
            ssim: SsimParams::default(),
            odin: OdinParams::default(),
            toy: ToyParams::default(),
            fit: FitConfig::default(),
        }
    }
}

impl DetectorParams {
    pub fn validate(&self) -> Result<()> {
        if self.num_classes == 0 {
            return Err(Error::Invalid("num_classes must be >= 1".into()));
        }
        self.felz.validate()?;
        self.center.validate()?;
        self.ssim.validate()?;
        self.odin.validate()?;
        self.toy_segmenter()?;
        Ok(())
    }

    pub fn expert(&self) -> ExpertSegmenter {
        ExpertSegmenter {
            felz: self.felz,
            center: self.center,
        }
    }

    pub fn toy_segmenter(&self) -> Result<ToySegmenter> {
        let prototypes = match &self.toy.prototypes {
            Some(p) => p.clone(),
            None => {
                let colors = SynthSpec::default().class_colors;
                if self.num_classes > colors.len() {
                    return Err(Error::Invalid(format!(
                        "toy.prototypes must be given for more than {} classes",
                        colors.len()
                    )));
                }
                colors[..self.num_classes].to_vec()
            }
        };
        if prototypes.len() != self.num_classes {
            return Err(Error::Invalid(format!(
                "toy.prototypes has {} colors for {} classes",
                prototypes.len(),
                self.num_classes
            )));
        }
        Ok(ToySegmenter::new(
            prototypes,
            self.toy.sharpness,
            self.toy.background_distance,
        )?)
    }
}

pub fn read_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Reads detector parameters, or the defaults when no path is given.
pub fn load_params(path: Option<&Path>) -> Result<DetectorParams> {
    let p = match path {
        Some(path) => read_json(path)?,
        None => DetectorParams::default(),
    };
    p.validate()?;
    Ok(p)
}
