//! Segmentation backend fed by OIDT files produced outside this crate, for
//! instance by a real segmentation network.

use std::path::{Path, PathBuf};

use oidd_core::{RgbImage, SegMap, SegmentationBackend};

use crate::error::{Error, Result};
use crate::tensorio;

/// Returns the map stored at `path` for every image, after checking that its
/// spatial size matches. The file is read and validated on each call, so
/// concurrent callers never share mutable state.
#[derive(Debug, Clone)]
pub struct FileSegmentation {
    path: PathBuf,
    num_classes: usize,
}

impl FileSegmentation {
    pub fn new(path: impl Into<PathBuf>, num_classes: usize) -> Self {
        Self {
            path: path.into(),
            num_classes,
        }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl SegmentationBackend for FileSegmentation {
    type Error = Error;

    fn segment(&self, image: &RgbImage) -> Result<SegMap> {
        let map = tensorio::read_segmap(&self.path, self.num_classes)?;
        if (map.height(), map.width()) != (image.height(), image.width()) {
            return Err(Error::Invalid(format!(
                "{}: map is {}x{} but the image is {}x{}",
                self.path.display(),
                map.height(),
                map.width(),
                image.height(),
                image.width()
            )));
        }
        Ok(map)
    }
}
