//! OIDT tensor files and binary PGM/PPM images.
//!
//! OIDT layout (all integers little-endian):
//!
//! | offset      | size        | field                               |
//! |-------------|-------------|-------------------------------------|
//! | 0           | 4           | magic `OIDT`                        |
//! | 4           | 1           | version, always 1                   |
//! | 5           | 1           | dtype: 0 = f32, 1 = u8              |
//! | 6           | 1           | ndim                                |
//! | 7           | 4 * ndim    | dims, u32 each, all >= 1            |
//! | 7 + 4*ndim  | payload     | row-major values                    |
//!
//! A linear classifier is stored as two records back to back: the `N x d`
//! weight matrix followed by the length-`N` bias vector.

use std::fs;
use std::io::Write;
use std::path::Path;

use oidd_core::odin::LinearClassifier;
use oidd_core::{BinaryMap, RgbImage, SegMap};
use thiserror::Error;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"OIDT";
pub const VERSION: u8 = 1;
const HEADER_FIXED: usize = 7;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("bad magic at byte offset {offset}")]
    BadMagic { offset: usize },
    #[error("unsupported version {found} at byte offset {offset}")]
    BadVersion { offset: usize, found: u8 },
    #[error("unknown dtype {found} at byte offset {offset}")]
    BadDtype { offset: usize, found: u8 },
    #[error("header truncated at byte offset {offset}")]
    TruncatedHeader { offset: usize },
    #[error("invalid dimension at byte offset {offset}: {reason}")]
    DimOverflow { offset: usize, reason: &'static str },
    #[error("payload truncated at byte offset {offset}: need {expected} bytes, found {found}")]
    TruncatedPayload {
        offset: usize,
        expected: usize,
        found: usize,
    },
    #[error("{extra} unexpected trailing bytes at byte offset {offset}")]
    TrailingBytes { offset: usize, extra: usize },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("wrong dtype: expected {expected:?}")]
    WrongDtype { expected: DType },
    #[error(transparent)]
    Invalid(#[from] oidd_core::Error),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("maxval {0} is not 255")]
    MaxvalNot255(u32),
    #[error("image raster truncated: need {expected} bytes, found {found}")]
    TruncatedRaster { expected: usize, found: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DType {
    F32,
    U8,
}

impl DType {
    pub fn code(self) -> u8 {
        match self {
            DType::F32 => 0,
            DType::U8 => 1,
        }
    }

    pub fn size(self) -> usize {
        match self {
            DType::F32 => 4,
            DType::U8 => 1,
        }
    }

    fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(DType::F32),
            1 => Some(DType::U8),
            _ => None,
        }
    }
}

/// A validated tensor record. The payload is kept as raw bytes so that
/// decoding and re-encoding is byte-identical.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorFile {
    dtype: DType,
    dims: Vec<u32>,
    payload: Vec<u8>,
}

fn element_count(dims: &[u32]) -> Option<usize> {
    dims.iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d as usize))
}

impl TensorFile {
    pub fn new(dtype: DType, dims: Vec<u32>, payload: Vec<u8>) -> Result<Self, TensorError> {
        if dims.is_empty() || dims.len() > u8::MAX as usize {
            return Err(TensorError::DimOverflow {
                offset: 6,
                reason: "ndim must lie in 1..=255",
            });
        }
        if let Some(i) = dims.iter().position(|&d| d == 0) {
            return Err(TensorError::DimOverflow {
                offset: HEADER_FIXED + 4 * i,
                reason: "dimension is zero",
            });
        }
        let expected = element_count(&dims)
            .and_then(|n| n.checked_mul(dtype.size()))
            .ok_or(TensorError::DimOverflow {
                offset: HEADER_FIXED,
                reason: "element count overflows",
            })?;
        if payload.len() != expected {
            return Err(TensorError::ShapeMismatch(format!(
                "payload has {} bytes, dims need {expected}",
                payload.len()
            )));
        }
        Ok(Self {
            dtype,
            dims,
            payload,
        })
    }

    pub fn from_f32(dims: Vec<u32>, values: &[f32]) -> Result<Self, TensorError> {
        let payload = values.iter().flat_map(|v| v.to_le_bytes()).collect();
        Self::new(DType::F32, dims, payload)
    }

    pub fn from_u8(dims: Vec<u32>, values: Vec<u8>) -> Result<Self, TensorError> {
        Self::new(DType::U8, dims, values)
    }

    pub fn dtype(&self) -> DType {
        self.dtype
    }

    pub fn dims(&self) -> &[u32] {
        &self.dims
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    pub fn len(&self) -> usize {
        self.payload.len() / self.dtype.size()
    }

    pub fn is_empty(&self) -> bool {
        self.payload.is_empty()
    }

    pub fn to_f32(&self) -> Result<Vec<f32>, TensorError> {
        if self.dtype != DType::F32 {
            return Err(TensorError::WrongDtype { expected: DType::F32 });
        }
        Ok(self
            .payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_FIXED + 4 * self.dims.len() + self.payload.len());
        out.extend_from_slice(&MAGIC);
        out.push(VERSION);
        out.push(self.dtype.code());
        out.push(self.dims.len() as u8);
        for d in &self.dims {
            out.extend_from_slice(&d.to_le_bytes());
        }
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes one record from the front of `bytes`, returning it and the
    /// number of bytes consumed. Error offsets are relative to `bytes`.
    pub fn decode_prefix(bytes: &[u8]) -> Result<(Self, usize), TensorError> {
        if bytes.len() < 4 || bytes[..4] != MAGIC {
            return Err(TensorError::BadMagic { offset: 0 });
        }
        if bytes.len() < HEADER_FIXED {
            return Err(TensorError::TruncatedHeader { offset: bytes.len() });
        }
        if bytes[4] != VERSION {
            return Err(TensorError::BadVersion {
                offset: 4,
                found: bytes[4],
            });
        }
        let dtype = DType::from_code(bytes[5]).ok_or(TensorError::BadDtype {
            offset: 5,
            found: bytes[5],
        })?;
        let ndim = bytes[6] as usize;
        if ndim == 0 {
            return Err(TensorError::DimOverflow {
                offset: 6,
                reason: "ndim is zero",
            });
        }
        let header = HEADER_FIXED + 4 * ndim;
        if bytes.len() < header {
            return Err(TensorError::TruncatedHeader { offset: bytes.len() });
        }
        let mut dims = Vec::with_capacity(ndim);
        let mut count = 1usize;
        for i in 0..ndim {
            let at = HEADER_FIXED + 4 * i;
            let d = u32::from_le_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]]);
            if d == 0 {
                return Err(TensorError::DimOverflow {
                    offset: at,
                    reason: "dimension is zero",
                });
            }
            count = count.checked_mul(d as usize).ok_or(TensorError::DimOverflow {
                offset: at,
                reason: "element count overflows",
            })?;
            dims.push(d);
        }
        let expected = count.checked_mul(dtype.size()).ok_or(TensorError::DimOverflow {
            offset: header - 4,
            reason: "payload size overflows",
        })?;
        let available = bytes.len() - header;
        if available < expected {
            return Err(TensorError::TruncatedPayload {
                offset: bytes.len(),
                expected,
                found: available,
            });
        }
        let payload = bytes[header..header + expected].to_vec();
        Ok((
            Self {
                dtype,
                dims,
                payload,
            },
            header + expected,
        ))
    }

    /// Decodes exactly one record; trailing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self, TensorError> {
        let (t, used) = Self::decode_prefix(bytes)?;
        if used != bytes.len() {
            return Err(TensorError::TrailingBytes {
                offset: used,
                extra: bytes.len() - used,
            });
        }
        Ok(t)
    }
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}

fn tensor_err(path: &Path) -> impl FnOnce(TensorError) -> Error + '_ {
    move |source| Error::Tensor {
        path: path.to_path_buf(),
        source,
    }
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<TensorFile> {
    let path = path.as_ref();
    TensorFile::decode(&read_bytes(path)?).map_err(tensor_err(path))
}

pub fn write_tensor(path: impl AsRef<Path>, t: &TensorFile) -> Result<()> {
    write_bytes(path.as_ref(), &t.encode())
}

/// Interprets an `h x w x (N + 1)` float tensor as a segmentation map.
pub fn as_segmap(t: &TensorFile, num_classes: usize) -> Result<SegMap, TensorError> {
    let dims = t.dims();
    if dims.len() != 3 || dims[2] as usize != num_classes + 1 {
        return Err(TensorError::ShapeMismatch(format!(
            "expected h x w x {}, got {:?}",
            num_classes + 1,
            dims
        )));
    }
    let data = t.to_f32()?.into_iter().map(f64::from).collect();
    Ok(SegMap::new(dims[0] as usize, dims[1] as usize, num_classes, data)?)
}

/// Segmentation map as an f32 tensor. The class count is implied by the last
/// dimension.
pub fn segmap_tensor(m: &SegMap) -> TensorFile {
    let values: Vec<f32> = m.as_slice().iter().map(|&v| v as f32).collect();
    TensorFile::from_f32(
        vec![m.height() as u32, m.width() as u32, (m.num_classes() + 1) as u32],
        &values,
    )
    .expect("segmap shape is valid")
}

pub fn binary_map_tensor(m: &BinaryMap) -> TensorFile {
    TensorFile::from_u8(vec![m.height() as u32, m.width() as u32], m.as_slice().to_vec())
        .expect("binary map shape is valid")
}

pub fn as_binary_map(t: &TensorFile) -> Result<BinaryMap, TensorError> {
    if t.dtype() != DType::U8 {
        return Err(TensorError::WrongDtype { expected: DType::U8 });
    }
    let dims = t.dims();
    if dims.len() != 2 {
        return Err(TensorError::ShapeMismatch(format!("expected h x w, got {dims:?}")));
    }
    Ok(BinaryMap::new(dims[0] as usize, dims[1] as usize, t.payload().to_vec())?)
}

/// Canonical byte encoding of a binary map (its OIDT record).
pub fn binary_map_bytes(m: &BinaryMap) -> Vec<u8> {
    binary_map_tensor(m).encode()
}

pub fn read_segmap(path: impl AsRef<Path>, num_classes: usize) -> Result<SegMap> {
    let path = path.as_ref();
    as_segmap(&read_tensor(path)?, num_classes).map_err(tensor_err(path))
}

pub fn write_segmap(path: impl AsRef<Path>, m: &SegMap) -> Result<()> {
    write_tensor(path, &segmap_tensor(m))
}

pub fn read_binary_map(path: impl AsRef<Path>) -> Result<BinaryMap> {
    let path = path.as_ref();
    as_binary_map(&read_tensor(path)?).map_err(tensor_err(path))
}

pub fn write_binary_map(path: impl AsRef<Path>, m: &BinaryMap) -> Result<()> {
    write_tensor(path, &binary_map_tensor(m))
}

pub fn encode_classifier(clf: &LinearClassifier) -> Vec<u8> {
    use oidd_core::odin::Classifier;
    let w: Vec<f32> = clf.weights().iter().map(|&v| v as f32).collect();
    let b: Vec<f32> = clf.bias().iter().map(|&v| v as f32).collect();
    let mut out = TensorFile::from_f32(vec![clf.num_classes() as u32, clf.input_dim() as u32], &w)
        .expect("valid weight shape")
        .encode();
    out.extend(
        TensorFile::from_f32(vec![clf.num_classes() as u32], &b)
            .expect("valid bias shape")
            .encode(),
    );
    out
}

pub fn decode_classifier(bytes: &[u8]) -> Result<LinearClassifier, TensorError> {
    let (w, used) = TensorFile::decode_prefix(bytes)?;
    let b = TensorFile::decode(&bytes[used..]).map_err(|e| shift_offset(e, used))?;
    if w.dims().len() != 2 || b.dims().len() != 1 || w.dims()[0] != b.dims()[0] {
        return Err(TensorError::ShapeMismatch(format!(
            "classifier records have dims {:?} and {:?}",
            w.dims(),
            b.dims()
        )));
    }
    let weights = w.to_f32()?.into_iter().map(f64::from).collect();
    let bias = b.to_f32()?.into_iter().map(f64::from).collect();
    Ok(LinearClassifier::new(
        w.dims()[0] as usize,
        w.dims()[1] as usize,
        weights,
        bias,
    )?)
}

fn shift_offset(e: TensorError, by: usize) -> TensorError {
    match e {
        TensorError::BadMagic { offset } => TensorError::BadMagic { offset: offset + by },
        TensorError::BadVersion { offset, found } => TensorError::BadVersion {
            offset: offset + by,
            found,
        },
        TensorError::BadDtype { offset, found } => TensorError::BadDtype {
            offset: offset + by,
            found,
        },
        TensorError::TruncatedHeader { offset } => TensorError::TruncatedHeader { offset: offset + by },
        TensorError::DimOverflow { offset, reason } => TensorError::DimOverflow {
            offset: offset + by,
            reason,
        },
        TensorError::TruncatedPayload {
            offset,
            expected,
            found,
        } => TensorError::TruncatedPayload {
            offset: offset + by,
            expected,
            found,
        },
        TensorError::TrailingBytes { offset, extra } => TensorError::TrailingBytes {
            offset: offset + by,
            extra,
        },
        other => other,
    }
}

pub fn read_classifier(path: impl AsRef<Path>) -> Result<LinearClassifier> {
    let path = path.as_ref();
    decode_classifier(&read_bytes(path)?).map_err(tensor_err(path))
}

pub fn write_classifier(path: impl AsRef<Path>, clf: &LinearClassifier) -> Result<()> {
    write_bytes(path.as_ref(), &encode_classifier(clf))
}

/// Binary PNM raster (8-bit).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pnm {
    pub width: usize,
    pub height: usize,
    /// 1 for P5, 3 for P6.
    pub channels: usize,
    pub raster: Vec<u8>,
}

struct HeaderCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl HeaderCursor<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                c if c.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, TensorError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| TensorError::UnsupportedFormat(format!("malformed {what}")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Pnm, TensorError> {
    let channels = match bytes.get(..2) {
        Some(b"P5") => 1,
        Some(b"P6") => 3,
        _ => {
            return Err(TensorError::UnsupportedFormat(
                "expected binary PGM (P5) or PPM (P6)".into(),
            ))
        }
    };
    let mut cur = HeaderCursor { bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(TensorError::UnsupportedFormat("zero-sized image".into()));
    }
    if maxval != 255 {
        return Err(TensorError::MaxvalNot255(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(TensorError::UnsupportedFormat("missing raster separator".into())),
    }
    let expected = width * height * channels;
    let raster = &bytes[cur.pos..];
    if raster.len() < expected {
        return Err(TensorError::TruncatedRaster {
            expected,
            found: raster.len(),
        });
    }
    Ok(Pnm {
        width,
        height,
        channels,
        raster: raster[..expected].to_vec(),
    })
}

pub fn encode_pnm(p: &Pnm) -> Vec<u8> {
    let magic = if p.channels == 1 { "P5" } else { "P6" };
    let mut out = format!("{magic}\n{} {}\n255\n", p.width, p.height).into_bytes();
    out.extend_from_slice(&p.raster);
    out
}

/// Gray rasters are replicated to three channels; values map `u -> u / 255`.
pub fn pnm_to_image(p: &Pnm) -> Result<RgbImage, TensorError> {
    let data: Vec<f64> = if p.channels == 1 {
        p.raster
            .iter()
            .flat_map(|&u| {
                let v = f64::from(u) / 255.0;
                [v, v, v]
            })
            .collect()
    } else {
        p.raster.iter().map(|&u| f64::from(u) / 255.0).collect()
    };
    Ok(RgbImage::new(p.height, p.width, data)?)
}

pub fn quantize(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn image_to_pnm(x: &RgbImage) -> Pnm {
    Pnm {
        width: x.width(),
        height: x.height(),
        channels: 3,
        raster: x.as_slice().iter().map(|&v| quantize(v)).collect(),
    }
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RgbImage> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    decode_pnm(&bytes)
        .and_then(|p| pnm_to_image(&p))
        .map_err(tensor_err(path))
}

/// Writes a P6 image, quantizing channels to 8 bits.
pub fn write_image(path: impl AsRef<Path>, x: &RgbImage) -> Result<()> {
    write_bytes(path.as_ref(), &encode_pnm(&image_to_pnm(x)))
}

/// P5 rendering of a binary map: foreground 255, background 0.
pub fn write_binary_pgm(path: impl AsRef<Path>, m: &BinaryMap) -> Result<()> {
    let p = Pnm {
        width: m.width(),
        height: m.height(),
        channels: 1,
        raster: m.as_slice().iter().map(|&v| v * 255).collect(),
    };
    write_bytes(path.as_ref(), &encode_pnm(&p))
}

/// Reads a P5 mask; nonzero pixels are foreground.
pub fn read_binary_pgm(path: impl AsRef<Path>) -> Result<BinaryMap> {
    let path = path.as_ref();
    let bytes = read_bytes(path)?;
    let p = decode_pnm(&bytes).map_err(tensor_err(path))?;
    if p.channels != 1 {
        return Err(tensor_err(path)(TensorError::UnsupportedFormat(
            "mask must be a PGM".into(),
        )));
    }
    let data = p.raster.iter().map(|&v| u8::from(v != 0)).collect();
    BinaryMap::new(p.height, p.width, data).map_err(Error::from)
}
