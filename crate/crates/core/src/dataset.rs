//! MNIST-style IDX files and per-image delta encoding.

use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::codec::{delta_encode_signal, CodecError};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// Level-crossing threshold used for image encoding.
pub const DEFAULT_THETA: f64 = 0.05;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DatasetError {
    #[error("bad magic: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { expected: u32, found: u32 },
    #[error("truncated {0} file")]
    Truncated(&'static str),
    #[error("count mismatch: {images} images but {labels} labels")]
    CountMismatch { images: usize, labels: usize },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Images with pixels rescaled to `[0, 1]`, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledImageSet {
    pub rows: usize,
    pub cols: usize,
    pub images: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
}

impl LabeledImageSet {
    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }

    pub fn truncate(&mut self, limit: usize) {
        self.images.truncate(limit);
        self.labels.truncate(limit);
    }

    /// `(line amplitudes, label)` for every image.
    pub fn encode(&self, theta: f64) -> Result<Vec<(Vec<i64>, usize)>, DatasetError> {
        self.images
            .iter()
            .zip(&self.labels)
            .map(|(image, &label)| Ok((encode_image(image, theta)?, usize::from(label))))
            .collect()
    }
}

fn read_be_u32(bytes: &[u8], offset: usize, what: &'static str) -> Result<u32, DatasetError> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or(DatasetError::Truncated(what))
}

fn check_magic(bytes: &[u8], expected: u32, what: &'static str) -> Result<(), DatasetError> {
    let found = read_be_u32(bytes, 0, what)?;
    if found != expected {
        return Err(DatasetError::BadMagic { expected, found });
    }
    Ok(())
}

/// Returns `(rows, cols, images)` with pixels divided by 255.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<f64>>), DatasetError> {
    check_magic(bytes, IMAGE_MAGIC, "image")?;
    let count = read_be_u32(bytes, 4, "image")? as usize;
    let rows = read_be_u32(bytes, 8, "image")? as usize;
    let cols = read_be_u32(bytes, 12, "image")? as usize;
    let size = rows * cols;
    let body = &bytes[16..];
    if body.len() < count * size {
        return Err(DatasetError::Truncated("image"));
    }
    let images = body
        .chunks_exact(size.max(1))
        .take(count)
        .map(|px| px.iter().map(|&p| f64::from(p) / 255.0).collect())
        .collect();
    Ok((rows, cols, images))
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>, DatasetError> {
    check_magic(bytes, LABEL_MAGIC, "label")?;
    let count = read_be_u32(bytes, 4, "label")? as usize;
    bytes
        .get(8..8 + count)
        .map(<[u8]>::to_vec)
        .ok_or(DatasetError::Truncated("label"))
}

fn read_file(path: &Path) -> Result<Vec<u8>, DatasetError> {
    fs::read(path).map_err(|e| DatasetError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<LabeledImageSet, DatasetError> {
    let (rows, cols, images) = parse_idx_images(&read_file(images_path.as_ref())?)?;
    let labels = parse_idx_labels(&read_file(labels_path.as_ref())?)?;
    if images.len() != labels.len() {
        return Err(DatasetError::CountMismatch {
            images: images.len(),
            labels: labels.len(),
        });
    }
    Ok(LabeledImageSet {
        rows,
        cols,
        images,
        labels,
    })
}

pub fn idx_image_bytes(set: &LabeledImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + set.len() * set.rows * set.cols);
    for v in [IMAGE_MAGIC, set.len() as u32, set.rows as u32, set.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    for image in &set.images {
        out.extend(image.iter().map(|&p| (p * 255.0).round().clamp(0.0, 255.0) as u8));
    }
    out
}

pub fn idx_label_bytes(set: &LabeledImageSet) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + set.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(set.len() as u32).to_be_bytes());
    out.extend_from_slice(&set.labels);
    out
}

pub fn save_idx(
    set: &LabeledImageSet,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<(), DatasetError> {
    let write = |path: &Path, bytes: Vec<u8>| {
        fs::write(path, bytes).map_err(|e| DatasetError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    };
    write(images_path.as_ref(), idx_image_bytes(set))?;
    write(labels_path.as_ref(), idx_label_bytes(set))
}

/// Delta-encodes the row-major raster scan; entry `p` is the amplitude of the
/// event at pixel `p`, zero where none fired. Pixel 0 never fires.
pub fn encode_image(image: &[f64], theta: f64) -> Result<Vec<i64>, CodecError> {
    let train = delta_encode_signal(image, theta)?;
    let mut amplitudes = vec![0i64; image.len()];
    for event in train.events() {
        amplitudes[event.time as usize] = event.amplitude;
    }
    Ok(amplitudes)
}
