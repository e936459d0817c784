//! Fashion-MNIST ingestion: big-endian IDX containers, [0,1] normalization,
//! and deterministic dataset ordering (file order until shuffled).

use std::path::Path;

use crate::error::{Error, Result};
use crate::scalar::{fl, Scalar};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// One grayscale image with its class label. Pixels are the raw bytes;
/// [`LabeledImage::normalized`] yields the [0,1] view used by the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabeledImage {
    pub pixels: Vec<u8>,
    pub label: u8,
}

impl LabeledImage {
    /// Pixel values scaled into [0,1] (exact endpoints: 0 -> 0.0, 255 -> 1.0).
    pub fn normalized<F: Scalar>(&self) -> Vec<F> {
        self.pixels.iter().map(|&b| normalize(b)).collect()
    }
}

/// Byte value scaled by 1/255.
pub fn normalize<F: Scalar>(byte: u8) -> F {
    fl::<F>(byte as f64) / fl::<F>(255.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

/// An ordered image collection from one IDX image/label file pair.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub images: Vec<LabeledImage>,
    pub height: usize,
    pub width: usize,
    pub split: Split,
}

impl Dataset {
    /// Load a split from a directory holding the standard file names.
    pub fn load(dir: &Path, split: Split) -> Result<Self> {
        let (img_name, lbl_name) = match split {
            Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
            Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
        };
        let img_path = dir.join(img_name);
        let lbl_path = dir.join(lbl_name);
        for p in [&img_path, &lbl_path] {
            if !p.exists() {
                return Err(Error::InvalidConfig(format!(
                    "dataset file not found: {} (fetch Fashion-MNIST into {})",
                    p.display(),
                    dir.display()
                )));
            }
        }
        let images = std::fs::read(&img_path)?;
        let labels = std::fs::read(&lbl_path)?;
        Self::from_bytes(&images, &labels, split)
    }

    /// Assemble from raw IDX bytes; image and label counts must agree.
    pub fn from_bytes(image_bytes: &[u8], label_bytes: &[u8], split: Split) -> Result<Self> {
        let (height, width, pixels) = parse_idx_images(image_bytes)?;
        let labels = parse_idx_labels(label_bytes)?;
        if pixels.len() != labels.len() {
            return Err(Error::Parse {
                offset: 4,
                message: format!(
                    "image count {} does not match label count {}",
                    pixels.len(),
                    labels.len()
                ),
            });
        }
        let images = pixels
            .into_iter()
            .zip(labels)
            .map(|(pixels, label)| LabeledImage { pixels, label })
            .collect();
        Ok(Self { images, height, width, split })
    }

    pub fn len(&self) -> usize {
        self.images.len()
    }

    pub fn is_empty(&self) -> bool {
        self.images.is_empty()
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::Parse { offset, message: "truncated header".into() });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parse an IDX3 image container into per-image byte rows.
pub fn parse_idx_images(bytes: &[u8]) -> Result<(usize, usize, Vec<Vec<u8>>)> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad image magic {magic:#010x}, expected {IDX_IMAGES_MAGIC:#010x}"),
        });
    }
    let count = read_u32(bytes, 4)? as usize;
    let height = read_u32(bytes, 8)? as usize;
    let width = read_u32(bytes, 12)? as usize;
    let pixel_len = height * width;
    let expected = 16 + count * pixel_len;
    if bytes.len() < expected {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("truncated payload: {} bytes, expected {expected}", bytes.len()),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Parse {
            offset: expected,
            message: format!("{} trailing bytes beyond payload", bytes.len() - expected),
        });
    }
    let images = (0..count)
        .map(|i| bytes[16 + i * pixel_len..16 + (i + 1) * pixel_len].to_vec())
        .collect();
    Ok((height, width, images))
}

/// Parse an IDX1 label container; labels must be valid classes (0..=9).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_u32(bytes, 0)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::Parse {
            offset: 0,
            message: format!("bad label magic {magic:#010x}, expected {IDX_LABELS_MAGIC:#010x}"),
        });
    }
    let count = read_u32(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::Parse {
            offset: bytes.len(),
            message: format!("truncated payload: {} bytes, expected {expected}", bytes.len()),
        });
    }
    if bytes.len() > expected {
        return Err(Error::Parse {
            offset: expected,
            message: format!("{} trailing bytes beyond payload", bytes.len() - expected),
        });
    }
    let labels = bytes[8..expected].to_vec();
    for (i, &l) in labels.iter().enumerate() {
        if l > 9 {
            return Err(Error::Parse {
                offset: 8 + i,
                message: format!("label {l} out of range [0,9]"),
            });
        }
    }
    Ok(labels)
}

/// Serialize images into IDX3 bytes (inverse of [`parse_idx_images`]).
pub fn write_idx_images(height: usize, width: usize, images: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + images.len() * height * width);
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(height as u32).to_be_bytes());
    out.extend_from_slice(&(width as u32).to_be_bytes());
    for img in images {
        assert_eq!(img.len(), height * width, "image payload size");
        out.extend_from_slice(img);
    }
    out
}

/// Serialize labels into IDX1 bytes (inverse of [`parse_idx_labels`]).
pub fn write_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
