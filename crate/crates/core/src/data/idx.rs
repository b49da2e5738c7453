//! Big-endian IDX files as distributed for MNIST:
//! images `0x00000803 | count | rows | cols | u8 pixels...`,
//! labels `0x00000801 | count | u8 labels...`.

use std::fs;
use std::path::Path;

use crate::data::{DatasetShard, Sample};
use crate::error::{Error, Result};

pub const IMAGES_MAGIC: u32 = 0x0000_0803;
pub const LABELS_MAGIC: u32 = 0x0000_0801;

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Cursor<'a> {
    fn u32(&mut self) -> Result<u32> {
        let chunk = self.take(4)?;
        Ok(u32::from_be_bytes([chunk[0], chunk[1], chunk[2], chunk[3]]))
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let out = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(out)
            }
            None => Err(Error::Format(format!(
                "{} file truncated: wanted {n} bytes at offset {}, file has {}",
                self.what,
                self.pos,
                self.bytes.len()
            ))),
        }
    }
}

/// Parses an image/label pair already in memory. Pixels are scaled to `[0, 1]`.
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<DatasetShard> {
    let mut img = Cursor {
        bytes: images,
        pos: 0,
        what: "image",
    };
    let magic = img.u32()?;
    if magic != IMAGES_MAGIC {
        return Err(Error::Format(format!(
            "image magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}"
        )));
    }
    let count = img.u32()? as usize;
    let rows = img.u32()? as usize;
    let cols = img.u32()? as usize;

    let mut lab = Cursor {
        bytes: labels,
        pos: 0,
        what: "label",
    };
    let magic = lab.u32()?;
    if magic != LABELS_MAGIC {
        return Err(Error::Format(format!(
            "label magic {magic:#010x}, expected {LABELS_MAGIC:#010x}"
        )));
    }
    let label_count = lab.u32()? as usize;
    if label_count != count {
        return Err(Error::Format(format!(
            "{count} images but {label_count} labels"
        )));
    }

    let dim = rows * cols;
    let pixels = img.take(count * dim)?;
    let label_bytes = lab.take(count)?;
    let samples = pixels
        .chunks_exact(dim.max(1))
        .take(count)
        .zip(label_bytes)
        .map(|(px, &label)| Sample {
            features: px.iter().map(|&p| f64::from(p) / 255.0).collect(),
            label: usize::from(label),
        })
        .collect();
    DatasetShard::new(samples)
}

pub fn load_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<DatasetShard> {
    let images = fs::read(images_path)?;
    let labels = fs::read(labels_path)?;
    parse_idx(&images, &labels)
}

/// Encodes `count` images of `rows x cols` bytes in IDX form.
pub fn encode_images(rows: u32, cols: u32, pixels: &[u8]) -> Vec<u8> {
    let dim = (rows * cols) as usize;
    let count = pixels.len().checked_div(dim).unwrap_or(0);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, count as u32, rows, cols] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&pixels[..count * dim]);
    out
}

pub fn encode_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}
