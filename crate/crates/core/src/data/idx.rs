//! IDX (MNIST) reader: big-endian header, unsigned-byte payload.

use std::path::Path;

use super::bytes::read_file;
use crate::error::{Result, TsaError};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// Images scaled to [0, 1], stored image-major then row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<f64>,
}

impl IdxImages {
    pub fn image(&self, i: usize) -> &[f64] {
        let size = self.rows * self.cols;
        &self.pixels[i * size..(i + 1) * size]
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.count, self.rows, self.cols)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum IdxData {
    Images(IdxImages),
    Labels(Vec<u8>),
}

fn be_u32(data: &[u8], at: usize, what: &'static str) -> Result<u32> {
    data.get(at..at + 4)
        .map(|b| u32::from_be_bytes(b.try_into().unwrap()))
        .ok_or(TsaError::Truncated {
            what,
            needed: at + 4,
            available: data.len(),
        })
}

fn payload<'a>(data: &'a [u8], header: usize, len: usize, what: &'static str) -> Result<&'a [u8]> {
    let needed = header + len;
    if data.len() < needed {
        return Err(TsaError::Truncated {
            what,
            needed,
            available: data.len(),
        });
    }
    Ok(&data[header..needed])
}

/// Parse IDX bytes, dispatching on the magic number.
pub fn parse_idx(data: &[u8]) -> Result<IdxData> {
    match be_u32(data, 0, "IDX header")? {
        IDX_IMAGES_MAGIC => parse_idx_images(data).map(IdxData::Images),
        IDX_LABELS_MAGIC => parse_idx_labels(data).map(IdxData::Labels),
        actual => Err(TsaError::BadMagic {
            what: "IDX file",
            expected: IDX_IMAGES_MAGIC,
            actual,
        }),
    }
}

pub fn parse_idx_images(data: &[u8]) -> Result<IdxImages> {
    let what = "IDX image file";
    let magic = be_u32(data, 0, what)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(TsaError::BadMagic {
            what,
            expected: IDX_IMAGES_MAGIC,
            actual: magic,
        });
    }
    let count = be_u32(data, 4, what)? as usize;
    let rows = be_u32(data, 8, what)? as usize;
    let cols = be_u32(data, 12, what)? as usize;
    let len = count
        .checked_mul(rows)
        .and_then(|v| v.checked_mul(cols))
        .ok_or_else(|| TsaError::Malformed {
            what,
            detail: "image dimensions overflow".into(),
        })?;
    let bytes = payload(data, 16, len, what)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes.iter().map(|&b| b as f64 / 255.0).collect(),
    })
}

pub fn parse_idx_labels(data: &[u8]) -> Result<Vec<u8>> {
    let what = "IDX label file";
    let magic = be_u32(data, 0, what)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(TsaError::BadMagic {
            what,
            expected: IDX_LABELS_MAGIC,
            actual: magic,
        });
    }
    let count = be_u32(data, 4, what)? as usize;
    Ok(payload(data, 8, count, what)?.to_vec())
}

pub fn load_idx(path: impl AsRef<Path>) -> Result<IdxData> {
    parse_idx(&read_file(path.as_ref())?)
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    parse_idx_images(&read_file(path.as_ref())?)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    parse_idx_labels(&read_file(path.as_ref())?)
}
