//! Dataset files ("TSAD"): pair batches or labeled image sets, with a
//! trailing CRC32.
//!
//! Layout (little-endian): magic, version u16, kind u8, then
//! kind 1 (pairs): D u32, N u32, has_angles u8, X, Y (column-major f64),
//! optional angles; kind 2 (labeled): side u32, N u32, has_angles u8,
//! images (column-major f64), labels u8×N, optional angles.

use std::path::Path;

use nalgebra::DMatrix;

use super::bytes::{expect_magic, read_file, verify_crc, write_file, Reader, Writer};
use super::PairBatch;
use crate::error::{check_len, Result, TsaError};

pub const DATASET_MAGIC: &[u8; 4] = b"TSAD";
pub const DATASET_VERSION: u16 = 1;
const KIND_PAIRS: u8 = 1;
const KIND_LABELED: u8 = 2;
const WHAT: &str = "dataset file";

/// Vectorized square images (one per column) with class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    side: usize,
    data: DMatrix<f64>,
    labels: Vec<u8>,
    angles: Option<Vec<f64>>,
}

impl LabeledSet {
    pub fn new(
        side: usize,
        data: DMatrix<f64>,
        labels: Vec<u8>,
        angles: Option<Vec<f64>>,
    ) -> Result<Self> {
        check_len("labeled set rows", side * side, data.nrows())?;
        check_len("labeled set labels", data.ncols(), labels.len())?;
        if let Some(a) = &angles {
            check_len("labeled set angles", data.ncols(), a.len())?;
        }
        Ok(LabeledSet {
            side,
            data,
            labels,
            angles,
        })
    }

    pub fn side(&self) -> usize {
        self.side
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn data(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn angles(&self) -> Option<&[f64]> {
        self.angles.as_deref()
    }

    pub fn item(&self, n: usize) -> &[f64] {
        let d = self.dim();
        &self.data.as_slice()[n * d..(n + 1) * d]
    }

    /// Items `start..start + count`, clamped.
    pub fn slice(&self, start: usize, count: usize) -> LabeledSet {
        let start = start.min(self.len());
        let count = count.min(self.len() - start);
        LabeledSet {
            side: self.side,
            data: self.data.columns(start, count).into_owned(),
            labels: self.labels[start..start + count].to_vec(),
            angles: self.angles.as_ref().map(|a| a[start..start + count].to_vec()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Pairs(PairBatch),
    Labeled(LabeledSet),
}

fn write_angles(w: &mut Writer, angles: Option<&[f64]>) {
    if let Some(a) = angles {
        a.iter().for_each(|&v| w.f64(v));
    }
}

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let mut w = Writer::new();
    w.bytes(DATASET_MAGIC);
    w.u16(DATASET_VERSION);
    match ds {
        Dataset::Pairs(b) => {
            w.u8(KIND_PAIRS);
            w.u32(b.dim() as u32);
            w.u32(b.len() as u32);
            w.u8(b.angles.is_some() as u8);
            b.x.iter().chain(b.y.iter()).for_each(|&v| w.f64(v));
            write_angles(&mut w, b.angles.as_deref());
        }
        Dataset::Labeled(s) => {
            w.u8(KIND_LABELED);
            w.u32(s.side as u32);
            w.u32(s.len() as u32);
            w.u8(s.angles.is_some() as u8);
            s.data.iter().for_each(|&v| w.f64(v));
            w.bytes(&s.labels);
            write_angles(&mut w, s.angles());
        }
    }
    w.finish()
}

fn read_flag(r: &mut Reader<'_>) -> Result<bool> {
    match r.u8()? {
        0 => Ok(false),
        1 => Ok(true),
        v => Err(TsaError::Malformed {
            what: WHAT,
            detail: format!("angle flag must be 0 or 1, got {v}"),
        }),
    }
}

pub fn decode_dataset(data: &[u8]) -> Result<Dataset> {
    let mut r = Reader::new(data, WHAT);
    expect_magic(&mut r, DATASET_MAGIC, WHAT)?;
    let payload = verify_crc(data, WHAT)?;
    let mut r = Reader::new(&payload[4..], WHAT);
    let version = r.u16()?;
    if version != DATASET_VERSION {
        return Err(TsaError::UnsupportedVersion {
            what: WHAT,
            found: version,
            supported: DATASET_VERSION,
        });
    }
    let ds = match r.u8()? {
        KIND_PAIRS => {
            let d = r.u32()? as usize;
            let n = r.u32()? as usize;
            let has_angles = read_flag(&mut r)?;
            let x = DMatrix::from_vec(d, n, r.f64_vec(d * n)?);
            let y = DMatrix::from_vec(d, n, r.f64_vec(d * n)?);
            let angles = if has_angles { Some(r.f64_vec(n)?) } else { None };
            Dataset::Pairs(PairBatch::new(x, y, angles)?)
        }
        KIND_LABELED => {
            let side = r.u32()? as usize;
            let n = r.u32()? as usize;
            let has_angles = read_flag(&mut r)?;
            let data = DMatrix::from_vec(side * side, n, r.f64_vec(side * side * n)?);
            let labels = r.take(n)?.to_vec();
            let angles = if has_angles { Some(r.f64_vec(n)?) } else { None };
            Dataset::Labeled(LabeledSet::new(side, data, labels, angles)?)
        }
        kind => {
            return Err(TsaError::Malformed {
                what: WHAT,
                detail: format!("unknown kind {kind}"),
            })
        }
    };
    if r.remaining() != 0 {
        return Err(TsaError::Malformed {
            what: WHAT,
            detail: format!("{} trailing bytes", r.remaining()),
        });
    }
    Ok(ds)
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    write_file(path.as_ref(), &encode_dataset(ds))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    decode_dataset(&read_file(path.as_ref())?)
}
