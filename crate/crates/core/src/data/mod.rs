//! Data generation, image resampling, MNIST ingestion and file formats.

mod bytes;
pub mod dataset_file;
pub mod idx;
pub mod image;
pub mod mnist;
pub mod model_file;
pub mod synth;

use nalgebra::DMatrix;

use crate::error::{check_len, Result, TsaError};

pub use dataset_file::{load_dataset, save_dataset, Dataset, LabeledSet};
pub use idx::{load_idx, load_idx_images, load_idx_labels, IdxData, IdxImages};
pub use image::{downscale, in_disk, rotate_image, tangent_vector, Image, TANGENT_DELTA};
pub use mnist::build_rotated_mnist;
pub use model_file::{load_model, save_model, Model, ModelPrior};
pub use synth::{gen_patch_pairs, gen_shift_pairs, item_rng};

/// Matched columns: `y⁽ⁿ⁾` is a transformed copy of `x⁽ⁿ⁾`.
#[derive(Debug, Clone, PartialEq)]
pub struct PairBatch {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    /// Generating transformation per column; diagnostics only.
    pub angles: Option<Vec<f64>>,
}

impl PairBatch {
    pub fn new(x: DMatrix<f64>, y: DMatrix<f64>, angles: Option<Vec<f64>>) -> Result<Self> {
        check_len("pair batch rows", x.nrows(), y.nrows())?;
        check_len("pair batch columns", x.ncols(), y.ncols())?;
        if let Some(a) = &angles {
            check_len("pair batch angles", x.ncols(), a.len())?;
        }
        if x.iter().chain(y.iter()).any(|v| !v.is_finite()) {
            return Err(TsaError::Malformed {
                what: "pair batch",
                detail: "non-finite entry".into(),
            });
        }
        Ok(PairBatch { x, y, angles })
    }

    pub fn dim(&self) -> usize {
        self.x.nrows()
    }

    pub fn len(&self) -> usize {
        self.x.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.x.ncols() == 0
    }

    /// Columns `start..start + count` (clamped to the batch).
    pub fn slice(&self, start: usize, count: usize) -> PairBatch {
        let start = start.min(self.len());
        let count = count.min(self.len() - start);
        PairBatch {
            x: self.x.columns(start, count).into_owned(),
            y: self.y.columns(start, count).into_owned(),
            angles: self.angles.as_ref().map(|a| a[start..start + count].to_vec()),
        }
    }
}
