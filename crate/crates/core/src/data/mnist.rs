//! Rotated-MNIST construction: one random rotation per digit, then resize.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;

use super::dataset_file::LabeledSet;
use super::idx::IdxImages;
use super::image::{downscale, rotate_image, Image};
use super::synth::item_rng;
use crate::error::{check_len, Result};

/// Rotate each source image by its own uniform angle at full resolution,
/// then resize to `side`×`side`. Output order and count follow the input.
pub fn build_rotated_mnist(
    images: &IdxImages,
    labels: &[u8],
    seed: u64,
    side: usize,
) -> Result<LabeledSet> {
    check_len("MNIST labels", images.count, labels.len())?;
    let rows = images.rows;
    let cols = images.cols;
    let items: Vec<(Vec<f64>, f64)> = (0..images.count)
        .into_par_iter()
        .map(|i| -> Result<(Vec<f64>, f64)> {
            let angle = item_rng(seed, i as u64).random::<f64>() * TAU;
            let img = Image::new(rows, cols, images.image(i).to_vec())?;
            let small = downscale(&rotate_image(&img, angle)?, side)?;
            // Convex combinations of [0, 1] pixels; clamp rounding excess.
            let pixels = small.into_data().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
            Ok((pixels, angle))
        })
        .collect::<Result<_>>()?;
    let dim = side * side;
    let mut data = DMatrix::zeros(dim, items.len());
    let mut angles = Vec::with_capacity(items.len());
    for (n, (pixels, angle)) in items.into_iter().enumerate() {
        data.column_mut(n).copy_from_slice(&pixels);
        angles.push(angle);
    }
    LabeledSet::new(side, data, labels.to_vec(), Some(angles))
}
