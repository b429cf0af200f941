//! Synthetic pair generators with per-item RNG streams.

use std::f64::consts::TAU;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::image::{rotate_image, Image};
use super::PairBatch;
use crate::error::{Result, TsaError};

/// Independent stream for item `index` of a run seeded with `seed`.
pub fn item_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn assemble(dim: usize, items: Vec<(Vec<f64>, Vec<f64>, f64)>) -> PairBatch {
    let n = items.len();
    let mut x = DMatrix::zeros(dim, n);
    let mut y = DMatrix::zeros(dim, n);
    let mut angles = Vec::with_capacity(n);
    for (i, (xi, yi, a)) in items.into_iter().enumerate() {
        x.column_mut(i).copy_from_slice(&xi);
        y.column_mut(i).copy_from_slice(&yi);
        angles.push(a);
    }
    PairBatch {
        x,
        y,
        angles: Some(angles),
    }
}

/// Standard-normal `side`×`side` patches paired with their rotations by
/// uniform angles in [0, 2π). Columns are row-major vectorized images.
pub fn gen_patch_pairs(seed: u64, n: usize, side: usize) -> Result<PairBatch> {
    if side < 2 {
        return Err(TsaError::InvalidConfig(format!(
            "patch side must be at least 2, got {side}"
        )));
    }
    let items = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i as u64);
            let pixels: Vec<f64> = (0..side * side)
                .map(|_| rng.sample(StandardNormal))
                .collect();
            let angle = rng.random::<f64>() * TAU;
            let img = Image::square(side, pixels).expect("side*side pixels");
            let rotated = rotate_image(&img, angle).expect("square image");
            (img.into_data(), rotated.into_data(), angle)
        })
        .collect();
    Ok(assemble(side * side, items))
}

/// Standard-normal length-`dim` signals paired with cyclic shifts by a
/// uniform integer amount `k`; the stored angle is `2πk/dim`.
pub fn gen_shift_pairs(seed: u64, n: usize, dim: usize) -> Result<PairBatch> {
    if dim < 2 {
        return Err(TsaError::InvalidConfig(format!(
            "signal length must be at least 2, got {dim}"
        )));
    }
    let items = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = item_rng(seed, i as u64);
            let x: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
            let k = rng.random_range(0..dim);
            let y = (0..dim).map(|t| x[(t + dim - k) % dim]).collect();
            (x, y, TAU * k as f64 / dim as f64)
        })
        .collect();
    Ok(assemble(dim, items))
}
