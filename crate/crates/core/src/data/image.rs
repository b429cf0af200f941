//! Raster rotation with disk masking, resizing and rotational tangents.

use crate::error::{Result, TsaError};

/// Half-angle of the symmetric difference used for tangent vectors: 0.1°.
pub const TANGENT_DELTA: f64 = 0.1 * std::f64::consts::PI / 180.0;

/// Row-major real image.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Image {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(TsaError::DimensionMismatch {
                context: "image pixels",
                expected: rows * cols,
                actual: data.len(),
            });
        }
        Ok(Image { rows, cols, data })
    }

    pub fn square(side: usize, data: Vec<f64>) -> Result<Self> {
        Image::new(side, side, data)
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Image { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    fn side(&self) -> Result<usize> {
        if self.rows != self.cols {
            return Err(TsaError::NonSquareImage {
                rows: self.rows,
                cols: self.cols,
            });
        }
        Ok(self.rows)
    }

    /// Pixel value with zero outside the raster.
    fn get_or_zero(&self, r: isize, c: isize) -> f64 {
        if r < 0 || c < 0 || r as usize >= self.rows || c as usize >= self.cols {
            0.0
        } else {
            self.data[r as usize * self.cols + c as usize]
        }
    }

    /// Bilinear sample at (x = column, y = row) with zero padding.
    fn bilinear_zero(&self, x: f64, y: f64) -> f64 {
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let (c0, r0) = (x0 as isize, y0 as isize);
        let mut v = (1.0 - fx) * (1.0 - fy) * self.get_or_zero(r0, c0);
        if fx != 0.0 {
            v += fx * (1.0 - fy) * self.get_or_zero(r0, c0 + 1);
        }
        if fy != 0.0 {
            v += (1.0 - fx) * fy * self.get_or_zero(r0 + 1, c0);
            if fx != 0.0 {
                v += fx * fy * self.get_or_zero(r0 + 1, c0 + 1);
            }
        }
        v
    }

    /// Bilinear sample with coordinates clamped to the raster.
    fn bilinear_clamp(&self, x: f64, y: f64) -> f64 {
        let x = x.clamp(0.0, (self.cols - 1) as f64);
        let y = y.clamp(0.0, (self.rows - 1) as f64);
        let c0 = (x.floor() as usize).min(self.cols.saturating_sub(2));
        let r0 = (y.floor() as usize).min(self.rows.saturating_sub(2));
        let c1 = (c0 + 1).min(self.cols - 1);
        let r1 = (r0 + 1).min(self.rows - 1);
        let fx = x - c0 as f64;
        let fy = y - r0 as f64;
        (1.0 - fx) * (1.0 - fy) * self.get(r0, c0)
            + fx * (1.0 - fy) * self.get(r0, c1)
            + (1.0 - fx) * fy * self.get(r1, c0)
            + fx * fy * self.get(r1, c1)
    }
}

/// Pixel centers within `side / 2` of the raster center.
pub fn in_disk(side: usize, r: usize, c: usize) -> bool {
    let center = (side as f64 - 1.0) / 2.0;
    let radius = side as f64 / 2.0;
    let dx = c as f64 - center;
    let dy = r as f64 - center;
    dx * dx + dy * dy <= radius * radius
}

/// Counter-clockwise rotation (in row-down raster coordinates, x to y)
/// about the raster center. Output pixels outside the inscribed disk are 0;
/// samples falling outside the raster read as 0.
pub fn rotate_image(img: &Image, angle: f64) -> Result<Image> {
    let side = img.side()?;
    let center = (side as f64 - 1.0) / 2.0;
    let (sin, cos) = angle.sin_cos();
    let out = Image::from_fn(side, side, |r, c| {
        if !in_disk(side, r, c) {
            return 0.0;
        }
        let px = c as f64 - center;
        let py = r as f64 - center;
        let qx = cos * px + sin * py + center;
        let qy = -sin * px + cos * py + center;
        img.bilinear_zero(qx, qy)
    });
    Ok(out)
}

/// Bilinear resize of a square image, sampling at pixel-center positions.
pub fn downscale(img: &Image, new_side: usize) -> Result<Image> {
    let side = img.side()?;
    if new_side == 0 {
        return Err(TsaError::InvalidConfig("target side must be positive".into()));
    }
    let scale = side as f64 / new_side as f64;
    Ok(Image::from_fn(new_side, new_side, |r, c| {
        let x = (c as f64 + 0.5) * scale - 0.5;
        let y = (r as f64 + 0.5) * scale - 0.5;
        img.bilinear_clamp(x, y)
    }))
}

/// Symmetric-difference derivative of the rotation at angle 0.
pub fn tangent_vector(img: &Image) -> Result<Image> {
    let plus = rotate_image(img, TANGENT_DELTA)?;
    let minus = rotate_image(img, -TANGENT_DELTA)?;
    let data = plus
        .data
        .iter()
        .zip(&minus.data)
        .map(|(a, b)| (a - b) / (2.0 * TANGENT_DELTA))
        .collect();
    Ok(Image {
        rows: img.rows,
        cols: img.cols,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_image(side: usize, seed: u64) -> Image {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Image::from_fn(side, side, |_, _| rng.random::<f64>())
    }

    fn masked(img: &Image) -> Image {
        let s = img.rows();
        Image::from_fn(s, s, |r, c| if in_disk(s, r, c) { img.get(r, c) } else { 0.0 })
    }

    fn smooth_blob(side: usize) -> Image {
        let c = (side as f64 - 1.0) / 2.0;
        let w = side as f64 / 5.0;
        Image::from_fn(side, side, |r, col| {
            let x = col as f64 - c - side as f64 / 8.0;
            let y = r as f64 - c + side as f64 / 10.0;
            (-(x * x + y * y) / (2.0 * w * w)).exp()
        })
    }

    #[test]
    fn zero_angle_is_exact_masked_identity() {
        for side in [1, 2, 5, 8, 16] {
            let img = random_image(side, side as u64);
            assert_eq!(rotate_image(&img, 0.0).unwrap(), masked(&img));
        }
    }

    #[test]
    fn quarter_turn_is_index_permutation() {
        let img = random_image(4, 3);
        let m = masked(&img);
        let rot = rotate_image(&img, std::f64::consts::FRAC_PI_2).unwrap();
        // out(r, c) = in(qy, qx) with qx = py + c0, qy = -px + c0 around c0 = 1.5.
        for r in 0..4 {
            for c in 0..4 {
                let expected = m.get(3 - c, r);
                assert!((rot.get(r, c) - expected).abs() < 1e-12, "({r},{c})");
            }
        }
    }

    #[test]
    fn full_turn_and_half_turn() {
        let img = random_image(6, 9);
        let m = masked(&img);
        let half = rotate_image(&img, std::f64::consts::PI).unwrap();
        for r in 0..6 {
            for c in 0..6 {
                assert!((half.get(r, c) - m.get(5 - r, 5 - c)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn inverse_composition_on_inner_disk() {
        let img = smooth_blob(16);
        for a in [0.3, 1.0, 2.5, -0.7] {
            let back = rotate_image(&rotate_image(&img, a).unwrap(), -a).unwrap();
            let mut se = 0.0;
            let mut n = 0;
            for r in 0..16 {
                for c in 0..16 {
                    let dx = c as f64 - 7.5;
                    let dy = r as f64 - 7.5;
                    if dx * dx + dy * dy <= 6.5f64.powi(2) {
                        se += (back.get(r, c) - img.get(r, c)).powi(2);
                        n += 1;
                    }
                }
            }
            assert!((se / n as f64).sqrt() < 0.05, "angle {a}");
        }
    }

    #[test]
    fn energy_preserved_for_smooth_images() {
        let side = 24;
        let img = masked(&smooth_blob(side));
        let e0: f64 = img.data().iter().map(|v| v * v).sum();
        for a in [0.2, 0.9, 2.0, 4.0] {
            let rot = rotate_image(&img, a).unwrap();
            let e: f64 = rot.data().iter().map(|v| v * v).sum();
            assert!(((e / e0).sqrt() - 1.0).abs() < 0.02, "angle {a}");
        }
    }

    #[test]
    fn non_square_rejected() {
        let img = Image::new(2, 3, vec![0.0; 6]).unwrap();
        assert!(matches!(
            rotate_image(&img, 1.0),
            Err(TsaError::NonSquareImage { rows: 2, cols: 3 })
        ));
        assert!(tangent_vector(&img).is_err());
        assert!(Image::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn constant_image_has_zero_tangent_inside() {
        let side = 12;
        let img = Image::from_fn(side, side, |_, _| 0.7);
        let t = tangent_vector(&img).unwrap();
        for r in 0..side {
            for c in 0..side {
                let d = ((c as f64 - 5.5).powi(2) + (r as f64 - 5.5).powi(2)).sqrt();
                if d <= side as f64 / 2.0 - 1.5 {
                    assert!(t.get(r, c).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn ramp_tangent_matches_analytic_derivative() {
        // I(r, c) = c: rotated value cos(a) px + sin(a) py + center, derivative py.
        let side = 16;
        let center = 7.5;
        let img = Image::from_fn(side, side, |_, c| c as f64);
        let t = tangent_vector(&img).unwrap();
        for r in 0..side {
            for c in 0..side {
                let px = c as f64 - center;
                let py = r as f64 - center;
                if (px * px + py * py).sqrt() <= side as f64 / 2.0 - 1.5 {
                    assert!((t.get(r, c) - py).abs() < 1e-3, "({r},{c})");
                }
            }
        }
    }

    #[test]
    fn tangent_of_reflection_negates() {
        let side = 10;
        let img = random_image(side, 5);
        let mirror = Image::from_fn(side, side, |r, c| img.get(r, side - 1 - c));
        let t = tangent_vector(&img).unwrap();
        let tm = tangent_vector(&mirror).unwrap();
        for r in 0..side {
            for c in 0..side {
                assert!((tm.get(r, c) + t.get(r, side - 1 - c)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn downscale_keeps_constants_and_range() {
        let img = Image::from_fn(28, 28, |_, _| 0.25);
        let small = downscale(&img, 16).unwrap();
        assert!(small.data().iter().all(|&v| (v - 0.25).abs() < 1e-15));
        let img = random_image(28, 2);
        let small = downscale(&img, 16).unwrap();
        assert!(small.data().iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert_eq!(downscale(&img, 28).unwrap(), img);
    }
}
