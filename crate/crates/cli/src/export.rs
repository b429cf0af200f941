//! Filter-grid rendering as binary PGM.

use tsa_core::toral::ToralBasis;

/// Gray level between tiles.
const GAP_LEVEL: u8 = 0;

/// Subspace order for display: ascending `|ω|`, stable in the index.
pub fn order_by_abs_weight(omega: &[i32]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..omega.len()).collect();
    order.sort_by_key(|&j| (omega[j].unsigned_abs(), j));
    order
}

/// Map a filter linearly onto 0..=255 (constant filters render mid-gray).
fn normalize(values: &[f64]) -> Vec<u8> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![128; values.len()];
    }
    values
        .iter()
        .map(|v| ((v - lo) / (hi - lo) * 255.0).round() as u8)
        .collect()
}

/// Layout: each subspace occupies two adjacent tiles (its filter pair);
/// `pairs_per_row` pairs per grid row, 1-pixel gaps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridLayout {
    pub side: usize,
    pub pairs_per_row: usize,
    pub rows: usize,
}

impl GridLayout {
    pub fn for_pairs(side: usize, pairs: usize) -> Self {
        let mut per_row = 1;
        while per_row * per_row < pairs {
            per_row += 1;
        }
        GridLayout {
            side,
            pairs_per_row: per_row,
            rows: pairs.div_ceil(per_row).max(1),
        }
    }

    pub fn width(&self) -> usize {
        let tiles = 2 * self.pairs_per_row;
        tiles * self.side + tiles + 1
    }

    pub fn height(&self) -> usize {
        self.rows * self.side + self.rows + 1
    }

    /// Top-left pixel of tile `t` (0-based across the sorted filter list).
    pub fn tile_origin(&self, t: usize) -> (usize, usize) {
        let tiles_per_row = 2 * self.pairs_per_row;
        let (r, c) = (t / tiles_per_row, t % tiles_per_row);
        (1 + r * (self.side + 1), 1 + c * (self.side + 1))
    }
}

/// Render all `2J` columns of `W` of a square-image model as a PGM (P5).
pub fn render_filters_pgm(basis: &ToralBasis) -> Result<Vec<u8>, String> {
    let d = basis.dim();
    let side = (d as f64).sqrt().round() as usize;
    if side * side != d {
        return Err(format!("model dimension {d} is not a square image"));
    }
    let layout = GridLayout::for_pairs(side, basis.n_subspaces());
    let (width, height) = (layout.width(), layout.height());
    let mut pixels = vec![GAP_LEVEL; width * height];
    let w = basis.w();
    let mut tile = 0;
    for j in order_by_abs_weight(basis.omega()) {
        for col in [2 * j, 2 * j + 1] {
            let filter: Vec<f64> = w.column(col).iter().copied().collect();
            let gray = normalize(&filter);
            let (top, left) = layout.tile_origin(tile);
            for r in 0..side {
                let row = (top + r) * width + left;
                pixels[row..row + side].copy_from_slice(&gray[r * side..(r + 1) * side]);
            }
            tile += 1;
        }
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend_from_slice(&pixels);
    Ok(out)
}
