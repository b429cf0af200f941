//! Toroidal subgroups of SO(D).
//!
//! A toroidal group is represented by an orthonormal filter matrix `W` (D × 2J)
//! whose consecutive column pairs span the invariant subspaces, together with
//! one integer weight per subspace. Group elements act as `W R(φ) Wᵀ` on the
//! span of `W` and as the identity on its orthogonal complement.

use std::f64::consts::{PI, TAU};

use nalgebra::DMatrix;

use crate::error::{check_len, check_sigma, Result, TsaError};

/// Per-entry tolerance on `WᵀW = I` accepted by [`ToralBasis::new`].
pub const ORTHONORMAL_TOL: f64 = 1e-10;

/// Singular values at or below this are treated as rank deficiency.
pub const RANK_TOL: f64 = 1e-12;

/// Reduce an angle to `[0, 2π)`.
pub fn wrap_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Reduce an angle to `(-π, π]`.
pub fn wrap_signed(a: f64) -> f64 {
    let r = wrap_angle(a);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Orthonormal basis plus integer weights identifying a toroidal group.
#[derive(Debug, Clone, PartialEq)]
pub struct ToralBasis {
    w: DMatrix<f64>,
    omega: Vec<i32>,
    sigma: f64,
}

impl ToralBasis {
    /// Validates shape, orthonormality and the noise level.
    pub fn new(w: DMatrix<f64>, omega: Vec<i32>, sigma: f64) -> Result<Self> {
        let basis = Self::from_parts_unchecked(w, omega, sigma)?;
        let dev = orthonormality_defect(&basis.w);
        if dev > ORTHONORMAL_TOL {
            return Err(TsaError::NotOrthonormal { deviation: dev });
        }
        Ok(basis)
    }

    /// Like [`ToralBasis::new`] but skips the orthonormality check.
    ///
    /// Shape and sigma are still validated. Intended for bases that are
    /// orthonormal by construction (the output of [`orthogonalize`]).
    pub fn from_parts_unchecked(w: DMatrix<f64>, omega: Vec<i32>, sigma: f64) -> Result<Self> {
        let (dim, cols) = w.shape();
        if cols % 2 != 0 {
            return Err(TsaError::OddColumnCount(cols));
        }
        if cols > dim {
            return Err(TsaError::Overcomplete { columns: cols, dim });
        }
        check_len("omega length", cols / 2, omega.len())?;
        check_sigma(sigma)?;
        Ok(ToralBasis { w, omega, sigma })
    }

    /// Orthonormal sinusoid basis that turns subspace projection into a DFT.
    ///
    /// Subspace `j` (1-based frequency) holds `√(2/D)·cos(2πjn/D)` and
    /// `√(2/D)·sin(-2πjn/D)`, with weight `ω_j = j`. Frequencies run from 1 to
    /// `⌊(D-1)/2⌋`; the constant and Nyquist components stay in the complement.
    pub fn dft(dim: usize, sigma: f64) -> Result<Self> {
        let pairs = dim.saturating_sub(1) / 2;
        let scale = (2.0 / dim as f64).sqrt();
        let mut w = DMatrix::zeros(dim, 2 * pairs);
        for j in 0..pairs {
            let freq = (j + 1) as f64;
            for n in 0..dim {
                let arg = TAU * freq * n as f64 / dim as f64;
                w[(n, 2 * j)] = scale * arg.cos();
                w[(n, 2 * j + 1)] = -scale * arg.sin();
            }
        }
        let omega = (1..=pairs as i32).collect();
        Self::new(w, omega, sigma)
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    pub fn omega(&self) -> &[i32] {
        &self.omega
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Ambient dimension D.
    pub fn dim(&self) -> usize {
        self.w.nrows()
    }

    /// Number of invariant subspaces J.
    pub fn n_subspaces(&self) -> usize {
        self.omega.len()
    }

    pub fn with_omega(mut self, omega: Vec<i32>) -> Result<Self> {
        check_len("omega length", self.n_subspaces(), omega.len())?;
        self.omega = omega;
        Ok(self)
    }

    pub fn with_sigma(mut self, sigma: f64) -> Result<Self> {
        check_sigma(sigma)?;
        self.sigma = sigma;
        Ok(self)
    }

    pub fn into_parts(self) -> (DMatrix<f64>, Vec<i32>, f64) {
        (self.w, self.omega, self.sigma)
    }

    /// `Wᵀx`, the stacked subspace coordinates.
    pub fn project(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("data vector", self.dim(), x.len())?;
        Ok(project_raw(&self.w, x))
    }

    /// Apply the block rotation described by per-subspace angles.
    fn apply_angles(&self, angles: impl Iterator<Item = f64>, x: &[f64]) -> Result<Vec<f64>> {
        check_len("data vector", self.dim(), x.len())?;
        let u = project_raw(&self.w, x);
        let mut delta = vec![0.0; u.len()];
        for (j, angle) in angles.enumerate() {
            let (s, c) = angle.sin_cos();
            let (u1, u2) = (u[2 * j], u[2 * j + 1]);
            delta[2 * j] = c * u1 - s * u2 - u1;
            delta[2 * j + 1] = s * u1 + c * u2 - u2;
        }
        let mut out = x.to_vec();
        for (k, d) in delta.iter().enumerate() {
            if *d != 0.0 {
                for (o, wv) in out.iter_mut().zip(self.w.column(k).iter()) {
                    *o += d * wv;
                }
            }
        }
        Ok(out)
    }
}

pub(crate) fn project_raw(w: &DMatrix<f64>, x: &[f64]) -> Vec<f64> {
    w.column_iter()
        .map(|col| col.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

/// Largest entry of `|WᵀW - I|`.
pub fn orthonormality_defect(w: &DMatrix<f64>) -> f64 {
    let gram = w.transpose() * w;
    let n = gram.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((gram[(i, j)] - target).abs());
        }
    }
    worst
}

/// A point on the maximal torus: one angle per subspace, each in `[0, 2π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximalTorusElement {
    phi: Vec<f64>,
}

impl MaximalTorusElement {
    pub fn new(phi: Vec<f64>) -> Self {
        MaximalTorusElement {
            phi: phi.into_iter().map(wrap_angle).collect(),
        }
    }

    pub fn identity(n_subspaces: usize) -> Self {
        MaximalTorusElement {
            phi: vec![0.0; n_subspaces],
        }
    }

    pub fn angles(&self) -> &[f64] {
        &self.phi
    }

    /// Group product (angle addition modulo 2π).
    pub fn compose(&self, other: &Self) -> Self {
        Self::new(self.phi.iter().zip(&other.phi).map(|(a, b)| a + b).collect())
    }
}

/// Element of a one-parameter coupled subgroup, `s ∈ [0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoupledElement(f64);

impl CoupledElement {
    pub fn new(s: f64) -> Self {
        CoupledElement(wrap_angle(s))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn compose(self, other: Self) -> Self {
        Self::new(self.0 + other.0)
    }
}

/// Subspace coordinates `u_j = W_jᵀx` and the energy outside `span(W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubspaceCoords {
    pub u: Vec<[f64; 2]>,
    pub residual_energy: f64,
}

impl SubspaceCoords {
    pub fn norms_squared(&self) -> impl Iterator<Item = f64> + '_ {
        self.u.iter().map(|[a, b]| a * a + b * b)
    }
}

/// 2×2 rotation by `angle`.
pub fn rotation2(angle: f64) -> [[f64; 2]; 2] {
    let (s, c) = angle.sin_cos();
    [[c, -s], [s, c]]
}

fn block_diag(angles: impl Iterator<Item = f64>, n: usize) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(2 * n, 2 * n);
    for (j, a) in angles.enumerate() {
        let b = rotation2(a);
        for p in 0..2 {
            for q in 0..2 {
                r[(2 * j + p, 2 * j + q)] = b[p][q];
            }
        }
    }
    r
}

/// Block-diagonal `R(φ)` with 2×2 rotations on the diagonal.
pub fn block_rotation(phi: &MaximalTorusElement) -> DMatrix<f64> {
    block_diag(phi.phi.iter().copied(), phi.phi.len())
}

/// `R(s)` of the one-parameter subgroup: block `j` rotates by `ω_j·s`.
pub fn coupled_rotation(s: CoupledElement, omega: &[i32]) -> DMatrix<f64> {
    block_diag(omega.iter().map(|&w| w as f64 * s.0), omega.len())
}

/// Lie algebra generator `A = Σ_j ω_j A_j` of the coupled subgroup.
pub fn generator_matrix(omega: &[i32]) -> DMatrix<f64> {
    let mut a = DMatrix::zeros(2 * omega.len(), 2 * omega.len());
    for (j, &w) in omega.iter().enumerate() {
        a[(2 * j, 2 * j + 1)] = -(w as f64);
        a[(2 * j + 1, 2 * j)] = w as f64;
    }
    a
}

/// `ρ_φ x = W R(φ) Wᵀ x + (I - WWᵀ) x`.
pub fn apply_maximal(basis: &ToralBasis, phi: &MaximalTorusElement, x: &[f64]) -> Result<Vec<f64>> {
    check_len("torus element", basis.n_subspaces(), phi.phi.len())?;
    basis.apply_angles(phi.phi.iter().copied(), x)
}

/// `ρ_s x` for the coupled subgroup, i.e. `apply_maximal` with `φ_j = ω_j s`.
pub fn apply_coupled(basis: &ToralBasis, s: CoupledElement, x: &[f64]) -> Result<Vec<f64>> {
    let s = s.0;
    basis.apply_angles(basis.omega.iter().map(move |&w| w as f64 * s), x)
}

pub fn subspace_coords(basis: &ToralBasis, x: &[f64]) -> Result<SubspaceCoords> {
    let proj = basis.project(x)?;
    let u: Vec<[f64; 2]> = proj.chunks_exact(2).map(|c| [c[0], c[1]]).collect();
    let total: f64 = x.iter().map(|v| v * v).sum();
    let inside: f64 = proj.iter().map(|v| v * v).sum();
    Ok(SubspaceCoords {
        u,
        residual_energy: total - inside,
    })
}

/// Closest matrix with orthonormal columns: `U Vᵀ` from the thin SVD.
///
/// The polar factor is unique for full column rank, so the result does not
/// depend on the sign convention of the singular vectors.
pub fn orthogonalize(w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let svd = w
        .clone()
        .try_svd(true, true, f64::EPSILON, 0)
        .ok_or(TsaError::SvdFailed)?;
    if let Some((index, &value)) = svd
        .singular_values
        .iter()
        .enumerate()
        .find(|(_, v)| !(**v > RANK_TOL))
    {
        return Err(TsaError::RankDeficient { index, value });
    }
    let u = svd.u.ok_or(TsaError::SvdFailed)?;
    let v_t = svd.v_t.ok_or(TsaError::SvdFailed)?;
    Ok(u * v_t)
}

/// Standard-normal matrix, orthogonalized. Used to initialise training.
pub fn random_orthonormal<R: rand::Rng>(dim: usize, cols: usize, rng: &mut R) -> Result<DMatrix<f64>> {
    use rand_distr::StandardNormal;
    let w = DMatrix::from_fn(dim, cols, |_, _| rng.sample::<f64, _>(StandardNormal));
    orthogonalize(&w)
}

#[cfg(test)]
fn dvec(x: &[f64]) -> nalgebra::DVector<f64> {
    nalgebra::DVector::from_column_slice(x)
}
