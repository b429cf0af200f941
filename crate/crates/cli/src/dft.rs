//! Agreement between TSA posteriors on the sinusoid basis and the DFT.
//!
//! With the orthonormal sinusoid basis and a reference vector whose every
//! subspace coordinate is `(√(D/2), 0)`, the posterior of each subspace over
//! the angle carrying the reference onto `x` has precision `|X_k|` and mean
//! `arg X_k` (σ = 1).

use std::f64::consts::TAU;

use nalgebra::DVector;
use tsa_core::circular::VonMisesNat;
use tsa_core::inference::posterior_maximal;
use tsa_core::toral::{wrap_signed, ToralBasis};

/// Posterior precision and mean per nonzero frequency `1..=(D−1)/2`.
pub fn tsa_spectrum(x: &[f64]) -> tsa_core::Result<Vec<(f64, f64)>> {
    let d = x.len();
    let basis = ToralBasis::dft(d, 1.0)?;
    let j = basis.n_subspaces();
    let mut coords = DVector::zeros(2 * j);
    for k in 0..j {
        coords[2 * k] = (d as f64 / 2.0).sqrt();
    }
    let e = basis.w() * coords;
    let prior = vec![VonMisesNat::UNIFORM; j];
    let post = posterior_maximal(&basis, e.as_slice(), x, &prior)?;
    Ok(post
        .precisions()
        .into_iter()
        .zip(post.means())
        .collect())
}

/// `(|X_k|, arg X_k)` by direct summation of `Σ_n x_n e^{−2πikn/D}`.
pub fn direct_dft(x: &[f64], k: usize) -> (f64, f64) {
    let d = x.len() as f64;
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &v) in x.iter().enumerate() {
        let a = TAU * (k * n) as f64 / d;
        re += v * a.cos();
        im -= v * a.sin();
    }
    (re.hypot(im), im.atan2(re))
}

/// Largest deviations in modulus and (where the modulus exceeds
/// `phase_floor`) wrapped phase.
pub fn max_deviation(x: &[f64], phase_floor: f64) -> tsa_core::Result<(f64, f64)> {
    let spectrum = tsa_spectrum(x)?;
    let (mut dk, mut dm) = (0.0f64, 0.0f64);
    for (k, (kappa, mu)) in spectrum.into_iter().enumerate() {
        let (modulus, phase) = direct_dft(x, k + 1);
        dk = dk.max((kappa - modulus).abs());
        if modulus > phase_floor {
            dm = dm.max(wrap_signed(mu - phase).abs());
        }
    }
    Ok((dk, dm))
}
