//! Invariant distances between data vectors.
//!
//! For undercomplete bases the group acts as the identity on the orthogonal
//! complement of `span(W)`, so manifold distances include the plain Euclidean
//! distance between the complement components.

use crate::circular::GeneralizedVonMises;
use crate::error::{check_len, Result};
use crate::inference::{argmax_trig, pool_by_weight, subspace_evidence, InvariantRep};
use crate::toral::{rotation2, ToralBasis};

/// Data vector decomposed against a basis: subspace coordinates plus the
/// component orthogonal to `span(W)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Decomposed {
    pub u: Vec<[f64; 2]>,
    pub complement: Vec<f64>,
}

impl Decomposed {
    pub fn new(basis: &ToralBasis, x: &[f64]) -> Result<Self> {
        let proj = basis.project(x)?;
        let mut complement = x.to_vec();
        for (k, p) in proj.iter().enumerate() {
            for (c, wv) in complement.iter_mut().zip(basis.w().column(k).iter()) {
                *c -= p * wv;
            }
        }
        Ok(Decomposed {
            u: proj.chunks_exact(2).map(|c| [c[0], c[1]]).collect(),
            complement,
        })
    }

    pub fn norms(&self) -> Vec<f64> {
        self.u.iter().map(|[a, b]| a.hypot(*b)).collect()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum()
}

/// Squared manifold distance for the maximal torus from decomposed inputs.
pub fn manifold_distance_maximal_sq_decomposed(x: &Decomposed, y: &Decomposed) -> f64 {
    let span: f64 = x
        .u
        .iter()
        .zip(&y.u)
        .map(|([a, b], [c, d])| {
            let diff = a.hypot(*b) - c.hypot(*d);
            diff * diff
        })
        .sum();
    span + sq_dist(&x.complement, &y.complement)
}

/// `min_φ ‖y − ρ_φ x‖²`: subspace norms differences plus the complement term.
pub fn manifold_distance_maximal_sq(basis: &ToralBasis, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("data vector", x.len(), y.len())?;
    Ok(manifold_distance_maximal_sq_decomposed(
        &Decomposed::new(basis, x)?,
        &Decomposed::new(basis, y)?,
    ))
}

pub fn manifold_distance_maximal(basis: &ToralBasis, x: &[f64], y: &[f64]) -> Result<f64> {
    manifold_distance_maximal_sq(basis, x, y).map(f64::sqrt)
}

/// `H² = ½ Σ_j (√κ̂_j(a) − √κ̂_j(b))²`.
pub fn hellinger_sq(a: &InvariantRep, b: &InvariantRep) -> Result<f64> {
    check_len("invariant representation", a.kappa_hat.len(), b.kappa_hat.len())?;
    Ok(0.5
        * a.kappa_hat
            .iter()
            .zip(&b.kappa_hat)
            .map(|(p, q)| {
                let d = p.max(0.0).sqrt() - q.max(0.0).sqrt();
                d * d
            })
            .sum::<f64>())
}

pub fn hellinger_distance(a: &InvariantRep, b: &InvariantRep) -> Result<f64> {
    hellinger_sq(a, b).map(f64::sqrt)
}

/// `‖y − ρ_s x‖²` for the coupled subgroup from decomposed inputs.
pub fn coupled_residual_sq(omega: &[i32], s: f64, x: &Decomposed, y: &Decomposed) -> f64 {
    let span: f64 = x
        .u
        .iter()
        .zip(&y.u)
        .zip(omega)
        .map(|((u, v), &w)| {
            let r = rotation2(w as f64 * s);
            let ru = [r[0][0] * u[0] + r[0][1] * u[1], r[1][0] * u[0] + r[1][1] * u[1]];
            (v[0] - ru[0]).powi(2) + (v[1] - ru[1]).powi(2)
        })
        .sum();
    span + sq_dist(&x.complement, &y.complement)
}

/// Mode of the coupled posterior of `(x, y)` under a uniform prior, which
/// is the alignment `s*` minimising `‖y − ρ_s x‖`.
pub fn coupled_alignment(basis: &ToralBasis, x: &Decomposed, y: &Decomposed) -> f64 {
    let sigma = basis.sigma();
    let evidence: Vec<_> = x
        .u
        .iter()
        .zip(&y.u)
        .map(|(&u, &v)| crate::inference::pair_evidence(u, v, sigma))
        .collect();
    let g = pool_by_weight(&evidence, basis.omega(), &GeneralizedVonMises::uniform(1));
    argmax_trig(&g).0
}

pub fn manifold_distance_coupled_sq_decomposed(
    basis: &ToralBasis,
    x: &Decomposed,
    y: &Decomposed,
) -> f64 {
    let s = coupled_alignment(basis, x, y);
    coupled_residual_sq(basis.omega(), s, x, y)
}

/// `‖y − ρ_{s*} x‖` with `s*` the MAP alignment of `x` toward `y`.
pub fn manifold_distance_coupled(basis: &ToralBasis, x: &[f64], y: &[f64]) -> Result<f64> {
    check_len("data vector", x.len(), y.len())?;
    // validates dimensions the same way the posterior does
    subspace_evidence(basis, x, y)?;
    let dx = Decomposed::new(basis, x)?;
    let dy = Decomposed::new(basis, y)?;
    Ok(manifold_distance_coupled_sq_decomposed(basis, &dx, &dy).sqrt())
}

/// Two-sided tangent distance: `min_{α,β} ‖(x + α t_x) − (y + β t_y)‖`.
///
/// Falls back to the one-sided problem when one tangent vanishes and to the
/// Euclidean distance when the normal equations are degenerate.
pub fn tangent_distance(x: &[f64], y: &[f64], tx: &[f64], ty: &[f64]) -> Result<f64> {
    let n = x.len();
    check_len("data vector", n, y.len())?;
    check_len("tangent vector", n, tx.len())?;
    check_len("tangent vector", n, ty.len())?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    Ok(tangent_distance_sq_diff(&d, tx, ty).sqrt())
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Squared tangent distance given `d = x − y`.
pub fn tangent_distance_sq_diff(d: &[f64], tx: &[f64], ty: &[f64]) -> f64 {
    let dd = dot(d, d);
    let (a, c, b) = (dot(tx, tx), dot(ty, ty), -dot(tx, ty));
    let (r1, r2) = (-dot(tx, d), dot(ty, d));
    let det = a * c - b * b;
    let scale = (a * c).max(f64::MIN_POSITIVE);
    let (alpha, beta) = if det > 1e-12 * scale {
        ((r1 * c - b * r2) / det, (a * r2 - b * r1) / det)
    } else if a > 0.0 && a >= c {
        (r1 / a, 0.0)
    } else if c > 0.0 {
        (0.0, r2 / c)
    } else {
        return dd;
    };
    d.iter()
        .zip(tx)
        .zip(ty)
        .map(|((dv, p), q)| {
            let r = dv + alpha * p - beta * q;
            r * r
        })
        .sum::<f64>()
        .min(dd)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inference::stabilizer_representation;
    use crate::toral::{apply_coupled, apply_maximal, random_orthonormal, CoupledElement, MaximalTorusElement};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};
    use std::f64::consts::TAU;

    fn randn(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| StandardNormal.sample(rng)).collect()
    }

    fn basis(rng: &mut ChaCha8Rng, d: usize, omega: Vec<i32>, sigma: f64) -> ToralBasis {
        let w = random_orthonormal(d, 2 * omega.len(), rng).unwrap();
        ToralBasis::new(w, omega, sigma).unwrap()
    }

    #[test]
    fn concentric_circles() {
        let b = ToralBasis::new(DMatrix::identity(2, 2), vec![1], 1.0).unwrap();
        let d = manifold_distance_maximal(&b, &[1.0, 0.0], &[0.0, 2.0]).unwrap();
        assert!((d - 1.0).abs() < 1e-15);
        let h = hellinger_sq(
            &stabilizer_representation(&b, &[1.0, 0.0]).unwrap(),
            &stabilizer_representation(&b, &[0.0, 2.0]).unwrap(),
        )
        .unwrap();
        assert!((h - 0.5).abs() < 1e-15);
    }

    #[test]
    fn same_orbit_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let b = basis(&mut rng, 7, vec![1, -2, 3], 1.0);
        let x = randn(&mut rng, 7);
        let phi = MaximalTorusElement::new(vec![0.3, 2.0, 5.5]);
        let y = apply_maximal(&b, &phi, &x).unwrap();
        assert!(manifold_distance_maximal(&b, &x, &y).unwrap() < 1e-9);
        let y = apply_coupled(&b, CoupledElement::new(4.2), &x).unwrap();
        assert!(manifold_distance_coupled(&b, &x, &y).unwrap() < 1e-8);
    }

    #[test]
    fn maximal_matches_grid_minimisation() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let b = basis(&mut rng, 4, vec![1, 2], 1.0);
        let (x, y) = (randn(&mut rng, 4), randn(&mut rng, 4));
        let n = 2048;
        let mut best = f64::INFINITY;
        for i in 0..n {
            for j in 0..n {
                let phi = MaximalTorusElement::new(vec![TAU * i as f64 / n as f64, TAU * j as f64 / n as f64]);
                let r = apply_maximal(&b, &phi, &x).unwrap();
                best = best.min(sq_dist(&r, &y));
            }
        }
        let d = manifold_distance_maximal(&b, &x, &y).unwrap();
        assert!((d - best.sqrt()).abs() < 1e-3);
        assert!(d <= best.sqrt() + 1e-12);
    }

    #[test]
    fn coupled_matches_grid_and_reduces() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = basis(&mut rng, 7, vec![1, 3, -2], 0.8);
        let (x, y) = (randn(&mut rng, 7), randn(&mut rng, 7));
        let n = 100_000;
        let best = (0..n)
            .map(|i| {
                let r = apply_coupled(&b, CoupledElement::new(TAU * i as f64 / n as f64), &x).unwrap();
                sq_dist(&r, &y)
            })
            .fold(f64::INFINITY, f64::min)
            .sqrt();
        let d = manifold_distance_coupled(&b, &x, &y).unwrap();
        assert!((d - best).abs() < 1e-6 && d <= best + 1e-12);

        let b = basis(&mut rng, 5, vec![1], 1.0);
        let (x, y) = (randn(&mut rng, 5), randn(&mut rng, 5));
        let c = manifold_distance_coupled(&b, &x, &y).unwrap();
        let m = manifold_distance_maximal(&b, &x, &y).unwrap();
        assert!((c - m).abs() < 1e-9);
    }

    #[test]
    fn hellinger_identity_and_self_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let b = basis(&mut rng, 9, vec![1, 2, 3], 0.6);
        for _ in 0..20 {
            let (x, y) = (randn(&mut rng, 9), randn(&mut rng, 9));
            let kx = stabilizer_representation(&b, &x).unwrap();
            let ky = stabilizer_representation(&b, &y).unwrap();
            assert_eq!(hellinger_sq(&kx, &kx).unwrap(), 0.0);
            let h2 = hellinger_sq(&kx, &ky).unwrap();
            let dx = Decomposed::new(&b, &x).unwrap();
            let dy = Decomposed::new(&b, &y).unwrap();
            let span = manifold_distance_maximal_sq(&b, &x, &y).unwrap() - sq_dist(&dx.complement, &dy.complement);
            assert!((2.0 * 0.36 * h2 - span).abs() < 1e-9);
        }
        let short = InvariantRep { kappa_hat: vec![1.0] };
        assert!(hellinger_distance(&short, &InvariantRep { kappa_hat: vec![1.0, 2.0] }).is_err());
    }

    #[test]
    fn invariance_symmetry_triangle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let b = basis(&mut rng, 6, vec![2, -1], 1.0);
        for _ in 0..20 {
            let (x, y, z) = (randn(&mut rng, 6), randn(&mut rng, 6), randn(&mut rng, 6));
            let phi = MaximalTorusElement::new(vec![rng.random::<f64>() * TAU, rng.random::<f64>() * TAU]);
            let rx = apply_maximal(&b, &phi, &x).unwrap();
            let dxy = manifold_distance_maximal(&b, &x, &y).unwrap();
            assert!((manifold_distance_maximal(&b, &rx, &y).unwrap() - dxy).abs() < 1e-8);
            assert!((manifold_distance_maximal(&b, &y, &x).unwrap() - dxy).abs() < 1e-12);
            let dxz = manifold_distance_maximal(&b, &x, &z).unwrap();
            let dzy = manifold_distance_maximal(&b, &z, &y).unwrap();
            assert!(dxy <= dxz + dzy + 1e-9);

            let s = CoupledElement::new(rng.random::<f64>() * TAU);
            let cx = apply_coupled(&b, s, &x).unwrap();
            let cxy = manifold_distance_coupled(&b, &x, &y).unwrap();
            assert!((manifold_distance_coupled(&b, &cx, &y).unwrap() - cxy).abs() < 1e-8);
            assert!((manifold_distance_coupled(&b, &y, &x).unwrap() - cxy).abs() < 1e-8);
            // coupled orbits are subsets of maximal-torus orbits
            assert!(cxy >= dxy - 1e-9);
        }
    }

    #[test]
    fn nonzero_distance_off_orbit() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let b = basis(&mut rng, 4, vec![1], 1.0);
        let x = randn(&mut rng, 4);
        let mut y = apply_maximal(&b, &MaximalTorusElement::new(vec![1.0]), &x).unwrap();
        y[0] += 0.1;
        assert!(manifold_distance_maximal(&b, &x, &y).unwrap() > 1e-3);
    }

    #[test]
    fn tangent_distance_cases() {
        let x = [1.0, 2.0, 3.0];
        let y = [0.0, 2.5, 1.0];
        let zero = [0.0; 3];
        let ed = sq_dist(&x, &y).sqrt();
        assert!((tangent_distance(&x, &y, &zero, &zero).unwrap() - ed).abs() < 1e-15);

        let tx = [0.3, -1.0, 0.5];
        let ty = [1.0, 0.2, 0.0];
        let y: Vec<f64> = x.iter().zip(&tx).map(|(a, t)| a + 0.1 * t).collect();
        assert!(tangent_distance(&x, &y, &tx, &ty).unwrap() < 1e-9);
        // one-sided fallback
        assert!(tangent_distance(&x, &y, &tx, &zero).unwrap() < 1e-9);
        // degenerate: parallel tangents
        let td = tangent_distance(&x, &[0.0, 0.0, 0.0], &tx, &tx).unwrap();
        assert!(td <= sq_dist(&x, &zero).sqrt());
        assert!(tangent_distance(&x, &[1.0], &tx, &ty).is_err());
    }
}
