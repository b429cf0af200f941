//! Closed-form posteriors over group elements.
//!
//! For a pair `(x, y)` the likelihood `N(y | ρ x, σ²)` is, as a function of
//! the group element, an exponentiated trigonometric polynomial, so von Mises
//! priors (maximal torus) and generalized von Mises priors (coupled subgroup)
//! are conjugate and updating is addition of natural parameters.

use std::f64::consts::TAU;

use crate::circular::{nat_to_conv, GeneralizedVonMises, VonMisesConv, VonMisesNat};
use crate::error::{check_len, Result};
use crate::toral::{subspace_coords, CoupledElement, ToralBasis};

/// Initial nodes per harmonic of the global search in [`argmax_trig`].
const MAP_NODES_PER_HARMONIC: usize = 8;
/// Floor on the initial node count.
const MAP_MIN_NODES: usize = 64;
/// Intervals narrower than this are settled by their endpoints.
const MAP_MIN_WIDTH: f64 = 1e-10;

/// Posterior over the maximal torus: an independent von Mises per subspace.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusPosterior {
    pub eta: Vec<VonMisesNat>,
}

impl TorusPosterior {
    pub fn conventional(&self) -> Vec<VonMisesConv> {
        self.eta.iter().map(|&e| nat_to_conv(e)).collect()
    }

    pub fn means(&self) -> Vec<f64> {
        self.eta.iter().map(|e| e.mu()).collect()
    }

    pub fn precisions(&self) -> Vec<f64> {
        self.eta.iter().map(|e| e.kappa()).collect()
    }

    /// Joint log density at `phi`.
    pub fn log_density(&self, phi: &[f64]) -> f64 {
        self.eta
            .iter()
            .zip(phi)
            .map(|(e, &p)| crate::circular::vm_log_pdf(p, e))
            .sum()
    }
}

/// Posterior over the scalar parameter `s` of a coupled subgroup.
#[derive(Debug, Clone, PartialEq)]
pub struct CoupledPosterior {
    pub gvm: GeneralizedVonMises,
}

/// Invariant representation `κ̂_j = ‖W_jᵀx‖² / σ²`.
#[derive(Debug, Clone, PartialEq)]
pub struct InvariantRep {
    pub kappa_hat: Vec<f64>,
}

impl InvariantRep {
    pub fn sqrt(&self) -> Vec<f64> {
        self.kappa_hat.iter().map(|k| k.max(0.0).sqrt()).collect()
    }
}

/// Data term of the natural-parameter update for one subspace:
/// `σ⁻² (u₁v₁ + u₂v₂, u₁v₂ − u₂v₁)`.
pub fn pair_evidence(u: [f64; 2], v: [f64; 2], sigma: f64) -> VonMisesNat {
    let inv = 1.0 / (sigma * sigma);
    VonMisesNat::new(
        inv * (u[0] * v[0] + u[1] * v[1]),
        inv * (u[0] * v[1] - u[1] * v[0]),
    )
}

/// Uniform-prior evidence `η̂_k` for every subspace of the pair.
pub fn subspace_evidence(basis: &ToralBasis, x: &[f64], y: &[f64]) -> Result<Vec<VonMisesNat>> {
    let cu = subspace_coords(basis, x)?;
    let cv = subspace_coords(basis, y)?;
    Ok(cu
        .u
        .iter()
        .zip(&cv.u)
        .map(|(&u, &v)| pair_evidence(u, v, basis.sigma()))
        .collect())
}

pub fn posterior_maximal(
    basis: &ToralBasis,
    x: &[f64],
    y: &[f64],
    prior: &[VonMisesNat],
) -> Result<TorusPosterior> {
    check_len("prior length", basis.n_subspaces(), prior.len())?;
    let evidence = subspace_evidence(basis, x, y)?;
    Ok(TorusPosterior {
        eta: prior.iter().zip(evidence).map(|(&p, e)| p.add(e)).collect(),
    })
}

/// Pool per-subspace evidence into GvM harmonics by weight.
///
/// Subspace `k` contributes to harmonic `|ω_k|`; for negative weights the sine
/// component flips sign because `R(-ωs)` turns `(a, b)` into `(a, -b)`.
/// Zero-weight subspaces only shift the log posterior by a constant.
pub fn pool_by_weight(
    evidence: &[VonMisesNat],
    omega: &[i32],
    prior: &GeneralizedVonMises,
) -> GeneralizedVonMises {
    let needed = omega.iter().map(|w| w.unsigned_abs() as usize).max().unwrap_or(0);
    let mut pooled = prior.extended_to(needed.max(1));
    let slots = pooled.natural_mut();
    for (e, &w) in evidence.iter().zip(omega) {
        if w == 0 {
            continue;
        }
        let slot = &mut slots[w.unsigned_abs() as usize - 1];
        slot[0] += e.eta[0];
        slot[1] += if w < 0 { -e.eta[1] } else { e.eta[1] };
    }
    pooled
}

pub fn posterior_coupled(
    basis: &ToralBasis,
    x: &[f64],
    y: &[f64],
    prior: &GeneralizedVonMises,
) -> Result<CoupledPosterior> {
    let evidence = subspace_evidence(basis, x, y)?;
    Ok(CoupledPosterior {
        gvm: pool_by_weight(&evidence, basis.omega(), prior),
    })
}

/// Global mode of the coupled posterior. Exact ties go to the smallest `s`.
pub fn map_coupled(post: &CoupledPosterior) -> CoupledElement {
    CoupledElement::new(argmax_trig(&post.gvm).0)
}

#[derive(Clone, Copy)]
struct Node {
    s: f64,
    f: f64,
    d1: f64,
    d2: f64,
}

impl Node {
    fn at(g: &GeneralizedVonMises, s: f64) -> Node {
        let (f, d1, d2) = g.log_unnormalized_with_derivatives(s);
        Node { s, f, d1, d2 }
    }
}

/// Running maximum with ties broken toward the smaller argument.
struct Best {
    s: f64,
    v: f64,
}

impl Best {
    fn tol(&self) -> f64 {
        1e-12 * self.v.abs().max(1.0)
    }

    fn offer(&mut self, s: f64, v: f64) {
        let tol = self.tol();
        if v > self.v + tol || ((v - self.v).abs() <= tol && s < self.s) {
            self.s = s;
            self.v = v;
        }
    }
}

/// `(argmax, max)` of the unnormalised log density of `g` over `[0, 2π)`.
///
/// Branch and bound over intervals of an initial equispaced grid. For the
/// degree-`K` trigonometric polynomial `f`, `|f''| ≤ Σ k²|η_k|` gives a
/// quadratic upper bound on each interval from either endpoint, and
/// `|f'''| ≤ Σ k³|η_k|` certifies concavity. Intervals that cannot beat the
/// running maximum are dropped; bracketed concave intervals hold a single
/// peak found by safeguarded Newton; the rest are bisected.
pub fn argmax_trig(g: &GeneralizedVonMises) -> (f64, f64) {
    if g.is_uniform() {
        return (0.0, 0.0);
    }
    let (mut m2, mut m3) = (0.0, 0.0);
    for (k, &[a, b]) in g.natural().iter().enumerate() {
        let r = a.hypot(b);
        let k = (k + 1) as f64;
        m2 += k * k * r;
        m3 += k * k * k * r;
    }
    let n = (MAP_NODES_PER_HARMONIC * g.harmonics()).max(MAP_MIN_NODES);
    let h = TAU / n as f64;
    let mut nodes: Vec<Node> = (0..n).map(|i| Node::at(g, h * i as f64)).collect();
    let mut best = Best {
        s: 0.0,
        v: nodes[0].f,
    };
    for node in &nodes[1..] {
        best.offer(node.s, node.f);
    }
    // the node at 2π closes the circle; its value is that of 0
    nodes.push(Node { s: TAU, ..nodes[0] });
    let mut stack: Vec<(Node, Node)> = nodes.windows(2).rev().map(|w| (w[0], w[1])).collect();
    while let Some((a, b)) = stack.pop() {
        let w = b.s - a.s;
        let from_left = a.f.max(a.f + a.d1 * w + 0.5 * m2 * w * w);
        let from_right = b.f.max(b.f - b.d1 * w + 0.5 * m2 * w * w);
        if from_left.min(from_right) <= best.v + best.tol() {
            continue;
        }
        let bracketed = a.d1 >= 0.0 && b.d1 <= 0.0;
        let concave = 0.5 * (a.d2 + b.d2) + 0.5 * m3 * w < 0.0;
        if bracketed && concave {
            let (s, v) = refine_peak(g, a.s, b.s, 0.5 * (a.s + b.s));
            best.offer(snap_to_circle(s), v);
            continue;
        }
        if w < MAP_MIN_WIDTH {
            continue;
        }
        let mid = Node::at(g, 0.5 * (a.s + b.s));
        best.offer(mid.s, mid.f);
        stack.push((mid, b));
        stack.push((a, mid));
    }
    (best.s, best.v)
}

/// Wrap into `[0, 2π)`, mapping values a hair below 2π to 0.
fn snap_to_circle(s: f64) -> f64 {
    let s = crate::toral::wrap_angle(s);
    if TAU - s < 1e-13 {
        0.0
    } else {
        s
    }
}

/// Newton on `f'` safeguarded by bisection inside `[lo, hi]`.
fn refine_peak(g: &GeneralizedVonMises, lo: f64, hi: f64, start: f64) -> (f64, f64) {
    let d_lo = g.log_unnormalized_with_derivatives(lo).1;
    let d_hi = g.log_unnormalized_with_derivatives(hi).1;
    if !(d_lo >= 0.0 && d_hi <= 0.0) {
        // no bracketed stationary point: keep the grid node
        return (start, g.log_unnormalized(start));
    }
    let (mut a, mut b) = (lo, hi);
    let mut s = start;
    for _ in 0..100 {
        let (_, d1, d2) = g.log_unnormalized_with_derivatives(s);
        if d1 > 0.0 {
            a = s;
        } else {
            b = s;
        }
        let newton = if d2 < 0.0 { s - d1 / d2 } else { f64::NAN };
        let next = if newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        let done = (next - s).abs() < 1e-14 || (b - a) < 1e-14;
        s = next;
        if done {
            break;
        }
    }
    (s, g.log_unnormalized(s))
}

/// Posterior of `x` transformed into itself under a uniform prior; its
/// precisions `‖u_j‖²/σ²` are invariant to the group (the means are all 0).
pub fn stabilizer_representation(basis: &ToralBasis, x: &[f64]) -> Result<InvariantRep> {
    let c = subspace_coords(basis, x)?;
    let inv = 1.0 / (basis.sigma() * basis.sigma());
    Ok(InvariantRep {
        kappa_hat: c.norms_squared().map(|e| e * inv).collect(),
    })
}
