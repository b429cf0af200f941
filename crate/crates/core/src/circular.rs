//! Von Mises and generalized von Mises distributions on the circle.

use std::f64::consts::{PI, TAU};

use rand::Rng;

use crate::bessel::log_bessel_i0;
use crate::toral::wrap_angle;

/// Initial node count of the periodic trapezoid rule for `Z⁺`.
pub const NORMALIZER_START_NODES: usize = 256;
/// Node count at which refinement stops even without convergence.
pub const NORMALIZER_MAX_NODES: usize = 65_536;
/// Successive refinements closer than this in `ln Z⁺` count as converged.
const NORMALIZER_TOL: f64 = 1e-13;

/// Von Mises in conventional form: mean `mu ∈ [0, 2π)`, precision `kappa ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesConv {
    pub mu: f64,
    pub kappa: f64,
}

impl VonMisesConv {
    /// Canonicalises `mu`; a negative `kappa` is folded into the mean.
    pub fn new(mu: f64, kappa: f64) -> Self {
        if kappa < 0.0 {
            VonMisesConv {
                mu: wrap_angle(mu + PI),
                kappa: -kappa,
            }
        } else {
            VonMisesConv {
                mu: wrap_angle(mu),
                kappa,
            }
        }
    }
}

/// Von Mises in natural form; `eta = κ (cos μ, sin μ)`. Zero is uniform.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct VonMisesNat {
    pub eta: [f64; 2],
}

impl VonMisesNat {
    pub const UNIFORM: VonMisesNat = VonMisesNat { eta: [0.0, 0.0] };

    pub fn new(eta1: f64, eta2: f64) -> Self {
        VonMisesNat { eta: [eta1, eta2] }
    }

    pub fn kappa(&self) -> f64 {
        self.eta[0].hypot(self.eta[1])
    }

    pub fn mu(&self) -> f64 {
        nat_to_conv(*self).mu
    }

    /// Natural parameters add under Bayesian updating.
    pub fn add(self, other: VonMisesNat) -> VonMisesNat {
        VonMisesNat::new(self.eta[0] + other.eta[0], self.eta[1] + other.eta[1])
    }
}

pub fn conv_to_nat(p: VonMisesConv) -> VonMisesNat {
    let (s, c) = p.mu.sin_cos();
    VonMisesNat::new(p.kappa * c, p.kappa * s)
}

/// `κ = ‖η‖`, `μ = atan2(η₂, η₁)`; the zero vector maps to `(0, 0)`.
pub fn nat_to_conv(p: VonMisesNat) -> VonMisesConv {
    let [a, b] = p.eta;
    if a == 0.0 && b == 0.0 {
        return VonMisesConv { mu: 0.0, kappa: 0.0 };
    }
    VonMisesConv {
        mu: wrap_angle(b.atan2(a)),
        kappa: a.hypot(b),
    }
}

pub fn vm_log_pdf(phi: f64, p: &VonMisesNat) -> f64 {
    let (s, c) = phi.sin_cos();
    p.eta[0] * c + p.eta[1] * s - TAU.ln() - log_bessel_i0(p.kappa())
}

/// Generalized von Mises with `K` harmonics:
/// `p(s) ∝ exp(Σ_k η⁺_k · (cos ks, sin ks))`.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedVonMises {
    eta: Vec<[f64; 2]>,
}

impl GeneralizedVonMises {
    /// Natural parameters per harmonic, harmonic 1 first. Empty input yields a
    /// single zero harmonic.
    pub fn from_natural(mut eta: Vec<[f64; 2]>) -> Self {
        if eta.is_empty() {
            eta.push([0.0, 0.0]);
        }
        GeneralizedVonMises { eta }
    }

    /// From per-harmonic precisions `κ⁺_k` and means `μ⁺_k`.
    pub fn from_conventional(kappa: &[f64], mu: &[f64]) -> Self {
        let eta = kappa
            .iter()
            .zip(mu)
            .map(|(&k, &m)| conv_to_nat(VonMisesConv::new(m, k)).eta)
            .collect();
        Self::from_natural(eta)
    }

    pub fn uniform(harmonics: usize) -> Self {
        Self::from_natural(vec![[0.0, 0.0]; harmonics.max(1)])
    }

    pub fn harmonics(&self) -> usize {
        self.eta.len()
    }

    pub fn natural(&self) -> &[[f64; 2]] {
        &self.eta
    }

    pub(crate) fn natural_mut(&mut self) -> &mut [[f64; 2]] {
        &mut self.eta
    }

    /// Per-harmonic `(κ⁺_k, μ⁺_k)`.
    pub fn conventional(&self) -> Vec<VonMisesConv> {
        self.eta
            .iter()
            .map(|&[a, b]| nat_to_conv(VonMisesNat::new(a, b)))
            .collect()
    }

    /// Same distribution with zero harmonics appended up to `harmonics`.
    pub fn extended_to(&self, harmonics: usize) -> Self {
        let mut eta = self.eta.clone();
        if eta.len() < harmonics {
            eta.resize(harmonics, [0.0, 0.0]);
        }
        GeneralizedVonMises { eta }
    }

    pub fn is_uniform(&self) -> bool {
        self.eta.iter().all(|&[a, b]| a == 0.0 && b == 0.0)
    }

    /// `Σ_k η⁺_k · T_k(s)`, the log density up to the normaliser.
    pub fn log_unnormalized(&self, s: f64) -> f64 {
        let (s1, c1) = s.sin_cos();
        let (mut c, mut sn) = (c1, s1);
        let mut acc = 0.0;
        for &[a, b] in &self.eta {
            acc += a * c + b * sn;
            let next_c = c * c1 - sn * s1;
            sn = sn * c1 + c * s1;
            c = next_c;
        }
        acc
    }

    /// Log density up to the normaliser with its first two derivatives in `s`.
    pub fn log_unnormalized_with_derivatives(&self, s: f64) -> (f64, f64, f64) {
        let (mut f, mut d1, mut d2) = (0.0, 0.0, 0.0);
        for (k, &[a, b]) in self.eta.iter().enumerate() {
            let k = (k + 1) as f64;
            let (sn, c) = (k * s).sin_cos();
            f += a * c + b * sn;
            d1 += k * (b * c - a * sn);
            d2 -= k * k * (a * c + b * sn);
        }
        (f, d1, d2)
    }
}

pub fn gvm_log_pdf(s: f64, g: &GeneralizedVonMises) -> f64 {
    g.log_unnormalized(s) - gvm_log_normalizer(g)
}

/// Numerically stable running `ln Σ exp(vᵢ)`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogSumExp {
    max: f64,
    sum: f64,
}

impl LogSumExp {
    pub(crate) fn new() -> Self {
        LogSumExp {
            max: f64::NEG_INFINITY,
            sum: 0.0,
        }
    }

    pub(crate) fn push(&mut self, v: f64) {
        if v <= self.max {
            self.sum += (v - self.max).exp();
        } else {
            self.sum = self.sum * (self.max - v).exp() + 1.0;
            self.max = v;
        }
    }

    pub(crate) fn value(&self) -> f64 {
        self.max + self.sum.ln()
    }
}

/// `ln Z⁺ = ln ∫₀^{2π} exp(Σ_k κ⁺_k cos(ks - μ⁺_k)) ds`.
///
/// Periodic trapezoid rule, doubling the node count (reusing previous nodes)
/// from 256 until two successive estimates agree or 65536 nodes are reached.
pub fn gvm_log_normalizer(g: &GeneralizedVonMises) -> f64 {
    if g.is_uniform() {
        return TAU.ln();
    }
    let mut acc = LogSumExp::new();
    let mut nodes = NORMALIZER_START_NODES;
    for i in 0..nodes {
        acc.push(g.log_unnormalized(TAU * i as f64 / nodes as f64));
    }
    let mut estimate = acc.value() + (TAU / nodes as f64).ln();
    while nodes < NORMALIZER_MAX_NODES {
        let step = TAU / (2 * nodes) as f64;
        for i in 0..nodes {
            acc.push(g.log_unnormalized(step * (2 * i + 1) as f64));
        }
        nodes *= 2;
        let refined = acc.value() + step.ln();
        let converged = (refined - estimate).abs() < NORMALIZER_TOL;
        estimate = refined;
        if converged {
            break;
        }
    }
    estimate
}

/// Draw from a von Mises distribution (Best & Fisher rejection sampler).
pub fn vm_sample<R: Rng + ?Sized>(p: &VonMisesConv, rng: &mut R) -> f64 {
    if p.kappa < 1e-12 {
        return rng.random::<f64>() * TAU;
    }
    let kappa = p.kappa;
    let tau = 1.0 + (1.0 + 4.0 * kappa * kappa).sqrt();
    let rho = (tau - (2.0 * tau).sqrt()) / (2.0 * kappa);
    let r = (1.0 + rho * rho) / (2.0 * rho);
    loop {
        let u1: f64 = rng.random();
        let u2: f64 = rng.random();
        let u3: f64 = rng.random();
        let z = (PI * u1).cos();
        let f = (1.0 + r * z) / (r + z);
        let c = kappa * (r - f);
        if c * (2.0 - c) - u2 > 0.0 || (c / u2).ln() + 1.0 - c >= 0.0 {
            let theta = f.clamp(-1.0, 1.0).acos();
            let signed = if u3 > 0.5 { theta } else { -theta };
            return wrap_angle(p.mu + signed);
        }
    }
}

/// Mean direction of a set of angles (`atan2` of summed unit vectors).
pub fn circular_mean(angles: &[f64]) -> f64 {
    let (s, c) = angles
        .iter()
        .fold((0.0, 0.0), |(s, c), a| (s + a.sin(), c + a.cos()));
    nat_to_conv(VonMisesNat::new(c, s)).mu
}
