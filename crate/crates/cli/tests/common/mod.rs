//! Independent numerical oracles shared by the integration tests.
//!
//! Nothing here calls into the closed forms under test: integrals use
//! composite Gauss–Legendre rules, group actions are built as dense matrices.

#![allow(dead_code)]

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            // three-term recurrence for P_n and its derivative
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - z * z) * dp * dp);
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

/// Quadrature points and weights on `[a, b]`: `panels` × `order`-point rules.
pub fn composite_rule(a: f64, b: f64, panels: usize, order: usize) -> Vec<(f64, f64)> {
    let (z, w) = gauss_legendre(order);
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * order);
    for p in 0..panels {
        let left = a + h * p as f64;
        for (zi, wi) in z.iter().zip(&w) {
            out.push((left + 0.5 * h * (zi + 1.0), 0.5 * h * wi));
        }
    }
    out
}

/// `ln ∫_a^b exp(f)` with panel doubling until two estimates agree to `tol`.
pub fn log_integral(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    let mut panels = 16;
    let mut prev = log_integral_fixed(&f, a, b, panels);
    loop {
        panels *= 2;
        let next = log_integral_fixed(&f, a, b, panels);
        if (next - prev).abs() <= tol * next.abs().max(1.0) || panels >= 1 << 14 {
            return next;
        }
        prev = next;
    }
}

fn log_integral_fixed(f: &impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let rule = composite_rule(a, b, panels, 20);
    let values: Vec<f64> = rule.iter().map(|&(t, _)| f(t)).collect();
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s: f64 = rule.iter().zip(&values).map(|(&(_, w), v)| w * (v - m).exp()).sum();
    m + s.ln()
}

/// `ln(2π I₀(κ))` from its integral representation.
pub fn log_two_pi_i0(kappa: f64) -> f64 {
    log_integral(|t| kappa * t.cos(), 0.0, TAU, 1e-15)
}

/// `ln ∫₀^{2π} exp(Σ_k a_k cos ks + b_k sin ks) ds`.
pub fn log_trig_normalizer(eta: &[[f64; 2]]) -> f64 {
    log_integral(|s| trig_sum(eta, s), 0.0, TAU, 1e-15)
}

pub fn trig_sum(eta: &[[f64; 2]], s: f64) -> f64 {
    eta.iter()
        .enumerate()
        .map(|(k, [a, b])| {
            let ks = (k + 1) as f64 * s;
            a * ks.cos() + b * ks.sin()
        })
        .sum()
}

/// Dense `ρ = W R(φ) Wᵀ + (I − WWᵀ)`.
pub fn dense_rho(w: &DMatrix<f64>, phi: &[f64]) -> DMatrix<f64> {
    let d = w.nrows();
    let mut r = DMatrix::zeros(w.ncols(), w.ncols());
    for (j, &p) in phi.iter().enumerate() {
        let (s, c) = p.sin_cos();
        r[(2 * j, 2 * j)] = c;
        r[(2 * j, 2 * j + 1)] = -s;
        r[(2 * j + 1, 2 * j)] = s;
        r[(2 * j + 1, 2 * j + 1)] = c;
    }
    w * r * w.transpose() + (DMatrix::identity(d, d) - w * w.transpose())
}

/// `ln N(y; ρx, σ²I)`.
pub fn log_gaussian(rho: &DMatrix<f64>, x: &[f64], y: &[f64], sigma: f64) -> f64 {
    let r = DVector::from_column_slice(y) - rho * DVector::from_column_slice(x);
    let d = x.len() as f64;
    -0.5 * d * (TAU * sigma * sigma).ln() - r.norm_squared() / (2.0 * sigma * sigma)
}

/// `(|X_k|, arg X_k)` of `Σ_n x_n e^{−2πikn/D}`.
pub fn dft_bin(x: &[f64], k: usize) -> (f64, f64) {
    let d = x.len();
    let (mut re, mut im) = (0.0, 0.0);
    for (n, &v) in x.iter().enumerate() {
        // exact reduction of kn mod D keeps the angle small
        let a = TAU * ((k * n) % d) as f64 / d as f64;
        re += v * a.cos();
        im -= v * a.sin();
    }
    (re.hypot(im), im.atan2(re))
}

/// Golden-section refinement of a bracketed minimum.
pub fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > 1e-12 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    f(0.5 * (a + b))
}

/// Global minimum of a smooth 2π-periodic function: dense scan, then golden
/// section around each of the best few grid points.
pub fn periodic_min(f: impl Fn(f64) -> f64, grid: usize) -> f64 {
    let h = TAU / grid as f64;
    let mut vals: Vec<(f64, usize)> = (0..grid).map(|i| (f(h * i as f64), i)).collect();
    vals.sort_by(|a, b| a.0.total_cmp(&b.0));
    vals.iter()
        .take(8)
        .map(|&(_, i)| golden_min(&f, h * (i as f64 - 1.0), h * (i as f64 + 1.0)))
        .fold(f64::INFINITY, f64::min)
}
