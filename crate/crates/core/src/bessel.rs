//! Modified Bessel functions of the first kind, orders 0 and 1.
//!
//! Power series below [`SERIES_LIMIT`], Hankel asymptotic expansion above.
//! The ratio `I₁/I₀` uses Gauss' continued fraction where it converges quickly
//! and the ratio of asymptotic series beyond, so it never overflows.

use std::f64::consts::PI;

/// Switch-over point between the power series and the asymptotic expansion.
pub const SERIES_LIMIT: f64 = 15.0;

const MAX_TERMS: usize = 500;

fn series(order: u32, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = if order == 0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    for m in 1..MAX_TERMS {
        let m = m as f64;
        term *= q / (m * (m + order as f64));
        sum += term;
        if term <= sum * 1e-17 {
            break;
        }
    }
    sum
}

/// `Σ_k (-1)^k a_k(ν) / x^k`, the bracket of `I_ν(x) ≈ eˣ/√(2πx) · [...]`.
fn asymptotic_bracket(order: u32, x: f64) -> f64 {
    let mu = 4.0 * (order * order) as f64;
    let mut term = 1.0f64;
    let mut sum = 1.0;
    for k in 1..MAX_TERMS {
        let odd = (2 * k - 1) as f64;
        let next = -term * (mu - odd * odd) / (8.0 * k as f64 * x);
        if next.abs() >= term.abs() {
            break;
        }
        term = next;
        sum += term;
        if term.abs() <= sum.abs() * 1e-17 {
            break;
        }
    }
    sum
}

/// I₀(x). Even in `x`.
pub fn bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        series(0, x)
    } else {
        x.exp() / (2.0 * PI * x).sqrt() * asymptotic_bracket(0, x)
    }
}

/// I₁(x). Odd in `x`.
pub fn bessel_i1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax <= SERIES_LIMIT {
        series(1, ax)
    } else {
        ax.exp() / (2.0 * PI * ax).sqrt() * asymptotic_bracket(1, ax)
    };
    v.copysign(x)
}

/// ln I₀(x), finite for every finite `x`.
pub fn log_bessel_i0(x: f64) -> f64 {
    let x = x.abs();
    if x <= SERIES_LIMIT {
        series(0, x).ln()
    } else {
        x - 0.5 * (2.0 * PI * x).ln() + asymptotic_bracket(0, x).ln()
    }
}

/// I₁(x)/I₀(x) for `x ≥ 0`; tends to 1 as `x → ∞`.
pub fn bessel_ratio_i1_i0(x: f64) -> f64 {
    let ax = x.abs();
    let r = if ax == 0.0 {
        0.0
    } else if ax <= SERIES_LIMIT {
        continued_fraction_ratio(ax)
    } else {
        asymptotic_bracket(1, ax) / asymptotic_bracket(0, ax)
    };
    r.copysign(x)
}

/// I₁(x)/(x·I₀(x)), with the limit ½ at zero.
///
/// This is `d ln I₀(‖η‖)/dη` divided by `η`, the factor needed for gradients.
pub fn bessel_ratio_over_x(x: f64) -> f64 {
    let ax = x.abs();
    if ax < 1e-4 {
        // I₁/I₀ = x/2 - x³/16 + O(x⁵)
        0.5 - ax * ax / 16.0
    } else {
        bessel_ratio_i1_i0(ax) / ax
    }
}

/// `I₁/I₀ = 1/(2/x + 1/(4/x + 1/(6/x + …)))`, evaluated by modified Lentz.
fn continued_fraction_ratio(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for n in 1..10_000 {
        let b = 2.0 * n as f64 / x;
        d = b + d;
        if d == 0.0 {
            d = TINY;
        }
        c = b + 1.0 / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    f
}
