//! Marginal likelihood of transformation pairs, its gradient with respect to
//! the basis, SGD with SVD retraction, and weight estimation.

use std::f64::consts::{PI, TAU};
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::bessel::{bessel_ratio_over_x, log_bessel_i0};
use crate::circular::{gvm_log_normalizer, GeneralizedVonMises, VonMisesNat};
use crate::data::PairBatch;
use crate::error::{check_len, check_sigma, Result, TsaError};
use crate::inference::{pair_evidence, pool_by_weight};
use crate::toral::{orthogonalize, random_orthonormal, subspace_coords, wrap_signed, ToralBasis};

/// Below this pooled precision a weight estimate is unsupported by data.
pub const LOW_CONFIDENCE_PRECISION: f64 = 1e-6;

/// Log of the isotropic Gaussian normalizer `(2πσ²)^(-D/2)`.
pub fn gaussian_log_normalizer(dim: usize, sigma: f64) -> f64 {
    -0.5 * dim as f64 * (TAU * sigma * sigma).ln()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| p * q).sum()
}

/// Terms of `log p(y|x)` that do not depend on the angles: the Gaussian
/// normalizer and `−‖y − x‖²/2σ²` restricted to the complement of span(W)
/// plus `−(‖u‖² + ‖v‖²)/2σ²` on the span, written as
/// `−(‖x‖² + ‖y‖²)/2σ² + (xᵀy − Σ u·v)/σ²`.
fn angle_free_terms(dim: usize, sigma: f64, x: &[f64], y: &[f64], span_dot: f64) -> f64 {
    let s2 = sigma * sigma;
    gaussian_log_normalizer(dim, sigma) - (dot(x, x) + dot(y, y)) / (2.0 * s2)
        + (dot(x, y) - span_dot) / s2
}

/// `log p(y|x)` under the maximal-torus model for an arbitrary `D×2J`
/// matrix. Equals [`log_marginal_uncoupled`] when `W` is orthonormal and is
/// the smooth extension differentiated by [`grad_log_marginal_raw`].
pub fn log_marginal_uncoupled_raw(
    w: &DMatrix<f64>,
    sigma: f64,
    x: &[f64],
    y: &[f64],
    prior: &[VonMisesNat],
) -> Result<f64> {
    check_sigma(sigma)?;
    check_len("data vector", w.nrows(), x.len())?;
    check_len("data vector", w.nrows(), y.len())?;
    check_len("prior length", w.ncols() / 2, prior.len())?;
    let mut span_dot = 0.0;
    let mut bessel = 0.0;
    for (j, p) in prior.iter().enumerate() {
        let a = w.column(2 * j);
        let b = w.column(2 * j + 1);
        let u = [dot(a.as_slice(), x), dot(b.as_slice(), x)];
        let v = [dot(a.as_slice(), y), dot(b.as_slice(), y)];
        span_dot += u[0] * v[0] + u[1] * v[1];
        let post = p.add(pair_evidence(u, v, sigma));
        bessel += log_bessel_i0(post.kappa()) - log_bessel_i0(p.kappa());
    }
    Ok(angle_free_terms(w.nrows(), sigma, x, y, span_dot) + bessel)
}

/// `log p(y|x) = log ∫ N(y | ρ_φ x, σ²I) p(φ) dφ` over the maximal torus.
pub fn log_marginal_uncoupled(
    basis: &ToralBasis,
    x: &[f64],
    y: &[f64],
    prior: &[VonMisesNat],
) -> Result<f64> {
    log_marginal_uncoupled_raw(basis.w(), basis.sigma(), x, y, prior)
}

/// `log p(y|x) = log ∫ N(y | ρ_s x, σ²I) p(s) ds` over the coupled subgroup.
/// Zero-weight subspaces are fixed by the group and stay in the Gaussian term.
pub fn log_marginal_coupled(
    basis: &ToralBasis,
    x: &[f64],
    y: &[f64],
    prior: &GeneralizedVonMises,
) -> Result<f64> {
    let cx = subspace_coords(basis, x)?;
    let cy = subspace_coords(basis, y)?;
    let sigma = basis.sigma();
    let mut span_dot = 0.0;
    let mut evidence = Vec::with_capacity(cx.u.len());
    for ((&u, &v), &w) in cx.u.iter().zip(&cy.u).zip(basis.omega()) {
        if w != 0 {
            span_dot += u[0] * v[0] + u[1] * v[1];
        }
        evidence.push(pair_evidence(u, v, sigma));
    }
    let posterior = pool_by_weight(&evidence, basis.omega(), prior);
    let ratio = gvm_log_normalizer(&posterior) - gvm_log_normalizer(prior);
    Ok(angle_free_terms(basis.dim(), sigma, x, y, span_dot) + ratio)
}

fn check_batch(w: &DMatrix<f64>, batch: &PairBatch, prior: &[VonMisesNat]) -> Result<()> {
    check_len("batch dimension", w.nrows(), batch.dim())?;
    check_len("prior length", w.ncols() / 2, prior.len())
}

/// Per-pair log marginals and the batch gradient `Σ_n ∂ log p(y⁽ⁿ⁾|x⁽ⁿ⁾)/∂W`.
///
/// With `η̂ = η + σ⁻²(u·v, u×v)` and `g = ∂ log I₀(‖η̂‖)/∂η̂ = η̂ I₁(κ̂)/(κ̂ I₀(κ̂))`,
/// the chain rule through `u = W_jᵀx`, `v = W_jᵀy` gives the gradient
/// columns `x ∂/∂u + y ∂/∂v`, with the `−u·v/σ²` span term included.
fn marginal_and_gradient(
    w: &DMatrix<f64>,
    sigma: f64,
    batch: &PairBatch,
    prior: &[VonMisesNat],
    want_gradient: bool,
) -> (Vec<f64>, DMatrix<f64>) {
    let n = batch.len();
    let wt = w.transpose();
    let u = &wt * &batch.x;
    let v = &wt * &batch.y;
    let s2 = sigma * sigma;
    let base = gaussian_log_normalizer(w.nrows(), sigma);
    let mut values = Vec::with_capacity(n);
    let mut gu = DMatrix::zeros(w.ncols(), if want_gradient { n } else { 0 });
    let mut gv = gu.clone();
    for col in 0..n {
        let x = batch.x.column(col);
        let y = batch.y.column(col);
        let mut value = base - (x.norm_squared() + y.norm_squared()) / (2.0 * s2) + x.dot(&y) / s2;
        for (j, p) in prior.iter().enumerate() {
            let (u1, u2) = (u[(2 * j, col)], u[(2 * j + 1, col)]);
            let (v1, v2) = (v[(2 * j, col)], v[(2 * j + 1, col)]);
            let post = p.add(pair_evidence([u1, u2], [v1, v2], sigma));
            let kappa = post.kappa();
            value += log_bessel_i0(kappa) - log_bessel_i0(p.kappa()) - (u1 * v1 + u2 * v2) / s2;
            if want_gradient {
                let r = bessel_ratio_over_x(kappa);
                let (c, s) = (post.eta[0] * r, post.eta[1] * r);
                gu[(2 * j, col)] = (c * v1 + s * v2 - v1) / s2;
                gu[(2 * j + 1, col)] = (c * v2 - s * v1 - v2) / s2;
                gv[(2 * j, col)] = (c * u1 - s * u2 - u1) / s2;
                gv[(2 * j + 1, col)] = (c * u2 + s * u1 - u2) / s2;
            }
        }
        values.push(value);
    }
    let grad = if want_gradient {
        &batch.x * gu.transpose() + &batch.y * gv.transpose()
    } else {
        DMatrix::zeros(w.nrows(), w.ncols())
    };
    (values, grad)
}

/// Batch gradient for an arbitrary `D×2J` matrix.
pub fn grad_log_marginal_raw(
    w: &DMatrix<f64>,
    sigma: f64,
    batch: &PairBatch,
    prior: &[VonMisesNat],
) -> Result<DMatrix<f64>> {
    check_sigma(sigma)?;
    check_batch(w, batch, prior)?;
    Ok(marginal_and_gradient(w, sigma, batch, prior, true).1)
}

/// `∂/∂W Σ_n log p(y⁽ⁿ⁾|x⁽ⁿ⁾)` under the maximal-torus model.
#[allow(non_snake_case)]
pub fn grad_log_marginal_W(
    basis: &ToralBasis,
    batch: &PairBatch,
    prior: &[VonMisesNat],
) -> Result<DMatrix<f64>> {
    grad_log_marginal_raw(basis.w(), basis.sigma(), batch, prior)
}

/// Mean maximal-torus log marginal over a batch.
pub fn mean_log_marginal(basis: &ToralBasis, batch: &PairBatch, prior: &[VonMisesNat]) -> Result<f64> {
    check_batch(basis.w(), batch, prior)?;
    if batch.is_empty() {
        return Ok(0.0);
    }
    let (values, _) = marginal_and_gradient(basis.w(), basis.sigma(), batch, prior, false);
    Ok(values.iter().sum::<f64>() / values.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub alpha0: f64,
    /// Pairs per update; the final minibatch of a pass may be shorter.
    pub minibatch: usize,
    /// Passes to run in this call.
    pub passes: usize,
    /// Passes already completed by the initial basis, so the first pass run
    /// here uses `T = start_pass + 1`.
    pub start_pass: usize,
    pub sigma: f64,
    pub seed: u64,
    pub n_subspaces: usize,
    /// Compare the analytic gradient with central differences on the first
    /// minibatch before training.
    pub check_gradient: bool,
    /// Minibatches between evaluation checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            alpha0: 0.25,
            minibatch: 100,
            passes: 1,
            start_pass: 0,
            sigma: 1.0,
            seed: 0,
            n_subspaces: 50,
            check_gradient: false,
            checkpoint_every: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        check_sigma(self.sigma)?;
        if !(self.alpha0 >= 0.0 && self.alpha0.is_finite()) {
            return Err(TsaError::InvalidConfig(format!(
                "alpha0 must be finite and non-negative, got {}",
                self.alpha0
            )));
        }
        if self.minibatch == 0 {
            return Err(TsaError::InvalidConfig("minibatch must be at least 1".into()));
        }
        if self.n_subspaces == 0 {
            return Err(TsaError::InvalidConfig("need at least one subspace".into()));
        }
        if self.checkpoint_every == 0 {
            return Err(TsaError::InvalidConfig("checkpoint interval must be at least 1".into()));
        }
        Ok(())
    }

    /// Learning rate during pass `t` (1-based): `α₀/√t`.
    pub fn alpha(&self, t: usize) -> f64 {
        self.alpha0 / (t as f64).sqrt()
    }
}

/// One minibatch update; `mean_log_marginal` is measured before the update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogRow {
    pub step: usize,
    pub passes: usize,
    pub alpha: f64,
    pub mean_log_marginal: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Checkpoint {
    /// Updates applied so far.
    pub step: usize,
    pub mean_log_marginal: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub basis: ToralBasis,
    pub log: Vec<LogRow>,
    /// Held-out evaluations: at the start, every `checkpoint_every` updates
    /// and after the last update. Empty without an evaluation batch.
    pub checkpoints: Vec<Checkpoint>,
    /// Largest `|analytic − numeric| / max|numeric|` when checked.
    pub gradient_check: Option<f64>,
}

pub fn train_log_csv(rows: &[LogRow]) -> String {
    let mut out = String::from("step,passes,alpha,mean_log_marginal\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.step, r.passes, r.alpha, r.mean_log_marginal);
    }
    out
}

/// Relative disagreement between the analytic gradient and central
/// differences with step `h`, over every entry of `w`.
pub fn gradient_check(
    w: &DMatrix<f64>,
    sigma: f64,
    batch: &PairBatch,
    prior: &[VonMisesNat],
    h: f64,
) -> Result<f64> {
    let analytic = grad_log_marginal_raw(w, sigma, batch, prior)?;
    let total = |m: &DMatrix<f64>| -> Result<f64> {
        let mut acc = 0.0;
        for n in 0..batch.len() {
            let x: Vec<f64> = batch.x.column(n).iter().copied().collect();
            let y: Vec<f64> = batch.y.column(n).iter().copied().collect();
            acc += log_marginal_uncoupled_raw(m, sigma, &x, &y, prior)?;
        }
        Ok(acc)
    };
    let mut numeric = DMatrix::zeros(w.nrows(), w.ncols());
    let mut probe = w.clone();
    for idx in 0..w.len() {
        let orig = probe[idx];
        probe[idx] = orig + h;
        let up = total(&probe)?;
        probe[idx] = orig - h;
        let down = total(&probe)?;
        probe[idx] = orig;
        numeric[idx] = (up - down) / (2.0 * h);
    }
    let scale = numeric.amax();
    let diff = (&analytic - &numeric).amax();
    Ok(if scale > 0.0 { diff / scale } else { diff })
}

/// Minibatch SGD ascent on the maximal-torus log marginal from a fresh
/// random orthonormal basis.
pub fn sgd_train(config: &TrainConfig, data: &PairBatch) -> Result<TrainOutcome> {
    sgd_train_from(config, data, None, None)
}

/// SGD from `init` (used as given) or a seeded random orthonormal basis.
///
/// Each pass visits the data in order in minibatches of `config.minibatch`;
/// an update is `W ← orthogonalize(W + α ∇)` with the minibatch-mean
/// gradient and `α = α₀/√T` for pass `T`.
pub fn sgd_train_from(
    config: &TrainConfig,
    data: &PairBatch,
    init: Option<ToralBasis>,
    eval: Option<&PairBatch>,
) -> Result<TrainOutcome> {
    config.validate()?;
    let j = config.n_subspaces;
    if 2 * j > data.dim() {
        return Err(TsaError::Overcomplete {
            columns: 2 * j,
            dim: data.dim(),
        });
    }
    let prior = vec![VonMisesNat::UNIFORM; j];
    let mut basis = match init {
        Some(b) => {
            check_len("initial basis subspaces", j, b.n_subspaces())?;
            check_len("initial basis dimension", data.dim(), b.dim())?;
            b.with_sigma(config.sigma)?
        }
        None => {
            let mut rng = crate::data::item_rng(config.seed, u64::MAX);
            let w = random_orthonormal(data.dim(), 2 * j, &mut rng)?;
            ToralBasis::new(w, vec![0; j], config.sigma)?
        }
    };
    if let Some(e) = eval {
        check_len("evaluation dimension", data.dim(), e.dim())?;
    }
    let gradient_check = if config.check_gradient && !data.is_empty() {
        let probe = data.slice(0, config.minibatch.min(3));
        Some(gradient_check(basis.w(), config.sigma, &probe, &prior, 1e-5)?)
    } else {
        None
    };

    let per_pass = data.len().div_ceil(config.minibatch);
    let mut step = config.start_pass * per_pass;
    let mut log = Vec::with_capacity(config.passes * per_pass);
    let mut checkpoints = Vec::new();
    let mut updates = 0usize;
    if let Some(e) = eval {
        checkpoints.push(Checkpoint {
            step,
            mean_log_marginal: mean_log_marginal(&basis, e, &prior)?,
        });
    }
    for pass in config.start_pass + 1..=config.start_pass + config.passes {
        let alpha = config.alpha(pass);
        for b in 0..per_pass {
            let mb = data.slice(b * config.minibatch, config.minibatch);
            let (values, grad) = marginal_and_gradient(basis.w(), config.sigma, &mb, &prior, true);
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            step += 1;
            if !mean.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(TsaError::NonFiniteGradient {
                    step,
                    pass,
                    alpha,
                    detail: format!(
                        "minibatch columns {}..{}, mean log marginal {mean}, max |W| {:e}, \
                         max |x| {:e}, max |y| {:e}",
                        b * config.minibatch,
                        b * config.minibatch + mb.len(),
                        basis.w().amax(),
                        mb.x.amax(),
                        mb.y.amax(),
                    ),
                });
            }
            log.push(LogRow {
                step,
                passes: pass,
                alpha,
                mean_log_marginal: mean,
            });
            let scale = alpha / mb.len() as f64;
            // a zero step leaves W bit-for-bit unchanged instead of re-retracting it
            if scale != 0.0 {
                let w = orthogonalize(&(basis.w() + grad * scale))?;
                basis = ToralBasis::from_parts_unchecked(w, vec![0; j], config.sigma)?;
            }
            updates += 1;
            if let Some(e) = eval {
                if updates % config.checkpoint_every == 0 {
                    checkpoints.push(Checkpoint {
                        step,
                        mean_log_marginal: mean_log_marginal(&basis, e, &prior)?,
                    });
                }
            }
        }
    }
    if let Some(e) = eval {
        if updates % config.checkpoint_every != 0 {
            checkpoints.push(Checkpoint {
                step,
                mean_log_marginal: mean_log_marginal(&basis, e, &prior)?,
            });
        }
    }
    Ok(TrainOutcome {
        basis,
        log,
        checkpoints,
        gradient_check,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightEstimate {
    pub omega: Vec<i32>,
    /// Unrounded `θ_j/δ`.
    pub rate: Vec<f64>,
    /// `‖Σ_n η̂_jn‖`, the precision of the pooled angle estimate.
    pub precision: Vec<f64>,
    /// Set when the pooled precision is below [`LOW_CONFIDENCE_PRECISION`] or
    /// the subspace shows no rotation (`ω = 0`).
    pub low_confidence: Vec<bool>,
}

/// Integer angular velocity of each subspace relative to a transformation
/// applied with parameter `delta`.
///
/// For each subspace the uniform-prior posteriors of the pairs
/// `(x⁽ⁿ⁾, rotate(x⁽ⁿ⁾, δ))` are pooled by summing natural parameters, which
/// is the precision-weighted circular mean of the posterior mean angles.
pub fn estimate_weights(
    basis: &ToralBasis,
    xs: &DMatrix<f64>,
    rotate: impl Fn(&[f64], f64) -> Vec<f64>,
    delta: f64,
) -> Result<WeightEstimate> {
    if !(delta > 0.0 && delta < PI) {
        return Err(TsaError::InvalidConfig(format!(
            "weight estimation step must lie in (0, π), got {delta}"
        )));
    }
    check_len("weight estimation batch", basis.dim(), xs.nrows())?;
    let j = basis.n_subspaces();
    let mut pooled = vec![VonMisesNat::UNIFORM; j];
    for col in xs.column_iter() {
        let x: Vec<f64> = col.iter().copied().collect();
        let y = rotate(&x, delta);
        check_len("rotated vector", x.len(), y.len())?;
        let cx = subspace_coords(basis, &x)?;
        let cy = subspace_coords(basis, &y)?;
        for (k, p) in pooled.iter_mut().enumerate() {
            *p = p.add(pair_evidence(cx.u[k], cy.u[k], basis.sigma()));
        }
    }
    let mut est = WeightEstimate {
        omega: Vec::with_capacity(j),
        rate: Vec::with_capacity(j),
        precision: Vec::with_capacity(j),
        low_confidence: Vec::with_capacity(j),
    };
    for p in pooled {
        let precision = p.kappa();
        let theta = if precision > 0.0 { wrap_signed(p.mu()) } else { 0.0 };
        let rate = theta / delta;
        let weak = precision < LOW_CONFIDENCE_PRECISION;
        let omega = if weak { 0 } else { rate.round() as i32 };
        est.omega.push(omega);
        est.rate.push(rate);
        est.precision.push(precision);
        est.low_confidence.push(weak || omega == 0);
    }
    Ok(est)
}
