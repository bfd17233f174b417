//! Mean-field Gaussian posterior over network parameters and the
//! entropy-regularized Bellman objective.
//!
//! The posterior is `q(theta) = prod_i N(mu_i, exp(rho_i)^2)`. The loss for
//! one batch is
//!
//! ```text
//! L(mu, rho) = E_q[ mean_j (Q_theta(s_j, a_j) - y_j)^2 ] / (2 sigma_lik^2) - lambda * H(q)
//! ```
//!
//! estimated with `mc_samples` reparameterized draws
//! `theta = mu + exp(rho) * eps`. Under an improper uniform prior the KL term
//! of the evidence lower bound is `-H(q)` plus a constant, so minimizing `L`
//! with `lambda = 1` minimizes the negative ELBO up to an additive constant.

use std::f64::consts::{E, PI};
use std::io::Cursor;
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::ad::net::{read_f64s, read_shape, write_f64s, write_shape};
use crate::ad::{NetParams, NetShape, Tape, Var};
use crate::error::{ensure_len, Error, Result};
use crate::replay::Batch;

pub const DEFAULT_SIGMA_LIK: f64 = 0.01;
pub const DEFAULT_LAMBDA_ENTROPY: f64 = 1.0;
pub const DEFAULT_RHO_INIT: f64 = -3.0;
pub const DEFAULT_VI_WINDOW: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct VariationalParams {
    pub mu: Vec<f64>,
    /// Log standard deviations.
    pub rho: Vec<f64>,
}

impl VariationalParams {
    pub fn new(mu: Vec<f64>, rho: Vec<f64>) -> Result<Self> {
        ensure_len("rho", mu.len(), rho.len())?;
        if mu.iter().chain(&rho).any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("variational parameters must be finite".into()));
        }
        Ok(Self { mu, rho })
    }

    /// Means from the network initializer, every `rho` set to `rho_init`.
    pub fn init<R: Rng + ?Sized>(shape: &NetShape, rho_init: f64, rng: &mut R) -> Self {
        let mu = shape.init(rng).values;
        let rho = vec![rho_init; mu.len()];
        Self { mu, rho }
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mean_rho(&self) -> f64 {
        self.rho.iter().sum::<f64>() / self.rho.len().max(1) as f64
    }

    pub fn mean_params(&self) -> NetParams {
        NetParams::new(self.mu.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodConfig {
    pub sigma_lik: f64,
    pub lambda_entropy: f64,
    pub mc_samples: usize,
}

impl Default for LikelihoodConfig {
    fn default() -> Self {
        Self {
            sigma_lik: DEFAULT_SIGMA_LIK,
            lambda_entropy: DEFAULT_LAMBDA_ENTROPY,
            mc_samples: 1,
        }
    }
}

impl LikelihoodConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_lik > 0.0) {
            return Err(Error::InvalidInput(format!("sigma must be positive, got {}", self.sigma_lik)));
        }
        if !(self.lambda_entropy >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "lambda must be non-negative, got {}",
                self.lambda_entropy
            )));
        }
        if self.mc_samples == 0 {
            return Err(Error::InvalidInput("mc_samples must be positive".into()));
        }
        Ok(())
    }

    /// `1 / (2 sigma^2)`, the Gaussian log-likelihood precision factor.
    pub fn precision_scale(&self) -> f64 {
        1.0 / (2.0 * self.sigma_lik * self.sigma_lik)
    }
}

pub fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample(StandardNormal)).collect()
}

/// `theta = mu + exp(rho) * noise` with `noise ~ N(0, I)`; returns both.
pub fn sample_theta<R: Rng + ?Sized>(phi: &VariationalParams, rng: &mut R) -> (NetParams, Vec<f64>) {
    let noise = standard_normal_vec(phi.dim(), rng);
    let theta = phi
        .mu
        .iter()
        .zip(&phi.rho)
        .zip(&noise)
        .map(|((m, r), e)| m + r.exp() * e)
        .collect();
    (NetParams::new(theta), noise)
}

/// Closed-form entropy `0.5 d ln(2 pi e) + sum_i rho_i`.
pub fn entropy(phi: &VariationalParams) -> f64 {
    entropy_constant(phi.dim()) + phi.rho.iter().sum::<f64>()
}

fn entropy_constant(d: usize) -> f64 {
    0.5 * d as f64 * (2.0 * PI * E).ln()
}

/// Loss value and its reparameterized gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ElboOutput {
    pub loss: f64,
    pub grad_mu: Vec<f64>,
    pub grad_rho: Vec<f64>,
    /// Mean squared residual averaged over the Monte Carlo draws.
    pub bellman_error: f64,
    pub entropy: f64,
}

/// Reparameterized objective for an arbitrary model.
///
/// `predict` maps a sampled parameter node to an `n x 1` prediction node;
/// `targets` are treated as constants.
pub fn reparameterized_loss<R, F>(
    phi: &VariationalParams,
    targets: &[f64],
    cfg: &LikelihoodConfig,
    rng: &mut R,
    mut predict: F,
) -> Result<ElboOutput>
where
    R: Rng + ?Sized,
    F: FnMut(&mut Tape, Var) -> Result<Var>,
{
    cfg.validate()?;
    if targets.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let mut tape = Tape::new();
    let mu = tape.param(&phi.mu);
    let rho = tape.param(&phi.rho);
    let sigma = tape.exp(rho)?;
    let y = tape.constant(targets.to_vec(), targets.len(), 1)?;

    let mut residual_sum: Option<Var> = None;
    let mut bellman = 0.0;
    for _ in 0..cfg.mc_samples {
        let noise = tape.constant(standard_normal_vec(phi.dim(), rng), phi.dim(), 1)?;
        let spread = tape.mul(sigma, noise)?;
        let theta = tape.add(mu, spread)?;
        let pred = predict(&mut tape, theta)?;
        ensure_len("predictions", targets.len(), tape.value(pred).len())?;
        let diff = tape.sub(pred, y)?;
        let sq = tape.square(diff)?;
        let mse = tape.mean(sq)?;
        bellman += tape.scalar(mse);
        residual_sum = Some(match residual_sum {
            None => mse,
            Some(acc) => tape.add(acc, mse)?,
        });
    }
    let k = cfg.mc_samples as f64;
    let residual = residual_sum.expect("at least one sample");
    let nll = tape
        .scale(residual, cfg.precision_scale() / k)
        .map_err(|_| Error::NumericOverflow("likelihood"))?;

    let rho_sum = tape.sum(rho)?;
    let h = tape.shift(rho_sum, entropy_constant(phi.dim()))?;
    let bonus = tape.scale(h, -cfg.lambda_entropy)?;
    let loss = tape.add(nll, bonus)?;
    let loss_value = tape.scalar(loss);
    if !loss_value.is_finite() {
        return Err(Error::NumericOverflow("variational loss"));
    }
    let mut grads = tape.backward(loss)?;
    Ok(ElboOutput {
        loss: loss_value,
        grad_mu: grads.take(mu),
        grad_rho: grads.take(rho),
        bellman_error: bellman / k,
        entropy: tape.scalar(h),
    })
}

/// Entropy-regularized Bellman objective of a Q network under `q_phi`,
/// against constant `targets` (one per batch row).
pub fn elbo_loss<R: Rng + ?Sized>(
    shape: &NetShape,
    batch: &Batch,
    phi: &VariationalParams,
    targets: &[f64],
    cfg: &LikelihoodConfig,
    rng: &mut R,
) -> Result<ElboOutput> {
    ensure_len("variational dimension", shape.parameter_count(), phi.dim())?;
    ensure_len("batch observation width", shape.input_dim, batch.obs_dim)?;
    ensure_len("targets", batch.len(), targets.len())?;
    reparameterized_loss(phi, targets, cfg, rng, |tape, theta| {
        let states = tape.constant(batch.states.clone(), batch.len(), shape.input_dim)?;
        let q = shape.forward_on_tape(tape, theta, states)?;
        tape.gather(q, &batch.actions)
    })
}

/// Mean and unbiased variance of a window of loss values. A single-element
/// window has variance 0.
pub fn vi_loss_metric(window: &[f64]) -> Result<(f64, f64)> {
    if window.is_empty() {
        return Err(Error::InvalidInput("empty loss window".into()));
    }
    let n = window.len() as f64;
    let mean = window.iter().sum::<f64>() / n;
    if window.len() == 1 {
        return Ok((mean, 0.0));
    }
    // Welford's single pass.
    let (mut m, mut s2) = (0.0, 0.0);
    for (i, &x) in window.iter().enumerate() {
        let d = x - m;
        m += d / (i + 1) as f64;
        s2 += d * (x - m);
    }
    Ok((mean, s2 / (n - 1.0)))
}

/// Trailing-window variance of `series` averaged over every window position
/// holding at least two values.
pub fn mean_trailing_variance(series: &[f64], window: usize) -> Option<f64> {
    let window = window.max(2);
    let vars: Vec<f64> = (1..series.len())
        .map(|end| {
            let start = (end + 1).saturating_sub(window);
            vi_loss_metric(&series[start..=end]).expect("nonempty").1
        })
        .collect();
    if vars.is_empty() {
        None
    } else {
        Some(vars.iter().sum::<f64>() / vars.len() as f64)
    }
}

pub fn encode_variational(shape: &NetShape, phi: &VariationalParams) -> Result<Vec<u8>> {
    ensure_len("variational dimension", shape.parameter_count(), phi.dim())?;
    let mut out = Vec::with_capacity(24 + 16 * phi.dim());
    write_shape(&mut out, shape)?;
    write_f64s(&mut out, &phi.mu)?;
    write_f64s(&mut out, &phi.rho)?;
    Ok(out)
}

pub fn decode_variational(bytes: &[u8]) -> Result<(NetShape, VariationalParams)> {
    let mut cur = Cursor::new(bytes);
    let shape = read_shape(&mut cur)?;
    let n = shape.parameter_count();
    let mu = read_f64s(&mut cur, n)?;
    let rho = read_f64s(&mut cur, n)?;
    if cur.position() as usize != bytes.len() {
        return Err(Error::Parse("trailing bytes after variational parameters".into()));
    }
    Ok((shape, VariationalParams::new(mu, rho)?))
}

pub fn save_variational(path: &Path, shape: &NetShape, phi: &VariationalParams) -> Result<()> {
    std::fs::write(path, encode_variational(shape, phi)?)?;
    Ok(())
}

pub fn load_variational(path: &Path) -> Result<(NetShape, VariationalParams)> {
    decode_variational(&std::fs::read(path)?)
}
