//! Adversarial loss functionals, split into discriminator-side and
//! generator-side objectives.
//!
//! Least-squares flavor:
//!   discriminator minimizes  E_data[(f(z) - 1)^2] + E_ref[f(T(w))^2],
//!   generator minimizes      E_ref[(f(T(w)) - 1)^2].
//!
//! Wasserstein flavor with gradient penalty (weight gamma, default 10):
//!   critic minimizes  E_ref[f(T(w))] - E_data[f(z)]
//!                     + gamma * E[(|grad f(z_hat)|_2 - 1)^2],
//!   generator minimizes  -E_ref[f(T(w))],
//! where z_hat interpolates paired real/fake rows with a fresh U[0,1]
//! coefficient per row, and the map is held fixed while the penalty on f
//! is estimated.
//!
//! Fake batches are the generator's outputs; every discriminator-side
//! function treats them as constants, and every generator-side function
//! treats the discriminator's parameters as constants, so gradients never
//! leak across players.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{DenseNetwork, Gradients};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const DEFAULT_GRADIENT_PENALTY_WEIGHT: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    Lsgan,
    WganGp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossConfig {
    pub kind: LossKind,
    /// Gradient-penalty weight; only meaningful for `WganGp`.
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

fn default_gamma() -> f64 {
    DEFAULT_GRADIENT_PENALTY_WEIGHT
}

impl LossConfig {
    pub fn lsgan() -> Self {
        LossConfig { kind: LossKind::Lsgan, gamma: DEFAULT_GRADIENT_PENALTY_WEIGHT }
    }

    pub fn wgan_gp(gamma: f64) -> Self {
        LossConfig { kind: LossKind::WganGp, gamma }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind == LossKind::WganGp && self.gamma <= 0.0 {
            return Err(Error::Config(format!(
                "gradient-penalty weight must be positive, got {}",
                self.gamma
            )));
        }
        Ok(())
    }

    /// Critic updates per generator update: 1 for least-squares, 5 for
    /// the gradient-penalty critic.
    pub fn default_critic_updates(&self) -> usize {
        match self.kind {
            LossKind::Lsgan => 1,
            LossKind::WganGp => 5,
        }
    }
}

fn check_scalar_output(f: &DenseNetwork) -> Result<()> {
    if f.output_dim() != 1 {
        return Err(Error::Contract(format!(
            "discriminator must be scalar-valued, output dim is {}",
            f.output_dim()
        )));
    }
    Ok(())
}

fn check_nonempty(batch: &Matrix, what: &str) -> Result<()> {
    if batch.rows() == 0 {
        return Err(Error::Contract(format!("{what} batch is empty")));
    }
    Ok(())
}

pub fn lsgan_discriminator_loss(f: &DenseNetwork, real: &Matrix, fake: &Matrix) -> Result<f64> {
    check_scalar_output(f)?;
    check_nonempty(real, "real")?;
    check_nonempty(fake, "fake")?;
    let fr = f.forward(real)?;
    let ff = f.forward(fake)?;
    let real_term: f64 =
        fr.data().iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / real.rows() as f64;
    let fake_term: f64 = ff.data().iter().map(|v| v * v).sum::<f64>() / fake.rows() as f64;
    Ok(real_term + fake_term)
}

pub fn lsgan_generator_loss(f: &DenseNetwork, fake: &Matrix) -> Result<f64> {
    check_scalar_output(f)?;
    check_nonempty(fake, "fake")?;
    let ff = f.forward(fake)?;
    Ok(ff.data().iter().map(|v| (v - 1.0) * (v - 1.0)).sum::<f64>() / fake.rows() as f64)
}

pub fn wgan_generator_loss(f: &DenseNetwork, fake: &Matrix) -> Result<f64> {
    check_scalar_output(f)?;
    check_nonempty(fake, "fake")?;
    let ff = f.forward(fake)?;
    Ok(-ff.data().iter().sum::<f64>() / fake.rows() as f64)
}

/// Fresh interpolation coefficients, one per row.
pub fn draw_alphas(k: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..k).map(|_| rng.gen_range(0.0..1.0)).collect()
}

/// z_hat_j = alpha_j * real_j + (1 - alpha_j) * fake_j, row j with row j.
pub fn interpolate(real: &Matrix, fake: &Matrix, alphas: &[f64]) -> Result<Matrix> {
    if real.rows() != fake.rows() || real.cols() != fake.cols() {
        return Err(Error::Contract(format!(
            "interpolation needs equal batches, got ({}, {}) vs ({}, {})",
            real.rows(),
            real.cols(),
            fake.rows(),
            fake.cols()
        )));
    }
    if alphas.len() != real.rows() {
        return Err(Error::Contract("one interpolation coefficient per row".into()));
    }
    let mut out = Matrix::zeros(real.rows(), real.cols());
    for r in 0..real.rows() {
        let a = alphas[r];
        let (zr, fr) = (real.row(r), fake.row(r));
        for (c, v) in out.row_mut(r).iter_mut().enumerate() {
            *v = a * zr[c] + (1.0 - a) * fr[c];
        }
    }
    Ok(out)
}

/// Critic loss at fixed interpolation coefficients; deterministic.
pub fn wgan_gp_critic_loss_at(
    f: &DenseNetwork,
    real: &Matrix,
    fake: &Matrix,
    gamma: f64,
    alphas: &[f64],
) -> Result<f64> {
    check_scalar_output(f)?;
    check_nonempty(real, "real")?;
    let z_hat = interpolate(real, fake, alphas)?;
    let fr = f.forward(real)?;
    let ff = f.forward(fake)?;
    let g = f.grad_input(&z_hat)?;
    let k = real.rows() as f64;
    let mut penalty = 0.0;
    for r in 0..g.rows() {
        let norm = crate::linalg::dot(g.row(r), g.row(r)).sqrt();
        penalty += (norm - 1.0) * (norm - 1.0);
    }
    Ok(ff.data().iter().sum::<f64>() / k - fr.data().iter().sum::<f64>() / k + gamma * penalty / k)
}

/// Critic loss with coefficients drawn from `rng`.
pub fn wgan_gp_critic_loss(
    f: &DenseNetwork,
    real: &Matrix,
    fake: &Matrix,
    gamma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let alphas = draw_alphas(real.rows(), rng);
    wgan_gp_critic_loss_at(f, real, fake, gamma, &alphas)
}

/// Loss value and gradient with respect to the discriminator's parameters
/// for the least-squares objective. The fake batch stays constant.
pub fn lsgan_discriminator_grad(
    f: &DenseNetwork,
    real: &Matrix,
    fake: &Matrix,
) -> Result<(f64, Gradients)> {
    check_scalar_output(f)?;
    check_nonempty(real, "real")?;
    check_nonempty(fake, "fake")?;
    let mut grads = Gradients::zeros_like(f);

    let (out_r, cache_r) = f.forward_cached(real)?;
    let k_r = real.rows() as f64;
    let mut d_r = Matrix::zeros(real.rows(), 1);
    let mut value = 0.0;
    for r in 0..real.rows() {
        let v = out_r.get(r, 0);
        value += (v - 1.0) * (v - 1.0) / k_r;
        d_r.set(r, 0, 2.0 * (v - 1.0) / k_r);
    }
    f.backward_accumulate(&cache_r, &d_r, &mut grads);

    let (out_f, cache_f) = f.forward_cached(fake)?;
    let k_f = fake.rows() as f64;
    let mut d_f = Matrix::zeros(fake.rows(), 1);
    for r in 0..fake.rows() {
        let v = out_f.get(r, 0);
        value += v * v / k_f;
        d_f.set(r, 0, 2.0 * v / k_f);
    }
    f.backward_accumulate(&cache_f, &d_f, &mut grads);

    Ok((value, grads))
}

/// Critic loss value and parameter gradient for the Wasserstein objective
/// with gradient penalty, at fixed interpolation coefficients. The map's
/// outputs (fake rows) are constants here.
pub fn wgan_gp_critic_grad(
    f: &DenseNetwork,
    real: &Matrix,
    fake: &Matrix,
    gamma: f64,
    alphas: &[f64],
) -> Result<(f64, Gradients)> {
    check_scalar_output(f)?;
    check_nonempty(real, "real")?;
    let z_hat = interpolate(real, fake, alphas)?;
    let k = real.rows() as f64;
    let mut grads = Gradients::zeros_like(f);

    let (out_f, cache_f) = f.forward_cached(fake)?;
    let mut d_f = Matrix::zeros(fake.rows(), 1);
    d_f.fill(1.0 / k);
    f.backward_accumulate(&cache_f, &d_f, &mut grads);

    let (out_r, cache_r) = f.forward_cached(real)?;
    let mut d_r = Matrix::zeros(real.rows(), 1);
    d_r.fill(-1.0 / k);
    f.backward_accumulate(&cache_r, &d_r, &mut grads);

    // d/dtheta of (gamma/k) * sum_j (|g_j| - 1)^2 via the tangent pass.
    let norms = f.weighted_input_grad_param_grad(
        &z_hat,
        |norm| 2.0 * gamma * (norm - 1.0) / (norm * k),
        &mut grads,
    )?;
    let penalty: f64 = norms.iter().map(|n| (n - 1.0) * (n - 1.0)).sum::<f64>() / k;

    let value = out_f.data().iter().sum::<f64>() / k - out_r.data().iter().sum::<f64>() / k
        + gamma * penalty;
    Ok((value, grads))
}

/// Generator-side loss value and its gradient with respect to the fake
/// rows (the map outputs). Backing this out through the discriminator
/// touches only its activations, never its parameters.
pub fn generator_loss_and_grad_wrt_fake(
    config: &LossConfig,
    f: &DenseNetwork,
    fake: &Matrix,
) -> Result<(f64, Matrix)> {
    check_scalar_output(f)?;
    check_nonempty(fake, "fake")?;
    let (out, cache) = f.forward_cached(fake)?;
    let k = fake.rows() as f64;
    let mut value = 0.0;
    let mut d_out = Matrix::zeros(fake.rows(), 1);
    match config.kind {
        LossKind::Lsgan => {
            for r in 0..fake.rows() {
                let v = out.get(r, 0);
                value += (v - 1.0) * (v - 1.0) / k;
                d_out.set(r, 0, 2.0 * (v - 1.0) / k);
            }
        }
        LossKind::WganGp => {
            for r in 0..fake.rows() {
                value -= out.get(r, 0) / k;
                d_out.set(r, 0, -1.0 / k);
            }
        }
    }
    let (_, d_fake) = f.backward(&cache, &d_out);
    Ok((value, d_fake))
}
