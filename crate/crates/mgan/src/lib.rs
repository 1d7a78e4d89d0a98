//! Monotone block-triangular transport maps trained with GAN losses.
//!
//! The crate trains a map T(x, y) = (x, F(x, y)) so that T pushes the
//! reference measure (data x-marginal times a standard Gaussian) onto the
//! joint law of the data. Once trained, F(x*, u) with u ~ N(0, I) samples
//! the conditional distribution of y given x = x*. An average monotonicity
//! penalty keeps T invertible, which is what makes the conditionals exact
//! at the optimum.
//!
//! Modules:
//! - [`nn`]: dense networks, reverse-mode gradients, Adam.
//! - [`transport`]: the block/fully triangular maps, reference sampling,
//!   monotonicity diagnostics, conditional sampling.
//! - [`losses`]: least-squares and gradient-penalty adversarial losses.
//! - [`trainer`]: the alternating min-max loop.
//! - [`problems`]: benchmark data generators (tanh regressions, banana,
//!   oxygen-demand model, Darcy flow).
//! - [`oracles`]: analytic conditionals and a Metropolis sampler giving
//!   reference posteriors.
//! - [`metrics`]: KDE, relative L2, grid KL, MMD, sample moments.
//! - [`cli`]: config-driven experiment pipelines.

pub mod cli;
pub mod config;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod nn;
pub mod oracles;
pub mod problems;
pub mod rngs;
pub mod special;
pub mod trainer;
pub mod transport;

pub use error::{Error, Result};
