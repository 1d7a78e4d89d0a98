//! Random-walk Metropolis with isotropic Gaussian proposals.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rngs::rng_from_seed;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

#[derive(Debug, Clone)]
pub struct McmcConfig {
    pub initial: Vec<f64>,
    /// Proposal standard deviation per coordinate.
    pub proposal_std: Vec<f64>,
    /// Samples kept after burn-in.
    pub chain_length: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl McmcConfig {
    pub fn new(initial: Vec<f64>, proposal_std: Vec<f64>, seed: u64) -> Self {
        McmcConfig { initial, proposal_std, chain_length: 30_000, burn_in: 5_000, seed }
    }
}

pub struct McmcOutput {
    /// Post burn-in states, one per row.
    pub chain: Matrix,
    /// Accepted proposals over all steps, burn-in included.
    pub acceptance_rate: f64,
}

/// Runs the chain; deterministic given the seed. The burn-in segment is
/// discarded from the returned chain but counts toward the acceptance
/// rate.
pub fn mcmc_sample(log_post: impl Fn(&[f64]) -> f64, config: &McmcConfig) -> Result<McmcOutput> {
    if config.chain_length == 0 {
        return Err(Error::Config("chain length must be at least 1".into()));
    }
    let dim = config.initial.len();
    if config.proposal_std.len() != dim {
        return Err(Error::Config("proposal std must match the state dimension".into()));
    }
    let mut current = config.initial.clone();
    let mut current_lp = log_post(&current);
    if !current_lp.is_finite() {
        return Err(Error::Config(format!(
            "log posterior is {current_lp} at the initial state"
        )));
    }
    let mut rng = rng_from_seed(config.seed);
    let total = config.burn_in + config.chain_length;
    let mut chain = Matrix::zeros(config.chain_length, dim);
    let mut proposal = vec![0.0; dim];
    let mut accepted = 0usize;
    for step in 0..total {
        for (c, p) in proposal.iter_mut().enumerate() {
            let g: f64 = rng.sample(StandardNormal);
            *p = current[c] + config.proposal_std[c] * g;
        }
        let lp = log_post(&proposal);
        let log_u: f64 = rng.gen_range(0.0f64..1.0).ln();
        if lp - current_lp > log_u {
            current.copy_from_slice(&proposal);
            current_lp = lp;
            accepted += 1;
        }
        if step >= config.burn_in {
            chain.row_mut(step - config.burn_in).copy_from_slice(&current);
        }
    }
    Ok(McmcOutput { chain, acceptance_rate: accepted as f64 / total as f64 })
}

/// Pilot-tunes the proposal toward 25-45% acceptance. An isotropic scale
/// is bisected first; a pilot chain then sets per-coordinate standard
/// deviations (2.38/sqrt(d) times the pilot marginals, the usual
/// random-walk scaling), and the global factor is re-adjusted. All
/// stages are deterministic given the seed.
pub fn tune_proposal_std(
    log_post: impl Fn(&[f64]) -> f64,
    initial: &[f64],
    seed: u64,
) -> Result<Vec<f64>> {
    let dim = initial.len();
    let acceptance_at = |std: &[f64], round: u64| -> Result<(f64, Matrix)> {
        let config = McmcConfig {
            initial: initial.to_vec(),
            proposal_std: std.to_vec(),
            chain_length: 2_000,
            burn_in: 400,
            seed: seed.wrapping_add(round),
        };
        let out = mcmc_sample(&log_post, &config)?;
        Ok((out.acceptance_rate, out.chain))
    };

    let mut scale = 0.5;
    let mut pilot = None;
    for round in 0..20 {
        let (rate, chain) = acceptance_at(&vec![scale; dim], round)?;
        if rate < 0.25 {
            scale /= 1.6;
        } else if rate > 0.45 {
            scale *= 1.6;
        } else {
            pilot = Some(chain);
            break;
        }
    }
    let pilot = match pilot {
        Some(c) => c,
        None => acceptance_at(&vec![scale; dim], 20)?.1,
    };

    // Shape the proposal like the pilot marginals.
    let stds = pilot.col_stds();
    let base: Vec<f64> = stds
        .iter()
        .map(|s| if *s > 1e-12 { 2.38 / (dim as f64).sqrt() * s } else { scale })
        .collect();
    let mut factor = 1.0;
    for round in 0..10 {
        let std: Vec<f64> = base.iter().map(|s| factor * s).collect();
        let (rate, _) = acceptance_at(&std, 100 + round)?;
        if rate < 0.25 {
            factor /= 1.5;
        } else if rate > 0.45 {
            factor *= 1.5;
        } else {
            break;
        }
    }
    Ok(base.into_iter().map(|s| factor * s).collect())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct McmcManifest {
    pub seed: u64,
    pub proposal_std: Vec<f64>,
    pub acceptance_rate: f64,
    pub chain_length: usize,
    pub burn_in: usize,
}

/// Chain CSV with a `p1,...,pd` header; burn-in is already excluded from
/// the chain itself.
pub fn save_chain_csv(path: &Path, chain: &Matrix) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let header: Vec<String> = (1..=chain.cols()).map(|i| format!("p{i}")).collect();
    writeln!(f, "{}", header.join(","))?;
    for r in 0..chain.rows() {
        let row: Vec<String> = chain.row(r).iter().map(|v| format!("{v}")).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}
