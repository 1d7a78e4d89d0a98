//! Experiment configuration: one JSON file drives generation, training,
//! reference computation, and evaluation. The schema is strict; unknown
//! keys are rejected so typos cannot silently change hyperparameters.

use crate::error::{Error, Result};
use crate::metrics::Bandwidth;
use crate::problems::Problem;
use crate::trainer::TrainConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub n_samples: usize,
    pub seed: u64,
    /// Banana only: swap the two output columns.
    #[serde(default)]
    pub reverse_order: bool,
    /// Flow problem only: interior grid points per axis.
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
}

fn default_grid_points() -> usize {
    63
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct McmcSettings {
    pub chain_length: usize,
    pub burn_in: usize,
    /// Per-coordinate proposal standard deviations; tuned by a pilot run
    /// when absent.
    pub proposal_std: Option<Vec<f64>>,
    pub seed: u64,
}

impl Default for McmcSettings {
    fn default() -> Self {
        McmcSettings { chain_length: 30_000, burn_in: 5_000, proposal_std: None, seed: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluateConfig {
    /// Conditioning points. For the inference problems an entry may also
    /// be a parameter pair, which is mapped through the noiseless forward
    /// model to an observation.
    pub x_star: Vec<Vec<f64>>,
    /// Conditional/joint samples drawn per checkpoint.
    pub num_samples: usize,
    pub grid_cells: usize,
    pub grid_margin: f64,
    pub bandwidth: Bandwidth,
    pub kl_floor: f64,
    /// Rows per side for the MMD statistic (quadratic cost).
    pub mmd_subsample: usize,
    pub seed: u64,
    pub mcmc: McmcSettings,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig {
            x_star: Vec::new(),
            num_samples: 30_000,
            grid_cells: 200,
            grid_margin: 0.1,
            bandwidth: Bandwidth::Scott,
            kl_floor: 1e-12,
            mmd_subsample: 5_000,
            seed: 0,
            mcmc: McmcSettings::default(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub evaluate: EvaluateConfig,
    pub output_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: ExperimentConfig = serde_json::from_str(&text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.dataset.n_samples == 0 {
            return Err(Error::Config("dataset.n_samples must be at least 1".into()));
        }
        self.train.loss.validate()?;
        if self.evaluate.num_samples < 2 {
            return Err(Error::Config("evaluate.num_samples must be at least 2".into()));
        }
        Ok(())
    }

    /// Overrides every stage seed at once (the CLI `--seed` flag).
    pub fn override_seed(&mut self, seed: u64) {
        self.dataset.seed = seed;
        self.train.seed = seed;
        self.evaluate.seed = seed;
        self.evaluate.mcmc.seed = seed;
    }

    /// Conditioning points with parameter pairs expanded through the
    /// noiseless forward model where the problem defines one.
    pub fn resolved_x_star(&self) -> Result<Vec<Vec<f64>>> {
        let mut out = Vec::new();
        let configured: Vec<Vec<f64>> = if self.evaluate.x_star.is_empty() {
            default_x_star(self.problem)
        } else {
            self.evaluate.x_star.clone()
        };
        for entry in configured {
            out.push(resolve_x_star_entry(self.problem, &entry, self.dataset.grid_points)?);
        }
        Ok(out)
    }
}

/// Benchmark conditioning points used when the config lists none.
fn default_x_star(problem: Problem) -> Vec<Vec<f64>> {
    match problem {
        Problem::Synthetic4 | Problem::Synthetic5 | Problem::Synthetic6 => {
            vec![vec![-2.0], vec![0.0], vec![2.0]]
        }
        Problem::Banana => vec![vec![]],
        Problem::Bod => vec![vec![0.18, 0.32, 0.42, 0.49, 0.54]],
        Problem::Darcy => vec![vec![3.5, 13.0], vec![4.0, 14.0], vec![4.5, 15.0]],
    }
}

fn resolve_x_star_entry(problem: Problem, entry: &[f64], grid_points: usize) -> Result<Vec<f64>> {
    let (n, _) = problem.dims();
    if entry.len() == n {
        return Ok(entry.to_vec());
    }
    match problem {
        Problem::Bod if entry.len() == 2 => {
            let mut rng = crate::rngs::rng_from_seed(0);
            Ok(crate::problems::bod_forward((entry[0], entry[1]), &mut rng, false).to_vec())
        }
        Problem::Darcy if entry.len() == 2 => {
            let grid = crate::problems::DarcyGrid::with_resolution(grid_points);
            crate::problems::darcy_forward(entry[0], entry[1], &grid)
        }
        _ => Err(Error::Config(format!(
            "conditioning point {entry:?} does not fit problem {} (expects {n} coordinates)",
            problem.id()
        ))),
    }
}
