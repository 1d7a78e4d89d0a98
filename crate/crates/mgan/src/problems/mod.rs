//! Benchmark problems: joint-sample generators for the tanh regressions,
//! the banana density, the biochemical-oxygen-demand model, and the Darcy
//! flow inverse problem.
//!
//! Every generator is deterministic given its seed and draws rows i.i.d.
//! from the problem's joint law.

mod darcy;
mod io;

pub use darcy::{
    darcy_forward, darcy_observe, darcy_solve, gen_darcy, DarcyGrid, Permeability,
    OBSERVATION_POINTS,
};
pub use io::{load_csv, load_binary, save_binary, save_csv, save_manifest, DatasetManifest};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::rngs::{derive_rng, rng_from_seed};
use crate::special::erf;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Problem identifiers as used in configs and manifests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Problem {
    /// y = tanh(x) + g, g ~ Exp(scale 0.3), x ~ U[-3, 3].
    #[serde(rename = "synthetic-4")]
    Synthetic4,
    /// y = tanh(x + g), g ~ N(0, 0.05), x ~ U[-3, 3].
    #[serde(rename = "synthetic-5")]
    Synthetic5,
    /// y = g * tanh(x), g ~ Exp(scale 0.3), x ~ U[-3, 3].
    #[serde(rename = "synthetic-6")]
    Synthetic6,
    /// y1 ~ N(0, 1), y2 = y1^2 + 1 + 0.5 e, e ~ N(0, 1); no conditioning block.
    #[serde(rename = "banana")]
    Banana,
    /// Two latent parameters through the saturating growth curve observed
    /// at five times.
    #[serde(rename = "bod")]
    Bod,
    /// Two-scale permeability through the elliptic pressure equation
    /// observed at sixteen sensors.
    #[serde(rename = "darcy")]
    Darcy,
}

impl Problem {
    pub fn id(&self) -> &'static str {
        match self {
            Problem::Synthetic4 => "synthetic-4",
            Problem::Synthetic5 => "synthetic-5",
            Problem::Synthetic6 => "synthetic-6",
            Problem::Banana => "banana",
            Problem::Bod => "bod",
            Problem::Darcy => "darcy",
        }
    }

    pub fn parse(s: &str) -> Result<Problem> {
        match s {
            "synthetic-4" => Ok(Problem::Synthetic4),
            "synthetic-5" => Ok(Problem::Synthetic5),
            "synthetic-6" => Ok(Problem::Synthetic6),
            "banana" => Ok(Problem::Banana),
            "bod" => Ok(Problem::Bod),
            "darcy" => Ok(Problem::Darcy),
            other => Err(Error::Config(format!("unknown problem id {other:?}"))),
        }
    }

    /// (n, m): conditioning and output dimensions.
    pub fn dims(&self) -> (usize, usize) {
        match self {
            Problem::Synthetic4 | Problem::Synthetic5 | Problem::Synthetic6 => (1, 1),
            Problem::Banana => (0, 2),
            Problem::Bod => (5, 2),
            Problem::Darcy => (16, 2),
        }
    }
}

/// N paired samples (x, y) drawn from a problem's joint law.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDataset {
    n: usize,
    m: usize,
    data: Matrix,
    problem: String,
    seed: u64,
}

impl JointDataset {
    pub fn new(n: usize, m: usize, data: Matrix, problem: String, seed: u64) -> Result<Self> {
        if data.cols() != n + m {
            return Err(Error::Shape(format!(
                "dataset rows have {} columns, expected n + m = {}",
                data.cols(),
                n + m
            )));
        }
        if data.rows() == 0 {
            return Err(Error::Config("dataset must contain at least one row".into()));
        }
        if !data.is_finite() {
            return Err(Error::Numerical("dataset contains non-finite entries".into()));
        }
        Ok(JointDataset { n, m, data, problem, seed })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.data.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.data.rows() == 0
    }

    pub fn joint(&self) -> &Matrix {
        &self.data
    }

    pub fn x_block(&self) -> Matrix {
        self.data.columns(0, self.n)
    }

    pub fn y_block(&self) -> Matrix {
        self.data.columns(self.n, self.n + self.m)
    }

    pub fn problem(&self) -> &str {
        &self.problem
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Exponential draw with the given scale via inverse transform.
fn sample_exp(scale: f64, rng: &mut ChaCha8Rng) -> f64 {
    let u: f64 = rng.gen();
    -scale * (1.0 - u).ln()
}

/// One output draw for a tanh-family problem at a fixed input.
pub fn synthetic_y(problem: Problem, x: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    match problem {
        Problem::Synthetic4 => Ok(x.tanh() + sample_exp(0.3, rng)),
        Problem::Synthetic5 => {
            let g: f64 = rng.sample(StandardNormal);
            Ok((x + 0.05f64.sqrt() * g).tanh())
        }
        Problem::Synthetic6 => Ok(sample_exp(0.3, rng) * x.tanh()),
        other => Err(Error::Config(format!(
            "{} is not one of the tanh-family problems",
            other.id()
        ))),
    }
}

/// Joint samples for one of the three tanh-family problems (n = 1, m = 1).
pub fn gen_synthetic(problem: Problem, n_samples: usize, seed: u64) -> Result<JointDataset> {
    if !matches!(problem, Problem::Synthetic4 | Problem::Synthetic5 | Problem::Synthetic6) {
        return Err(Error::Config(format!(
            "{} is not one of the tanh-family problems",
            problem.id()
        )));
    }
    if n_samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut data = Matrix::zeros(n_samples, 2);
    for r in 0..n_samples {
        let x = rng.gen_range(-3.0..3.0);
        let y = synthetic_y(problem, x, &mut rng)?;
        data.set(r, 0, x);
        data.set(r, 1, y);
    }
    JointDataset::new(1, 1, data, problem.id().to_string(), seed)
}

/// Banana samples (n = 0, m = 2); `reverse_order` swaps the two columns.
pub fn gen_banana(n_samples: usize, seed: u64, reverse_order: bool) -> Result<JointDataset> {
    if n_samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut data = Matrix::zeros(n_samples, 2);
    for r in 0..n_samples {
        let y1: f64 = rng.sample(StandardNormal);
        let e: f64 = rng.sample(StandardNormal);
        let y2 = y1 * y1 + 1.0 + 0.5 * e;
        if reverse_order {
            data.set(r, 0, y2);
            data.set(r, 1, y1);
        } else {
            data.set(r, 0, y1);
            data.set(r, 1, y2);
        }
    }
    let tag = if reverse_order { "banana-reverse" } else { "banana" };
    JointDataset::new(0, 2, data, tag.to_string(), seed)
}

/// Latent parameters mapped through the error function onto the growth
/// curve's (A, B) coefficients: A in (0.4, 1.2), B in (0.01, 0.31).
pub fn bod_params(rho: (f64, f64)) -> (f64, f64) {
    let a = 0.4 + 0.4 * (1.0 + erf(rho.0 / std::f64::consts::SQRT_2));
    let b = 0.01 + 0.15 * (1.0 + erf(rho.1 / std::f64::consts::SQRT_2));
    (a, b)
}

/// Observations A(1 - exp(-B t)) at t = 1..5, optionally with
/// N(0, 1e-3) noise per entry.
pub fn bod_forward(rho: (f64, f64), rng: &mut ChaCha8Rng, noisy: bool) -> [f64; 5] {
    let (a, b) = bod_params(rho);
    let mut x = [0.0; 5];
    for (j, xj) in x.iter_mut().enumerate() {
        let t = (j + 1) as f64;
        *xj = a * (1.0 - (-b * t).exp());
        if noisy {
            let g: f64 = rng.sample(StandardNormal);
            *xj += 1e-3f64.sqrt() * g;
        }
    }
    x
}

/// Joint samples for the oxygen-demand problem (n = 5, m = 2):
/// y = rho ~ N(0, I_2), x = noisy forward observations.
pub fn gen_bod(n_samples: usize, seed: u64) -> Result<JointDataset> {
    if n_samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let mut rng = rng_from_seed(seed);
    let mut data = Matrix::zeros(n_samples, 7);
    for r in 0..n_samples {
        let rho1: f64 = rng.sample(StandardNormal);
        let rho2: f64 = rng.sample(StandardNormal);
        let x = bod_forward((rho1, rho2), &mut rng, true);
        data.row_mut(r)[..5].copy_from_slice(&x);
        data.set(r, 5, rho1);
        data.set(r, 6, rho2);
    }
    JointDataset::new(5, 2, data, "bod".to_string(), seed)
}

/// Worker-thread cap: the MGAN_THREADS environment variable if set,
/// otherwise the machine's available parallelism.
pub fn worker_threads() -> usize {
    std::env::var("MGAN_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&t| t >= 1)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Per-row RNG stream so datasets are identical however work is split
/// across threads.
pub(crate) fn row_rng(seed: u64, row: usize) -> ChaCha8Rng {
    derive_rng(seed, row as u64)
}
