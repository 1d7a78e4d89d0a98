//! Ground truth: closed-form conditionals and transport maps for the
//! tanh-family problems, the banana joint density, posterior densities
//! for the inference problems, and a random-walk Metropolis sampler.

mod mcmc;

pub use mcmc::{
    mcmc_sample, save_chain_csv, tune_proposal_std, McmcConfig, McmcManifest, McmcOutput,
};

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::problems::{bod_params, darcy_forward, DarcyGrid, Problem};
use crate::special::{gaussian_pdf, normal_cdf, normal_quantile};
use crate::transport::ConditionalMap;

const EXP_SCALE: f64 = 0.3;
const INPUT_HALF_WIDTH: f64 = 3.0;

/// Closed-form conditional law of y given x for a tanh-family problem:
/// density, CDF, quantile, the induced transport map from standard
/// Gaussian noise, and the joint density with the uniform input marginal.
#[derive(Debug, Clone, Copy)]
pub struct AnalyticConditional {
    problem: Problem,
}

impl AnalyticConditional {
    pub fn new(problem: Problem) -> Result<Self> {
        match problem {
            Problem::Synthetic4 | Problem::Synthetic5 | Problem::Synthetic6 => {
                Ok(AnalyticConditional { problem })
            }
            other => Err(Error::Config(format!(
                "{} has no closed-form conditional here",
                other.id()
            ))),
        }
    }

    pub fn problem(&self) -> Problem {
        self.problem
    }

    /// True only for the multiplicative model at tanh(x) = 0, where the
    /// conditional collapses to a point mass at zero.
    pub fn is_degenerate_at(&self, x: f64) -> bool {
        matches!(self.problem, Problem::Synthetic6) && x.tanh() == 0.0
    }

    pub fn conditional_density(&self, x: f64, y: f64) -> f64 {
        let t = x.tanh();
        match self.problem {
            Problem::Synthetic4 => {
                if y < t {
                    0.0
                } else {
                    (-(y - t) / EXP_SCALE).exp() / EXP_SCALE
                }
            }
            Problem::Synthetic5 => {
                if y <= -1.0 || y >= 1.0 {
                    0.0
                } else {
                    let sigma = 0.05f64.sqrt();
                    gaussian_pdf(y.atanh(), x, sigma) / (1.0 - y * y)
                }
            }
            Problem::Synthetic6 => {
                // Scaled exponential with the sign of tanh(x); undefined
                // (a point mass) when tanh(x) = 0, reported as zero.
                if t == 0.0 {
                    0.0
                } else if y * t.signum() < 0.0 {
                    0.0
                } else {
                    (-y / (EXP_SCALE * t)).exp() / (EXP_SCALE * t.abs())
                }
            }
            _ => unreachable!(),
        }
    }

    pub fn conditional_cdf(&self, x: f64, y: f64) -> f64 {
        let t = x.tanh();
        match self.problem {
            Problem::Synthetic4 => {
                if y < t {
                    0.0
                } else {
                    1.0 - (-(y - t) / EXP_SCALE).exp()
                }
            }
            Problem::Synthetic5 => {
                if y <= -1.0 {
                    0.0
                } else if y >= 1.0 {
                    1.0
                } else {
                    normal_cdf((y.atanh() - x) / 0.05f64.sqrt())
                }
            }
            Problem::Synthetic6 => {
                if t == 0.0 {
                    // Point mass at zero.
                    if y >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else if t > 0.0 {
                    if y < 0.0 {
                        0.0
                    } else {
                        1.0 - (-y / (EXP_SCALE * t)).exp()
                    }
                } else if y >= 0.0 {
                    1.0
                } else {
                    (-y / (EXP_SCALE * t)).exp()
                }
            }
            _ => unreachable!(),
        }
    }

    /// Conditional quantile Q(p | x), the building block of the transport
    /// map. For the degenerate multiplicative case it returns 0.
    pub fn conditional_quantile(&self, x: f64, p: f64) -> f64 {
        let t = x.tanh();
        match self.problem {
            Problem::Synthetic4 => t - EXP_SCALE * (1.0 - p).ln(),
            Problem::Synthetic5 => (x + 0.05f64.sqrt() * normal_quantile(p)).tanh(),
            Problem::Synthetic6 => {
                if t == 0.0 {
                    0.0
                } else if t > 0.0 {
                    -EXP_SCALE * t * (1.0 - p).ln()
                } else {
                    // Reflected exponential: quantile from the lower tail.
                    -EXP_SCALE * t * p.ln()
                }
            }
            _ => unreachable!(),
        }
    }

    /// The monotone conditional transport F*(x, u) = Q(Phi(u) | x) pushing
    /// standard Gaussian noise onto the conditional law.
    pub fn kr_map(&self, x: f64, u: f64) -> f64 {
        match self.problem {
            // The noisy-input model is already a reparameterization of a
            // standard normal draw, so no CDF round trip is needed.
            Problem::Synthetic5 => (x + 0.05f64.sqrt() * u).tanh(),
            _ => self.conditional_quantile(x, normal_cdf(u)),
        }
    }

    /// Joint density with the uniform input marginal on [-3, 3].
    pub fn joint_density(&self, x: f64, y: f64) -> f64 {
        if !(-INPUT_HALF_WIDTH..=INPUT_HALF_WIDTH).contains(&x) {
            return 0.0;
        }
        self.conditional_density(x, y) / (2.0 * INPUT_HALF_WIDTH)
    }
}

/// The banana joint density: y1 standard normal, y2 | y1 normal with mean
/// y1^2 + 1 and standard deviation 0.5.
pub fn banana_joint_density(y1: f64, y2: f64) -> f64 {
    gaussian_pdf(y1, 0.0, 1.0) * gaussian_pdf(y2, y1 * y1 + 1.0, 0.5)
}

/// Joint density evaluator covering the four closed-form problems.
/// The point z is the full joint vector: (x, y) for the tanh family,
/// (y1, y2) for the banana.
pub fn true_joint_density(problem: Problem, z: &[f64]) -> Result<f64> {
    match problem {
        Problem::Synthetic4 | Problem::Synthetic5 | Problem::Synthetic6 => {
            if z.len() != 2 {
                return Err(Error::Shape("tanh-family joint point must be (x, y)".into()));
            }
            Ok(AnalyticConditional::new(problem)?.joint_density(z[0], z[1]))
        }
        Problem::Banana => {
            if z.len() != 2 {
                return Err(Error::Shape("banana joint point must be (y1, y2)".into()));
            }
            Ok(banana_joint_density(z[0], z[1]))
        }
        other => Err(Error::Config(format!(
            "{} has no closed-form joint density",
            other.id()
        ))),
    }
}

/// Adapter exposing the analytic transport map to `conditional_sample`.
pub struct KrConditionalMap {
    oracle: AnalyticConditional,
}

impl KrConditionalMap {
    pub fn new(problem: Problem) -> Result<Self> {
        Ok(KrConditionalMap { oracle: AnalyticConditional::new(problem)? })
    }
}

impl ConditionalMap for KrConditionalMap {
    fn input_dim(&self) -> usize {
        1
    }

    fn noise_dim(&self) -> usize {
        1
    }

    fn push(&self, x_u: &Matrix) -> Result<Matrix> {
        if x_u.cols() != 2 {
            return Err(Error::Shape("analytic map expects (x, u) rows".into()));
        }
        let mut out = Matrix::zeros(x_u.rows(), 1);
        for r in 0..x_u.rows() {
            out.set(r, 0, self.oracle.kr_map(x_u.get(r, 0), x_u.get(r, 1)));
        }
        Ok(out)
    }
}

/// Unnormalized log posterior for the oxygen-demand problem: quadratic
/// data misfit with precision 1/(2e-3) = 500 per coordinate plus a
/// standard normal prior on rho.
pub fn bod_log_posterior(rho: (f64, f64), x_star: &[f64; 5]) -> f64 {
    let (a, b) = bod_params(rho);
    let mut misfit = 0.0;
    for (j, &xj) in x_star.iter().enumerate() {
        let t = (j + 1) as f64;
        let pred = a * (1.0 - (-b * t).exp());
        misfit += (xj - pred) * (xj - pred);
    }
    -5e2 * misfit - 0.5 * (rho.0 * rho.0 + rho.1 * rho.1)
}

/// Analytic gradient of `bod_log_posterior` in rho.
pub fn bod_log_posterior_grad(rho: (f64, f64), x_star: &[f64; 5]) -> (f64, f64) {
    let (a, b) = bod_params(rho);
    // d a / d rho1 and d b / d rho2 through the error function.
    let sqrt_2_over_pi = (2.0 / std::f64::consts::PI).sqrt();
    let da = 0.4 * sqrt_2_over_pi * (-0.5 * rho.0 * rho.0).exp();
    let db = 0.15 * sqrt_2_over_pi * (-0.5 * rho.1 * rho.1).exp();
    let mut g1 = -rho.0;
    let mut g2 = -rho.1;
    for (j, &xj) in x_star.iter().enumerate() {
        let t = (j + 1) as f64;
        let decay = (-b * t).exp();
        let pred = a * (1.0 - decay);
        let resid = xj - pred;
        g1 += 1e3 * resid * (1.0 - decay) * da;
        g2 += 1e3 * resid * a * t * decay * db;
    }
    (g1, g2)
}

/// Unnormalized log posterior for the flow problem: negative infinity
/// outside the uniform prior box, otherwise the Gaussian data misfit with
/// noise variance 1e-7 against the noiseless forward observations.
pub fn darcy_log_posterior(ab: (f64, f64), x_star: &[f64], grid: &DarcyGrid) -> Result<f64> {
    let (a, b) = ab;
    if !(3.0..=5.0).contains(&a) || !(12.0..=16.0).contains(&b) {
        return Ok(f64::NEG_INFINITY);
    }
    if x_star.len() != 16 {
        return Err(Error::Shape(format!(
            "flow observations have 16 coordinates, got {}",
            x_star.len()
        )));
    }
    let obs = darcy_forward(a, b, grid)?;
    let misfit: f64 = x_star.iter().zip(&obs).map(|(x, o)| (x - o) * (x - o)).sum();
    Ok(-misfit / (2.0 * 1e-7))
}

/// One-sample Kolmogorov-Smirnov distance between samples and a CDF.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut sorted = samples.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &s) in sorted.iter().enumerate() {
        let f = cdf(s);
        d = d.max((f - i as f64 / n).abs()).max(((i + 1) as f64 / n - f).abs());
    }
    d
}

/// Asymptotic critical value of the one-sample KS statistic at the given
/// significance level: sqrt(-ln(level/2) / 2) / sqrt(n).
pub fn ks_critical_value(n: usize, level: f64) -> f64 {
    (-(level / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}
