//! Config-driven experiment pipelines: generate data, train, compute
//! reference posteriors, and evaluate, each leaving a manifest behind so
//! the stage can be re-run from its artifacts alone.

use crate::config::{EvaluateConfig, ExperimentConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::metrics::{
    kde_density, kl_grid, mmd_squared, relative_l2, sample_moments, save_metrics_csv,
    DensityGrid, KdeConfig, MetricRow, MmdBandwidth,
};
use crate::oracles::{
    bod_log_posterior, darcy_log_posterior, mcmc_sample, save_chain_csv, true_joint_density,
    tune_proposal_std, AnalyticConditional, McmcConfig, McmcManifest,
};
use crate::problems::{
    gen_banana, gen_bod, gen_darcy, gen_synthetic, load_binary, load_csv, save_binary, save_csv,
    save_manifest, DarcyGrid, DatasetManifest, JointDataset, Problem,
};
use crate::rngs::derive_rng;
use crate::trainer::{save_history_csv, train, TrainOutput};
use crate::transport::{
    conditional_sample, export_conditional_csv, load_map, save_map, ReferenceSampler,
    TransportMap,
};
use serde::Serialize;
use std::path::{Path, PathBuf};

/// One experiment directory is owned by one process at a time.
pub struct Lockfile {
    path: PathBuf,
}

impl Lockfile {
    pub fn acquire(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(".lock");
        match std::fs::OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(_) => Ok(Lockfile { path }),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => Err(Error::Config(
                format!("{} is locked by another process (stale? remove {})",
                    dir.display(),
                    path.display()),
            )),
            Err(e) => Err(e.into()),
        }
    }
}

impl Drop for Lockfile {
    fn drop(&mut self) {
        let _ = std::fs::remove_file(&self.path);
    }
}

fn darcy_grid(config: &ExperimentConfig) -> DarcyGrid {
    DarcyGrid::with_resolution(config.dataset.grid_points)
}

/// Generates the configured dataset and writes CSV, binary, and manifest
/// forms into the output directory.
pub fn cmd_generate(config: &ExperimentConfig) -> Result<()> {
    let dir = &config.output_dir;
    let _lock = Lockfile::acquire(dir)?;
    let ds = generate_dataset(config)?;
    save_csv(&dir.join("dataset.csv"), &ds)?;
    save_binary(&dir.join("dataset.bin"), &ds)?;
    let manifest = DatasetManifest {
        problem: config.problem.id().to_string(),
        seed: config.dataset.seed,
        n_samples: config.dataset.n_samples,
        n: ds.n(),
        m: ds.m(),
        params: serde_json::json!({
            "reverse_order": config.dataset.reverse_order,
            "grid_points": config.dataset.grid_points,
        }),
    };
    save_manifest(&dir.join("dataset_manifest.json"), &manifest)?;
    Ok(())
}

pub fn generate_dataset(config: &ExperimentConfig) -> Result<JointDataset> {
    let n = config.dataset.n_samples;
    let seed = config.dataset.seed;
    match config.problem {
        Problem::Synthetic4 | Problem::Synthetic5 | Problem::Synthetic6 => {
            gen_synthetic(config.problem, n, seed)
        }
        Problem::Banana => gen_banana(n, seed, config.dataset.reverse_order),
        Problem::Bod => gen_bod(n, seed),
        Problem::Darcy => gen_darcy(n, seed, &darcy_grid(config)),
    }
}

fn load_dataset(path: &Path) -> Result<JointDataset> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("bin") => load_binary(path),
        Some("csv") => load_csv(path),
        _ => Err(Error::Config(format!(
            "dataset path {} must end in .bin or .csv",
            path.display()
        ))),
    }
}

#[derive(Serialize)]
struct TrainManifest<'a> {
    config: &'a ExperimentConfig,
    label: &'a str,
    final_checkpoint: String,
    snapshot_epochs: Vec<usize>,
    checkpoint_hashes: Vec<String>,
    generator_updates: usize,
    discriminator_updates: usize,
}

/// Trains on an existing dataset (default `<out>/dataset.bin`) and writes
/// history, per-epoch checkpoints for the final stretch, and a manifest.
pub fn cmd_train(config: &ExperimentConfig, dataset_path: Option<&Path>) -> Result<()> {
    let dir = &config.output_dir;
    let _lock = Lockfile::acquire(dir)?;
    let default_path = dir.join("dataset.bin");
    let ds = load_dataset(dataset_path.unwrap_or(&default_path))?;
    let (n, m) = config.problem.dims();
    if ds.n() != n || ds.m() != m {
        return Err(Error::Config(format!(
            "dataset is ({}, {})-dimensional but problem {} expects ({n}, {m})",
            ds.n(),
            ds.m(),
            config.problem.id()
        )));
    }
    let out = train(&config.train, &ds)?;
    write_train_artifacts(config, &out)?;
    Ok(())
}

pub fn write_train_artifacts(config: &ExperimentConfig, out: &TrainOutput) -> Result<()> {
    let dir = &config.output_dir;
    save_history_csv(&dir.join("history.csv"), &out.history)?;
    let ckpt_root = dir.join("checkpoints");
    let mut hashes = Vec::new();
    let mut epochs = Vec::new();
    for (epoch, map) in &out.snapshots {
        let h = save_map(&ckpt_root.join(format!("epoch_{epoch:04}")), map)?;
        hashes.push(format!("{h:016x}"));
        epochs.push(*epoch);
    }
    let final_hash = save_map(&ckpt_root.join("final"), &out.map)?;
    let manifest = TrainManifest {
        config,
        label: &out.history.label,
        final_checkpoint: format!("{final_hash:016x}"),
        snapshot_epochs: epochs,
        checkpoint_hashes: hashes,
        generator_updates: out.generator_updates,
        discriminator_updates: out.discriminator_updates,
    };
    std::fs::write(dir.join("train_manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn kde_config(eval: &EvaluateConfig) -> KdeConfig {
    KdeConfig { bandwidth: eval.bandwidth, cv_subsample: 10_000, seed: eval.seed }
}

/// Joint samples from a trained map: reference draws (data x-marginal
/// plus Gaussian noise) pushed through the map.
pub fn sample_joint(
    map: &TransportMap,
    x_data: &Matrix,
    num_samples: usize,
    seed: u64,
) -> Result<Matrix> {
    use crate::transport::Map as _;
    let mut sampler = ReferenceSampler::new(x_data, map.m(), derive_rng(seed, 0x6a6f696e))?;
    let w = sampler.sample(num_samples)?;
    map.apply(&w)
}

/// Relative L2 and KL of a KDE of joint samples against a closed-form
/// joint density, on a grid spanning the samples.
pub fn joint_density_metrics(
    samples: &Matrix,
    truth: impl Fn(&[f64]) -> f64,
    eval: &EvaluateConfig,
) -> Result<(f64, f64)> {
    let grid = DensityGrid::from_samples(samples, eval.grid_cells, eval.grid_margin)?;
    let kde = kde_density(samples, &kde_config(eval), &grid)?;
    let mut truth_grid = grid.clone();
    truth_grid.fill_with(truth);
    let rel = relative_l2(&kde, &truth_grid)?;
    let kl = kl_grid(&truth_grid, &kde, eval.kl_floor)?;
    Ok((rel, kl))
}

/// Distributional distances between map samples and reference samples of
/// the same conditional: KDE-based relative L2 and KL on a shared grid,
/// the unbiased MMD estimate, and per-column moments of the map samples.
pub fn conditional_metrics_vs_reference(
    map_samples: &Matrix,
    reference: &Matrix,
    eval: &EvaluateConfig,
) -> Result<Vec<(String, f64)>> {
    let pooled = {
        let mut rows: Vec<Vec<f64>> =
            map_samples.iter_rows().map(|r| r.to_vec()).collect();
        rows.extend(reference.iter_rows().map(|r| r.to_vec()));
        Matrix::from_rows(&rows)
    };
    let grid = DensityGrid::from_samples(&pooled, eval.grid_cells, eval.grid_margin)?;
    let kde_map = kde_density(map_samples, &kde_config(eval), &grid)?;
    let kde_ref = kde_density(reference, &kde_config(eval), &grid)?;
    let rel = relative_l2(&kde_map, &kde_ref)?;
    let kl = kl_grid(&kde_ref, &kde_map, eval.kl_floor)?;

    let take = |m: &Matrix, count: usize| -> Matrix {
        let idx: Vec<usize> = (0..m.rows().min(count)).collect();
        m.select_rows(&idx)
    };
    let mmd = mmd_squared(
        &take(map_samples, eval.mmd_subsample),
        &take(reference, eval.mmd_subsample),
        MmdBandwidth::Median,
    )?;

    let mut rows = vec![
        ("rel-l2".to_string(), rel),
        ("kl".to_string(), kl),
        ("mmd2".to_string(), mmd),
    ];
    for (c, m) in sample_moments(map_samples)?.iter().enumerate() {
        rows.push((format!("mean{}", c + 1), m.mean));
        rows.push((format!("var{}", c + 1), m.variance));
        rows.push((format!("skew{}", c + 1), m.skewness));
        rows.push((format!("kurt{}", c + 1), m.kurtosis));
    }
    Ok(rows)
}

/// Display scale conventions recorded in metric reports.
fn metric_scale(name: &str) -> f64 {
    if name == "rel-l2" {
        10.0
    } else if name == "kl" || name == "mmd2" {
        1000.0
    } else {
        1.0
    }
}

/// Mean and std per metric name across checkpoints, in first-seen order.
fn aggregate_rows(per_checkpoint: &[Vec<(String, f64)>]) -> Vec<MetricRow> {
    let mut order: Vec<String> = Vec::new();
    for rows in per_checkpoint {
        for (name, _) in rows {
            if !order.contains(name) {
                order.push(name.clone());
            }
        }
    }
    order
        .into_iter()
        .map(|name| {
            let values: Vec<f64> = per_checkpoint
                .iter()
                .flat_map(|rows| rows.iter().filter(|(n, _)| *n == name).map(|(_, v)| *v))
                .collect();
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let var = if values.len() > 1 {
                values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (values.len() - 1) as f64
            } else {
                0.0
            };
            MetricRow { metric: name, value: mean, std: var.sqrt(), scale: 1.0 }
        })
        .map(|mut r| {
            r.scale = metric_scale(&r.metric);
            r
        })
        .collect()
}

fn list_snapshot_dirs(ckpt_root: &Path) -> Result<Vec<PathBuf>> {
    let mut dirs: Vec<PathBuf> = std::fs::read_dir(ckpt_root)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| {
            p.is_dir()
                && p.file_name()
                    .and_then(|n| n.to_str())
                    .map(|n| n.starts_with("epoch_"))
                    .unwrap_or(false)
        })
        .collect();
    dirs.sort();
    if dirs.is_empty() {
        return Err(Error::Config(format!(
            "no epoch checkpoints under {}",
            ckpt_root.display()
        )));
    }
    Ok(dirs)
}

/// Reference conditional samples for the inference problems: a Metropolis
/// chain targeting the problem's posterior at x*. Returns the chain plus
/// the manifest describing it.
pub fn reference_posterior_chain(
    config: &ExperimentConfig,
    x_star: &[f64],
) -> Result<(Matrix, McmcManifest)> {
    let settings = &config.evaluate.mcmc;
    let log_post: Box<dyn Fn(&[f64]) -> f64> = match config.problem {
        Problem::Bod => {
            let xs: [f64; 5] = x_star
                .try_into()
                .map_err(|_| Error::Config("oxygen-demand x* must have 5 coordinates".into()))?;
            Box::new(move |rho: &[f64]| bod_log_posterior((rho[0], rho[1]), &xs))
        }
        Problem::Darcy => {
            let grid = darcy_grid(config);
            let xs = x_star.to_vec();
            Box::new(move |ab: &[f64]| {
                darcy_log_posterior((ab[0], ab[1]), &xs, &grid).unwrap_or(f64::NEG_INFINITY)
            })
        }
        other => {
            return Err(Error::Config(format!(
                "{} has no posterior reference chain",
                other.id()
            )))
        }
    };
    let initial = match config.problem {
        Problem::Bod => vec![0.0, 0.0],
        _ => vec![4.0, 14.0],
    };
    let proposal_std = match &settings.proposal_std {
        Some(s) => s.clone(),
        None => tune_proposal_std(&log_post, &initial, settings.seed)?,
    };
    let mcmc = McmcConfig {
        initial,
        proposal_std: proposal_std.clone(),
        chain_length: settings.chain_length,
        burn_in: settings.burn_in,
        seed: settings.seed,
    };
    let out = mcmc_sample(&log_post, &mcmc)?;
    let manifest = McmcManifest {
        seed: settings.seed,
        proposal_std,
        acceptance_rate: out.acceptance_rate,
        chain_length: settings.chain_length,
        burn_in: settings.burn_in,
    };
    Ok((out.chain, manifest))
}

/// Runs the reference chains for every conditioning point and writes
/// them as CSV plus manifests.
pub fn cmd_mcmc(config: &ExperimentConfig) -> Result<()> {
    let dir = &config.output_dir;
    let _lock = Lockfile::acquire(dir)?;
    let mcmc_dir = dir.join("mcmc");
    std::fs::create_dir_all(&mcmc_dir)?;
    for (i, x_star) in config.resolved_x_star()?.iter().enumerate() {
        let (chain, manifest) = reference_posterior_chain(config, x_star)?;
        save_chain_csv(&mcmc_dir.join(format!("chain_{i}.csv")), &chain)?;
        std::fs::write(
            mcmc_dir.join(format!("chain_{i}_manifest.json")),
            serde_json::to_string_pretty(&manifest)?,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct EvaluateManifest<'a> {
    config: &'a ExperimentConfig,
    checkpoints: Vec<String>,
    x_star: Vec<Vec<f64>>,
}

/// Evaluates saved checkpoints: draws samples per checkpoint, computes
/// the configured metrics against the oracle or reference chain, and
/// reports mean (std) across checkpoints in `metrics.csv`.
pub fn cmd_evaluate(config: &ExperimentConfig, checkpoints: Option<&Path>) -> Result<()> {
    let dir = &config.output_dir;
    let _lock = Lockfile::acquire(dir)?;
    let default_root = dir.join("checkpoints");
    let ckpt_root = checkpoints.unwrap_or(&default_root);
    let snapshot_dirs = list_snapshot_dirs(ckpt_root)?;
    let maps: Vec<TransportMap> =
        snapshot_dirs.iter().map(|d| load_map(d)).collect::<Result<Vec<_>>>()?;
    let eval = &config.evaluate;

    let mut per_checkpoint: Vec<Vec<(String, f64)>> = Vec::new();
    match config.problem {
        Problem::Synthetic4 | Problem::Synthetic5 | Problem::Synthetic6 | Problem::Banana => {
            let ds = load_dataset(&dir.join("dataset.bin"))?;
            let x_data = ds.x_block();
            let truth =
                move |p: &[f64]| true_joint_density(config.problem, p).unwrap_or(0.0);
            for (i, map) in maps.iter().enumerate() {
                let samples = sample_joint(map, &x_data, eval.num_samples, eval.seed + i as u64)?;
                let (rel, kl) = joint_density_metrics(&samples, truth, eval)?;
                let mut rows =
                    vec![("rel-l2".to_string(), rel), ("kl".to_string(), kl)];
                // Conditional adequacy at the configured points for the
                // tanh family, where the conditional law is closed form.
                if config.problem != Problem::Banana {
                    let oracle = AnalyticConditional::new(config.problem)?;
                    for (j, xs) in config.resolved_x_star()?.iter().enumerate() {
                        let mut rng = derive_rng(eval.seed, 0x6b73 + (i * 97 + j) as u64);
                        let ys =
                            conditional_sample(map, xs, eval.num_samples.min(10_000), &mut rng)?;
                        let col: Vec<f64> = (0..ys.rows()).map(|r| ys.get(r, 0)).collect();
                        if oracle.is_degenerate_at(xs[0]) {
                            continue;
                        }
                        let d = crate::oracles::ks_statistic(&col, |y| {
                            oracle.conditional_cdf(xs[0], y)
                        });
                        rows.push((format!("ks-x{j}"), d));
                    }
                }
                per_checkpoint.push(rows);
            }
        }
        Problem::Bod | Problem::Darcy => {
            let points = config.resolved_x_star()?;
            for (j, x_star) in points.iter().enumerate() {
                let (chain, manifest) = reference_posterior_chain(config, x_star)?;
                let mcmc_dir = dir.join("mcmc");
                std::fs::create_dir_all(&mcmc_dir)?;
                save_chain_csv(&mcmc_dir.join(format!("chain_{j}.csv")), &chain)?;
                std::fs::write(
                    mcmc_dir.join(format!("chain_{j}_manifest.json")),
                    serde_json::to_string_pretty(&manifest)?,
                )?;
                for (i, map) in maps.iter().enumerate() {
                    let mut rng = derive_rng(eval.seed, (i * 1009 + j) as u64);
                    let samples = conditional_sample(map, x_star, eval.num_samples, &mut rng)?;
                    let rows = conditional_metrics_vs_reference(&samples, &chain, eval)?
                        .into_iter()
                        .map(|(name, v)| (format!("{name}-x{j}"), v))
                        .collect();
                    per_checkpoint.push(rows);
                }
            }
        }
    }

    save_metrics_csv(&dir.join("metrics.csv"), &aggregate_rows(&per_checkpoint))?;

    // Conditional sample dump from the final checkpoint at each point.
    if let Some(map) = maps.last() {
        let hash = {
            let manifest = std::fs::read(snapshot_dirs.last().unwrap().join("f.net"))
                .or_else(|_| std::fs::read(snapshot_dirs.last().unwrap().join("c0.net")))?;
            crate::transport::fnv1a(&manifest)
        };
        for (j, x_star) in config.resolved_x_star()?.iter().enumerate() {
            if x_star.len() != map.n() {
                continue;
            }
            let mut rng = derive_rng(eval.seed, 0x73616d70 + j as u64);
            let samples =
                conditional_sample(map, x_star, eval.num_samples.min(10_000), &mut rng)?;
            export_conditional_csv(
                &dir.join(format!("samples_x{j}.csv")),
                x_star,
                hash,
                &samples,
            )?;
        }
    }

    let manifest = EvaluateManifest {
        config,
        checkpoints: snapshot_dirs.iter().map(|d| d.display().to_string()).collect(),
        x_star: config.resolved_x_star()?,
    };
    std::fs::write(dir.join("evaluate_manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

/// Dumps the analytic transport map on a (x, u) grid for side-by-side
/// comparison with trained maps.
pub fn cmd_kr_oracle(config: &ExperimentConfig) -> Result<()> {
    let dir = &config.output_dir;
    let _lock = Lockfile::acquire(dir)?;
    let oracle = AnalyticConditional::new(config.problem)?;
    let cells = config.evaluate.grid_cells;
    let path = dir.join("kr_map.csv");
    let mut out = String::from("x,u,y\n");
    for i in 0..cells {
        let x = -3.0 + 6.0 * (i as f64 + 0.5) / cells as f64;
        for j in 0..cells {
            let u = -3.0 + 6.0 * (j as f64 + 0.5) / cells as f64;
            let y = oracle.kr_map(x, u);
            out.push_str(&format!("{x},{u},{y}\n"));
        }
    }
    std::fs::write(path, out)?;
    Ok(())
}
