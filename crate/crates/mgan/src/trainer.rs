//! The alternating min-max training loop.
//!
//! Each update draws three independent minibatches: one data batch z from
//! the training set (shuffled without replacement, reshuffled when a pass
//! completes) and two reference batches w, w' (drawn with replacement).
//! The discriminator minimizes its GAN loss against (z, T(w)); the
//! generator minimizes its GAN loss on T(w) minus lambda times the
//! average monotonicity inner product over the pairs (w, w'). The
//! least-squares flavor alternates one-for-one sharing a single triple
//! per step; the gradient-penalty critic takes five updates (each with a
//! fresh triple) per generator update.
//!
//! An epoch is floor(N / batch_size) generator updates. The run is fully
//! deterministic given the seed.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::losses::{
    draw_alphas, generator_loss_and_grad_wrt_fake, lsgan_discriminator_grad, wgan_gp_critic_grad,
    LossConfig, LossKind,
};
use crate::nn::{adam_step, AdamState, DenseNetwork, ForwardCache, Gradients};
use crate::problems::JointDataset;
use crate::rngs::derive_rng;
use crate::transport::{
    monotonicity_probability, BlockTriangularMap, FullyTriangularMap, Map, MapKind,
    ReferenceSampler, Standardizer, TransportMap,
};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MapShape {
    Block,
    Triangular,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub loss: LossConfig,
    /// Monotonicity penalty weight; zero gives the plain conditional GAN.
    pub lambda: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Discriminator updates per generator update; defaults by loss kind.
    pub critic_updates: Option<usize>,
    pub seed: u64,
    pub generator_hidden: Vec<usize>,
    pub discriminator_hidden: Vec<usize>,
    pub map: MapShape,
    /// Output-coordinate ordering for the triangular shape.
    pub triangular_order: Option<Vec<usize>>,
    /// Standardize the training set before optimizing; generated samples
    /// are mapped back to original coordinates.
    pub normalize: bool,
    /// Keep per-epoch map snapshots for the final this-many epochs.
    pub snapshot_last: usize,
    /// Reference pairs per epoch for the monotonicity probability.
    pub mono_pairs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            loss: LossConfig::lsgan(),
            lambda: 0.01,
            batch_size: 100,
            epochs: 300,
            learning_rate: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            critic_updates: None,
            seed: 0,
            generator_hidden: vec![256, 512, 128],
            discriminator_hidden: vec![256, 512, 128],
            map: MapShape::Block,
            triangular_order: None,
            normalize: false,
            snapshot_last: 10,
            mono_pairs: 10_000,
        }
    }
}

impl TrainConfig {
    pub fn critic_updates(&self) -> usize {
        self.critic_updates.unwrap_or_else(|| self.loss.default_critic_updates())
    }

    pub fn validate(&self, dataset: &JointDataset) -> Result<()> {
        self.loss.validate()?;
        if self.lambda < 0.0 {
            return Err(Error::Config(format!(
                "penalty weight must be nonnegative, got {}",
                self.lambda
            )));
        }
        if self.batch_size < 2 {
            return Err(Error::Config("batch size must be at least 2 (the penalty pairs rows)".into()));
        }
        if self.batch_size > dataset.len() {
            return Err(Error::Config(format!(
                "batch size {} exceeds the dataset size {}",
                self.batch_size,
                dataset.len()
            )));
        }
        if self.epochs == 0 {
            return Err(Error::Config("need at least one epoch".into()));
        }
        if self.critic_updates() == 0 {
            return Err(Error::Config("need at least one critic update per step".into()));
        }
        if let Some(order) = &self.triangular_order {
            if order.len() != dataset.m() {
                return Err(Error::Config(format!(
                    "triangular order {:?} does not fit m = {}",
                    order,
                    dataset.m()
                )));
            }
        }
        Ok(())
    }

    /// Run label used in logs and file headers.
    pub fn label(&self) -> &'static str {
        if self.lambda == 0.0 {
            "cgan"
        } else {
            "mgan"
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub generator_loss: f64,
    pub discriminator_loss: f64,
    pub penalty: f64,
    pub monotonicity_probability: f64,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingHistory {
    pub lambda: f64,
    pub label: String,
    pub records: Vec<EpochRecord>,
}

#[derive(Debug)]
pub struct TrainOutput {
    pub map: TransportMap,
    pub discriminator: DenseNetwork,
    pub history: TrainingHistory,
    /// (epoch, map) snapshots for the final `snapshot_last` epochs,
    /// oldest first; the last entry equals the returned map.
    pub snapshots: Vec<(usize, TransportMap)>,
    pub generator_updates: usize,
    pub discriminator_updates: usize,
}

/// `history.csv` layout: a comment line with lambda and the run label,
/// then epoch,gen_loss,disc_loss,penalty,mono_prob,seconds rows.
pub fn save_history_csv(path: &Path, history: &TrainingHistory) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "# lambda={} label={}", history.lambda, history.label)?;
    writeln!(f, "epoch,gen_loss,disc_loss,penalty,mono_prob,seconds")?;
    for r in &history.records {
        writeln!(
            f,
            "{},{},{},{},{},{}",
            r.epoch,
            r.generator_loss,
            r.discriminator_loss,
            r.penalty,
            r.monotonicity_probability,
            r.seconds
        )?;
    }
    Ok(())
}

/// Re-estimates the monotonicity probability of a map from fresh
/// reference pairs; the per-epoch diagnostic record.
pub fn evaluate_epoch<M: Map + ?Sized>(
    map: &M,
    sampler: &mut ReferenceSampler,
    num_pairs: usize,
) -> Result<f64> {
    monotonicity_probability(map, sampler, num_pairs)
}

/// Shuffled pass over the data rows; reshuffles whenever fewer than a
/// full batch remains.
struct BatchStream {
    perm: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl BatchStream {
    fn new(n: usize, rng: ChaCha8Rng) -> Self {
        let mut s = BatchStream { perm: (0..n).collect(), cursor: 0, rng };
        s.perm.shuffle(&mut s.rng);
        s
    }

    fn next_batch(&mut self, data: &Matrix, k: usize) -> Matrix {
        if self.cursor + k > self.perm.len() {
            self.perm.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let idx = &self.perm[self.cursor..self.cursor + k];
        self.cursor += k;
        data.select_rows(idx)
    }
}

/// The generator's networks plus their optimizer states.
struct Generator {
    kind: MapKind,
    adams: Vec<AdamState>,
}

enum GenCache {
    Block(ForwardCache),
    Triangular(Vec<ForwardCache>),
}

impl Generator {
    fn init(config: &TrainConfig, n: usize, m: usize) -> Result<Self> {
        let kind = match config.map {
            MapShape::Block => MapKind::Block(BlockTriangularMap::init(
                n,
                m,
                &config.generator_hidden,
                derive_rng_seed(config.seed, 1),
            )?),
            MapShape::Triangular => {
                let order =
                    config.triangular_order.clone().unwrap_or_else(|| (0..m).collect());
                MapKind::Triangular(FullyTriangularMap::init(
                    n,
                    m,
                    &config.generator_hidden,
                    order,
                    derive_rng_seed(config.seed, 1),
                )?)
            }
        };
        let adams = match &kind {
            MapKind::Block(b) => vec![AdamState::new(
                b.net(),
                config.learning_rate,
                config.beta1,
                config.beta2,
            )],
            MapKind::Triangular(t) => (0..t.m())
                .map(|k| {
                    AdamState::new(t.component(k), config.learning_rate, config.beta1, config.beta2)
                })
                .collect(),
        };
        Ok(Generator { kind, adams })
    }

    fn n(&self) -> usize {
        match &self.kind {
            MapKind::Block(b) => b.n(),
            MapKind::Triangular(t) => t.n(),
        }
    }

    fn m(&self) -> usize {
        match &self.kind {
            MapKind::Block(b) => b.m(),
            MapKind::Triangular(t) => t.m(),
        }
    }

    /// F forward with caches kept for the backward pass.
    fn forward_cached(&self, batch: &Matrix) -> Result<(Matrix, GenCache)> {
        match &self.kind {
            MapKind::Block(b) => {
                let (out, cache) = b.net().forward_cached(batch)?;
                Ok((out, GenCache::Block(cache)))
            }
            MapKind::Triangular(t) => {
                let mut out = Matrix::zeros(batch.rows(), t.m());
                let mut caches = Vec::with_capacity(t.m());
                for k in 0..t.m() {
                    let input = t.component_input(batch, k);
                    let (o, c) = t.component(k).forward_cached(&input)?;
                    let col = t.order()[k];
                    for r in 0..batch.rows() {
                        out.set(r, col, o.get(r, 0));
                    }
                    caches.push(c);
                }
                Ok((out, GenCache::Triangular(caches)))
            }
        }
    }

    /// Full transport output [x | F(x, y)] from a reference batch.
    fn fake_full(&self, batch: &Matrix, f_out: &Matrix) -> Matrix {
        let n = self.n();
        let mut out = Matrix::zeros(batch.rows(), n + self.m());
        for r in 0..batch.rows() {
            out.row_mut(r)[..n].copy_from_slice(&batch.row(r)[..n]);
            out.row_mut(r)[n..].copy_from_slice(f_out.row(r));
        }
        out
    }

    /// Accumulates parameter gradients from upstream dLoss/dF for one
    /// forward cache.
    fn accumulate(&self, cache: &GenCache, upstream: &Matrix, grads: &mut [Gradients]) {
        match (&self.kind, cache) {
            (MapKind::Block(b), GenCache::Block(c)) => {
                b.net().backward_accumulate(c, upstream, &mut grads[0]);
            }
            (MapKind::Triangular(t), GenCache::Triangular(caches)) => {
                for k in 0..t.m() {
                    let col = t.order()[k];
                    let mut up = Matrix::zeros(upstream.rows(), 1);
                    for r in 0..upstream.rows() {
                        up.set(r, 0, upstream.get(r, col));
                    }
                    t.component(k).backward_accumulate(&caches[k], &up, &mut grads[k]);
                }
            }
            _ => unreachable!("cache kind always matches map kind"),
        }
    }

    fn zero_grads(&self) -> Vec<Gradients> {
        match &self.kind {
            MapKind::Block(b) => vec![Gradients::zeros_like(b.net())],
            MapKind::Triangular(t) => {
                (0..t.m()).map(|k| Gradients::zeros_like(t.component(k))).collect()
            }
        }
    }

    fn step(&mut self, grads: &[Gradients]) -> Result<()> {
        match &mut self.kind {
            MapKind::Block(b) => adam_step(&mut self.adams[0], b.net_mut(), &grads[0]),
            MapKind::Triangular(t) => {
                for k in 0..grads.len() {
                    adam_step(&mut self.adams[k], t.component_mut(k), &grads[k])?;
                }
                Ok(())
            }
        }
    }
}

fn derive_rng_seed(seed: u64, tag: u64) -> u64 {
    use rand::RngCore;
    derive_rng(seed, tag).next_u64()
}

/// Trains a transport map and discriminator on the dataset.
pub fn train(config: &TrainConfig, dataset: &JointDataset) -> Result<TrainOutput> {
    config.validate(dataset)?;
    let (n, m) = (dataset.n(), dataset.m());
    let d = n + m;

    let standardizer = if config.normalize { Some(Standardizer::fit(dataset.joint())) } else { None };
    let data = match &standardizer {
        Some(s) => s.normalize(dataset.joint()),
        None => dataset.joint().clone(),
    };
    let x_cols = data.columns(0, n);

    let mut generator = Generator::init(config, n, m)?;
    let mut disc_sizes = vec![d];
    disc_sizes.extend_from_slice(&config.discriminator_hidden);
    disc_sizes.push(1);
    let mut disc = DenseNetwork::init(&disc_sizes, derive_rng_seed(config.seed, 2))?;
    let mut disc_adam = AdamState::new(&disc, config.learning_rate, config.beta1, config.beta2);

    let mut ref_sampler = ReferenceSampler::new(&x_cols, m, derive_rng(config.seed, 3))?;
    let mut mono_sampler = ReferenceSampler::new(&x_cols, m, derive_rng(config.seed, 4))?;
    let mut data_stream = BatchStream::new(data.rows(), derive_rng(config.seed, 5));
    let mut alpha_rng = derive_rng(config.seed, 6);

    let k = config.batch_size;
    let steps_per_epoch = (data.rows() / k).max(1);
    let critic_ratio = config.critic_updates();
    let lambda = config.lambda;
    let kf = k as f64;

    let mut history = TrainingHistory {
        lambda,
        label: config.label().to_string(),
        records: Vec::with_capacity(config.epochs),
    };
    let mut snapshots: Vec<(usize, TransportMap)> = Vec::new();
    let mut generator_updates = 0usize;
    let mut discriminator_updates = 0usize;

    let bad = |what: &str, v: f64| Error::Numerical(format!("{what} became {v}"));
    // Numerical failures surface with the epoch and step they occurred in.
    let ctx = |e: Error, epoch: usize, step: usize| match e {
        Error::Numerical(msg) => {
            Error::Numerical(format!("{msg} (epoch {epoch}, step {step})"))
        }
        other => other,
    };

    for epoch in 0..config.epochs {
        let t0 = Instant::now();
        let mut gen_loss_sum = 0.0;
        let mut disc_loss_sum = 0.0;
        let mut disc_loss_count = 0usize;
        let mut penalty_sum = 0.0;

        for step in 0..steps_per_epoch {
            (|| -> Result<()> {
                // Shared triple for the one-for-one schedule; the critic
                // draws its own fresh triples when it updates more often.
                let (w, wp, fake_w, cache_w) = if config.loss.kind == LossKind::Lsgan {
                    let z = data_stream.next_batch(&data, k);
                    let w = ref_sampler.sample(k)?;
                    let wp = ref_sampler.sample(k)?;
                    let (f_out, cache) = generator.forward_cached(&w)?;
                    let fake = generator.fake_full(&w, &f_out);
                    let (dl, dgrads) = lsgan_discriminator_grad(&disc, &z, &fake)?;
                    if !dl.is_finite() {
                        return Err(bad("discriminator loss", dl));
                    }
                    adam_step(&mut disc_adam, &mut disc, &dgrads)?;
                    discriminator_updates += 1;
                    disc_loss_sum += dl;
                    disc_loss_count += 1;
                    (w, wp, fake, cache)
                } else {
                    for _ in 0..critic_ratio {
                        let z = data_stream.next_batch(&data, k);
                        let w = ref_sampler.sample(k)?;
                        let _wp = ref_sampler.sample(k)?;
                        let (f_out, _) = generator.forward_cached(&w)?;
                        let fake = generator.fake_full(&w, &f_out);
                        let alphas = draw_alphas(k, &mut alpha_rng);
                        let (dl, dgrads) =
                            wgan_gp_critic_grad(&disc, &z, &fake, config.loss.gamma, &alphas)?;
                        if !dl.is_finite() {
                            return Err(bad("critic loss", dl));
                        }
                        adam_step(&mut disc_adam, &mut disc, &dgrads)?;
                        discriminator_updates += 1;
                        disc_loss_sum += dl;
                        disc_loss_count += 1;
                    }
                    let w = ref_sampler.sample(k)?;
                    let wp = ref_sampler.sample(k)?;
                    let (f_out, cache) = generator.forward_cached(&w)?;
                    let fake = generator.fake_full(&w, &f_out);
                    (w, wp, fake, cache)
                };

                // Generator update: GAN term plus the monotonicity penalty
                // over the pair of reference batches.
                let (gan_loss, d_fake) =
                    generator_loss_and_grad_wrt_fake(&config.loss, &disc, &fake_w)?;
                if !gan_loss.is_finite() {
                    return Err(bad("generator loss", gan_loss));
                }
                let (f_wp, cache_wp) = generator.forward_cached(&wp)?;

                // Penalty value: (1/k) sum_j [ |dx_j|^2 + <dF_j, dy_j> ]
                // where dx, dy split the reference difference w - w'.
                let f_w = fake_w.columns(n, d);
                let mut penalty = 0.0;
                let mut up_w = Matrix::zeros(k, m);
                let mut up_wp = Matrix::zeros(k, m);
                for j in 0..k {
                    let (wj, wpj) = (w.row(j), wp.row(j));
                    for c in 0..n {
                        let dx = wj[c] - wpj[c];
                        penalty += dx * dx / kf;
                    }
                    for c in 0..m {
                        let dy = wj[n + c] - wpj[n + c];
                        let df = f_w.get(j, c) - f_wp.get(j, c);
                        penalty += df * dy / kf;
                        // d(objective)/dF: the generator minimizes
                        // gan_loss - lambda * penalty.
                        let g = lambda * dy / kf;
                        up_w.set(j, c, d_fake.get(j, n + c) - g);
                        up_wp.set(j, c, g);
                    }
                }
                if !penalty.is_finite() {
                    return Err(bad("monotonicity penalty", penalty));
                }

                let mut grads = generator.zero_grads();
                generator.accumulate(&cache_w, &up_w, &mut grads);
                generator.accumulate(&cache_wp, &up_wp, &mut grads);
                generator.step(&grads)?;
                generator_updates += 1;

                gen_loss_sum += gan_loss;
                penalty_sum += penalty;
                Ok(())
            })()
            .map_err(|e| ctx(e, epoch, step))?;
        }

        let mono = evaluate_epoch(&generator.kind, &mut mono_sampler, config.mono_pairs)?;
        history.records.push(EpochRecord {
            epoch,
            generator_loss: gen_loss_sum / steps_per_epoch as f64,
            discriminator_loss: disc_loss_sum / disc_loss_count.max(1) as f64,
            penalty: penalty_sum / steps_per_epoch as f64,
            monotonicity_probability: mono,
            seconds: t0.elapsed().as_secs_f64(),
        });

        if epoch + config.snapshot_last.min(config.epochs) >= config.epochs {
            snapshots.push((
                epoch,
                TransportMap::new(generator.kind.clone(), standardizer.clone()),
            ));
        }
    }

    Ok(TrainOutput {
        map: TransportMap::new(generator.kind, standardizer),
        discriminator: disc,
        history,
        snapshots,
        generator_updates,
        discriminator_updates,
    })
}
