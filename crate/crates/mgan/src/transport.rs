//! Block-triangular generators, reference sampling, monotonicity
//! diagnostics, and conditional sampling.
//!
//! A transport map here sends z = (x, y) to (x, F(x, y)): the identity on
//! the conditioning block and a learned network on the output block. When
//! such a map pushes the reference (data x-marginal times N(0, I_m)) onto
//! the joint law and is monotone, F(x*, .) pushes N(0, I_m) onto the
//! conditional law of y given x = x*.

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::nn::{read_network, write_network, DenseNetwork};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

/// Full-space map z in R^d -> R^d. Implemented by the trained transport
/// maps and by hand-built analytic maps in tests and oracles.
pub trait Map {
    fn dim(&self) -> usize;
    fn apply(&self, z: &Matrix) -> Result<Matrix>;
}

/// Anything that can push (x*, u) batches to y samples.
pub trait ConditionalMap {
    /// Dimension n of the conditioning block.
    fn input_dim(&self) -> usize;
    /// Dimension m of the reference noise / output block.
    fn noise_dim(&self) -> usize;
    /// Maps a (rows, n + m) batch of (x, u) to a (rows, m) batch of y.
    fn push(&self, x_u: &Matrix) -> Result<Matrix>;
}

/// Wraps a plain function as a [`Map`]; used by tests and oracles for
/// analytic maps such as the identity or closed-form transports.
pub struct FnMap<F: Fn(&[f64], &mut [f64])> {
    dim: usize,
    f: F,
}

impl<F: Fn(&[f64], &mut [f64])> FnMap<F> {
    pub fn new(dim: usize, f: F) -> Self {
        FnMap { dim, f }
    }
}

impl<F: Fn(&[f64], &mut [f64])> Map for FnMap<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.dim {
            return Err(Error::Shape(format!(
                "map expects {} columns, got {}",
                self.dim,
                z.cols()
            )));
        }
        let mut out = Matrix::zeros(z.rows(), self.dim);
        for r in 0..z.rows() {
            (self.f)(z.row(r), out.row_mut(r));
        }
        Ok(out)
    }
}

/// Per-column affine standardization fitted on a training set. The map is
/// trained in standardized coordinates; the wrapper undoes it on output.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Matrix) -> Self {
        let mean = data.col_means();
        let std = data
            .col_stds()
            .into_iter()
            .map(|s| if s > 1e-12 { s } else { 1.0 })
            .collect();
        Standardizer { mean, std }
    }

    pub fn normalize(&self, data: &Matrix) -> Matrix {
        assert_eq!(data.cols(), self.mean.len());
        let mut out = data.clone();
        for r in 0..out.rows() {
            for (c, v) in out.row_mut(r).iter_mut().enumerate() {
                *v = (*v - self.mean[c]) / self.std[c];
            }
        }
        out
    }
}

/// Identity on x, dense network on (x, y).
#[derive(Debug, Clone)]
pub struct BlockTriangularMap {
    n: usize,
    m: usize,
    net: DenseNetwork,
}

impl BlockTriangularMap {
    /// The network must map n + m inputs to m outputs.
    pub fn new(n: usize, m: usize, net: DenseNetwork) -> Result<Self> {
        if net.input_dim() != n + m || net.output_dim() != m {
            return Err(Error::Shape(format!(
                "block map needs a ({} -> {}) network, got ({} -> {})",
                n + m,
                m,
                net.input_dim(),
                net.output_dim()
            )));
        }
        Ok(BlockTriangularMap { n, m, net })
    }

    /// Fresh map with the given hidden layer sizes.
    pub fn init(n: usize, m: usize, hidden: &[usize], seed: u64) -> Result<Self> {
        let mut sizes = vec![n + m];
        sizes.extend_from_slice(hidden);
        sizes.push(m);
        Self::new(n, m, DenseNetwork::init(&sizes, seed)?)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn net(&self) -> &DenseNetwork {
        &self.net
    }

    pub fn net_mut(&mut self) -> &mut DenseNetwork {
        &mut self.net
    }

    /// The F component: maps (rows, n + m) to (rows, m).
    pub fn f_batch(&self, xy: &Matrix) -> Result<Matrix> {
        self.net.forward(xy)
    }
}

impl Map for BlockTriangularMap {
    fn dim(&self) -> usize {
        self.n + self.m
    }

    fn apply(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, map expects {}",
                z.cols(),
                self.dim()
            )));
        }
        let f_out = self.f_batch(z)?;
        // The x block is copied verbatim: the identity holds bitwise.
        let mut out = Matrix::zeros(z.rows(), self.dim());
        for r in 0..z.rows() {
            out.row_mut(r)[..self.n].copy_from_slice(&z.row(r)[..self.n]);
            out.row_mut(r)[self.n..].copy_from_slice(f_out.row(r));
        }
        Ok(out)
    }
}

/// One scalar network per output coordinate, each seeing x and a prefix of
/// the y coordinates in a fixed ordering.
#[derive(Debug, Clone)]
pub struct FullyTriangularMap {
    n: usize,
    m: usize,
    /// components[k] maps (x, y[order[0]], ..., y[order[k]]) to the output
    /// coordinate order[k].
    components: Vec<DenseNetwork>,
    order: Vec<usize>,
}

impl FullyTriangularMap {
    pub fn new(
        n: usize,
        m: usize,
        components: Vec<DenseNetwork>,
        order: Vec<usize>,
    ) -> Result<Self> {
        if components.len() != m {
            return Err(Error::Shape(format!(
                "need {m} component networks, got {}",
                components.len()
            )));
        }
        if order.len() != m {
            return Err(Error::Config("order length must equal m".into()));
        }
        let mut seen = vec![false; m];
        for &o in &order {
            if o >= m || seen[o] {
                return Err(Error::Config(format!(
                    "order {order:?} is not a permutation of 0..{m}"
                )));
            }
            seen[o] = true;
        }
        for (k, c) in components.iter().enumerate() {
            if c.input_dim() != n + k + 1 || c.output_dim() != 1 {
                return Err(Error::Shape(format!(
                    "component {k} must map {} inputs to 1 output, got ({} -> {})",
                    n + k + 1,
                    c.input_dim(),
                    c.output_dim()
                )));
            }
        }
        Ok(FullyTriangularMap { n, m, components, order })
    }

    pub fn init(n: usize, m: usize, hidden: &[usize], order: Vec<usize>, seed: u64) -> Result<Self> {
        let components = (0..m)
            .map(|k| {
                let mut sizes = vec![n + k + 1];
                sizes.extend_from_slice(hidden);
                sizes.push(1);
                DenseNetwork::init(&sizes, seed.wrapping_add(k as u64 + 1))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, m, components, order)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn component(&self, k: usize) -> &DenseNetwork {
        &self.components[k]
    }

    pub fn component_mut(&mut self, k: usize) -> &mut DenseNetwork {
        &mut self.components[k]
    }

    /// Input batch for component k: x columns then y[order[0..=k]].
    pub fn component_input(&self, xy: &Matrix, k: usize) -> Matrix {
        let mut out = Matrix::zeros(xy.rows(), self.n + k + 1);
        for r in 0..xy.rows() {
            let src = xy.row(r);
            let dst = out.row_mut(r);
            dst[..self.n].copy_from_slice(&src[..self.n]);
            for (j, &o) in self.order[..=k].iter().enumerate() {
                dst[self.n + j] = src[self.n + o];
            }
        }
        out
    }

    pub fn f_batch(&self, xy: &Matrix) -> Result<Matrix> {
        let mut out = Matrix::zeros(xy.rows(), self.m);
        for k in 0..self.m {
            let input = self.component_input(xy, k);
            let comp_out = self.components[k].forward(&input)?;
            let col = self.order[k];
            for r in 0..xy.rows() {
                out.set(r, col, comp_out.get(r, 0));
            }
        }
        Ok(out)
    }
}

impl Map for FullyTriangularMap {
    fn dim(&self) -> usize {
        self.n + self.m
    }

    fn apply(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, map expects {}",
                z.cols(),
                self.dim()
            )));
        }
        let f_out = self.f_batch(z)?;
        let mut out = Matrix::zeros(z.rows(), self.dim());
        for r in 0..z.rows() {
            out.row_mut(r)[..self.n].copy_from_slice(&z.row(r)[..self.n]);
            out.row_mut(r)[self.n..].copy_from_slice(f_out.row(r));
        }
        Ok(out)
    }
}

/// The architecture of a trained generator.
#[derive(Debug, Clone)]
pub enum MapKind {
    Block(BlockTriangularMap),
    Triangular(FullyTriangularMap),
}

impl Map for MapKind {
    fn dim(&self) -> usize {
        match self {
            MapKind::Block(b) => b.dim(),
            MapKind::Triangular(t) => t.dim(),
        }
    }

    fn apply(&self, z: &Matrix) -> Result<Matrix> {
        match self {
            MapKind::Block(b) => b.apply(z),
            MapKind::Triangular(t) => t.apply(z),
        }
    }
}

/// A trained transport map plus the standardization it was trained under.
/// All public operations are in original data coordinates; the x block
/// passes through bitwise untouched.
#[derive(Debug, Clone)]
pub struct TransportMap {
    kind: MapKind,
    standardizer: Option<Standardizer>,
}

impl TransportMap {
    pub fn new(kind: MapKind, standardizer: Option<Standardizer>) -> Self {
        TransportMap { kind, standardizer }
    }

    pub fn kind(&self) -> &MapKind {
        &self.kind
    }

    pub fn kind_mut(&mut self) -> &mut MapKind {
        &mut self.kind
    }

    pub fn standardizer(&self) -> Option<&Standardizer> {
        self.standardizer.as_ref()
    }

    pub fn n(&self) -> usize {
        match &self.kind {
            MapKind::Block(b) => b.n(),
            MapKind::Triangular(t) => t.n(),
        }
    }

    pub fn m(&self) -> usize {
        match &self.kind {
            MapKind::Block(b) => b.m(),
            MapKind::Triangular(t) => t.m(),
        }
    }

    fn f_trained(&self, xy: &Matrix) -> Result<Matrix> {
        match &self.kind {
            MapKind::Block(b) => b.f_batch(xy),
            MapKind::Triangular(t) => t.f_batch(xy),
        }
    }

    /// F in original coordinates: standardize the x block, run the trained
    /// network, undo the y standardization on the way out.
    fn f_original(&self, x_u: &Matrix) -> Result<Matrix> {
        let n = self.n();
        let m = self.m();
        match &self.standardizer {
            None => self.f_trained(x_u),
            Some(s) => {
                let mut inp = x_u.clone();
                for r in 0..inp.rows() {
                    let row = inp.row_mut(r);
                    for c in 0..n {
                        row[c] = (row[c] - s.mean[c]) / s.std[c];
                    }
                }
                let mut y = self.f_trained(&inp)?;
                for r in 0..y.rows() {
                    let row = y.row_mut(r);
                    for c in 0..m {
                        row[c] = s.mean[n + c] + s.std[n + c] * row[c];
                    }
                }
                Ok(y)
            }
        }
    }
}

impl Map for TransportMap {
    fn dim(&self) -> usize {
        self.n() + self.m()
    }

    fn apply(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, map expects {}",
                z.cols(),
                self.dim()
            )));
        }
        let n = self.n();
        let y = self.f_original(z)?;
        let mut out = Matrix::zeros(z.rows(), self.dim());
        for r in 0..z.rows() {
            out.row_mut(r)[..n].copy_from_slice(&z.row(r)[..n]);
            out.row_mut(r)[n..].copy_from_slice(y.row(r));
        }
        Ok(out)
    }
}

impl ConditionalMap for TransportMap {
    fn input_dim(&self) -> usize {
        self.n()
    }

    fn noise_dim(&self) -> usize {
        self.m()
    }

    fn push(&self, x_u: &Matrix) -> Result<Matrix> {
        if x_u.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "batch has {} columns, map expects {}",
                x_u.cols(),
                self.dim()
            )));
        }
        self.f_original(x_u)
    }
}

/// Draws reference pairs: x~ resampled with replacement from the dataset
/// x-marginal, y~ standard normal, rows independent.
pub struct ReferenceSampler<'a> {
    x_data: &'a Matrix,
    m: usize,
    rng: ChaCha8Rng,
}

impl<'a> ReferenceSampler<'a> {
    pub fn new(x_data: &'a Matrix, m: usize, rng: ChaCha8Rng) -> Result<Self> {
        if x_data.rows() == 0 {
            return Err(Error::Config("reference sampler needs a non-empty dataset".into()));
        }
        Ok(ReferenceSampler { x_data, m, rng })
    }

    pub fn dim(&self) -> usize {
        self.x_data.cols() + self.m
    }

    pub fn sample(&mut self, batch_size: usize) -> Result<Matrix> {
        if batch_size == 0 {
            return Err(Error::Contract("batch_size must be at least 1".into()));
        }
        let n = self.x_data.cols();
        let rows = self.x_data.rows();
        let mut out = Matrix::zeros(batch_size, n + self.m);
        for r in 0..batch_size {
            let idx = self.rng.gen_range(0..rows);
            out.row_mut(r)[..n].copy_from_slice(self.x_data.row(idx));
            for c in 0..self.m {
                let g: f64 = self.rng.sample(StandardNormal);
                out.row_mut(r)[n + c] = g;
            }
        }
        Ok(out)
    }
}

/// Monte Carlo estimate of the average monotonicity inner product over
/// elementwise-paired reference batches:
/// (1/k) sum_j <T(w_j) - T(w'_j), w_j - w'_j>.
///
/// The trainer subtracts lambda times this value from the generator
/// objective.
pub fn monotonicity_penalty<M: Map + ?Sized>(map: &M, w: &Matrix, wp: &Matrix) -> Result<f64> {
    if w.rows() != wp.rows() || w.cols() != wp.cols() {
        return Err(Error::Contract(format!(
            "penalty batches must pair up: ({}, {}) vs ({}, {})",
            w.rows(),
            w.cols(),
            wp.rows(),
            wp.cols()
        )));
    }
    if w.rows() == 0 {
        return Err(Error::Contract("penalty needs at least one pair".into()));
    }
    let tw = map.apply(w)?;
    let twp = map.apply(wp)?;
    let mut acc = 0.0;
    for j in 0..w.rows() {
        let (a, b) = (tw.row(j), twp.row(j));
        let (u, v) = (w.row(j), wp.row(j));
        let mut s = 0.0;
        for c in 0..w.cols() {
            s += (a[c] - b[c]) * (u[c] - v[c]);
        }
        acc += s;
    }
    Ok(acc / w.rows() as f64)
}

/// Fraction of independent reference pairs on which the map is monotone,
/// i.e. the inner product above is strictly positive.
pub fn monotonicity_probability<M: Map + ?Sized>(
    map: &M,
    sampler: &mut ReferenceSampler,
    num_pairs: usize,
) -> Result<f64> {
    if num_pairs == 0 {
        return Err(Error::Contract("num_pairs must be at least 1".into()));
    }
    let w = sampler.sample(num_pairs)?;
    let wp = sampler.sample(num_pairs)?;
    let tw = map.apply(&w)?;
    let twp = map.apply(&wp)?;
    let mut hits = 0usize;
    for j in 0..num_pairs {
        let (a, b) = (tw.row(j), twp.row(j));
        let (u, v) = (w.row(j), wp.row(j));
        let mut s = 0.0;
        for c in 0..w.cols() {
            s += (a[c] - b[c]) * (u[c] - v[c]);
        }
        if s > 0.0 {
            hits += 1;
        }
    }
    Ok(hits as f64 / num_pairs as f64)
}

/// Draws `num_samples` conditional samples y_i = F(x*, u_i), u_i ~ N(0, I_m).
pub fn conditional_sample<M: ConditionalMap + ?Sized>(
    map: &M,
    x_star: &[f64],
    num_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<Matrix> {
    if x_star.len() != map.input_dim() {
        return Err(Error::Shape(format!(
            "x* has {} coordinates, map conditions on {}",
            x_star.len(),
            map.input_dim()
        )));
    }
    let n = map.input_dim();
    let m = map.noise_dim();
    let mut batch = Matrix::zeros(num_samples, n + m);
    for r in 0..num_samples {
        batch.row_mut(r)[..n].copy_from_slice(x_star);
        for c in 0..m {
            let g: f64 = rng.sample(StandardNormal);
            batch.row_mut(r)[n + c] = g;
        }
    }
    map.push(&batch)
}

/// 64-bit FNV-1a; used to stamp sample exports with a checkpoint identity.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Writes conditional samples as CSV: a comment line with x* and the
/// checkpoint hash, a `y1,...,ym` header, one sample per row.
pub fn export_conditional_csv(
    path: &Path,
    x_star: &[f64],
    checkpoint_hash: u64,
    samples: &Matrix,
) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    let xs: Vec<String> = x_star.iter().map(|v| format!("{v}")).collect();
    writeln!(f, "# x_star=[{}] checkpoint={checkpoint_hash:016x}", xs.join(","))?;
    let header: Vec<String> = (1..=samples.cols()).map(|i| format!("y{i}")).collect();
    writeln!(f, "{}", header.join(","))?;
    for r in 0..samples.rows() {
        let row: Vec<String> = samples.row(r).iter().map(|v| format!("{v}")).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct MapManifest {
    kind: String,
    n: usize,
    m: usize,
    #[serde(default)]
    order: Vec<usize>,
    standardizer: Option<Standardizer>,
    networks: Vec<String>,
}

/// Saves a map as one binary checkpoint per network plus a small JSON
/// manifest tying them together. Returns the FNV-1a hash of the
/// concatenated network bytes.
pub fn save_map(dir: &Path, map: &TransportMap) -> Result<u64> {
    std::fs::create_dir_all(dir)?;
    let mut all_bytes = Vec::new();
    let (kind, order, nets): (&str, Vec<usize>, Vec<&DenseNetwork>) = match map.kind() {
        MapKind::Block(b) => ("block", vec![], vec![b.net()]),
        MapKind::Triangular(t) => (
            "triangular",
            t.order().to_vec(),
            (0..t.m()).map(|k| t.component(k)).collect(),
        ),
    };
    let mut names = Vec::new();
    for (i, net) in nets.iter().enumerate() {
        let name = if kind == "block" { "f.net".to_string() } else { format!("c{i}.net") };
        let mut bytes = Vec::new();
        write_network(net, &mut bytes)?;
        std::fs::write(dir.join(&name), &bytes)?;
        all_bytes.extend_from_slice(&bytes);
        names.push(name);
    }
    let manifest = MapManifest {
        kind: kind.to_string(),
        n: map.n(),
        m: map.m(),
        order,
        standardizer: map.standardizer().cloned(),
        networks: names,
    };
    std::fs::write(dir.join("map.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok(fnv1a(&all_bytes))
}

pub fn load_map(dir: &Path) -> Result<TransportMap> {
    let manifest: MapManifest =
        serde_json::from_str(&std::fs::read_to_string(dir.join("map.json"))?)?;
    let mut nets = Vec::new();
    for name in &manifest.networks {
        let bytes = std::fs::read(dir.join(name))?;
        nets.push(read_network(&mut bytes.as_slice())?);
    }
    let kind = match manifest.kind.as_str() {
        "block" => {
            if nets.len() != 1 {
                return Err(Error::Config("block map manifest must list one network".into()));
            }
            MapKind::Block(BlockTriangularMap::new(manifest.n, manifest.m, nets.remove(0))?)
        }
        "triangular" => MapKind::Triangular(FullyTriangularMap::new(
            manifest.n,
            manifest.m,
            nets,
            manifest.order.clone(),
        )?),
        other => return Err(Error::Config(format!("unknown map kind {other:?}"))),
    };
    Ok(TransportMap::new(kind, manifest.standardizer))
}
