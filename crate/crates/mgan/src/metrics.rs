//! Evaluation statistics: kernel density estimates, relative L2 and KL
//! divergence between gridded densities, the unbiased MMD two-sample
//! statistic, and per-column sample moments.

use crate::error::{Error, Result};
use crate::linalg::{sq_dist, Matrix};
use crate::rngs::derive_rng;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::io::Write as _;
use std::path::Path;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub min: f64,
    pub max: f64,
    pub cells: usize,
}

impl Axis {
    pub fn width(&self) -> f64 {
        (self.max - self.min) / self.cells as f64
    }

    /// Center of cell i.
    pub fn center(&self, i: usize) -> f64 {
        self.min + (i as f64 + 0.5) * self.width()
    }
}

/// Density values at the centers of a regular 1-D or 2-D grid of cells.
/// The Riemann sum of a proper density times the cell volume is close
/// to one when the grid covers the support.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityGrid {
    axes: Vec<Axis>,
    values: Vec<f64>,
}

impl DensityGrid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > 2 {
            return Err(Error::Config(format!(
                "grids are 1-D or 2-D, got {} axes",
                axes.len()
            )));
        }
        for ax in &axes {
            if ax.cells < 2 || !(ax.max > ax.min) {
                return Err(Error::Config(format!("bad axis {ax:?}")));
            }
        }
        let len = axes.iter().map(|a| a.cells).product();
        Ok(DensityGrid { axes, values: vec![0.0; len] })
    }

    /// Grid spanning the samples' bounding box expanded by `margin` on
    /// each side (fraction of the box width).
    pub fn from_samples(samples: &Matrix, cells_per_axis: usize, margin: f64) -> Result<Self> {
        if samples.rows() < 2 {
            return Err(Error::Contract("need at least two samples for a grid".into()));
        }
        let dim = samples.cols();
        let mut axes = Vec::with_capacity(dim);
        for c in 0..dim {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for r in 0..samples.rows() {
                lo = lo.min(samples.get(r, c));
                hi = hi.max(samples.get(r, c));
            }
            let pad = (hi - lo).max(1e-12) * margin;
            axes.push(Axis { min: lo - pad, max: hi + pad, cells: cells_per_axis });
        }
        DensityGrid::new(axes)
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(|a| a.width()).product()
    }

    /// Coordinates of the flat cell index (axis 0 outer, axis 1 inner).
    pub fn point(&self, flat: usize) -> Vec<f64> {
        match self.axes.len() {
            1 => vec![self.axes[0].center(flat)],
            2 => {
                let inner = self.axes[1].cells;
                vec![self.axes[0].center(flat / inner), self.axes[1].center(flat % inner)]
            }
            _ => unreachable!(),
        }
    }

    /// Fills the grid from a density function.
    pub fn fill_with(&mut self, f: impl Fn(&[f64]) -> f64) {
        for i in 0..self.values.len() {
            let p = self.point(i);
            self.values[i] = f(&p);
        }
    }

    /// Riemann sum times cell volume.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.cell_volume()
    }

    fn same_shape(&self, other: &DensityGrid) -> bool {
        self.axes == other.axes
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bandwidth {
    /// One bandwidth for every axis.
    Fixed(f64),
    /// N^(-1/(k+4)) times the per-axis standard deviation.
    Scott,
    /// 5-fold cross-validation over 20 log-spaced multiples of Scott
    /// in [0.1, 10], maximizing held-out average log density.
    CvFiveFold,
}

// In configs a bandwidth is a positive number, "scott", or "cv-5fold".
impl Serialize for Bandwidth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Bandwidth::Fixed(h) => s.serialize_f64(*h),
            Bandwidth::Scott => s.serialize_str("scott"),
            Bandwidth::CvFiveFold => s.serialize_str("cv-5fold"),
        }
    }
}

impl<'de> Deserialize<'de> for Bandwidth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        match &v {
            serde_json::Value::Number(n) => {
                let h = n.as_f64().ok_or_else(|| D::Error::custom("bad bandwidth number"))?;
                if h <= 0.0 {
                    return Err(D::Error::custom("bandwidth must be positive"));
                }
                Ok(Bandwidth::Fixed(h))
            }
            serde_json::Value::String(s) if s == "scott" => Ok(Bandwidth::Scott),
            serde_json::Value::String(s) if s == "cv-5fold" => Ok(Bandwidth::CvFiveFold),
            other => Err(D::Error::custom(format!(
                "bandwidth must be a positive number, \"scott\", or \"cv-5fold\", got {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct KdeConfig {
    pub bandwidth: Bandwidth,
    /// Samples used for bandwidth selection (CV cost is quadratic).
    pub cv_subsample: usize,
    pub seed: u64,
}

impl Default for KdeConfig {
    fn default() -> Self {
        KdeConfig { bandwidth: Bandwidth::Scott, cv_subsample: 10_000, seed: 0 }
    }
}

fn scott_bandwidths(samples: &Matrix) -> Result<Vec<f64>> {
    let k = samples.cols();
    let n = samples.rows() as f64;
    let factor = n.powf(-1.0 / (k as f64 + 4.0));
    let stds = samples.col_stds();
    if stds.iter().any(|&s| s <= 0.0) {
        return Err(Error::Numerical("degenerate samples: zero variance column".into()));
    }
    Ok(stds.iter().map(|s| factor * s).collect())
}

/// KDE values at arbitrary points by direct summation.
fn kde_at_points(train: &Matrix, h: &[f64], points: &Matrix) -> Vec<f64> {
    let k = train.cols();
    let norm = (0..k)
        .map(|c| 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h[c]))
        .product::<f64>()
        / train.rows() as f64;
    let inv2h2: Vec<f64> = h.iter().map(|hc| 0.5 / (hc * hc)).collect();
    let mut out = Vec::with_capacity(points.rows());
    for p in 0..points.rows() {
        let pt = points.row(p);
        let mut acc = 0.0;
        for t in 0..train.rows() {
            let tr = train.row(t);
            let mut e = 0.0;
            for c in 0..k {
                let d = pt[c] - tr[c];
                e += d * d * inv2h2[c];
            }
            if e < 40.0 {
                acc += (-e).exp();
            }
        }
        out.push(acc * norm);
    }
    out
}

/// Held-out mean log density, 5 folds, for one bandwidth candidate.
fn cv_score(samples: &Matrix, h: &[f64], perm: &[usize]) -> f64 {
    let folds = 5;
    let n = perm.len();
    let mut score = 0.0;
    for f in 0..folds {
        let held: Vec<usize> = perm
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds == f)
            .map(|(_, &r)| r)
            .collect();
        let train: Vec<usize> = perm
            .iter()
            .enumerate()
            .filter(|(i, _)| i % folds != f)
            .map(|(_, &r)| r)
            .collect();
        let train_m = samples.select_rows(&train);
        let held_m = samples.select_rows(&held);
        let dens = kde_at_points(&train_m, h, &held_m);
        score += dens.iter().map(|&d| d.max(1e-300).ln()).sum::<f64>();
    }
    score / n as f64
}

/// Resolves the configured bandwidth into per-axis values.
pub fn resolve_bandwidth(samples: &Matrix, config: &KdeConfig) -> Result<Vec<f64>> {
    match config.bandwidth {
        Bandwidth::Fixed(h) => {
            if h <= 0.0 {
                return Err(Error::Config(format!("bandwidth must be positive, got {h}")));
            }
            Ok(vec![h; samples.cols()])
        }
        Bandwidth::Scott => scott_bandwidths(samples),
        Bandwidth::CvFiveFold => {
            let scott = scott_bandwidths(samples)?;
            let n_cv = samples.rows().min(config.cv_subsample.max(10));
            let mut rng = derive_rng(config.seed, 0x6b6465);
            let mut perm: Vec<usize> = (0..samples.rows()).collect();
            perm.shuffle(&mut rng);
            perm.truncate(n_cv);
            let mut best = (f64::NEG_INFINITY, scott.clone());
            for i in 0..20 {
                // log-spaced multipliers from 0.1 to 10
                let mult = 10f64.powf(-1.0 + 2.0 * i as f64 / 19.0);
                let h: Vec<f64> = scott.iter().map(|s| mult * s).collect();
                let score = cv_score(samples, &h, &perm);
                if score > best.0 {
                    best = (score, h);
                }
            }
            Ok(best.1)
        }
    }
}

/// Gaussian product-kernel density estimate evaluated on a grid.
/// Each sample is scattered onto nearby cells only; the kernel tail
/// beyond 8.5 bandwidths (< 2e-16 of the peak) is dropped.
pub fn kde_density(samples: &Matrix, config: &KdeConfig, grid: &DensityGrid) -> Result<DensityGrid> {
    if samples.rows() < 2 {
        return Err(Error::Contract("KDE needs at least two samples".into()));
    }
    let k = samples.cols();
    if k != grid.dim() {
        return Err(Error::Shape(format!(
            "samples have {k} columns but the grid is {}-dimensional",
            grid.dim()
        )));
    }
    if !(1..=2).contains(&k) {
        return Err(Error::Config("grid KDE supports 1-D and 2-D samples".into()));
    }
    let h = resolve_bandwidth(samples, config)?;
    kde_scatter(samples, &h, grid)
}

fn kde_scatter(samples: &Matrix, h: &[f64], grid: &DensityGrid) -> Result<DensityGrid> {
    let k = samples.cols();
    let mut out = grid.clone();
    out.values_mut().fill(0.0);

    let cutoff = 8.5;
    // Per-axis Gaussian weights for one coordinate, over the cell range
    // the kernel reaches.
    let axis_weights = |ax: &Axis, s: f64, hc: f64| -> (usize, Vec<f64>) {
        let w = ax.width();
        let lo_f = ((s - cutoff * hc - ax.min) / w - 0.5).ceil();
        let hi_f = ((s + cutoff * hc - ax.min) / w - 0.5).floor();
        let lo = lo_f.max(0.0) as usize;
        let hi = (hi_f.max(0.0) as usize).min(ax.cells.saturating_sub(1));
        if lo > hi {
            return (0, Vec::new());
        }
        let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * hc);
        let weights = (lo..=hi)
            .map(|i| {
                let d = (ax.center(i) - s) / hc;
                norm * (-0.5 * d * d).exp()
            })
            .collect();
        (lo, weights)
    };

    let inv_n = 1.0 / samples.rows() as f64;
    match k {
        1 => {
            for r in 0..samples.rows() {
                let (lo, ws) = axis_weights(&out.axes[0], samples.get(r, 0), h[0]);
                for (i, wv) in ws.iter().enumerate() {
                    out.values[lo + i] += wv * inv_n;
                }
            }
        }
        2 => {
            let inner = out.axes[1].cells;
            for r in 0..samples.rows() {
                let (lo0, w0) = axis_weights(&out.axes[0], samples.get(r, 0), h[0]);
                let (lo1, w1) = axis_weights(&out.axes[1], samples.get(r, 1), h[1]);
                if w0.is_empty() || w1.is_empty() {
                    continue;
                }
                for (i, wi) in w0.iter().enumerate() {
                    let base = (lo0 + i) * inner + lo1;
                    let row = &mut out.values[base..base + w1.len()];
                    let scale = wi * inv_n;
                    for (v, wj) in row.iter_mut().zip(&w1) {
                        *v += scale * wj;
                    }
                }
            }
        }
        _ => unreachable!(),
    }
    Ok(out)
}

/// |est - truth|_2 / |truth|_2 over the shared grid.
pub fn relative_l2(estimated: &DensityGrid, truth: &DensityGrid) -> Result<f64> {
    if !estimated.same_shape(truth) {
        return Err(Error::Contract("relative L2 needs identical grids".into()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, t) in estimated.values.iter().zip(&truth.values) {
        num += (e - t) * (e - t);
        den += t * t;
    }
    if den == 0.0 {
        return Err(Error::Numerical("reference density is identically zero on the grid".into()));
    }
    Ok((num / den).sqrt())
}

/// KL(truth || est) by Riemann sum over cells where the truth is positive,
/// with the estimate floored to avoid log(0) in empty regions.
pub fn kl_grid(truth: &DensityGrid, estimated: &DensityGrid, floor: f64) -> Result<f64> {
    if !truth.same_shape(estimated) {
        return Err(Error::Contract("KL needs identical grids".into()));
    }
    if floor <= 0.0 {
        return Err(Error::Config("KL floor must be positive".into()));
    }
    let mut acc = 0.0;
    for (t, e) in truth.values.iter().zip(&estimated.values) {
        if *t > 0.0 {
            acc += t * (t / e.max(floor)).ln();
        }
    }
    Ok(acc * truth.cell_volume())
}

pub const DEFAULT_KL_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MmdBandwidth {
    Fixed(f64),
    /// Median pairwise distance of the pooled sample.
    Median,
}

impl Serialize for MmdBandwidth {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            MmdBandwidth::Fixed(h) => s.serialize_f64(*h),
            MmdBandwidth::Median => s.serialize_str("median"),
        }
    }
}

impl<'de> Deserialize<'de> for MmdBandwidth {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(d)?;
        match &v {
            serde_json::Value::Number(n) => {
                let h = n.as_f64().ok_or_else(|| D::Error::custom("bad bandwidth number"))?;
                if h <= 0.0 {
                    return Err(D::Error::custom("bandwidth must be positive"));
                }
                Ok(MmdBandwidth::Fixed(h))
            }
            serde_json::Value::String(s) if s == "median" => Ok(MmdBandwidth::Median),
            other => Err(D::Error::custom(format!(
                "MMD bandwidth must be a positive number or \"median\", got {other}"
            ))),
        }
    }
}

fn median_heuristic(a: &Matrix, b: &Matrix) -> f64 {
    let mut dists = Vec::new();
    let total = a.rows() + b.rows();
    let row = |i: usize| if i < a.rows() { a.row(i) } else { b.row(i - a.rows()) };
    for i in 0..total {
        for j in i + 1..total {
            dists.push(sq_dist(row(i), row(j)).sqrt());
        }
    }
    dists.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mid = dists.len() / 2;
    if dists.len() % 2 == 0 {
        0.5 * (dists[mid - 1] + dists[mid])
    } else {
        dists[mid]
    }
}

/// Unbiased U-statistic estimate of the squared MMD with the Gaussian
/// kernel exp(-|a-b|^2 / (2 sigma^2)).
pub fn mmd_squared(a: &Matrix, b: &Matrix, bandwidth: MmdBandwidth) -> Result<f64> {
    if a.cols() != b.cols() {
        return Err(Error::Contract(format!(
            "sample dimensions differ: {} vs {}",
            a.cols(),
            b.cols()
        )));
    }
    if a.rows() < 2 || b.rows() < 2 {
        return Err(Error::Contract("each sample set needs at least two rows".into()));
    }
    let sigma = match bandwidth {
        MmdBandwidth::Fixed(s) => {
            if s <= 0.0 {
                return Err(Error::Config(format!("MMD bandwidth must be positive, got {s}")));
            }
            s
        }
        MmdBandwidth::Median => {
            let m = median_heuristic(a, b);
            if m <= 0.0 {
                return Err(Error::Numerical("median pairwise distance is zero".into()));
            }
            m
        }
    };
    // Canonical argument order makes the floating-point summation
    // identical under swapping, so the statistic is exactly symmetric.
    let swap = match a.rows().cmp(&b.rows()) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => {
            let ab = a.data().iter().map(|v| v.to_bits());
            let bb = b.data().iter().map(|v| v.to_bits());
            ab.cmp(bb) == std::cmp::Ordering::Less
        }
    };
    let (a, b) = if swap { (b, a) } else { (a, b) };

    let inv = 0.5 / (sigma * sigma);
    let kernel_sum_within = |m: &Matrix| -> f64 {
        let n = m.rows();
        let mut acc = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                acc += (-sq_dist(m.row(i), m.row(j)) * inv).exp();
            }
        }
        2.0 * acc / (n as f64 * (n as f64 - 1.0))
    };
    let mut cross = 0.0;
    for i in 0..a.rows() {
        for j in 0..b.rows() {
            cross += (-sq_dist(a.row(i), b.row(j)) * inv).exp();
        }
    }
    cross /= a.rows() as f64 * b.rows() as f64;
    Ok(kernel_sum_within(a) + kernel_sum_within(b) - 2.0 * cross)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ColumnMoments {
    pub mean: f64,
    /// Unbiased variance.
    pub variance: f64,
    /// m3 / m2^(3/2) from central moments.
    pub skewness: f64,
    /// Non-excess kurtosis m4 / m2^2; a Gaussian gives 3.
    pub kurtosis: f64,
}

/// Per-column mean, variance, skewness, and kurtosis.
pub fn sample_moments(samples: &Matrix) -> Result<Vec<ColumnMoments>> {
    let n = samples.rows();
    if n < 4 {
        return Err(Error::Contract(format!("moments need at least 4 samples, got {n}")));
    }
    let nf = n as f64;
    let mut out = Vec::with_capacity(samples.cols());
    for c in 0..samples.cols() {
        let mean = (0..n).map(|r| samples.get(r, c)).sum::<f64>() / nf;
        let mut m2 = 0.0;
        let mut m3 = 0.0;
        let mut m4 = 0.0;
        for r in 0..n {
            let d = samples.get(r, c) - mean;
            let d2 = d * d;
            m2 += d2;
            m3 += d2 * d;
            m4 += d2 * d2;
        }
        m2 /= nf;
        m3 /= nf;
        m4 /= nf;
        if m2 <= 0.0 {
            return Err(Error::Contract(format!("column {c} is constant")));
        }
        out.push(ColumnMoments {
            mean,
            variance: m2 * nf / (nf - 1.0),
            skewness: m3 / m2.powf(1.5),
            kurtosis: m4 / (m2 * m2),
        });
    }
    Ok(out)
}

/// One row of a metrics report. The scale factor is the conventional
/// display multiplier for the metric and is recorded, never applied:
/// `value` is always the raw number.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MetricRow {
    pub metric: String,
    pub value: f64,
    pub std: f64,
    pub scale: f64,
}

pub fn save_metrics_csv(path: &Path, rows: &[MetricRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "metric,value,std,scale")?;
    for r in rows {
        writeln!(f, "{},{},{},{}", r.metric, r.value, r.std, r.scale)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests;

/// KDE with explicit per-axis bandwidths; the building block for
/// matched-smoothing comparisons where both sample sets must share one
/// bandwidth vector.
pub fn kde_density_with_bandwidths(
    samples: &Matrix,
    bandwidths: &[f64],
    grid: &DensityGrid,
) -> Result<DensityGrid> {
    if bandwidths.len() != samples.cols() || bandwidths.iter().any(|&h| h <= 0.0) {
        return Err(Error::Config("need one positive bandwidth per axis".into()));
    }
    kde_scatter(samples, bandwidths, grid)
}
