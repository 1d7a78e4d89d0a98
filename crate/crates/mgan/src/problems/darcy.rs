//! Variable-coefficient elliptic pressure solve on the unit square.
//!
//! -div(a grad p) = f on (0,1)^2 with p = 0 on the boundary, discretized
//! by 5-point finite differences on a uniform grid of G interior points
//! per axis, with harmonic averaging of the coefficient at cell faces.
//! The SPD system is solved by conjugate gradients with diagonal
//! preconditioning down to a relative residual tolerance.

use super::{row_rng, worker_threads, JointDataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Assignment of the unit square to the low/high permeability regions.
#[derive(Debug, Clone, Copy)]
pub enum Permeability {
    /// Region B is the closed disk of `radius` centered at (cx, cy);
    /// region A is the complement.
    Disk { cx: f64, cy: f64, radius: f64 },
    /// Region B is wherever the predicate holds.
    Custom(fn(f64, f64) -> bool),
}

impl Permeability {
    fn in_region_b(&self, sx: f64, sy: f64) -> bool {
        match self {
            Permeability::Disk { cx, cy, radius } => {
                let (dx, dy) = (sx - cx, sy - cy);
                dx * dx + dy * dy <= radius * radius
            }
            Permeability::Custom(f) => f(sx, sy),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DarcyGrid {
    /// Interior grid points per axis; h = 1 / (g + 1).
    pub g: usize,
    /// Relative residual tolerance for the linear solve.
    pub tolerance: f64,
    /// Constant source term.
    pub forcing: f64,
    pub region_b: Permeability,
}

impl Default for DarcyGrid {
    fn default() -> Self {
        DarcyGrid {
            g: 63,
            tolerance: 1e-10,
            forcing: 1.0,
            region_b: Permeability::Disk { cx: 0.5, cy: 0.5, radius: 0.25 },
        }
    }
}

impl DarcyGrid {
    pub fn with_resolution(g: usize) -> Self {
        DarcyGrid { g, ..Default::default() }
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.g + 1) as f64
    }
}

/// The sixteen observation locations: the interior 4x4 lattice
/// (i/5, j/5), i, j in 1..=4, in row-major (i, j) order.
pub const OBSERVATION_POINTS: [(f64, f64); 16] = {
    let mut pts = [(0.0, 0.0); 16];
    let mut i = 1;
    while i <= 4 {
        let mut j = 1;
        while j <= 4 {
            pts[(i - 1) * 4 + (j - 1)] = (i as f64 / 5.0, j as f64 / 5.0);
            j += 1;
        }
        i += 1;
    }
    pts
};

/// Nodal permeability: a(s) = A on region A, B on region B.
fn coeff_at(grid: &DarcyGrid, a: f64, b: f64, sx: f64, sy: f64) -> f64 {
    if grid.region_b.in_region_b(sx, sy) {
        b
    } else {
        a
    }
}

#[inline]
fn harmonic(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Solves the pressure equation for permeability values (A, B). Returns
/// the interior pressure field as a G x G matrix (row i = x index, column
/// j = y index).
pub fn darcy_solve(a_val: f64, b_val: f64, grid: &DarcyGrid) -> Result<Matrix> {
    if a_val <= 0.0 || b_val <= 0.0 {
        return Err(Error::Contract(format!(
            "permeability values must be positive, got A = {a_val}, B = {b_val}"
        )));
    }
    let g = grid.g;
    if g == 0 {
        return Err(Error::Config("grid needs at least one interior point".into()));
    }
    let h = grid.h();
    let n = g * g;
    let inv_h2 = 1.0 / (h * h);

    // Nodal coefficients on the (G+2)^2 grid including the boundary ring.
    let mut nodal = vec![0.0; (g + 2) * (g + 2)];
    for i in 0..g + 2 {
        for j in 0..g + 2 {
            let (sx, sy) = (i as f64 * h, j as f64 * h);
            nodal[i * (g + 2) + j] = coeff_at(grid, a_val, b_val, sx, sy);
        }
    }
    let at = |i: usize, j: usize| nodal[i * (g + 2) + j];

    // Face coefficients per interior node: east/west along x, north/south
    // along y. Interior node (i, j) sits at nodal index (i+1, j+1).
    let mut face_e = vec![0.0; n];
    let mut face_w = vec![0.0; n];
    let mut face_n = vec![0.0; n];
    let mut face_s = vec![0.0; n];
    let mut diag = vec![0.0; n];
    for i in 0..g {
        for j in 0..g {
            let idx = i * g + j;
            let c = at(i + 1, j + 1);
            face_e[idx] = harmonic(c, at(i + 2, j + 1));
            face_w[idx] = harmonic(c, at(i, j + 1));
            face_n[idx] = harmonic(c, at(i + 1, j + 2));
            face_s[idx] = harmonic(c, at(i + 1, j));
            diag[idx] = (face_e[idx] + face_w[idx] + face_n[idx] + face_s[idx]) * inv_h2;
        }
    }

    let matvec = |p: &[f64], out: &mut [f64]| {
        for i in 0..g {
            for j in 0..g {
                let idx = i * g + j;
                let mut v = diag[idx] * p[idx];
                if i > 0 {
                    v -= face_w[idx] * inv_h2 * p[idx - g];
                }
                if i + 1 < g {
                    v -= face_e[idx] * inv_h2 * p[idx + g];
                }
                if j > 0 {
                    v -= face_s[idx] * inv_h2 * p[idx - 1];
                }
                if j + 1 < g {
                    v -= face_n[idx] * inv_h2 * p[idx + 1];
                }
                out[idx] = v;
            }
        }
    };

    let rhs = vec![grid.forcing; n];
    let rhs_norm = (rhs.iter().map(|v| v * v).sum::<f64>()).sqrt();
    if rhs_norm == 0.0 {
        return Ok(Matrix::zeros(g, g));
    }

    // Jacobi-preconditioned conjugate gradients.
    let mut p_sol = vec![0.0; n];
    let mut r = rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&diag).map(|(ri, di)| ri / di).collect();
    let mut d = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    let mut ad = vec![0.0; n];
    let max_iters = 40 * (g + 1) * 10;
    let mut converged = false;
    for _ in 0..max_iters {
        matvec(&d, &mut ad);
        let dad: f64 = d.iter().zip(&ad).map(|(a, b)| a * b).sum();
        let alpha = rz / dad;
        for k in 0..n {
            p_sol[k] += alpha * d[k];
            r[k] -= alpha * ad[k];
        }
        let r_norm = (r.iter().map(|v| v * v).sum::<f64>()).sqrt();
        if r_norm <= grid.tolerance * rhs_norm {
            converged = true;
            break;
        }
        for k in 0..n {
            z[k] = r[k] / diag[k];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            d[k] = z[k] + beta * d[k];
        }
    }
    if !converged {
        let r_norm = (r.iter().map(|v| v * v).sum::<f64>()).sqrt();
        return Err(Error::Numerical(format!(
            "pressure solve did not reach tolerance {} (relative residual {})",
            grid.tolerance,
            r_norm / rhs_norm
        )));
    }
    Ok(Matrix::from_vec(g, g, p_sol))
}

/// Grid node index closest to a physical coordinate along one axis.
fn snap(grid: &DarcyGrid, s: f64) -> Result<usize> {
    let k = (s / grid.h()).round() as isize - 1;
    if k < 0 || k as usize >= grid.g {
        return Err(Error::Config(format!(
            "observation coordinate {s} has no interior grid node"
        )));
    }
    Ok(k as usize)
}

/// Reads the pressure field at the sixteen sensors (snapped to the nearest
/// grid node), optionally adding N(0, 1e-7) noise per entry.
pub fn darcy_observe(
    pressure: &Matrix,
    grid: &DarcyGrid,
    rng: &mut ChaCha8Rng,
    noisy: bool,
) -> Result<Vec<f64>> {
    if pressure.rows() != grid.g || pressure.cols() != grid.g {
        return Err(Error::Shape(format!(
            "pressure field is {}x{}, grid expects {}x{}",
            pressure.rows(),
            pressure.cols(),
            grid.g,
            grid.g
        )));
    }
    let mut out = Vec::with_capacity(16);
    for &(sx, sy) in &OBSERVATION_POINTS {
        let (i, j) = (snap(grid, sx)?, snap(grid, sy)?);
        let mut v = pressure.get(i, j);
        if noisy {
            let g: f64 = rng.sample(StandardNormal);
            v += 1e-7f64.sqrt() * g;
        }
        out.push(v);
    }
    Ok(out)
}

/// Noiseless observation of the pressure field for given (A, B).
pub fn darcy_forward(a_val: f64, b_val: f64, grid: &DarcyGrid) -> Result<Vec<f64>> {
    let pressure = darcy_solve(a_val, b_val, grid)?;
    let mut rng = row_rng(0, 0); // unused when noiseless
    darcy_observe(&pressure, grid, &mut rng, false)
}

/// Joint samples for the flow problem (n = 16, m = 2): y = (A, B) with
/// A ~ U(3, 5), B ~ U(12, 16); x = noisy sensor readings. Rows solve
/// independently and are distributed over worker threads; each row has
/// its own derived RNG stream, so the result does not depend on the
/// thread count.
pub fn gen_darcy(n_samples: usize, seed: u64, grid: &DarcyGrid) -> Result<JointDataset> {
    if n_samples == 0 {
        return Err(Error::Config("need at least one sample".into()));
    }
    let workers = worker_threads().min(n_samples);
    let gen_row = |row: usize| -> Result<Vec<f64>> {
        let mut rng = row_rng(seed, row);
        let a: f64 = rng.gen_range(3.0..5.0);
        let b: f64 = rng.gen_range(12.0..16.0);
        let pressure = darcy_solve(a, b, grid)?;
        let x = darcy_observe(&pressure, grid, &mut rng, true)?;
        let mut row_data = x;
        row_data.push(a);
        row_data.push(b);
        Ok(row_data)
    };

    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n_samples);
    if workers <= 1 {
        for row in 0..n_samples {
            rows.push(gen_row(row)?);
        }
    } else {
        let chunk = n_samples.div_ceil(workers);
        let results: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
            let mut handles = Vec::new();
            for w in 0..workers {
                let start = w * chunk;
                let end = ((w + 1) * chunk).min(n_samples);
                let gen_row = &gen_row;
                handles.push(scope.spawn(move || {
                    (start..end).map(gen_row).collect::<Result<Vec<_>>>()
                }));
            }
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        });
        for r in results {
            rows.extend(r?);
        }
    }
    JointDataset::new(16, 2, Matrix::from_rows(&rows), "darcy".to_string(), seed)
}
