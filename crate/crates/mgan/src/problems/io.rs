//! Dataset persistence: CSV with an `x1..xn,y1..ym` header, an equivalent
//! binary format, and a JSON manifest recording how the data was made.

use super::JointDataset;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use serde::{Deserialize, Serialize};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

const BINARY_MAGIC: [u8; 4] = *b"MGDS";
const BINARY_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub problem: String,
    pub seed: u64,
    pub n_samples: usize,
    pub n: usize,
    pub m: usize,
    /// Extra generation parameters (grid resolution, column order, ...).
    #[serde(default)]
    pub params: serde_json::Value,
}

pub fn save_manifest(path: &Path, manifest: &DatasetManifest) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(manifest)?)?;
    Ok(())
}

fn header(n: usize, m: usize) -> String {
    let mut cols = Vec::with_capacity(n + m);
    for i in 1..=n {
        cols.push(format!("x{i}"));
    }
    for i in 1..=m {
        cols.push(format!("y{i}"));
    }
    cols.join(",")
}

pub fn save_csv(path: &Path, ds: &JointDataset) -> Result<()> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "{}", header(ds.n(), ds.m()))?;
    for r in 0..ds.len() {
        let row: Vec<String> = ds.joint().row(r).iter().map(|v| format!("{v}")).collect();
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

pub fn load_csv(path: &Path) -> Result<JointDataset> {
    let f = BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::Config(format!("{} is empty", path.display())))??;
    let names: Vec<&str> = head.split(',').collect();
    let n = names.iter().take_while(|c| c.starts_with('x')).count();
    let m = names.len() - n;
    if !names[n..].iter().all(|c| c.starts_with('y')) {
        return Err(Error::Config(format!("unrecognized CSV header {head:?}")));
    }
    let mut rows = Vec::new();
    for (ln, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| {
                    Error::Config(format!("bad number {tok:?} on data line {}", ln + 1))
                })
            })
            .collect::<Result<_>>()?;
        if row.len() != n + m {
            return Err(Error::Config(format!(
                "data line {} has {} fields, header promises {}",
                ln + 1,
                row.len(),
                n + m
            )));
        }
        rows.push(row);
    }
    JointDataset::new(n, m, Matrix::from_rows(&rows), "loaded".to_string(), 0)
}

pub fn save_binary(path: &Path, ds: &JointDataset) -> Result<()> {
    let mut f = BufWriter::new(std::fs::File::create(path)?);
    f.write_all(&BINARY_MAGIC)?;
    f.write_all(&BINARY_VERSION.to_le_bytes())?;
    f.write_all(&(ds.n() as u32).to_le_bytes())?;
    f.write_all(&(ds.m() as u32).to_le_bytes())?;
    f.write_all(&(ds.len() as u64).to_le_bytes())?;
    for &v in ds.joint().data() {
        f.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

pub fn load_binary(path: &Path) -> Result<JointDataset> {
    let mut f = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic)?;
    if magic != BINARY_MAGIC {
        return Err(Error::Config(format!(
            "bad dataset magic {magic:?} in {}",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    f.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != BINARY_VERSION {
        return Err(Error::Config(format!("unsupported dataset version {version}")));
    }
    f.read_exact(&mut u32buf)?;
    let n = u32::from_le_bytes(u32buf) as usize;
    f.read_exact(&mut u32buf)?;
    let m = u32::from_le_bytes(u32buf) as usize;
    let mut u64buf = [0u8; 8];
    f.read_exact(&mut u64buf)?;
    let rows = u64::from_le_bytes(u64buf) as usize;
    let mut data = Matrix::zeros(rows, n + m);
    let mut fbuf = [0u8; 8];
    for v in data.data_mut() {
        f.read_exact(&mut fbuf)?;
        *v = f64::from_le_bytes(fbuf);
    }
    JointDataset::new(n, m, data, "loaded".to_string(), 0)
}
