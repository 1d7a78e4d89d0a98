//! Flat binary network checkpoints.
//!
//! Layout: magic bytes `MGAN`, format version u32, layer count u32, layer
//! sizes u32 each, then per layer the row-major weights followed by the
//! biases, all 64-bit little-endian floats. The activation slope is not
//! stored; readers get the default.

use super::DenseNetwork;
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use std::io::{Read, Write};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MGAN";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn write_network<W: Write>(net: &DenseNetwork, w: &mut W) -> Result<()> {
    w.write_all(&CHECKPOINT_MAGIC)?;
    w.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
    w.write_all(&(net.layer_sizes().len() as u32).to_le_bytes())?;
    for &s in net.layer_sizes() {
        w.write_all(&(s as u32).to_le_bytes())?;
    }
    for l in 0..net.num_layers() {
        for &v in net.weight(l).data() {
            w.write_all(&v.to_le_bytes())?;
        }
        for &v in net.bias(l) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_network<R: Read>(r: &mut R) -> Result<DenseNetwork> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::Config(format!(
            "bad checkpoint magic {magic:?}, expected {CHECKPOINT_MAGIC:?}"
        )));
    }
    let version = read_u32(r)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::Config(format!("unsupported checkpoint version {version}")));
    }
    let count = read_u32(r)? as usize;
    if count < 2 || count > 1024 {
        return Err(Error::Config(format!("implausible layer count {count}")));
    }
    let mut layer_sizes = Vec::with_capacity(count);
    for _ in 0..count {
        layer_sizes.push(read_u32(r)? as usize);
    }
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    for l in 0..count - 1 {
        let (rows, cols) = (layer_sizes[l + 1], layer_sizes[l]);
        let mut w = Matrix::zeros(rows, cols);
        for v in w.data_mut() {
            *v = read_f64(r)?;
        }
        let mut b = vec![0.0; rows];
        for v in &mut b {
            *v = read_f64(r)?;
        }
        weights.push(w);
        biases.push(b);
    }
    DenseNetwork::from_parts(layer_sizes, weights, biases, super::DEFAULT_LEAKY_SLOPE)
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(f64::from_le_bytes(buf))
}
