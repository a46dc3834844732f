//! Flat binary weight snapshots.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "MLPW" | version u32 | layer count u32
//! per layer: fan_in u32 | fan_out u32 | activation u8
//! per layer: fan_in·fan_out f64 weights (row-major), then fan_out f64 biases
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::activation::ActivationKind;
use super::network::{Layer, Mlp};
use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

pub const MAGIC: &[u8; 4] = b"MLPW";
pub const VERSION: u32 = 1;

pub fn write_snapshot<W: Write>(mlp: &Mlp, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(mlp.depth() as u32).to_le_bytes())?;
    for l in mlp.layers() {
        w.write_all(&(l.fan_in() as u32).to_le_bytes())?;
        w.write_all(&(l.fan_out() as u32).to_le_bytes())?;
        w.write_all(&[l.activation.code()])?;
    }
    for l in mlp.layers() {
        for v in l.weights.as_slice().iter().chain(&l.biases) {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot<R: Read>(mut r: R) -> Result<Mlp> {
    let mut magic = [0u8; 4];
    read_exact(&mut r, &mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Snapshot(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(Error::Snapshot(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)? as usize;
    let mut shapes = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let fan_in = read_u32(&mut r)? as usize;
        let fan_out = read_u32(&mut r)? as usize;
        let mut code = [0u8; 1];
        read_exact(&mut r, &mut code)?;
        let act = ActivationKind::from_code(code[0])
            .ok_or_else(|| Error::Snapshot(format!("unknown activation code {}", code[0])))?;
        shapes.push((fan_in, fan_out, act));
    }
    let mut layers = Vec::with_capacity(count);
    for (fan_in, fan_out, activation) in shapes {
        let weights = read_f64s(&mut r, fan_in * fan_out)?;
        let biases = read_f64s(&mut r, fan_out)?;
        layers.push(Layer {
            weights: DenseMatrix::new(fan_in, fan_out, weights)?,
            biases,
            activation,
        });
    }
    let mut rest = [0u8; 1];
    if r.read(&mut rest)? != 0 {
        return Err(Error::Snapshot("trailing bytes after last layer".into()));
    }
    Mlp::from_layers(layers)
}

pub fn save_snapshot(mlp: &Mlp, path: impl AsRef<Path>) -> Result<()> {
    write_snapshot(mlp, BufWriter::new(File::create(path)?))
}

pub fn load_snapshot(path: impl AsRef<Path>) -> Result<Mlp> {
    read_snapshot(BufReader::new(File::open(path)?))
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8]) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::Snapshot("file is truncated".into()),
        _ => e.into(),
    })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64s<R: Read>(r: &mut R, n: usize) -> Result<Vec<f64>> {
    let mut buf = vec![0u8; n * 8];
    read_exact(r, &mut buf)?;
    Ok(buf
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect())
}
