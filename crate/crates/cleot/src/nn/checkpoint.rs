//! Binary checkpoint format.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic   4 bytes  "CLNN"
//! count   u32      number of tensors
//! shapes  count * (u32 rows, u32 cols)
//! data    f64-LE stream, tensors concatenated row-major in shape order
//! ```
//!
//! Tensors are enumerated in layer order: Dense contributes `weight`
//! (`inputs x outputs`) and `bias` (`1 x outputs`); BatchNorm contributes
//! `gamma`, `beta`, `running_mean`, `running_var` (each `1 x n`). Loading
//! validates the shape header against the target network, so a checkpoint
//! only loads into the architecture that produced it.

use super::{DenseNet, Layer};
use crate::error::{Error, Result};
use std::io::{Read, Write};

const MAGIC: &[u8; 4] = b"CLNN";

fn tensor_views(net: &DenseNet) -> Vec<((usize, usize), Vec<f64>)> {
    let mut out = Vec::new();
    for layer in net.layers() {
        match layer {
            Layer::Dense { weight, bias, .. } => {
                out.push(((weight.rows(), weight.cols()), weight.as_slice().to_vec()));
                out.push(((1, bias.len()), bias.clone()));
            }
            Layer::BatchNorm { gamma, beta, running_mean, running_var, .. } => {
                out.push(((1, gamma.len()), gamma.clone()));
                out.push(((1, beta.len()), beta.clone()));
                out.push(((1, running_mean.len()), running_mean.clone()));
                out.push(((1, running_var.len()), running_var.clone()));
            }
            _ => {}
        }
    }
    out
}

/// Serialize all parameters and BatchNorm running statistics.
pub fn write_params(net: &DenseNet) -> Vec<u8> {
    let tensors = tensor_views(net);
    let mut buf = Vec::new();
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for ((rows, cols), _) in &tensors {
        buf.extend_from_slice(&(*rows as u32).to_le_bytes());
        buf.extend_from_slice(&(*cols as u32).to_le_bytes());
    }
    for (_, data) in &tensors {
        for v in data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    buf
}

/// Restore parameters and running statistics from [`write_params`] output.
///
/// The shape header must match `net` exactly.
pub fn read_params(net: &mut DenseNet, bytes: &[u8]) -> Result<()> {
    let loc = "checkpoint";
    let mut cursor = bytes;
    let mut magic = [0u8; 4];
    read_exact(&mut cursor, &mut magic, loc)?;
    if &magic != MAGIC {
        return Err(Error::parse(loc, "bad magic bytes (expected \"CLNN\")"));
    }
    let count = read_u32(&mut cursor, loc)? as usize;

    let expected = tensor_views(net);
    if count != expected.len() {
        return Err(Error::Shape(format!(
            "checkpoint has {count} tensors but the network has {}",
            expected.len()
        )));
    }
    let mut shapes = Vec::with_capacity(count);
    for i in 0..count {
        let rows = read_u32(&mut cursor, loc)? as usize;
        let cols = read_u32(&mut cursor, loc)? as usize;
        let want = expected[i].0;
        if (rows, cols) != want {
            return Err(Error::Shape(format!(
                "checkpoint tensor {i} is {rows}x{cols} but the network expects {}x{}",
                want.0, want.1
            )));
        }
        shapes.push((rows, cols));
    }

    let mut tensors = Vec::with_capacity(count);
    for &(rows, cols) in &shapes {
        let mut data = vec![0.0f64; rows * cols];
        for v in &mut data {
            let mut b = [0u8; 8];
            read_exact(&mut cursor, &mut b, loc)?;
            *v = f64::from_le_bytes(b);
        }
        tensors.push(data);
    }
    if !cursor.is_empty() {
        return Err(Error::parse(loc, format!("{} trailing bytes", cursor.len())));
    }

    let mut it = tensors.into_iter();
    for layer in net.layers_mut() {
        match layer {
            Layer::Dense { weight, bias, .. } => {
                weight.as_mut_slice().copy_from_slice(&it.next().unwrap());
                bias.copy_from_slice(&it.next().unwrap());
            }
            Layer::BatchNorm { gamma, beta, running_mean, running_var, .. } => {
                gamma.copy_from_slice(&it.next().unwrap());
                beta.copy_from_slice(&it.next().unwrap());
                running_mean.copy_from_slice(&it.next().unwrap());
                running_var.copy_from_slice(&it.next().unwrap());
            }
            _ => {}
        }
    }
    Ok(())
}

/// [`write_params`] to a file.
pub fn save_params(net: &DenseNet, path: &std::path::Path) -> Result<()> {
    let bytes = write_params(net);
    let mut file =
        std::fs::File::create(path).map_err(|e| Error::io(path.display().to_string(), e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path.display().to_string(), e))?;
    Ok(())
}

/// [`read_params`] from a file.
pub fn load_params(net: &mut DenseNet, path: &std::path::Path) -> Result<()> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path.display().to_string(), e))?;
    read_params(net, &bytes)
}

fn read_exact(cursor: &mut &[u8], buf: &mut [u8], loc: &str) -> Result<()> {
    if cursor.len() < buf.len() {
        return Err(Error::parse(loc, "truncated file"));
    }
    buf.copy_from_slice(&cursor[..buf.len()]);
    *cursor = &cursor[buf.len()..];
    Ok(())
}

fn read_u32(cursor: &mut &[u8], loc: &str) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(cursor, &mut b, loc)?;
    Ok(u32::from_le_bytes(b))
}
