//! Checkpoint files.
//!
//! Layout (little-endian after the magic): `b"NRLB"`, u16 version,
//! u32 input_dim, u32 hidden_dim, u32 num_classes, then f64 blocks
//! `w1` (input_dim x hidden_dim, row-major), `b1`, `w2` (hidden_dim x
//! num_classes, row-major), `b2`. See `docs/file-formats.md`.

use std::path::Path;

use ndarray::{Array1, Array2};

use super::SolverNetwork;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"NRLB";
pub const CHECKPOINT_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckpointHeader {
    pub version: u16,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub num_classes: usize,
}

pub fn encode_checkpoint(net: &SolverNetwork) -> Vec<u8> {
    let n_params: usize = net.params().iter().map(|p| p.len()).sum();
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * n_params);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    for d in [net.input_dim(), net.hidden_dim(), net.num_classes()] {
        out.extend_from_slice(&(d as u32).to_le_bytes());
    }
    for block in net.params() {
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn read_checkpoint_header(bytes: &[u8]) -> Result<CheckpointHeader> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::parse(
            bytes.len(),
            format!("truncated header: {} of {HEADER_LEN} bytes", bytes.len()),
        ));
    }
    if &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::parse(0, format!("bad magic {:?}, expected \"NRLB\"", &bytes[..4])));
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != CHECKPOINT_VERSION {
        return Err(Error::parse(
            4,
            format!("unsupported checkpoint version {version}, this build reads version {CHECKPOINT_VERSION}"),
        ));
    }
    let dim = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as usize;
    Ok(CheckpointHeader {
        version,
        input_dim: dim(6),
        hidden_dim: dim(10),
        num_classes: dim(14),
    })
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<SolverNetwork> {
    let h = read_checkpoint_header(bytes)?;
    if h.input_dim == 0 || h.hidden_dim == 0 || h.num_classes == 0 {
        return Err(Error::parse(6, "zero dimension in header"));
    }
    let sizes = [
        h.input_dim.checked_mul(h.hidden_dim),
        Some(h.hidden_dim),
        h.hidden_dim.checked_mul(h.num_classes),
        Some(h.num_classes),
    ];
    let mut pos = HEADER_LEN;
    let mut blocks = Vec::with_capacity(4);
    for (i, size) in sizes.into_iter().enumerate() {
        let size = size.ok_or_else(|| Error::parse(6, "parameter count overflows"))?;
        let end = size
            .checked_mul(8)
            .and_then(|b| b.checked_add(pos))
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| {
                Error::parse(
                    bytes.len(),
                    format!("truncated weight block {i}: need {size} values from byte {pos}"),
                )
            })?;
        let block: Vec<f64> = bytes[pos..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        if let Some(j) = block.iter().position(|v| !v.is_finite()) {
            return Err(Error::parse(pos + 8 * j, "non-finite weight"));
        }
        blocks.push(block);
        pos = end;
    }
    if pos != bytes.len() {
        return Err(Error::parse(pos, format!("{} trailing bytes", bytes.len() - pos)));
    }
    let b2 = Array1::from(blocks.pop().unwrap());
    let w2 = Array2::from_shape_vec((h.hidden_dim, h.num_classes), blocks.pop().unwrap())
        .expect("length checked");
    let b1 = Array1::from(blocks.pop().unwrap());
    let w1 = Array2::from_shape_vec((h.input_dim, h.hidden_dim), blocks.pop().unwrap())
        .expect("length checked");
    SolverNetwork::from_parts(w1, b1, w2, b2)
}

pub fn save_checkpoint(net: &SolverNetwork, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(net)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<SolverNetwork> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
