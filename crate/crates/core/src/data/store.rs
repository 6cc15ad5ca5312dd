//! Binary dataset files.
//!
//! Layout (little-endian): `b"DSET"`, u16 version, u32 rows, u32 cols,
//! u32 num_classes, `rows * cols` f64 features (row-major), `rows` u32 labels.

use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::{Error, Result};

pub const DATASET_MAGIC: &[u8; 4] = b"DSET";
pub const DATASET_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 4 * 3;

pub fn encode_dataset(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + ds.len() * (ds.dim() * 8 + 4));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    for v in [ds.len(), ds.dim(), ds.num_classes()] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    for v in ds.features().iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &l in ds.labels() {
        out.extend_from_slice(&(l as u32).to_le_bytes());
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::parse(
                self.pos,
                format!("truncated {what}: need {n} bytes, {} left", self.bytes.len() - self.pos),
            )),
        }
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn decode_dataset(bytes: &[u8]) -> Result<Dataset> {
    let mut cur = Cursor { bytes, pos: 0 };
    let magic = cur.take(4, "magic")?;
    if magic != DATASET_MAGIC {
        return Err(Error::parse(0, format!("bad magic {magic:?}, expected \"DSET\"")));
    }
    let vb = cur.take(2, "version")?;
    let version = u16::from_le_bytes([vb[0], vb[1]]);
    if version != DATASET_VERSION {
        return Err(Error::parse(
            4,
            format!("unsupported dataset version {version}, this build reads version {DATASET_VERSION}"),
        ));
    }
    let rows = cur.u32("row count")? as usize;
    let cols = cur.u32("column count")? as usize;
    let k = cur.u32("class count")? as usize;
    let n_values = rows
        .checked_mul(cols)
        .ok_or_else(|| Error::parse(6, "feature count overflows"))?;
    let feat_bytes = cur.take(n_values.saturating_mul(8), "features")?;
    let values: Vec<f64> = feat_bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let label_start = cur.pos;
    let label_bytes = cur.take(rows.saturating_mul(4), "labels")?;
    let labels: Vec<usize> = label_bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    if cur.pos != bytes.len() {
        return Err(Error::parse(cur.pos, format!("{} trailing bytes", bytes.len() - cur.pos)));
    }
    if let Some(i) = labels.iter().position(|&l| l >= k) {
        return Err(Error::parse(
            label_start + 4 * i,
            format!("label {} out of range for {k} classes", labels[i]),
        ));
    }
    let features = Array2::from_shape_vec((rows, cols), values).expect("length checked");
    Dataset::new(features, labels, k).map_err(|e| Error::parse(HEADER_LEN, e.to_string()))
}

pub fn save_dataset(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, encode_dataset(ds)).map_err(|e| Error::io(path, e))
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes)
}
