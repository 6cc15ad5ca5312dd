//! Big-endian IDX files as distributed for MNIST and Fashion-MNIST.
//!
//! Images: magic `0x00000803`, u32 count, u32 rows, u32 cols, then
//! `count * rows * cols` unsigned bytes. Labels: magic `0x00000801`, u32 count,
//! then `count` bytes. Payload length must match the header exactly.

use std::path::Path;

use ndarray::Array2;

use super::Dataset;
use crate::{Error, Matrix, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdxImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pub pixels: Vec<u8>,
}

impl IdxImages {
    /// Pixels scaled by 1/255, one flattened image per row.
    pub fn to_matrix(&self) -> Matrix {
        let values = self.pixels.iter().map(|&p| f64::from(p) / 255.0).collect();
        Array2::from_shape_vec((self.count, self.rows * self.cols), values)
            .expect("pixel count checked at parse time")
    }
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| {
            Error::parse(
                bytes.len(),
                format!("truncated header: need {} bytes", offset + 4),
            )
        })
}

fn check_magic(bytes: &[u8], expected: u32) -> Result<()> {
    let magic = read_u32(bytes, 0)?;
    if magic != expected {
        return Err(Error::parse(
            0,
            format!("bad magic 0x{magic:08x}, expected 0x{expected:08x}"),
        ));
    }
    Ok(())
}

fn check_payload(bytes: &[u8], header: usize, expected: Option<usize>) -> Result<()> {
    let expected = expected.ok_or_else(|| Error::parse(header, "payload size overflows"))?;
    let actual = bytes.len() - header;
    if actual < expected {
        return Err(Error::parse(
            bytes.len(),
            format!("truncated payload: header declares {expected} bytes, found {actual}"),
        ));
    }
    if actual > expected {
        return Err(Error::parse(
            header + expected,
            format!("{} trailing bytes after declared payload", actual - expected),
        ));
    }
    Ok(())
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages> {
    check_magic(bytes, IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    let size = count.checked_mul(rows).and_then(|v| v.checked_mul(cols));
    check_payload(bytes, 16, size)?;
    Ok(IdxImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    check_magic(bytes, LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    check_payload(bytes, 8, Some(count))?;
    Ok(bytes[8..].to_vec())
}

fn read_file(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<IdxImages> {
    let path = path.as_ref();
    parse_idx_images(&read_file(path)?).map_err(|e| with_path(e, path))
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    parse_idx_labels(&read_file(path)?).map_err(|e| with_path(e, path))
}

fn with_path(err: Error, path: &Path) -> Error {
    match err {
        Error::Parse { offset, message } => Error::Parse {
            offset,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    }
}

/// Load an image/label pair. The label space is `max(label) + 1`.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<Dataset> {
    let imgs = load_idx_images(images)?;
    let labels = load_idx_labels(labels)?;
    if imgs.count != labels.len() {
        return Err(Error::invalid(format!(
            "image/label count mismatch: {} images, {} labels",
            imgs.count,
            labels.len()
        )));
    }
    let labels: Vec<usize> = labels.into_iter().map(usize::from).collect();
    let k = labels.iter().max().map_or(1, |m| m + 1);
    Dataset::new(imgs.to_matrix(), labels, k)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn fixture() -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(&IMAGES_MAGIC.to_be_bytes());
        b.extend_from_slice(&2u32.to_be_bytes());
        b.extend_from_slice(&2u32.to_be_bytes());
        b.extend_from_slice(&2u32.to_be_bytes());
        b.extend_from_slice(&[0, 255, 128, 64, 1, 2, 3, 4]);
        b
    }

    #[test]
    fn parses_and_scales_fixture() {
        let imgs = parse_idx_images(&fixture()).unwrap();
        assert_eq!((imgs.count, imgs.rows, imgs.cols), (2, 2, 2));
        let m = imgs.to_matrix();
        assert_eq!(m.row(0).to_vec(), vec![0.0, 1.0, 128.0 / 255.0, 64.0 / 255.0]);
    }

    #[test]
    fn wrong_magic_names_expected() {
        let mut b = fixture();
        b[3] = 0x02;
        let err = parse_idx_images(&b).unwrap_err().to_string();
        assert!(err.contains("0x00000803"), "{err}");
        assert!(err.contains("byte 0"), "{err}");
    }

    #[test]
    fn truncated_and_trailing_payloads_rejected() {
        let b = fixture();
        assert!(parse_idx_images(&b[..b.len() - 1]).is_err());
        assert!(parse_idx_images(&b[..10]).is_err());
        let mut longer = b.clone();
        longer.push(0);
        assert!(parse_idx_images(&longer).is_err());
    }

    #[test]
    fn labels_roundtrip() {
        let mut b = LABELS_MAGIC.to_be_bytes().to_vec();
        b.extend_from_slice(&3u32.to_be_bytes());
        b.extend_from_slice(&[7, 0, 9]);
        assert_eq!(parse_idx_labels(&b).unwrap(), vec![7, 0, 9]);
        assert!(parse_idx_labels(&b[..10]).is_err());
        assert!(parse_idx_images(&b).is_err());
    }
}
