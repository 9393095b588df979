//! Compact binary dataset files.
//!
//! ```text
//! "EMDS" | version u16 | n u32 | d u32 | label width u8 (= 1)
//! features: n*d little-endian f32, row-major
//! labels:   n bytes
//! ```
//!
//! Features are computed in `f64` but stored as `f32`; a file written from
//! data that was itself loaded from a file reproduces it bit for bit.

use std::fs;
use std::path::Path;

use super::dataset::{Dataset, FeatureScale};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;
use crate::nn::Reader;

pub const DATASET_MAGIC: &[u8; 4] = b"EMDS";
pub const DATASET_VERSION: u16 = 1;
pub const HEADER_LEN: usize = 4 + 2 + 4 + 4 + 1;

/// Exact size of an EMDS file holding `n` samples of `d` features.
pub fn file_size(n: usize, d: usize) -> usize {
    HEADER_LEN + n * d * 4 + n
}

pub fn to_bytes(ds: &Dataset) -> Result<Vec<u8>> {
    let (n, d) = ds.features.shape();
    if n == 0 {
        return Err(Error::param("refusing to write an empty dataset"));
    }
    if n > u32::MAX as usize || d > u32::MAX as usize {
        return Err(Error::param("dataset too large for the EMDS header"));
    }
    let mut out = Vec::with_capacity(file_size(n, d));
    out.extend_from_slice(DATASET_MAGIC);
    out.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.extend_from_slice(&(d as u32).to_le_bytes());
    out.push(1);
    for &v in ds.features.as_slice() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out.extend(ds.labels.iter().map(|&l| l as u8));
    Ok(out)
}

pub fn from_bytes(bytes: &[u8], name: impl Into<String>) -> Result<Dataset> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if bytes.len() < HEADER_LEN || r.take(4)? != DATASET_MAGIC {
        return Err(Error::Format("not an EMDS dataset file".into()));
    }
    let version = r.u16()?;
    if version != DATASET_VERSION {
        return Err(Error::Format(format!("unsupported EMDS version {version}")));
    }
    let n = r.u32()? as usize;
    let d = r.u32()? as usize;
    let width = r.u8()?;
    if width != 1 {
        return Err(Error::Format(format!("unsupported label width {width}")));
    }
    if n == 0 {
        return Err(Error::Corruption("header declares zero samples".into()));
    }
    let expected = file_size(n, d);
    if bytes.len() != expected {
        return Err(Error::Corruption(format!(
            "header declares {n}x{d} ({expected} bytes) but the file has {} bytes",
            bytes.len()
        )));
    }
    let features: Vec<f64> = r
        .take(n * d * 4)?
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()) as f64)
        .collect();
    let labels: Vec<usize> = r.take(n)?.iter().map(|&l| l as usize).collect();
    let scale = infer_scale(&features);
    Dataset::new(DenseMatrix::from_vec(n, d, features)?, labels, name, scale)
}

fn infer_scale(values: &[f64]) -> FeatureScale {
    if values.iter().all(|&v| (0.0..=1.0).contains(&v)) {
        FeatureScale::Unit
    } else if values.iter().all(|&v| (0.0..=255.0).contains(&v) && v.fract() == 0.0) {
        FeatureScale::RawBytes
    } else {
        FeatureScale::Projected
    }
}

pub fn save_bin(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_bytes(ds)?)?;
    Ok(())
}

pub fn load_bin(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    from_bytes(&fs::read(path)?, name)
}
