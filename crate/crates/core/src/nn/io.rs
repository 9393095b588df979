//! Binary model files.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! "MLPM" | version u16 | layer count u16
//! per layer: kind u8 | dims u32... | params f64...
//!   affine  (1): fan_in, fan_out | weights row-major, then biases
//!   relu    (2): width           | -
//!   dropout (3): width           | keep probability
//! ```

use std::fs;
use std::path::Path;

use super::layers::{AffineLayer, DropoutLayer, ReluLayer};
use super::network::{Layer, Network};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

pub const MODEL_MAGIC: &[u8; 4] = b"MLPM";
pub const MODEL_VERSION: u16 = 1;

const TAG_AFFINE: u8 = 1;
const TAG_RELU: u8 = 2;
const TAG_DROPOUT: u8 = 3;

impl Network {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.param_count() * 8 + self.layers().len() * 9);
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers().len() as u16).to_le_bytes());
        let mut width = self.input_width();
        for layer in self.layers() {
            match layer {
                Layer::Affine(a) => {
                    out.push(TAG_AFFINE);
                    out.extend_from_slice(&(a.fan_in() as u32).to_le_bytes());
                    out.extend_from_slice(&(a.fan_out() as u32).to_le_bytes());
                    for v in a.weights.as_slice().iter().chain(&a.biases) {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                    width = a.fan_out();
                }
                Layer::Relu(_) => {
                    out.push(TAG_RELU);
                    out.extend_from_slice(&(width as u32).to_le_bytes());
                }
                Layer::Dropout(d) => {
                    out.push(TAG_DROPOUT);
                    out.extend_from_slice(&(width as u32).to_le_bytes());
                    out.extend_from_slice(&d.keep_prob().to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Network> {
        let mut r = Reader { buf: bytes, pos: 0 };
        if r.take(4)? != MODEL_MAGIC {
            return Err(Error::Format("not an MLPM model file".into()));
        }
        let version = r.u16()?;
        if version != MODEL_VERSION {
            return Err(Error::Format(format!("unsupported model version {version}")));
        }
        let count = r.u16()? as usize;
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let layer = match r.u8()? {
                TAG_AFFINE => {
                    let fan_in = r.u32()? as usize;
                    let fan_out = r.u32()? as usize;
                    let w = r.f64s(fan_in * fan_out)?;
                    let b = r.f64s(fan_out)?;
                    Layer::Affine(AffineLayer::new(DenseMatrix::from_vec(fan_in, fan_out, w)?, b)?)
                }
                TAG_RELU => {
                    r.u32()?;
                    Layer::Relu(ReluLayer::new())
                }
                TAG_DROPOUT => {
                    r.u32()?;
                    let p = r.f64s(1)?[0];
                    Layer::Dropout(DropoutLayer::new(p).map_err(|_| {
                        Error::Corruption(format!("dropout keep probability {p} out of range"))
                    })?)
                }
                tag => return Err(Error::Format(format!("unknown layer kind {tag}"))),
            };
            layers.push(layer);
        }
        if r.pos != bytes.len() {
            return Err(Error::Corruption(format!(
                "{} trailing bytes after the last layer",
                bytes.len() - r.pos
            )));
        }
        Network::from_layers(layers)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Network> {
        Network::from_bytes(&fs::read(path)?)
    }
}

/// Cursor over a byte buffer for the little-endian binary formats.
pub(crate) struct Reader<'a> {
    pub buf: &'a [u8],
    pub pos: usize,
}

impl<'a> Reader<'a> {
    pub fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or_else(|| {
            Error::Corruption(format!(
                "needed {n} bytes at offset {} but the file has {}",
                self.pos,
                self.buf.len()
            ))
        })?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    pub fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let bytes = self.take(n.checked_mul(8).ok_or_else(|| Error::Corruption("size overflow".into()))?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
