//! Binary network file.
//!
//! ```text
//! "CDTM"                      4 bytes
//! version                     u32 LE (currently 1)
//! layer count                 u32 LE
//! per layer:
//!   rows, cols                u32 LE each
//!   weights                   rows·cols f64 LE, row-major
//!   bias                      cols f64 LE
//! ```
//!
//! Values are stored bit-exactly, so a write/read round trip is lossless.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::network::{Layer, NetworkParams};

pub const MAGIC: [u8; 4] = *b"CDTM";
pub const VERSION: u32 = 1;

/// Refuse absurd headers before allocating.
const MAX_LAYERS: u32 = 64;
const MAX_ELEMENTS: u64 = 1 << 28;

pub fn encode(params: &NetworkParams) -> Vec<u8> {
    let layers = params.layers();
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(layers.len() as u32).to_le_bytes());
    for layer in layers {
        out.extend_from_slice(&(layer.weights.rows() as u32).to_le_bytes());
        out.extend_from_slice(&(layer.weights.cols() as u32).to_le_bytes());
        for v in layer.weights.as_slice().iter().chain(&layer.bias) {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() < n {
            return Err(Error::Format("truncated model file"));
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or(Error::Format("layer too large"))?)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes([c[0], c[1], c[2], c[3], c[4], c[5], c[6], c[7]]))
            .collect())
    }
}

pub fn decode(bytes: &[u8]) -> Result<NetworkParams> {
    let mut r = Reader { bytes };
    if r.take(4).map_err(|_| Error::Format("missing magic bytes"))? != MAGIC {
        return Err(Error::Format("bad magic bytes, not a CDTM model"));
    }
    if r.u32()? != VERSION {
        return Err(Error::Format("unsupported model version"));
    }
    let count = r.u32()?;
    if count == 0 || count > MAX_LAYERS {
        return Err(Error::Format("implausible layer count"));
    }
    let mut layers = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let rows = r.u32()?;
        let cols = r.u32()?;
        if rows == 0 || cols == 0 || u64::from(rows) * u64::from(cols) > MAX_ELEMENTS {
            return Err(Error::Format("implausible layer shape"));
        }
        let (rows, cols) = (rows as usize, cols as usize);
        let weights = Matrix::from_vec(rows, cols, r.f64s(rows * cols)?)?;
        let bias = r.f64s(cols)?;
        layers.push(Layer { weights, bias });
    }
    if !r.bytes.is_empty() {
        return Err(Error::Format("trailing bytes after last layer"));
    }
    NetworkParams::new(layers).map_err(|e| match e {
        Error::DimensionMismatch { .. } => Error::Format("layer dimensions do not chain"),
        Error::Numeric(_) => Error::Format("non-finite parameter"),
        other => other,
    })
}
