//! Binary tensor container.
//!
//! ```text
//! offset  size        field
//! 0       4           magic "IPNT"
//! 4       2           version, u16 LE (= 1)
//! 6       1           dtype code (0 = f32 IEEE-754)
//! 7       1           rank
//! 8       4 * rank    dims, u32 LE, slowest-varying first
//! ...     4 * prod    payload, f32 LE, row-major, no padding
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::heatmap::{ClassHeatmap, VectorField};

pub const MAGIC: [u8; 4] = *b"IPNT";
pub const VERSION: u16 = 1;
pub const DTYPE_F32: u8 = 0;
const FIXED_HEADER: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f32>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let expected: usize = dims.iter().product();
        if dims.len() > u8::MAX as usize || dims.iter().any(|&d| d > u32::MAX as usize) || data.len() != expected {
            return Err(Error::ShapeMismatch { expected: dims, found: vec![data.len()] });
        }
        Ok(Self { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn encoded_len(&self) -> usize {
        FIXED_HEADER + 4 * self.dims.len() + 4 * self.data.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(DTYPE_F32);
        out.push(self.dims.len() as u8);
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < FIXED_HEADER {
            return Err(Error::Truncated { expected: FIXED_HEADER, found: bytes.len() });
        }
        let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
        if magic != MAGIC {
            return Err(Error::BadMagic(magic));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        if bytes[6] != DTYPE_F32 {
            return Err(Error::UnsupportedDtype(bytes[6]));
        }
        let rank = bytes[7] as usize;
        let header = FIXED_HEADER + 4 * rank;
        if bytes.len() < header {
            return Err(Error::Truncated { expected: header, found: bytes.len() });
        }
        let dims: Vec<usize> = bytes[FIXED_HEADER..header]
            .chunks_exact(4)
            .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
            .collect();
        let expected = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(4))
            .and_then(|n| n.checked_add(header))
            .unwrap_or(usize::MAX);
        if bytes.len() < expected {
            return Err(Error::Truncated { expected, found: bytes.len() });
        }
        if bytes.len() > expected {
            return Err(Error::TrailingBytes(bytes.len() - expected));
        }
        let data = bytes[header..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        Ok(Self { dims, data })
    }

    fn expect_rank3(&self, leading: Option<usize>) -> Result<[usize; 3]> {
        match (self.dims.as_slice(), leading) {
            (&[c, h, w], None) => Ok([c, h, w]),
            (&[c, h, w], Some(l)) if c == l => Ok([c, h, w]),
            _ => Err(Error::ShapeMismatch {
                expected: vec![leading.unwrap_or(0), 0, 0],
                found: self.dims.clone(),
            }),
        }
    }

    fn data_f64(&self) -> Vec<f64> {
        self.data.iter().map(|&v| v as f64).collect()
    }
}

fn narrow(values: &[f64]) -> Vec<f32> {
    values.iter().map(|&v| v as f32).collect()
}

impl From<&ClassHeatmap> for Tensor {
    fn from(hm: &ClassHeatmap) -> Self {
        Self { dims: hm.shape().to_vec(), data: narrow(hm.values()) }
    }
}

impl From<&VectorField> for Tensor {
    fn from(vf: &VectorField) -> Self {
        Self { dims: vec![2, vf.height(), vf.width()], data: narrow(vf.values()) }
    }
}

impl TryFrom<&Tensor> for ClassHeatmap {
    type Error = Error;

    fn try_from(t: &Tensor) -> Result<Self> {
        let [c, h, w] = t.expect_rank3(None)?;
        ClassHeatmap::from_vec(c, h, w, t.data_f64())
    }
}

impl TryFrom<&Tensor> for VectorField {
    type Error = Error;

    fn try_from(t: &Tensor) -> Result<Self> {
        let [_, h, w] = t.expect_rank3(Some(2))?;
        VectorField::from_vec(h, w, t.data_f64())
    }
}

/// `H x W` supervision mask as a rank-2 tensor of 0/1.
pub fn mask_to_tensor(mask: &[bool], height: usize, width: usize) -> Result<Tensor> {
    Tensor::new(vec![height, width], mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect())
}

pub fn mask_from_tensor(t: &Tensor) -> Result<(Vec<bool>, usize, usize)> {
    match *t.dims() {
        [h, w] => Ok((t.data().iter().map(|&v| v != 0.0).collect(), h, w)),
        _ => Err(Error::ShapeMismatch { expected: vec![0, 0], found: t.dims().to_vec() }),
    }
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Tensor::from_bytes(&bytes)
}

pub fn write_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, t.to_bytes()).map_err(|e| Error::io(path, e))
}
