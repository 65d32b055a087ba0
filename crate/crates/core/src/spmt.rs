//! SPMT tensor files.
//!
//! Layout, all integers little-endian:
//!
//! | bytes        | content                          |
//! |--------------|----------------------------------|
//! | 0..4         | magic `SPMT`                     |
//! | 4..8         | version, `u32` = 1               |
//! | 8..12        | `ndim`, `u32`                    |
//! | 12..12+4ndim | dims, `u32` each                 |
//! | rest         | `f32` payload, row-major         |
//!
//! Fields are stored as `(C, H, W)`; token matrices as `(T, D)` or, when
//! they carry a grid, `(h, w, D)`.

use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::scalar::Real;
use crate::tokens::TokenMatrix;

pub const MAGIC: &[u8; 4] = b"SPMT";
pub const VERSION: u32 = 1;

/// A decoded SPMT tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub dims: Vec<usize>,
    pub data: Vec<f32>,
}

fn fmt_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Format(msg.into()))
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f32>) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n != data.len() {
            return fmt_err(format!(
                "dims {dims:?} do not match {} payload values",
                data.len()
            ));
        }
        if dims.iter().any(|&d| d > u32::MAX as usize) {
            return fmt_err("dimension exceeds u32 range");
        }
        Ok(Self { dims, data })
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 4 * self.dims.len() + 4 * self.data.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dims.len() as u32).to_le_bytes());
        for &d in &self.dims {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let word = |i: usize| -> Result<u32> {
            bytes
                .get(i..i + 4)
                .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
                .ok_or_else(|| Error::Format("truncated SPMT header".into()))
        };
        if bytes.len() < 12 || &bytes[..4] != MAGIC {
            return fmt_err("missing SPMT magic");
        }
        let version = word(4)?;
        if version != VERSION {
            return fmt_err(format!("unsupported SPMT version {version}"));
        }
        let ndim = word(8)? as usize;
        if ndim == 0 {
            return fmt_err("SPMT tensor has no dimensions");
        }
        let dims = (0..ndim)
            .map(|i| word(12 + 4 * i).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let start = 12 + 4 * ndim;
        let count = dims
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| Error::Format("SPMT dims overflow".into()))?;
        let payload = &bytes[start..];
        if payload.len() != count.saturating_mul(4) {
            return fmt_err(format!(
                "SPMT payload has {} bytes, dims {dims:?} need {}",
                payload.len(),
                count.saturating_mul(4)
            ));
        }
        let data = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        Ok(Self { dims, data })
    }

    /// Interprets `(C, H, W)` or `(H, W)` as a field.
    pub fn to_field<S: Real>(&self) -> Result<Field2D<S>> {
        let (c, h, w) = match self.dims[..] {
            [c, h, w] => (c, h, w),
            [h, w] => (1, h, w),
            _ => return fmt_err(format!("a field needs 2 or 3 dims, got {:?}", self.dims)),
        };
        Field2D::new(
            c,
            h,
            w,
            self.data.iter().map(|&v| S::lit(v as f64)).collect(),
        )
    }

    pub fn from_field<S: Real>(field: &Field2D<S>) -> Self {
        let (c, h, w) = field.shape();
        Self {
            dims: vec![c, h, w],
            data: field.data().iter().map(|v| v.as_f64() as f32).collect(),
        }
    }

    /// Interprets `(T, D)` or `(h, w, D)` as a token matrix.
    pub fn to_tokens<S: Real>(&self) -> Result<TokenMatrix<S>> {
        let vals = self.data.iter().map(|&v| S::lit(v as f64)).collect();
        match self.dims[..] {
            [t, d] => TokenMatrix::new(t, d, vals),
            [h, w, d] => TokenMatrix::with_grid(h, w, d, vals),
            _ => fmt_err(format!("tokens need 2 or 3 dims, got {:?}", self.dims)),
        }
    }

    pub fn from_tokens<S: Real>(tokens: &TokenMatrix<S>) -> Self {
        let dims = match tokens.grid() {
            Some((h, w)) => vec![h, w, tokens.dim()],
            None => vec![tokens.tokens(), tokens.dim()],
        };
        Self {
            dims,
            data: tokens.values().iter().map(|v| v.as_f64() as f32).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let t = Tensor::new(vec![1, 2], vec![1.5, -2.0]).unwrap();
        let b = t.encode();
        assert_eq!(&b[..4], b"SPMT");
        assert_eq!(&b[4..8], &[1, 0, 0, 0]);
        assert_eq!(&b[8..12], &[2, 0, 0, 0]);
        assert_eq!(&b[12..20], &[1, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(&b[20..24], &1.5f32.to_le_bytes());
        assert_eq!(b.len(), 28);
        assert_eq!(Tensor::decode(&b).unwrap(), t);
    }

    #[test]
    fn malformed_inputs() {
        let good = Tensor::new(vec![2, 2], vec![0.0; 4]).unwrap().encode();
        assert!(Tensor::decode(&good[..good.len() - 1]).is_err());
        assert!(Tensor::decode(b"SPMX\x01\0\0\0\x01\0\0\0\x01\0\0\0\0\0\0\0").is_err());
        let mut v2 = good.clone();
        v2[4] = 2;
        assert!(Tensor::decode(&v2).is_err());
        assert!(Tensor::decode(b"SPMT").is_err());
        assert!(Tensor::new(vec![3], vec![0.0; 2]).is_err());
    }

    #[test]
    fn field_and_token_views() {
        let f = Field2D::from_fn(2, 3, 4, |c, y, x| (c * 100 + y * 10 + x) as f64).unwrap();
        let t = Tensor::from_field(&f);
        assert_eq!(t.dims, vec![2, 3, 4]);
        assert_eq!(t.to_field::<f64>().unwrap(), f);
        let tok = TokenMatrix::with_grid(2, 3, 4, (0..24).map(|v| v as f32).collect()).unwrap();
        let tt = Tensor::from_tokens(&tok);
        assert_eq!(tt.dims, vec![2, 3, 4]);
        assert_eq!(tt.to_tokens::<f32>().unwrap(), tok);
        assert!(Tensor::new(vec![24], vec![0.0; 24])
            .unwrap()
            .to_field::<f64>()
            .is_err());
    }
}
