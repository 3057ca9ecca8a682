//! Binary container for compressed groups.
//!
//! Layout (all integers little-endian `u32`, all reals little-endian `f64`):
//!
//! ```text
//! "BSPC1"            5-byte magic
//! schema_version     u32 (currently 1)
//! group_count        u32
//! per group:
//!   m, n, k, r       u32 x 4
//!   basis            m*r f64, column-major
//!   coefficients     k blocks of r*n f64, each row-major
//! ```

use thiserror::Error;

use crate::compressor::CompressedGroup;
use crate::matrix::{DenseMatrix, MatrixError};
use crate::Scalar;

pub const MAGIC: &[u8; 5] = b"BSPC1";
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ContainerError {
    #[error("bad magic, not a BSPC1 container")]
    BadMagic,
    #[error("unsupported schema version {0}")]
    UnsupportedVersion(u32),
    #[error("container truncated at byte {0}")]
    Truncated(usize),
    #[error("{0} trailing bytes after the last group")]
    TrailingBytes(usize),
    #[error("dimension {0} does not fit the u32 header field")]
    DimensionOverflow(usize),
    #[error("invalid group header: {0}")]
    InvalidHeader(String),
    #[error(transparent)]
    Matrix(#[from] MatrixError),
}

pub fn encode<T: Scalar>(groups: &[CompressedGroup<T>]) -> Result<Vec<u8>, ContainerError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&SCHEMA_VERSION.to_le_bytes());
    put_u32(&mut out, groups.len())?;
    for g in groups {
        let (m, n, k) = g.original_shape;
        for d in [m, n, k, g.rank] {
            put_u32(&mut out, d)?;
        }
        for x in g.basis.to_col_major() {
            out.extend_from_slice(&x.as_f64().to_le_bytes());
        }
        for c in &g.coefficients {
            for &x in c.as_slice() {
                out.extend_from_slice(&x.as_f64().to_le_bytes());
            }
        }
    }
    Ok(out)
}

fn put_u32(out: &mut Vec<u8>, v: usize) -> Result<(), ContainerError> {
    let v = u32::try_from(v).map_err(|_| ContainerError::DimensionOverflow(v))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, len: usize) -> Result<&'a [u8], ContainerError> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or(ContainerError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ContainerError> {
        Ok(u32::from_le_bytes(
            self.take(4)?.try_into().expect("4 bytes"),
        ))
    }

    fn f64s(&mut self, count: usize) -> Result<Vec<f64>, ContainerError> {
        let bytes = self.take(
            count
                .checked_mul(8)
                .ok_or(ContainerError::Truncated(self.pos))?,
        )?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> Result<Vec<CompressedGroup<T>>, ContainerError> {
    let mut rd = Reader { bytes, pos: 0 };
    if rd.take(MAGIC.len()).map_err(|_| ContainerError::BadMagic)? != MAGIC {
        return Err(ContainerError::BadMagic);
    }
    let version = rd.u32()?;
    if version != SCHEMA_VERSION {
        return Err(ContainerError::UnsupportedVersion(version));
    }
    let count = rd.u32()? as usize;
    let mut groups = Vec::new();
    for g in 0..count {
        let m = rd.u32()? as usize;
        let n = rd.u32()? as usize;
        let k = rd.u32()? as usize;
        let r = rd.u32()? as usize;
        if m == 0 || n == 0 || k == 0 || r == 0 || r > m {
            return Err(ContainerError::InvalidHeader(format!(
                "group {g}: m={m} n={n} k={k} r={r}"
            )));
        }
        let basis = rd.f64s(m * r)?;
        let basis = DenseMatrix::from_col_major(m, r, &to_scalar::<T>(&basis))?;
        let mut coefficients = Vec::with_capacity(k);
        for _ in 0..k {
            let c = rd.f64s(r * n)?;
            coefficients.push(DenseMatrix::from_row_major(r, n, to_scalar(&c))?);
        }
        groups.push(CompressedGroup {
            basis,
            coefficients,
            rank: r,
            original_shape: (m, n, k),
        });
    }
    if rd.pos != bytes.len() {
        return Err(ContainerError::TrailingBytes(bytes.len() - rd.pos));
    }
    Ok(groups)
}

fn to_scalar<T: Scalar>(v: &[f64]) -> Vec<T> {
    v.iter().map(|&x| T::lit(x)).collect()
}
