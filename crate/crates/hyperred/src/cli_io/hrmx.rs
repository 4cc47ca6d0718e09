//! HRMX binary matrix format.
//!
//! Layout: magic `HRMX`, u32 version (= 1), u64 rows, u64 cols, then
//! `rows * cols` f64 payload entries, all little-endian, row-major. Writes go
//! through a temp file in the target directory and a rename, so readers never
//! observe partial files. Round trips are bit-exact.

use crate::kernels::DenseMatrix;
use std::fs;
use std::io::{self, Read, Write};
use std::path::Path;
use thiserror::Error;

pub const HRMX_MAGIC: [u8; 4] = *b"HRMX";
pub const HRMX_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum HrmxError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: bad magic, not an HRMX file")]
    BadMagic { path: String },
    #[error("{path}: unsupported version {version}")]
    BadVersion { path: String, version: u32 },
    #[error("{path}: payload holds {got} bytes, header declares {expected}")]
    SizeMismatch { path: String, expected: u64, got: u64 },
    #[error("{path}: {source}")]
    InvalidMatrix { path: String, source: crate::kernels::KernelError },
}

fn io_err(path: &Path, source: io::Error) -> HrmxError {
    HrmxError::Io { path: path.display().to_string(), source }
}

/// Serializes a matrix into the HRMX byte layout.
pub fn encode(matrix: &DenseMatrix) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(24 + 8 * matrix.data().len());
    bytes.extend_from_slice(&HRMX_MAGIC);
    bytes.extend_from_slice(&HRMX_VERSION.to_le_bytes());
    bytes.extend_from_slice(&(matrix.rows() as u64).to_le_bytes());
    bytes.extend_from_slice(&(matrix.cols() as u64).to_le_bytes());
    for v in matrix.data() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Parses a matrix from HRMX bytes.
pub fn decode(bytes: &[u8], path: &str) -> Result<DenseMatrix, HrmxError> {
    if bytes.len() < 24 || bytes[..4] != HRMX_MAGIC {
        return Err(HrmxError::BadMagic { path: path.to_string() });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != HRMX_VERSION {
        return Err(HrmxError::BadVersion { path: path.to_string(), version });
    }
    let rows = u64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let cols = u64::from_le_bytes(bytes[16..24].try_into().unwrap());
    let expected = rows.checked_mul(cols).and_then(|n| n.checked_mul(8)).unwrap_or(u64::MAX);
    let got = (bytes.len() - 24) as u64;
    if expected != got {
        return Err(HrmxError::SizeMismatch { path: path.to_string(), expected, got });
    }
    let data: Vec<f64> = bytes[24..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    DenseMatrix::new(rows as usize, cols as usize, data)
        .map_err(|source| HrmxError::InvalidMatrix { path: path.to_string(), source })
}

/// Writes bytes atomically: temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), HrmxError> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_err(path, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_err(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_err(path, e))?;
    tmp.flush().map_err(|e| io_err(path, e))?;
    tmp.persist(path).map_err(|e| io_err(path, e.error))?;
    Ok(())
}

pub fn write_matrix(path: &Path, matrix: &DenseMatrix) -> Result<(), HrmxError> {
    write_atomic(path, &encode(matrix))
}

pub fn read_matrix(path: &Path) -> Result<DenseMatrix, HrmxError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| io_err(path, e))?;
    decode(&bytes, &path.display().to_string())
}

/// Reads only the header, for manifest validation.
pub fn read_dims(path: &Path) -> Result<(usize, usize), HrmxError> {
    let mut head = [0u8; 24];
    fs::File::open(path)
        .and_then(|mut f| f.read_exact(&mut head))
        .map_err(|e| io_err(path, e))?;
    if head[..4] != HRMX_MAGIC {
        return Err(HrmxError::BadMagic { path: path.display().to_string() });
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != HRMX_VERSION {
        return Err(HrmxError::BadVersion { path: path.display().to_string(), version });
    }
    let rows = u64::from_le_bytes(head[8..16].try_into().unwrap()) as usize;
    let cols = u64::from_le_bytes(head[16..24].try_into().unwrap()) as usize;
    Ok((rows, cols))
}

/// Writes a vector as a single-row matrix.
pub fn write_vector(path: &Path, data: &[f64]) -> Result<(), HrmxError> {
    let m = DenseMatrix::new(1, data.len(), data.to_vec())
        .map_err(|source| HrmxError::InvalidMatrix { path: path.display().to_string(), source })?;
    write_matrix(path, &m)
}

pub fn read_vector(path: &Path) -> Result<Vec<f64>, HrmxError> {
    let m = read_matrix(path)?;
    Ok(m.data().to_vec())
}
