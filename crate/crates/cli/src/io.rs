//! The `GEPM` matrix file: 4-byte magic, rows and cols as little-endian
//! `u64`, then the row-major payload as little-endian `f64`.

use std::fs;
use std::path::Path;

use gepey::Matrix;

use crate::error::{CliError, Result};

pub const MAGIC: &[u8; 4] = b"GEPM";
const HEADER: usize = 4 + 8 + 8;

pub fn encode(m: &Matrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER + 8 * m.as_slice().len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(m.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(m.cols() as u64).to_le_bytes());
    for v in m.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode(bytes: &[u8]) -> Result<Matrix> {
    if bytes.len() < HEADER {
        return Err(CliError::Format(format!("{} bytes is shorter than the header", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(CliError::Format("bad magic".into()));
    }
    let word = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8-byte slice"));
    let (rows, cols) = (word(4), word(12));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| usize::try_from(n).ok())
        .ok_or_else(|| CliError::Format(format!("{rows}x{cols} overflows")))?;
    let payload = &bytes[HEADER..];
    if payload.len() != expected {
        return Err(CliError::Format(format!(
            "{rows}x{cols} needs {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    Ok(Matrix::new(rows as usize, cols as usize, data)?)
}

pub fn save(path: &Path, m: &Matrix) -> Result<()> {
    fs::write(path, encode(m))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Matrix> {
    decode(&fs::read(path)?)
}
