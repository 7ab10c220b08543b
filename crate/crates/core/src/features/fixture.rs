//! Reference activation files: `"FFIX" | u32 version (=1) | u32 rows |
//! u32 cols | rows * cols f32`, all little-endian, row-major.

use std::path::Path;

use ndarray::Array2;

use super::{FeatureError, Result};

const MAGIC: &[u8; 4] = b"FFIX";
const VERSION: u32 = 1;

pub fn write_fixture_bytes(values: &Array2<f64>) -> Vec<u8> {
    let (rows, cols) = values.dim();
    let mut out = Vec::with_capacity(16 + 4 * rows * cols);
    out.extend_from_slice(MAGIC);
    for v in [VERSION, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for &v in values.iter() {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    out
}

pub fn read_fixture_bytes(bytes: &[u8]) -> Result<Array2<f64>> {
    let bad = |m: String| FeatureError::Container(m);
    if bytes.len() < 16 || &bytes[..4] != MAGIC {
        return Err(bad("missing FFIX header".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[4 * i..4 * i + 4].try_into().expect("4 bytes")) as usize;
    if word(1) != VERSION as usize {
        return Err(bad(format!("unsupported fixture version {}", word(1))));
    }
    let (rows, cols) = (word(2), word(3));
    let expected = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(4))
        .and_then(|n| n.checked_add(16));
    if expected != Some(bytes.len()) {
        return Err(bad(format!("{rows}x{cols} fixture does not match its {} byte size", bytes.len())));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
        .collect();
    Ok(Array2::from_shape_vec((rows, cols), data).expect("size checked"))
}

pub fn read_fixture(path: &Path) -> Result<Array2<f64>> {
    let bytes = std::fs::read(path).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_fixture_bytes(&bytes)
}

pub fn write_fixture(values: &Array2<f64>, path: &Path) -> Result<()> {
    std::fs::write(path, write_fixture_bytes(values)).map_err(|source| FeatureError::Io {
        path: path.to_path_buf(),
        source,
    })
}
