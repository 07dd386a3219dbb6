//! `DTF1` tensor files.
//!
//! Layout (little-endian):
//!
//! ```text
//! offset 0   magic   b"DTF1"
//! offset 4   rank    u8, 1..=8
//! offset 5   extents rank × u64
//! ...        payload product(extents) × f32, row-major
//! ```
//!
//! Values are computed in `f64` and stored as `f32`.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"DTF1";
pub const MAX_RANK: usize = 8;

/// Serializes `shape`/`data` to bytes. Rejects zero extents, ranks outside
/// `1..=8`, and values that do not fit in `f32`.
pub fn encode(shape: &[usize], data: &[f64]) -> Result<Vec<u8>> {
    let bad = |msg: String| Error::Dimension {
        op: "save_tensor",
        msg,
    };
    if shape.is_empty() || shape.len() > MAX_RANK {
        return Err(bad(format!("rank {} outside 1..={MAX_RANK}", shape.len())));
    }
    if shape.contains(&0) {
        return Err(bad(format!("empty extent in shape {shape:?}")));
    }
    let count: usize = shape.iter().product();
    if count != data.len() {
        return Err(bad(format!(
            "shape {shape:?} needs {count} values, got {}",
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(5 + 8 * shape.len() + 4 * count);
    out.extend_from_slice(MAGIC);
    out.push(shape.len() as u8);
    for &e in shape {
        out.extend_from_slice(&(e as u64).to_le_bytes());
    }
    for &v in data {
        let f = v as f32;
        if !f.is_finite() {
            return Err(Error::NonFinite { op: "save_tensor" });
        }
        out.extend_from_slice(&f.to_le_bytes());
    }
    Ok(out)
}

/// Parses bytes produced by [`encode`]. `path` only labels errors.
pub fn decode(bytes: &[u8], path: &Path) -> Result<Tensor> {
    let err = |offset: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        msg,
    };
    if bytes.len() < 5 {
        return Err(err(
            bytes.len(),
            format!("truncated header ({} bytes)", bytes.len()),
        ));
    }
    if &bytes[..4] != MAGIC {
        return Err(err(
            0,
            format!(
                "bad magic {:?}, expected \"DTF1\"",
                String::from_utf8_lossy(&bytes[..4])
            ),
        ));
    }
    let rank = bytes[4] as usize;
    if rank == 0 || rank > MAX_RANK {
        return Err(err(4, format!("rank {rank} outside 1..={MAX_RANK}")));
    }
    let header = 5 + 8 * rank;
    if bytes.len() < header {
        return Err(err(bytes.len(), "truncated extents".into()));
    }
    let mut shape = Vec::with_capacity(rank);
    let mut count: usize = 1;
    for i in 0..rank {
        let off = 5 + 8 * i;
        let e = u64::from_le_bytes(bytes[off..off + 8].try_into().expect("8 bytes"));
        if e == 0 {
            return Err(err(off, "zero extent".into()));
        }
        let e = usize::try_from(e).map_err(|_| err(off, format!("extent {e} too large")))?;
        count = count
            .checked_mul(e)
            .ok_or_else(|| err(off, "extent product overflows".into()))?;
        shape.push(e);
    }
    let expected = count
        .checked_mul(4)
        .and_then(|p| p.checked_add(header))
        .ok_or_else(|| err(header, "payload size overflows".into()))?;
    if bytes.len() != expected {
        return Err(err(
            bytes.len().min(expected),
            format!(
                "payload is {} bytes, expected {}",
                bytes.len() - header,
                expected - header
            ),
        ));
    }
    let data = bytes[header..]
        .chunks_exact(4)
        .map(|c| f64::from(f32::from_le_bytes([c[0], c[1], c[2], c[3]])))
        .collect();
    Tensor::new(shape, data)
}

pub fn save_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode(t.shape(), t.data())?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
