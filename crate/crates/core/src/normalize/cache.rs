//! `VOLCACHE` array container.
//!
//! ```text
//! magic    8 bytes  "VOLCACHE"
//! version  u8       1
//! rank     u8
//! dims     rank × u64 little-endian
//! payload  prod(dims) × f32 little-endian, row-major
//! ```

use super::{NormalizeError, Result};
use ndarray::{Array3, ArrayD, IxDyn};
use std::path::{Path, PathBuf};

pub const VOLCACHE_MAGIC: &[u8; 8] = b"VOLCACHE";
pub const VOLCACHE_VERSION: u8 = 1;

pub fn volcache_bytes(data: &ArrayD<f32>) -> Vec<u8> {
    let mut out = Vec::with_capacity(10 + 8 * data.ndim() + 4 * data.len());
    out.extend_from_slice(VOLCACHE_MAGIC);
    out.push(VOLCACHE_VERSION);
    out.push(data.ndim() as u8);
    for &d in data.shape() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for v in data.iter() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn parse_volcache(bytes: &[u8]) -> Result<ArrayD<f32>> {
    let bad = |m: String| NormalizeError::MalformedCache(m);
    if bytes.len() < 10 || &bytes[..8] != VOLCACHE_MAGIC {
        return Err(bad("missing VOLCACHE magic".into()));
    }
    if bytes[8] != VOLCACHE_VERSION {
        return Err(bad(format!("unsupported version {}", bytes[8])));
    }
    let rank = bytes[9] as usize;
    let dims_end = 10 + 8 * rank;
    if bytes.len() < dims_end {
        return Err(bad("truncated dimensions".into()));
    }
    let dims: Vec<usize> = bytes[10..dims_end]
        .chunks_exact(8)
        .map(|c| u64::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    let n = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or_else(|| bad("dimension overflow".into()))?;
    let expected = n.checked_mul(4).and_then(|p| p.checked_add(dims_end)).ok_or_else(|| bad("dimension overflow".into()))?;
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let data: Vec<f32> = bytes[dims_end..].chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
    ArrayD::from_shape_vec(IxDyn(&dims), data).map_err(|e| bad(e.to_string()))
}

pub fn write_volcache(path: impl AsRef<Path>, data: &ArrayD<f32>) -> Result<()> {
    write_atomic(path, &volcache_bytes(data))?;
    Ok(())
}

/// Write to a sibling temporary file, then rename over `path`, so readers
/// never observe a partial file.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> std::io::Result<()> {
    let path = path.as_ref();
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path).inspect_err(|_| {
        let _ = std::fs::remove_file(&tmp);
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    /// Valid entry with a matching key; nothing was computed.
    Hit,
    /// No entry, or one written for different inputs.
    Computed,
    /// The key matched but the entry was unreadable.
    Rederived,
}

fn key_path(path: &Path) -> PathBuf {
    let mut p = path.as_os_str().to_owned();
    p.push(".key");
    PathBuf::from(p)
}

/// Rank-3 cache entry at `path` keyed by `key` (typically a hash of the
/// inputs and settings), stored alongside in `<path>.key`. `compute` runs
/// only when the entry is missing, stale or corrupt; the data is written
/// before the key so an interrupted write is never mistaken for a hit.
pub fn cached_array3(
    path: impl AsRef<Path>,
    key: &str,
    compute: impl FnOnce() -> Result<Array3<f32>>,
) -> Result<(Array3<f32>, CacheStatus)> {
    let path = path.as_ref();
    let kp = key_path(path);
    let key_matches = std::fs::read_to_string(&kp).is_ok_and(|k| k == key);
    let status = if key_matches {
        match read_volcache3(path) {
            Ok(a) => return Ok((a, CacheStatus::Hit)),
            Err(_) => CacheStatus::Rederived,
        }
    } else {
        CacheStatus::Computed
    };
    let data = compute()?;
    write_volcache(path, &data.clone().into_dyn())?;
    write_atomic(&kp, key.as_bytes())?;
    Ok((data, status))
}

pub fn read_volcache(path: impl AsRef<Path>) -> Result<ArrayD<f32>> {
    parse_volcache(&std::fs::read(path)?)
}

/// Read a rank-3 cache entry.
pub fn read_volcache3(path: impl AsRef<Path>) -> Result<Array3<f32>> {
    let a = read_volcache(path)?;
    let rank = a.ndim();
    a.into_dimensionality().map_err(|_| NormalizeError::MalformedCache(format!("expected rank 3, found {rank}")))
}
