//! `VOLNORM1` parameter container.
//!
//! ```text
//! magic      8 bytes   "VOLNORM1"
//! repeated until end of file:
//!   name_len u32 LE
//!   name     name_len bytes, UTF-8
//!   rank     u32 LE
//!   dims     rank × u32 LE
//!   payload  prod(dims) × f32 LE
//! ```

use super::{Result, Tensor, TensorError};
use std::path::Path;

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"VOLNORM1";

pub fn checkpoint_bytes(params: &[(String, Tensor<f32>)]) -> Vec<u8> {
    let mut out = CHECKPOINT_MAGIC.to_vec();
    for (name, t) in params {
        out.extend_from_slice(&(name.len() as u32).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(TensorError::MalformedCheckpoint(format!("truncated {what} at byte {}", self.pos)));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self, what: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, what)?.try_into().unwrap()))
    }
}

pub fn parse_checkpoint(bytes: &[u8]) -> Result<Vec<(String, Tensor<f32>)>> {
    if bytes.len() < 8 || &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(TensorError::MalformedCheckpoint("missing VOLNORM1 magic".into()));
    }
    let mut r = Reader { buf: bytes, pos: 8 };
    let mut out = Vec::new();
    while r.pos < bytes.len() {
        let len = r.u32("name length")? as usize;
        let name = std::str::from_utf8(r.take(len, "name")?)
            .map_err(|e| TensorError::MalformedCheckpoint(format!("parameter name is not UTF-8: {e}")))?
            .to_string();
        let rank = r.u32("rank")? as usize;
        if rank > 8 {
            return Err(TensorError::MalformedCheckpoint(format!("rank {rank} of {name:?} is implausible")));
        }
        let dims = (0..rank).map(|_| r.u32("dims").map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let payload = r.take(n.checked_mul(4).ok_or_else(|| TensorError::MalformedCheckpoint("overflow".into()))?, "payload")?;
        let data = payload.chunks_exact(4).map(|c| f32::from_le_bytes(c.try_into().unwrap())).collect();
        out.push((name, Tensor::new(dims, data)?));
    }
    Ok(out)
}

pub fn write_checkpoint(path: impl AsRef<Path>, params: &[(String, Tensor<f32>)]) -> std::io::Result<()> {
    std::fs::write(path, checkpoint_bytes(params))
}

pub fn read_checkpoint(path: impl AsRef<Path>) -> std::result::Result<Vec<(String, Tensor<f32>)>, Box<dyn std::error::Error + Send + Sync>> {
    let bytes = std::fs::read(path)?;
    Ok(parse_checkpoint(&bytes)?)
}
