//! `WDNN` checkpoints: magic, u32 version, u32 tensor count, then per tensor
//! u32 rank, u32 dims, f64 data. Little-endian.

use std::fs;
use std::path::Path;

use super::{CnnModel, Tensor};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"WDNN";
const VERSION: u32 = 1;

pub fn encode_checkpoint(model: &CnnModel) -> Vec<u8> {
    let params = model.params();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for t in params {
        out.extend_from_slice(&(t.shape.len() as u32).to_le_bytes());
        for &d in &t.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for &v in &t.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos + n;
        if end > self.bytes.len() {
            return Err(Error::Format("checkpoint truncated".into()));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Parameter tensors stored in a checkpoint, in model order.
pub fn decode_checkpoint(bytes: &[u8]) -> Result<Vec<Tensor>> {
    let mut cur = Cursor { bytes, pos: 0 };
    if cur.take(4)? != MAGIC {
        return Err(Error::Format("not a WDNN checkpoint".into()));
    }
    let version = cur.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let n = cur.u32()? as usize;
    let mut tensors = Vec::with_capacity(n);
    for _ in 0..n {
        let rank = cur.u32()? as usize;
        let shape = (0..rank)
            .map(|_| cur.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let len: usize = shape.iter().product();
        let data = (0..len).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
        tensors.push(Tensor { shape, data });
    }
    if cur.pos != bytes.len() {
        return Err(Error::Format("trailing bytes after checkpoint".into()));
    }
    Ok(tensors)
}

pub fn write_checkpoint(model: &CnnModel, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model))
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Reads a checkpoint back into a model with the default layer layout.
pub fn read_checkpoint(path: &Path, input: (usize, usize, usize)) -> Result<CnnModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    CnnModel::from_tensors(input, decode_checkpoint(&bytes)?)
}
