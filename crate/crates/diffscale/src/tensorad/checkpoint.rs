//! "DSPT" parameter checkpoint format.
//!
//! Layout: magic "DSPT", u32 LE format version, u32 LE tensor count, then per
//! tensor: u32 name length + UTF-8 name, u32 rank, u32 dims, f32 LE data.
//! A metadata section follows as length-prefixed UTF-8 key=value lines:
//! u32 line count, then per line u32 byte length + bytes.

use crate::error::{Error, Result};
use crate::tensorad::ParamStore;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"DSPT";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

pub fn write_checkpoint(
    path: &Path,
    params: &ParamStore,
    metadata: &[(String, String)],
) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    put_u32(&mut out, VERSION);
    put_u32(&mut out, params.len() as u32);
    for p in params.params() {
        put_u32(&mut out, p.name.len() as u32);
        out.extend_from_slice(p.name.as_bytes());
        put_u32(&mut out, p.shape.len() as u32);
        for &d in &p.shape {
            put_u32(&mut out, d as u32);
        }
        for &v in &p.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    put_u32(&mut out, metadata.len() as u32);
    for (k, v) in metadata {
        let line = format!("{}={}", k, v);
        put_u32(&mut out, line.len() as u32);
        out.extend_from_slice(line.as_bytes());
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

struct Reader {
    buf: Vec<u8>,
    pos: usize,
}

impl Reader {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Format("truncated checkpoint file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }
}

pub fn read_checkpoint(path: &Path) -> Result<(ParamStore, Vec<(String, String)>)> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    let mut r = Reader { buf, pos: 0 };
    let magic = r.take(4)?;
    if magic != MAGIC {
        return Err(Error::Format(format!(
            "bad checkpoint magic {:?}, expected \"DSPT\"",
            String::from_utf8_lossy(magic)
        )));
    }
    let version = r.u32()?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {}", version)));
    }
    let count = r.u32()? as usize;
    let mut params = ParamStore::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = String::from_utf8(r.take(name_len)?.to_vec())
            .map_err(|_| Error::Format("invalid UTF-8 in tensor name".into()))?;
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        let bytes = r.take(4 * n)?;
        let data = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        params.add(&name, &shape, data)?;
    }
    let lines = r.u32()? as usize;
    let mut metadata = Vec::with_capacity(lines);
    for _ in 0..lines {
        let len = r.u32()? as usize;
        let line = String::from_utf8(r.take(len)?.to_vec())
            .map_err(|_| Error::Format("invalid UTF-8 in metadata".into()))?;
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Format(format!("metadata line without '=': {}", line)))?;
        metadata.push((k.to_string(), v.to_string()));
    }
    if r.pos != r.buf.len() {
        return Err(Error::Format("trailing bytes after checkpoint payload".into()));
    }
    Ok((params, metadata))
}
