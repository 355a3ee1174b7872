//! "DSG1" gridded-field format.
//!
//! Layout: magic "DSG1", u32 LE version=1, u32 LE channels, u32 LE height,
//! u32 LE width, then per channel f32 LE row-major values. All channels share
//! one shape.

use crate::error::{Error, Result};
use crate::grid::Field;
use std::io::{Read, Write};
use std::path::Path;

const MAGIC: &[u8; 4] = b"DSG1";
const VERSION: u32 = 1;

pub fn write_grid(path: &Path, channels: &[Field]) -> Result<()> {
    let first = channels
        .first()
        .ok_or_else(|| Error::Usage("write_grid needs at least one channel".into()))?;
    let (h, w) = (first.height(), first.width());
    for c in channels {
        if c.height() != h || c.width() != w {
            return Err(Error::Dimension(format!(
                "grid channels disagree: {}x{} vs {}x{}",
                c.height(),
                c.width(),
                h,
                w
            )));
        }
    }
    let mut out = Vec::with_capacity(20 + 4 * channels.len() * h * w);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(channels.len() as u32).to_le_bytes());
    out.extend_from_slice(&(h as u32).to_le_bytes());
    out.extend_from_slice(&(w as u32).to_le_bytes());
    for c in channels {
        for &v in c.values() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut file = std::fs::File::create(path)?;
    file.write_all(&out)?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<Vec<Field>> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    if buf.len() < 20 {
        return Err(Error::Format("truncated grid file (missing header)".into()));
    }
    if &buf[0..4] != MAGIC {
        return Err(Error::Format(format!(
            "bad grid magic {:?}, expected \"DSG1\"",
            String::from_utf8_lossy(&buf[0..4])
        )));
    }
    let u32_at = |i: usize| u32::from_le_bytes([buf[i], buf[i + 1], buf[i + 2], buf[i + 3]]);
    let version = u32_at(4);
    if version != VERSION {
        return Err(Error::Format(format!("unsupported grid version {}", version)));
    }
    let channels = u32_at(8) as usize;
    let h = u32_at(12) as usize;
    let w = u32_at(16) as usize;
    if channels == 0 || h == 0 || w == 0 {
        return Err(Error::Format("grid header with zero dimension".into()));
    }
    let expected = 20 + 4 * channels * h * w;
    if buf.len() != expected {
        return Err(Error::Format(format!(
            "truncated grid file: {} bytes, expected {}",
            buf.len(),
            expected
        )));
    }
    let mut out = Vec::with_capacity(channels);
    for ci in 0..channels {
        let start = 20 + 4 * ci * h * w;
        let values = buf[start..start + 4 * h * w]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        out.push(Field::new(h, w, values)?);
    }
    Ok(out)
}
