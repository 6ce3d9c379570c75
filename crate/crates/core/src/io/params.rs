//! GPFP parameter files: named sections of f64 little-endian vectors.
//!
//! Layout: magic "GPFP", version u32, section count u32, then per section
//! a u32 name length, the name bytes, a u64 value count and the values.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub const GPFP_MAGIC: &[u8; 4] = b"GPFP";
pub const GPFP_VERSION: u32 = 1;

pub fn write_param_sections(path: &Path, sections: &[(&str, &[f64])]) -> Result<()> {
    let mut buf = Vec::new();
    buf.extend_from_slice(GPFP_MAGIC);
    buf.extend_from_slice(&GPFP_VERSION.to_le_bytes());
    buf.extend_from_slice(&(sections.len() as u32).to_le_bytes());
    for (name, values) in sections {
        let nb = name.as_bytes();
        buf.extend_from_slice(&(nb.len() as u32).to_le_bytes());
        buf.extend_from_slice(nb);
        buf.extend_from_slice(&(values.len() as u64).to_le_bytes());
        for v in *values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_param_sections(path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    parse_param_sections(&std::fs::read(path)?)
}

pub fn parse_param_sections(bytes: &[u8]) -> Result<Vec<(String, Vec<f64>)>> {
    if bytes.len() < 12 {
        return Err(Error::parse(bytes.len(), "file shorter than the 12-byte header"));
    }
    if &bytes[0..4] != GPFP_MAGIC {
        return Err(Error::parse(0, "bad magic (expected 'GPFP')"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != GPFP_VERSION {
        return Err(Error::parse(4, format!("unsupported version {version}")));
    }
    let count = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let mut off = 12usize;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        if bytes.len() < off + 4 {
            return Err(Error::parse(off, "truncated section name length"));
        }
        let name_len = u32::from_le_bytes(bytes[off..off + 4].try_into().unwrap()) as usize;
        off += 4;
        if bytes.len() < off + name_len {
            return Err(Error::parse(off, "truncated section name"));
        }
        let name = std::str::from_utf8(&bytes[off..off + name_len])
            .map_err(|_| Error::parse(off, "non-utf8 section name"))?
            .to_string();
        off += name_len;
        if bytes.len() < off + 8 {
            return Err(Error::parse(off, "truncated value count"));
        }
        let n = u64::from_le_bytes(bytes[off..off + 8].try_into().unwrap()) as usize;
        off += 8;
        if bytes.len() < off + n * 8 {
            return Err(Error::parse(off, format!("truncated values: need {n} f64s")));
        }
        let mut values = Vec::with_capacity(n);
        for i in 0..n {
            values.push(f64::from_le_bytes(bytes[off + i * 8..off + i * 8 + 8].try_into().unwrap()));
        }
        off += n * 8;
        out.push((name, values));
    }
    if off != bytes.len() {
        return Err(Error::parse(off, "trailing bytes after sections"));
    }
    Ok(out)
}
