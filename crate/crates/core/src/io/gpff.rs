//! GPFF per-point feature sidecar: a 16-byte header (magic "GPFF",
//! version u32, point count u32, feature dim u32, all little-endian)
//! followed by N x 43 float32 rows laid out color(3) | low(8) | high(32).

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::scene::{F_C_DIM, F_H_DIM, F_L_DIM, FEATURE_DIM};

pub const GPFF_MAGIC: &[u8; 4] = b"GPFF";
pub const GPFF_VERSION: u32 = 1;

pub struct GpffData {
    pub f_c: Vec<[f64; F_C_DIM]>,
    pub f_l: Vec<[f64; F_L_DIM]>,
    pub f_h: Vec<[f64; F_H_DIM]>,
}

pub fn write_gpff(
    path: &Path,
    f_c: &[[f64; F_C_DIM]],
    f_l: &[[f64; F_L_DIM]],
    f_h: &[[f64; F_H_DIM]],
) -> Result<()> {
    let n = f_c.len();
    if f_l.len() != n || f_h.len() != n {
        return Err(Error::invalid("feature arrays must have equal length"));
    }
    let mut buf = Vec::with_capacity(16 + n * FEATURE_DIM * 4);
    buf.extend_from_slice(GPFF_MAGIC);
    buf.extend_from_slice(&GPFF_VERSION.to_le_bytes());
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&(FEATURE_DIM as u32).to_le_bytes());
    for i in 0..n {
        for v in f_c[i] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for v in f_l[i] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for v in f_h[i] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

pub fn read_gpff(path: &Path) -> Result<GpffData> {
    let bytes = std::fs::read(path)?;
    parse_gpff(&bytes)
}

pub fn parse_gpff(bytes: &[u8]) -> Result<GpffData> {
    if bytes.len() < 16 {
        return Err(Error::parse(bytes.len(), "file shorter than the 16-byte header"));
    }
    if &bytes[0..4] != GPFF_MAGIC {
        return Err(Error::parse(0, "bad magic (expected 'GPFF')"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let version = u32_at(4);
    if version != GPFF_VERSION {
        return Err(Error::parse(4, format!("unsupported version {version}")));
    }
    let n = u32_at(8) as usize;
    let dim = u32_at(12) as usize;
    if dim != FEATURE_DIM {
        return Err(Error::parse(12, format!("feature dim {dim}, expected {FEATURE_DIM}")));
    }
    let need = 16 + n * FEATURE_DIM * 4;
    if bytes.len() < need {
        return Err(Error::parse(bytes.len(), format!("truncated payload: need {need} bytes")));
    }
    if bytes.len() > need {
        return Err(Error::parse(need, "trailing bytes after feature data"));
    }
    let mut f_c = Vec::with_capacity(n);
    let mut f_l = Vec::with_capacity(n);
    let mut f_h = Vec::with_capacity(n);
    let mut off = 16;
    let mut next_f32 = |off: &mut usize| -> f64 {
        let v = f32::from_le_bytes(bytes[*off..*off + 4].try_into().unwrap()) as f64;
        *off += 4;
        v
    };
    for _ in 0..n {
        let c: [f64; F_C_DIM] = std::array::from_fn(|_| next_f32(&mut off));
        let l: [f64; F_L_DIM] = std::array::from_fn(|_| next_f32(&mut off));
        let h: [f64; F_H_DIM] = std::array::from_fn(|_| next_f32(&mut off));
        if c.iter().chain(&l).chain(&h).any(|v| !v.is_finite()) {
            return Err(Error::parse(off - FEATURE_DIM * 4, "non-finite feature value"));
        }
        f_c.push(c);
        f_l.push(l);
        f_h.push(h);
    }
    Ok(GpffData { f_c, f_l, f_h })
}
