//! PFM grayscale float maps ("Pf"), little-endian (negative scale),
//! rows stored bottom-to-top per the original format.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::img::Plane;

pub fn write_pfm(path: &Path, map: &Plane) -> Result<()> {
    if map.channels != 1 {
        return Err(Error::invalid("PFM writer expects a single-channel plane"));
    }
    let mut buf = Vec::with_capacity(map.data.len() * 4 + 32);
    buf.extend_from_slice(format!("Pf\n{} {}\n-1.0\n", map.width, map.height).as_bytes());
    for y in (0..map.height).rev() {
        for x in 0..map.width {
            buf.extend_from_slice(&(map.pixel(x, y)[0] as f32).to_le_bytes());
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

fn next_token(bytes: &[u8], off: &mut usize) -> Result<String> {
    while *off < bytes.len() && bytes[*off].is_ascii_whitespace() {
        *off += 1;
    }
    let start = *off;
    while *off < bytes.len() && !bytes[*off].is_ascii_whitespace() {
        *off += 1;
    }
    if start == *off {
        return Err(Error::parse(start, "unexpected end of header"));
    }
    std::str::from_utf8(&bytes[start..*off])
        .map(|s| s.to_string())
        .map_err(|_| Error::parse(start, "non-ascii header token"))
}

pub fn read_pfm(path: &Path) -> Result<Plane> {
    parse_pfm(&std::fs::read(path)?)
}

pub fn parse_pfm(bytes: &[u8]) -> Result<Plane> {
    let mut off = 0usize;
    let magic = next_token(bytes, &mut off)?;
    if magic != "Pf" {
        return Err(Error::parse(0, format!("bad magic '{magic}' (expected grayscale 'Pf')")));
    }
    let w_off = off;
    let width: usize = next_token(bytes, &mut off)?
        .parse()
        .map_err(|_| Error::parse(w_off, "bad width"))?;
    let h_off = off;
    let height: usize = next_token(bytes, &mut off)?
        .parse()
        .map_err(|_| Error::parse(h_off, "bad height"))?;
    let s_off = off;
    let scale: f64 = next_token(bytes, &mut off)?
        .parse()
        .map_err(|_| Error::parse(s_off, "bad scale"))?;
    if scale >= 0.0 {
        return Err(Error::parse(s_off, "big-endian PFM not supported (scale must be negative)"));
    }
    // Exactly one whitespace byte separates the header from the payload.
    if off >= bytes.len() {
        return Err(Error::parse(off, "missing payload"));
    }
    off += 1;
    let need = width * height * 4;
    if bytes.len() - off < need {
        return Err(Error::parse(bytes.len(), format!("truncated payload: need {need} bytes")));
    }
    let mut map = Plane::zeros(width, height, 1);
    for row in 0..height {
        let y = height - 1 - row;
        for x in 0..width {
            let base = off + (row * width + x) * 4;
            let v = f32::from_le_bytes(bytes[base..base + 4].try_into().unwrap()) as f64;
            map.pixel_mut(x, y)[0] = v;
        }
    }
    Ok(map)
}
