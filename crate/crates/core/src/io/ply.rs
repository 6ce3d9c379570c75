//! Binary little-endian PLY with float32 x,y,z and optional uchar RGB.
//!
//! The reader is strict: only this layout is accepted, and malformed
//! input fails with the byte offset of the problem.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::math::Vec3;

pub struct PlyCloud {
    pub positions: Vec<Vec3>,
    /// Colors in [0,1] when the file carries red/green/blue.
    pub colors: Option<Vec<[f64; 3]>>,
}

pub fn write_ply(path: &Path, positions: &[Vec3], colors: Option<&[[f64; 3]]>) -> Result<()> {
    if let Some(c) = colors {
        if c.len() != positions.len() {
            return Err(Error::invalid("color count must match position count"));
        }
    }
    let mut header = String::new();
    header.push_str("ply\nformat binary_little_endian 1.0\n");
    header.push_str(&format!("element vertex {}\n", positions.len()));
    header.push_str("property float x\nproperty float y\nproperty float z\n");
    if colors.is_some() {
        header.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    header.push_str("end_header\n");

    let mut buf = Vec::with_capacity(header.len() + positions.len() * 15);
    buf.extend_from_slice(header.as_bytes());
    for (i, p) in positions.iter().enumerate() {
        for v in [p.x, p.y, p.z] {
            buf.extend_from_slice(&(v as f32).to_le_bytes());
        }
        if let Some(c) = colors {
            for ch in c[i] {
                buf.push((ch * 255.0).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&buf)?;
    Ok(())
}

/// Reads one header line (ASCII, newline-terminated); returns (line, next offset).
fn read_line(bytes: &[u8], offset: usize) -> Result<(String, usize)> {
    let mut end = offset;
    while end < bytes.len() && bytes[end] != b'\n' {
        end += 1;
    }
    if end >= bytes.len() {
        return Err(Error::parse(offset, "unterminated header line"));
    }
    let line = std::str::from_utf8(&bytes[offset..end])
        .map_err(|_| Error::parse(offset, "non-ascii header line"))?;
    Ok((line.trim_end_matches('\r').to_string(), end + 1))
}

pub fn read_ply(path: &Path) -> Result<PlyCloud> {
    let bytes = std::fs::read(path)?;
    parse_ply(&bytes)
}

pub fn parse_ply(bytes: &[u8]) -> Result<PlyCloud> {
    let mut off = 0usize;
    let (magic, next) = read_line(bytes, off)?;
    if magic != "ply" {
        return Err(Error::parse(0, "missing 'ply' magic"));
    }
    off = next;
    let (format, next) = read_line(bytes, off)?;
    if format != "format binary_little_endian 1.0" {
        return Err(Error::parse(off, format!("unsupported format '{format}'")));
    }
    off = next;

    let mut vertex_count: Option<usize> = None;
    let mut props: Vec<String> = Vec::new();
    loop {
        let line_off = off;
        let (line, next) = read_line(bytes, off)?;
        off = next;
        if line == "end_header" {
            break;
        }
        if line.starts_with("comment") {
            continue;
        }
        if let Some(rest) = line.strip_prefix("element ") {
            let mut it = rest.split_whitespace();
            let name = it.next().unwrap_or("");
            if name != "vertex" {
                return Err(Error::parse(line_off, format!("unsupported element '{name}'")));
            }
            let count = it
                .next()
                .and_then(|c| c.parse::<usize>().ok())
                .ok_or_else(|| Error::parse(line_off, "bad vertex count"))?;
            vertex_count = Some(count);
            continue;
        }
        if let Some(rest) = line.strip_prefix("property ") {
            props.push(rest.to_string());
            continue;
        }
        return Err(Error::parse(line_off, format!("unexpected header line '{line}'")));
    }

    let n = vertex_count.ok_or_else(|| Error::parse(0, "missing vertex element"))?;
    let with_color = match props.as_slice() {
        [x, y, z] if x == "float x" && y == "float y" && z == "float z" => false,
        [x, y, z, r, g, b]
            if x == "float x"
                && y == "float y"
                && z == "float z"
                && r == "uchar red"
                && g == "uchar green"
                && b == "uchar blue" =>
        {
            true
        }
        _ => {
            return Err(Error::parse(
                0,
                format!("unsupported property layout: {props:?} (expected float x,y,z [+ uchar rgb])"),
            ))
        }
    };
    let stride = if with_color { 15 } else { 12 };
    let need = n * stride;
    if bytes.len() - off < need {
        return Err(Error::parse(
            bytes.len(),
            format!("truncated payload: need {need} bytes, found {}", bytes.len() - off),
        ));
    }
    if bytes.len() - off > need {
        return Err(Error::parse(off + need, "trailing bytes after vertex data"));
    }

    let mut positions = Vec::with_capacity(n);
    let mut colors = if with_color { Some(Vec::with_capacity(n)) } else { None };
    for i in 0..n {
        let base = off + i * stride;
        let f = |j: usize| -> f64 {
            f32::from_le_bytes(bytes[base + 4 * j..base + 4 * j + 4].try_into().unwrap()) as f64
        };
        let p = Vec3::new(f(0), f(1), f(2));
        if !p.x.is_finite() || !p.y.is_finite() || !p.z.is_finite() {
            return Err(Error::parse(base, "non-finite vertex position"));
        }
        positions.push(p);
        if let Some(c) = colors.as_mut() {
            c.push([
                bytes[base + 12] as f64 / 255.0,
                bytes[base + 13] as f64 / 255.0,
                bytes[base + 14] as f64 / 255.0,
            ]);
        }
    }
    Ok(PlyCloud { positions, colors })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_colors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.ply");
        let pts = vec![Vec3::new(0.5, -1.25, 3.0), Vec3::new(2.0, 0.0, -7.5)];
        let colors = vec![[1.0, 0.0, 0.5019607843137255], [0.0, 1.0, 0.0]];
        write_ply(&path, &pts, Some(&colors)).unwrap();
        let cloud = read_ply(&path).unwrap();
        for (a, b) in cloud.positions.iter().zip(&pts) {
            assert!((a - b).norm() < 1e-6);
        }
        let rc = cloud.colors.unwrap();
        for (a, b) in rc.iter().zip(&colors) {
            for c in 0..3 {
                assert!((a[c] - b[c]).abs() < 1.0 / 255.0 + 1e-9);
            }
        }
    }

    #[test]
    fn hand_written_fixture_exact_positions() {
        // Three known points, no colors, bytes assembled by hand.
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"ply\nformat binary_little_endian 1.0\nelement vertex 3\n\
              property float x\nproperty float y\nproperty float z\nend_header\n",
        );
        for v in [1.0f32, 2.0, 3.0, -4.5, 0.25, 8.0, 0.0, -1.0, 100.0] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
        let cloud = parse_ply(&bytes).unwrap();
        assert_eq!(cloud.positions.len(), 3);
        assert_eq!(cloud.positions[0], Vec3::new(1.0, 2.0, 3.0));
        assert_eq!(cloud.positions[1], Vec3::new(-4.5, 0.25, 8.0));
        assert_eq!(cloud.positions[2], Vec3::new(0.0, -1.0, 100.0));
        assert!(cloud.colors.is_none());
    }

    #[test]
    fn truncated_file_is_a_parse_error() {
        let mut bytes = Vec::new();
        bytes.extend_from_slice(
            b"ply\nformat binary_little_endian 1.0\nelement vertex 2\n\
              property float x\nproperty float y\nproperty float z\nend_header\n",
        );
        bytes.extend_from_slice(&1.0f32.to_le_bytes());
        match parse_ply(&bytes) {
            Err(Error::Parse { .. }) => {}
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_magic_and_ascii_format_rejected() {
        assert!(matches!(parse_ply(b"plx\nrest\n"), Err(Error::Parse { offset: 0, .. })));
        let bytes = b"ply\nformat ascii 1.0\nelement vertex 0\nend_header\n";
        assert!(parse_ply(bytes).is_err());
    }

    #[test]
    fn no_panic_on_random_bytes() {
        use rand::prelude::*;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let n = rng.gen_range(0..200);
            let bytes: Vec<u8> = (0..n).map(|_| rng.gen()).collect();
            let _ = parse_ply(&bytes); // must return Err, never panic
        }
        // Random bytes behind a valid-looking prefix.
        for _ in 0..100 {
            let mut bytes = b"ply\nformat binary_little_endian 1.0\n".to_vec();
            let n = rng.gen_range(0..120);
            bytes.extend((0..n).map(|_| rng.gen::<u8>()));
            let _ = parse_ply(&bytes);
        }
    }
}
