//! 8-bit RGB PNG bridges for [`Plane`] images in [0,1].

use std::path::Path;

use crate::error::{Error, Result};
use crate::img::Plane;

pub fn write_png(path: &Path, img: &Plane) -> Result<()> {
    if img.channels != 3 {
        return Err(Error::invalid("PNG writer expects a 3-channel plane"));
    }
    let mut out = image::RgbImage::new(img.width as u32, img.height as u32);
    for y in 0..img.height {
        for x in 0..img.width {
            let p = img.pixel(x, y);
            out.put_pixel(
                x as u32,
                y as u32,
                image::Rgb([to_u8(p[0]), to_u8(p[1]), to_u8(p[2])]),
            );
        }
    }
    out.save(path).map_err(|e| Error::invalid(format!("png write failed: {e}")))?;
    Ok(())
}

#[inline]
fn to_u8(v: f64) -> u8 {
    (v * 255.0).round().clamp(0.0, 255.0) as u8
}

pub fn read_png(path: &Path) -> Result<Plane> {
    let img = image::open(path)
        .map_err(|e| Error::invalid(format!("cannot read image {}: {e}", path.display())))?
        .into_rgb8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut plane = Plane::zeros(w, h, 3);
    for y in 0..h {
        for x in 0..w {
            let p = img.get_pixel(x as u32, y as u32);
            plane.pixel_mut(x, y).copy_from_slice(&[
                p[0] as f64 / 255.0,
                p[1] as f64 / 255.0,
                p[2] as f64 / 255.0,
            ]);
        }
    }
    Ok(plane)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_at_8bit() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("img.png");
        let mut img = Plane::zeros(9, 7, 3);
        for (i, v) in img.data.iter_mut().enumerate() {
            *v = ((i % 256) as f64) / 255.0;
        }
        write_png(&path, &img).unwrap();
        let back = read_png(&path).unwrap();
        for (a, b) in back.data.iter().zip(&img.data) {
            assert!((a - b).abs() < 0.5 / 255.0 + 1e-12);
        }
    }
}
