//! Dense row-major image planes used for images, feature maps and depth maps.

use crate::error::{Error, Result};

/// Row-major H x W x C array of f64. Channel-interleaved.
///
/// Pixel (x, y) covers the unit square with center at continuous
/// coordinates (x + 0.5, y + 0.5); all bilinear sampling in the crate
/// follows that convention.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Plane {
    pub fn zeros(width: usize, height: usize, channels: usize) -> Self {
        Plane { width, height, channels, data: vec![0.0; width * height * channels] }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::invalid(format!(
                "plane data length {} does not match {}x{}x{}",
                data.len(),
                width,
                height,
                channels
            )));
        }
        Ok(Plane { width, height, channels, data })
    }

    #[inline]
    pub fn idx(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = self.idx(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f64] {
        let i = self.idx(x, y);
        &mut self.data[i..i + self.channels]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Bilinear sample at continuous pixel coordinates, zero padding
    /// outside the image. Writes `channels` values into `out`.
    pub fn sample_bilinear(&self, px: f64, py: f64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.channels);
        out.fill(0.0);
        let gx = px - 0.5;
        let gy = py - 0.5;
        let x0 = gx.floor();
        let y0 = gy.floor();
        let fx = gx - x0;
        let fy = gy - y0;
        let x0 = x0 as i64;
        let y0 = y0 as i64;
        let corners = [
            (x0, y0, (1.0 - fx) * (1.0 - fy)),
            (x0 + 1, y0, fx * (1.0 - fy)),
            (x0, y0 + 1, (1.0 - fx) * fy),
            (x0 + 1, y0 + 1, fx * fy),
        ];
        for (cx, cy, w) in corners {
            if w == 0.0 || cx < 0 || cy < 0 || cx >= self.width as i64 || cy >= self.height as i64 {
                continue;
            }
            let p = self.pixel(cx as usize, cy as usize);
            for (o, v) in out.iter_mut().zip(p) {
                *o += w * v;
            }
        }
    }

    /// Single-channel convenience wrapper around [`Plane::sample_bilinear`].
    pub fn sample_bilinear_scalar(&self, px: f64, py: f64) -> f64 {
        debug_assert_eq!(self.channels, 1);
        let mut out = [0.0];
        self.sample_bilinear(px, py, &mut out);
        out[0]
    }

    /// Normalizes one channel to zero mean / unit variance in place.
    /// A constant channel is shifted to zero and left unscaled.
    pub fn standardize_channel(&mut self, c: usize) {
        let n = (self.width * self.height) as f64;
        let mut mean = 0.0;
        let mut iter = self.data[c..].iter().step_by(self.channels);
        for v in iter.by_ref() {
            mean += v;
        }
        mean /= n;
        let mut var = 0.0;
        for v in self.data[c..].iter().step_by(self.channels) {
            var += (v - mean) * (v - mean);
        }
        var /= n;
        let inv_std = if var > 1e-24 { 1.0 / var.sqrt() } else { 1.0 };
        for v in self.data[c..].iter_mut().step_by(self.channels) {
            *v = (*v - mean) * inv_std;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bilinear_at_pixel_center_returns_pixel() {
        let mut p = Plane::zeros(4, 4, 2);
        p.pixel_mut(2, 1).copy_from_slice(&[3.0, -1.0]);
        let mut out = [0.0; 2];
        p.sample_bilinear(2.5, 1.5, &mut out);
        assert_eq!(out, [3.0, -1.0]);
    }

    #[test]
    fn bilinear_midpoint_averages() {
        let mut p = Plane::zeros(2, 1, 1);
        p.pixel_mut(0, 0)[0] = 1.0;
        p.pixel_mut(1, 0)[0] = 3.0;
        assert!((p.sample_bilinear_scalar(1.0, 0.5) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn bilinear_outside_is_zero_padded() {
        let mut p = Plane::zeros(2, 2, 1);
        p.data.fill(5.0);
        // Far outside: exactly zero.
        assert_eq!(p.sample_bilinear_scalar(-3.0, 1.0), 0.0);
        // Half a pixel outside the border: blends toward zero.
        let v = p.sample_bilinear_scalar(0.0, 1.0);
        assert!((v - 2.5).abs() < 1e-12);
    }

    #[test]
    fn standardize_gives_zero_mean_unit_var() {
        let mut p = Plane::from_data(3, 1, 1, vec![1.0, 2.0, 6.0]).unwrap();
        p.standardize_channel(0);
        let mean: f64 = p.data.iter().sum::<f64>() / 3.0;
        let var: f64 = p.data.iter().map(|v| v * v).sum::<f64>() / 3.0;
        assert!(mean.abs() < 1e-12);
        assert!((var - 1.0).abs() < 1e-12);
    }
}
