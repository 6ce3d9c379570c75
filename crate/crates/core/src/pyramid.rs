//! Deterministic handcrafted per-view feature pyramids.
//!
//! An 8-channel full-resolution low level (RGB, luma, Sobel-x, Sobel-y,
//! gradient magnitude, 3x3 local variance) and a 32-channel quarter-
//! resolution high level (multi-scale Gaussian blurs plus an oriented
//! gradient bank, 4 scales x 8 channels). Every channel is standardized
//! to zero mean / unit variance per image. The extractor sits behind a
//! plain function so a learned one can replace it without touching
//! downstream shapes.

use crate::error::{Error, Result};
use crate::img::Plane;

pub const LOW_CHANNELS: usize = 8;
pub const HIGH_CHANNELS: usize = 32;

/// Per-view feature maps: `low` at full resolution, `high` at quarter.
#[derive(Debug, Clone)]
pub struct FeaturePyramid {
    pub low: Plane,
    pub high: Plane,
}

/// Luma weights, Rec.601.
fn luma(px: &[f64]) -> f64 {
    0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2]
}

fn gray_of(image: &Plane) -> Plane {
    let mut g = Plane::zeros(image.width, image.height, 1);
    for y in 0..image.height {
        for x in 0..image.width {
            g.pixel_mut(x, y)[0] = luma(image.pixel(x, y));
        }
    }
    g
}

#[inline]
fn clamp_get(g: &Plane, x: i64, y: i64) -> f64 {
    let x = x.clamp(0, g.width as i64 - 1) as usize;
    let y = y.clamp(0, g.height as i64 - 1) as usize;
    g.pixel(x, y)[0]
}

/// 3x3 Sobel pair on a single-channel plane, clamp-to-edge borders.
fn sobel(g: &Plane) -> (Plane, Plane) {
    let mut sx = Plane::zeros(g.width, g.height, 1);
    let mut sy = Plane::zeros(g.width, g.height, 1);
    for y in 0..g.height as i64 {
        for x in 0..g.width as i64 {
            let v = |dx: i64, dy: i64| clamp_get(g, x + dx, y + dy);
            let gx = (v(1, -1) + 2.0 * v(1, 0) + v(1, 1)) - (v(-1, -1) + 2.0 * v(-1, 0) + v(-1, 1));
            let gy = (v(-1, 1) + 2.0 * v(0, 1) + v(1, 1)) - (v(-1, -1) + 2.0 * v(0, -1) + v(1, -1));
            sx.pixel_mut(x as usize, y as usize)[0] = gx;
            sy.pixel_mut(x as usize, y as usize)[0] = gy;
        }
    }
    (sx, sy)
}

fn local_variance3(g: &Plane) -> Plane {
    let mut out = Plane::zeros(g.width, g.height, 1);
    for y in 0..g.height as i64 {
        for x in 0..g.width as i64 {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let v = clamp_get(g, x + dx, y + dy);
                    sum += v;
                    sq += v * v;
                }
            }
            let mean = sum / 9.0;
            out.pixel_mut(x as usize, y as usize)[0] = (sq / 9.0 - mean * mean).max(0.0);
        }
    }
    out
}

/// Separable Gaussian blur with kernel radius 3*sigma.
fn gaussian_blur(g: &Plane, sigma: f64) -> Plane {
    let radius = (3.0 * sigma).ceil().max(1.0) as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let mut sum = 0.0;
    for i in -radius..=radius {
        let w = (-(i as f64) * (i as f64) / (2.0 * sigma * sigma)).exp();
        kernel.push(w);
        sum += w;
    }
    for w in &mut kernel {
        *w /= sum;
    }
    let mut tmp = Plane::zeros(g.width, g.height, 1);
    for y in 0..g.height as i64 {
        for x in 0..g.width as i64 {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * clamp_get(g, x + k as i64 - radius, y);
            }
            tmp.pixel_mut(x as usize, y as usize)[0] = acc;
        }
    }
    let mut out = Plane::zeros(g.width, g.height, 1);
    for y in 0..g.height as i64 {
        for x in 0..g.width as i64 {
            let mut acc = 0.0;
            for (k, w) in kernel.iter().enumerate() {
                acc += w * clamp_get(&tmp, x, y + k as i64 - radius);
            }
            out.pixel_mut(x as usize, y as usize)[0] = acc;
        }
    }
    out
}

/// 4x box downsample of a single-channel plane (width/4 x height/4,
/// truncating remainders).
fn downsample4(g: &Plane) -> Plane {
    let w = (g.width / 4).max(1);
    let h = (g.height / 4).max(1);
    let mut out = Plane::zeros(w, h, 1);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            let mut n = 0.0;
            for dy in 0..4 {
                for dx in 0..4 {
                    let sx = x * 4 + dx;
                    let sy = y * 4 + dy;
                    if sx < g.width && sy < g.height {
                        acc += g.pixel(sx, sy)[0];
                        n += 1.0;
                    }
                }
            }
            out.pixel_mut(x, y)[0] = acc / n;
        }
    }
    out
}

/// Extracts the low/high feature pyramid for one image in [0,1].
pub fn extract_feature_pyramid(image: &Plane) -> Result<FeaturePyramid> {
    if image.channels != 3 {
        return Err(Error::invalid("feature extraction expects a 3-channel image"));
    }
    if !image.is_finite() {
        return Err(Error::invalid("image contains non-finite pixels"));
    }
    let gray = gray_of(image);
    let (sx, sy) = sobel(&gray);
    let var = local_variance3(&gray);

    let mut low = Plane::zeros(image.width, image.height, LOW_CHANNELS);
    for y in 0..image.height {
        for x in 0..image.width {
            let px = image.pixel(x, y);
            let gx = sx.pixel(x, y)[0];
            let gy = sy.pixel(x, y)[0];
            let out = low.pixel_mut(x, y);
            out[0] = px[0];
            out[1] = px[1];
            out[2] = px[2];
            out[3] = gray.pixel(x, y)[0];
            out[4] = gx;
            out[5] = gy;
            out[6] = (gx * gx + gy * gy).sqrt();
            out[7] = var.pixel(x, y)[0];
        }
    }
    for c in 0..LOW_CHANNELS {
        low.standardize_channel(c);
    }

    let quarter = downsample4(&gray);
    let mut high = Plane::zeros(quarter.width, quarter.height, HIGH_CHANNELS);
    let scales = [0.5, 1.0, 2.0, 4.0];
    for (si, sigma) in scales.iter().enumerate() {
        let blurred = gaussian_blur(&quarter, *sigma);
        let (bx, by) = sobel(&blurred);
        let base = si * 8;
        for y in 0..quarter.height {
            for x in 0..quarter.width {
                let gx = bx.pixel(x, y)[0];
                let gy = by.pixel(x, y)[0];
                let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
                let out = high.pixel_mut(x, y);
                out[base] = blurred.pixel(x, y)[0];
                out[base + 1] = gx;
                out[base + 2] = gy;
                out[base + 3] = (gx * gx + gy * gy).sqrt();
                // Oriented gradient magnitudes at 0/45/90/135 degrees.
                out[base + 4] = gx.abs();
                out[base + 5] = ((gx + gy) * inv_sqrt2).abs();
                out[base + 6] = gy.abs();
                out[base + 7] = ((gx - gy) * inv_sqrt2).abs();
            }
        }
    }
    for c in 0..HIGH_CHANNELS {
        high.standardize_channel(c);
    }

    Ok(FeaturePyramid { low, high })
}

impl FeaturePyramid {
    /// Samples the low map at full-resolution pixel coordinates.
    pub fn sample_low(&self, px: f64, py: f64, out: &mut [f64]) {
        self.low.sample_bilinear(px, py, out);
    }

    /// Samples the high map given full-resolution pixel coordinates.
    pub fn sample_high(&self, px: f64, py: f64, out: &mut [f64]) {
        self.high.sample_bilinear(px / 4.0, py / 4.0, out);
    }
}
