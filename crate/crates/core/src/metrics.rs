//! Image quality metrics: PSNR and SSIM on [0,1] images.

use crate::error::{Error, Result};
use crate::img::Plane;

/// PSNR in dB for images in [0,1]: 10 log10(1 / MSE).
/// Identical images return +inf.
pub fn psnr(a: &Plane, b: &Plane) -> Result<f64> {
    check_pair(a, b)?;
    let mut mse = 0.0;
    for (x, y) in a.data.iter().zip(&b.data) {
        mse += (x - y) * (x - y);
    }
    mse /= a.data.len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

fn check_pair(a: &Plane, b: &Plane) -> Result<()> {
    if a.width != b.width || a.height != b.height || a.channels != b.channels {
        return Err(Error::invalid("metric inputs must share dimensions"));
    }
    Ok(())
}

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

fn ssim_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    let mut sum = 0.0;
    for (i, v) in k.iter_mut().enumerate() {
        *v = (-((i as f64 - c) * (i as f64 - c)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
        sum += *v;
    }
    for v in k.iter_mut() {
        *v /= sum;
    }
    k
}

/// Mean SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
/// K2 = 0.03, dynamic range 1. Windows are evaluated where they fit
/// entirely inside the image; the mean runs over positions and channels.
pub fn ssim(a: &Plane, b: &Plane) -> Result<f64> {
    check_pair(a, b)?;
    if a.width < SSIM_WINDOW || a.height < SSIM_WINDOW {
        return Err(Error::invalid("image smaller than the 11x11 SSIM window"));
    }
    let kern = ssim_kernel();
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let mut total = 0.0;
    let mut count = 0usize;
    let half = SSIM_WINDOW / 2;
    for ch in 0..a.channels {
        for cy in half..a.height - half {
            for cx in half..a.width - half {
                let mut mu_a = 0.0;
                let mut mu_b = 0.0;
                let mut aa = 0.0;
                let mut bb = 0.0;
                let mut ab = 0.0;
                for dy in 0..SSIM_WINDOW {
                    let wy = kern[dy];
                    let y = cy + dy - half;
                    for dx in 0..SSIM_WINDOW {
                        let w = wy * kern[dx];
                        let x = cx + dx - half;
                        let va = a.pixel(x, y)[ch];
                        let vb = b.pixel(x, y)[ch];
                        mu_a += w * va;
                        mu_b += w * vb;
                        aa += w * va * va;
                        bb += w * vb * vb;
                        ab += w * va * vb;
                    }
                }
                let var_a = aa - mu_a * mu_a;
                let var_b = bb - mu_b * mu_b;
                let cov = ab - mu_a * mu_b;
                let s = ((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
                    / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2));
                total += s;
                count += 1;
            }
        }
    }
    Ok(total / count as f64)
}
