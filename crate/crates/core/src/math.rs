//! Shared math aliases and small numeric helpers.

pub use nalgebra::{Matrix3, Matrix4, Vector2, Vector3};

pub type Vec2 = Vector2<f64>;
pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Mat4 = Matrix4<f64>;

/// splitmix64 step, used to derive independent RNG streams from one seed.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a substream seed from a base seed and a stream tag/index pair.
pub fn derive_seed(base: u64, tag: u64, index: u64) -> u64 {
    splitmix64(splitmix64(base ^ tag.wrapping_mul(0x9e37_79b9)).wrapping_add(index))
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn softplus(x: f64) -> f64 {
    // log(1 + e^x), stable for large |x|
    if x > 30.0 {
        x
    } else if x < -30.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// d softplus / dx = sigmoid(x).
pub fn softplus_deriv(x: f64) -> f64 {
    sigmoid(x)
}

/// In-place softmax over a small slice.
pub fn softmax_inplace(xs: &mut [f64]) {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// Backward pass of softmax: given outputs `a` and upstream `da`,
/// writes dL/d(inputs) into `ds`.
pub fn softmax_backward(a: &[f64], da: &[f64], ds: &mut [f64]) {
    let dot: f64 = a.iter().zip(da).map(|(x, y)| x * y).sum();
    for i in 0..a.len() {
        ds[i] = a[i] * (da[i] - dot);
    }
}

/// Intersection of a ray with a sphere; returns (t0, t1) with t0 <= t1,
/// or None if the ray misses.
pub fn ray_sphere(origin: Vec3, dir: Vec3, center: Vec3, radius: f64) -> Option<(f64, f64)> {
    let oc = origin - center;
    let b = oc.dot(&dir);
    let c = oc.dot(&oc) - radius * radius;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let s = disc.sqrt();
    Some((-b - s, -b + s))
}
