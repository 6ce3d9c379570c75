//! Ray sampling strategies: density-guided log sampling around the
//! estimated surface, uniform/stratified baselines, a two-point surface
//! baseline, and coarse-to-fine importance resampling for ablations.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::scene::Ray;

/// Log sampling settings. `offset_scale` is in absolute scene units
/// (default scene_scale / 200); `center_noise_sigma` is a fraction of
/// `scene_scale`.
#[derive(Debug, Clone)]
pub struct LogSamplingConfig {
    /// Samples per side of the center; total is 2 * n_k.
    pub n_k: usize,
    pub base: f64,
    pub center_noise_sigma: f64,
    pub base_noise_halfwidth: f64,
    pub offset_scale: f64,
    pub scene_scale: f64,
    pub rng_seed: u64,
}

impl LogSamplingConfig {
    pub fn default_for_scale(scene_scale: f64) -> Self {
        LogSamplingConfig {
            n_k: 8,
            base: 1.8,
            center_noise_sigma: 0.0001,
            base_noise_halfwidth: 0.1,
            offset_scale: scene_scale / 200.0,
            scene_scale,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_k < 1 {
            return Err(Error::invalid("n_k must be >= 1"));
        }
        if self.base <= 1.0 {
            return Err(Error::invalid("base must be > 1"));
        }
        if self.center_noise_sigma < 0.0 || self.base_noise_halfwidth < 0.0 {
            return Err(Error::invalid("noise parameters must be >= 0"));
        }
        if self.offset_scale <= 0.0 {
            return Err(Error::invalid("offset_scale must be > 0"));
        }
        Ok(())
    }
}

/// Offsets of one side of the log pattern: base^((n_k/(n_k-1)) * (i-1))
/// for i = 1..n_k. n_k = 1 degenerates to the single offset 1.
pub fn log_offsets(n_k: usize, base: f64) -> Vec<f64> {
    let kappa = if n_k > 1 { n_k as f64 / (n_k as f64 - 1.0) } else { 0.0 };
    (0..n_k).map(|i| base.powf(kappa * i as f64)).collect()
}

/// Unclamped symmetric log depths around `center`, sorted ascending.
pub fn raw_log_depths(center: f64, n_k: usize, base: f64, offset_scale: f64) -> Vec<f64> {
    let offs = log_offsets(n_k, base);
    let mut out = Vec::with_capacity(2 * n_k);
    for &e in offs.iter().rev() {
        out.push(center - offset_scale * e);
    }
    for &e in &offs {
        out.push(center + offset_scale * e);
    }
    out
}

/// Log sampling with perturbed center and base, clamped to the ray range,
/// sorted ascending and deduplicated. Noise-free (and so deterministic)
/// when both noise parameters are zero.
pub fn log_sample(
    ray: &Ray,
    center_depth: f64,
    cfg: &LogSamplingConfig,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if !(center_depth > ray.t_near && center_depth < ray.t_far) {
        return Err(Error::CenterOutOfBounds {
            center: center_depth,
            t_near: ray.t_near,
            t_far: ray.t_far,
        });
    }
    let delta = if cfg.center_noise_sigma > 0.0 {
        let z: f64 = rng.sample(StandardNormal);
        z * cfg.center_noise_sigma * cfg.scene_scale
    } else {
        0.0
    };
    let eps = if cfg.base_noise_halfwidth > 0.0 {
        rng.gen_range(-cfg.base_noise_halfwidth..=cfg.base_noise_halfwidth)
    } else {
        0.0
    };
    let base_hat = (cfg.base + eps).max(1.0 + 1e-6);
    let center_hat = center_depth + delta;
    let mut depths = raw_log_depths(center_hat, cfg.n_k, base_hat, cfg.offset_scale);
    for d in depths.iter_mut() {
        *d = d.clamp(ray.t_near, ray.t_far);
    }
    depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
    depths.dedup();
    Ok(depths)
}

/// `n` uniform depths on [t_near, t_far]: exact stratum midpoints, or
/// stratified-jittered when an rng is supplied.
pub fn uniform_sample(ray: &Ray, n: usize, rng: Option<&mut dyn rand::RngCore>) -> Vec<f64> {
    assert!(n >= 2, "uniform_sample requires n >= 2");
    let dt = (ray.t_far - ray.t_near) / n as f64;
    match rng {
        None => (0..n).map(|i| ray.t_near + (i as f64 + 0.5) * dt).collect(),
        Some(rng) => (0..n)
            .map(|i| {
                let u: f64 = rng.gen_range(0.0..1.0);
                ray.t_near + (i as f64 + u) * dt
            })
            .collect(),
    }
}

/// What to do for one ray given the depth-map value at its pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplingDecision {
    /// Depth unknown: fall back to 2 * n_k uniform samples.
    Uniform(usize),
    /// Depth known: log sample around it.
    Log,
}

pub fn fallback_policy(depth_map_value: f64, cfg: &LogSamplingConfig) -> SamplingDecision {
    if depth_map_value <= 0.0 {
        SamplingDecision::Uniform(2 * cfg.n_k)
    } else {
        SamplingDecision::Log
    }
}

/// Samplers exposed on the CLI. `CoarseFine` follows the conventional
/// two-pass scheme with a single model: uniform coarse pass, then
/// importance resampling from the coarse rendering weights.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SamplerKind {
    /// Log sampling, 2 * n_k points.
    Log,
    Uniform(usize),
    CoarseFine(usize, usize),
    /// Two samples at center +- offset_scale.
    Surf2,
}

impl std::str::FromStr for SamplerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log16" => Ok(SamplerKind::Log),
            "uni64" => Ok(SamplerKind::Uniform(64)),
            "uni128" => Ok(SamplerKind::Uniform(128)),
            "uni64+128" => Ok(SamplerKind::CoarseFine(64, 128)),
            "surf2" => Ok(SamplerKind::Surf2),
            other => Err(Error::invalid(format!(
                "unknown sampler '{other}' (expected log16|uni64|uni128|uni64+128|surf2)"
            ))),
        }
    }
}

/// Draws `n` depths from the piecewise-constant pdf defined by per-bin
/// weights over bin edges (inverse-CDF sampling). Used by the
/// coarse-to-fine baseline.
pub fn sample_pdf(edges: &[f64], weights: &[f64], n: usize, rng: &mut impl Rng) -> Vec<f64> {
    debug_assert_eq!(edges.len(), weights.len() + 1);
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        // Degenerate: uniform over the whole span.
        let lo = edges[0];
        let hi = edges[edges.len() - 1];
        return (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    }
    let mut cdf = Vec::with_capacity(weights.len() + 1);
    cdf.push(0.0);
    let mut acc = 0.0;
    for w in weights {
        acc += w / total;
        cdf.push(acc);
    }
    (0..n)
        .map(|_| {
            let u: f64 = rng.gen_range(0.0..1.0);
            let j = match cdf.binary_search_by(|c| c.partial_cmp(&u).unwrap()) {
                Ok(i) => i.min(weights.len() - 1),
                Err(i) => (i - 1).min(weights.len() - 1),
            };
            let span = cdf[j + 1] - cdf[j];
            let f = if span > 0.0 { (u - cdf[j]) / span } else { 0.5 };
            edges[j] + f * (edges[j + 1] - edges[j])
        })
        .collect()
}
