//! Volume rendering over kernel-aggregated ray samples, with the reverse
//! pass used by training, plus whole-image rendering.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::SpatialIndex;
use crate::img::Plane;
use crate::kernel::{
    backward_sample, eval_sample, idw_backward_sample, idw_eval_sample, BackwardScratch,
    IdwParameters, IdwSampleTrace, KernelParameters, NeighborInput, PointGradSinks, SampleTrace,
};
use crate::math::{derive_seed, Mat3, Vec3};
use crate::sampling::{
    fallback_policy, log_sample, sample_pdf, uniform_sample, LogSamplingConfig, SamplerKind,
    SamplingDecision,
};
use crate::scene::{pixel_ray, CameraView, NeuralPointField, Ray};

/// Which feature aggregator drives rendering.
#[derive(Clone, Copy)]
pub enum Aggregator<'a> {
    Learnable(&'a KernelParameters),
    Idw(&'a IdwParameters),
}

/// Gradient accumulators matching the aggregator in use.
pub enum GradAccum {
    Learnable(KernelParameters),
    Idw(IdwParameters),
}

impl GradAccum {
    pub fn zeros_for(agg: Aggregator<'_>) -> Self {
        match agg {
            Aggregator::Learnable(p) => GradAccum::Learnable(p.zeros_like()),
            Aggregator::Idw(p) => GradAccum::Idw(p.zeros_like()),
        }
    }
}

/// Neighbor count and search radius for kernel aggregation.
#[derive(Debug, Clone, Copy)]
pub struct KernelQueryConfig {
    pub k_neighbors: usize,
    pub radius: f64,
}

impl KernelQueryConfig {
    pub fn default_for_scale(scene_scale: f64) -> Self {
        KernelQueryConfig { k_neighbors: 8, radius: 0.005 * scene_scale }
    }
}

/// Per-ray sampled state; filtered samples (no neighbors) keep sigma = 0
/// so batches stay fixed-size.
#[derive(Debug, Clone, Default)]
pub struct RaySampleBatch {
    /// Ascending sample positions along the ray (ray parameter t).
    pub depths: Vec<f64>,
    /// Step sizes; last step runs to t_far.
    pub deltas: Vec<f64>,
    pub sigma: Vec<f64>,
    pub color: Vec<[f64; 3]>,
    pub survived: Vec<bool>,
}

impl RaySampleBatch {
    fn reset(&mut self, depths: &[f64], t_far: f64) {
        self.depths.clear();
        self.depths.extend_from_slice(depths);
        self.deltas.clear();
        for w in depths.windows(2) {
            self.deltas.push(w[1] - w[0]);
        }
        if let Some(&last) = depths.last() {
            self.deltas.push((t_far - last).max(0.0));
        }
        let n = depths.len();
        self.sigma.clear();
        self.sigma.resize(n, 0.0);
        self.color.clear();
        self.color.resize(n, [0.0; 3]);
        self.survived.clear();
        self.survived.resize(n, false);
    }
}

/// Composited output of one ray.
#[derive(Debug, Clone, Copy, Default)]
pub struct RayRender {
    pub color: [f64; 3],
    /// Opacity-weighted mean of sample positions (ray parameter).
    pub depth: f64,
    /// Accumulated opacity in [0, 1]; background is black.
    pub acc: f64,
}

/// Conventional front-to-back compositing:
/// color = sum_j T_j (1 - exp(-sigma_j delta_j)) c_j with
/// T_j = exp(-sum_{t<j} sigma_t delta_t).
pub fn render_ray(batch: &RaySampleBatch) -> RayRender {
    let mut color = [0.0; 3];
    let mut acc = 0.0;
    let mut depth = 0.0;
    let mut tau = 0.0;
    for j in 0..batch.depths.len() {
        let transmittance = (-tau).exp();
        let alpha = 1.0 - (-batch.sigma[j] * batch.deltas[j]).exp();
        let w = transmittance * alpha;
        for c in 0..3 {
            color[c] += w * batch.color[j][c];
        }
        acc += w;
        depth += w * batch.depths[j];
        tau += batch.sigma[j] * batch.deltas[j];
    }
    RayRender { color, depth: depth / acc.max(1e-8), acc }
}

/// Reverse pass of [`render_ray`] for a color-only loss: fills
/// dL/d(sigma_j) and dL/d(c_j).
pub fn render_ray_backward(
    batch: &RaySampleBatch,
    d_color: [f64; 3],
    d_sigma: &mut Vec<f64>,
    d_rgb: &mut Vec<[f64; 3]>,
) {
    let n = batch.depths.len();
    d_sigma.clear();
    d_sigma.resize(n, 0.0);
    d_rgb.clear();
    d_rgb.resize(n, [0.0; 3]);

    // Forward prefix transmittances and weights.
    let mut tau = 0.0;
    let mut t_j = Vec::with_capacity(n);
    let mut w_j = Vec::with_capacity(n);
    for j in 0..n {
        let transmittance = (-tau).exp();
        let alpha = 1.0 - (-batch.sigma[j] * batch.deltas[j]).exp();
        t_j.push(transmittance);
        w_j.push(transmittance * alpha);
        tau += batch.sigma[j] * batch.deltas[j];
    }
    // Suffix sums S_j = sum_{t>j} w_t c_t (projected on d_color).
    let mut suffix = 0.0;
    for j in (0..n).rev() {
        let c_dot: f64 = (0..3).map(|c| d_color[c] * batch.color[j][c]).sum();
        let w_dot = c_dot; // d_color . c_j
        for c in 0..3 {
            d_rgb[j][c] = w_j[j] * d_color[c];
        }
        // d w_j / d sigma_j = T_j delta_j exp(-sigma_j delta_j);
        // later weights scale down by exp(-sigma_j delta_j) as well.
        let e = (-batch.sigma[j] * batch.deltas[j]).exp();
        d_sigma[j] = batch.deltas[j] * (t_j[j] * e * w_dot - suffix);
        suffix += w_j[j] * c_dot;
    }
}

/// Mean squared error over ray colors: mean over rays and channels.
/// Returns the loss and dL/d(pred).
pub fn mse_loss(pred: &[[f64; 3]], gt: &[[f64; 3]]) -> Result<(f64, Vec<[f64; 3]>)> {
    if pred.len() != gt.len() {
        return Err(Error::invalid(format!(
            "mse_loss shape mismatch: {} vs {} rays",
            pred.len(),
            gt.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::invalid("mse_loss requires at least one ray"));
    }
    let denom = (pred.len() * 3) as f64;
    let mut loss = 0.0;
    let mut grad = vec![[0.0; 3]; pred.len()];
    for (i, (p, g)) in pred.iter().zip(gt).enumerate() {
        for c in 0..3 {
            let d = p[c] - g[c];
            loss += d * d / denom;
            grad[i][c] = 2.0 * d / denom;
        }
    }
    Ok((loss, grad))
}

/// Reusable per-thread buffers for ray evaluation.
#[derive(Default)]
pub struct RayWorkspace {
    pub batch: RaySampleBatch,
    neigh: Vec<(u32, f64)>,
    traces: Vec<SampleTrace>,
    idw_traces: Vec<IdwSampleTrace>,
    /// Sample slot of each surviving trace.
    trace_slots: Vec<usize>,
    bwd: BackwardScratch,
    d_sigma: Vec<f64>,
    d_rgb: Vec<[f64; 3]>,
}

/// Everything fixed during the evaluation of rays in one view.
pub struct FrameContext<'a> {
    pub field: &'a NeuralPointField,
    pub index: &'a SpatialIndex,
    pub rot: Mat3,
    pub trans: Vec3,
    pub agg: Aggregator<'a>,
    pub query: KernelQueryConfig,
}

impl<'a> FrameContext<'a> {
    pub fn new(
        field: &'a NeuralPointField,
        index: &'a SpatialIndex,
        view: &CameraView,
        agg: Aggregator<'a>,
        query: KernelQueryConfig,
    ) -> Self {
        FrameContext { field, index, rot: view.rotation(), trans: view.translation(), agg, query }
    }

    /// Evaluates sigma/color at the given sample depths and composites.
    /// Traces stay in `ws` for a subsequent backward pass.
    pub fn eval_ray(&self, ray: &Ray, depths: &[f64], ws: &mut RayWorkspace) -> RayRender {
        ws.batch.reset(depths, ray.t_far);
        ws.trace_slots.clear();
        let n = depths.len();
        let need = n.min(depths.len());
        match self.agg {
            Aggregator::Learnable(_) => {
                if ws.traces.len() < need {
                    ws.traces.resize_with(need, SampleTrace::default);
                }
            }
            Aggregator::Idw(_) => {
                if ws.idw_traces.len() < need {
                    ws.idw_traces.resize_with(need, IdwSampleTrace::default);
                }
            }
        }
        let mut used = 0;
        for j in 0..n {
            let q_world = ray.at(depths[j]);
            self.index.k_nearest_into(
                self.field,
                q_world,
                self.query.k_neighbors,
                self.query.radius,
                &mut ws.neigh,
            );
            if ws.neigh.is_empty() {
                continue;
            }
            let q_cam = self.rot * q_world + self.trans;
            let positions = self.field.positions();
            let f_c = self.field.f_c();
            let f_l = self.field.f_l();
            let f_h = self.field.f_h();
            // Neighbor buffer is tiny (k <= 8); build on the stack.
            let mut neighbors: Vec<NeighborInput> = Vec::with_capacity(ws.neigh.len());
            for &(pid, _) in &ws.neigh {
                let p = pid as usize;
                neighbors.push(NeighborInput {
                    index: pid,
                    pos_cam: self.rot * positions[p] + self.trans,
                    f_c: &f_c[p],
                    f_l: &f_l[p],
                    f_h: &f_h[p],
                });
            }
            match self.agg {
                Aggregator::Learnable(params) => {
                    let trace = &mut ws.traces[used];
                    eval_sample(params, q_cam, &neighbors, trace);
                    ws.batch.sigma[j] = trace.sigma;
                    ws.batch.color[j] = trace.rgb;
                }
                Aggregator::Idw(params) => {
                    let dists: Vec<f64> = ws.neigh.iter().map(|(_, d)| *d).collect();
                    let trace = &mut ws.idw_traces[used];
                    idw_eval_sample(params, &neighbors, &dists, trace);
                    ws.batch.sigma[j] = trace.sigma;
                    ws.batch.color[j] = trace.rgb;
                }
            }
            ws.batch.survived[j] = true;
            ws.trace_slots.push(j);
            used += 1;
        }
        render_ray(&ws.batch)
    }

    /// Reverse pass for the ray most recently evaluated into `ws`.
    pub fn backward_ray(
        &self,
        d_color: [f64; 3],
        ws: &mut RayWorkspace,
        grads: &mut GradAccum,
        sinks: &mut PointGradSinks<'_>,
    ) {
        // Split workspace fields so traces and scratch borrow disjointly.
        let RayWorkspace {
            batch, traces, idw_traces, trace_slots, bwd, d_sigma, d_rgb, ..
        } = ws;
        render_ray_backward(batch, d_color, d_sigma, d_rgb);
        for (used, &j) in trace_slots.iter().enumerate() {
            match (&self.agg, &mut *grads) {
                (Aggregator::Learnable(params), GradAccum::Learnable(g)) => {
                    backward_sample(params, &traces[used], d_sigma[j], d_rgb[j], g, sinks, bwd);
                }
                (Aggregator::Idw(params), GradAccum::Idw(g)) => {
                    idw_backward_sample(params, &idw_traces[used], d_sigma[j], d_rgb[j], g, sinks);
                }
                _ => panic!("gradient accumulator does not match aggregator"),
            }
        }
    }

    /// Chooses sample depths for a pixel ray given its depth-map value.
    /// CoarseFine runs a forward pass on the coarse samples to place the
    /// fine ones. `rng` enables sampling noise/jitter (training); `None`
    /// renders deterministically.
    pub fn pixel_depths(
        &self,
        ray: &Ray,
        depth_value: f64,
        sampler: SamplerKind,
        scfg: &LogSamplingConfig,
        mut rng: Option<&mut ChaCha8Rng>,
        ws: &mut RayWorkspace,
    ) -> Vec<f64> {
        match sampler {
            SamplerKind::Log => {
                let noise_free = LogSamplingConfig {
                    center_noise_sigma: 0.0,
                    base_noise_halfwidth: 0.0,
                    ..scfg.clone()
                };
                let cfg = if rng.is_some() { scfg } else { &noise_free };
                match fallback_policy(depth_value, scfg) {
                    SamplingDecision::Uniform(n) => match rng {
                        Some(r) => uniform_sample(ray, n, Some(r)),
                        None => uniform_sample(ray, n, None),
                    },
                    SamplingDecision::Log => {
                        let mut fallback = ChaCha8Rng::seed_from_u64(0);
                        let r = match rng {
                            Some(ref mut r) => &mut **r,
                            None => &mut fallback,
                        };
                        match log_sample(ray, depth_value, cfg, r) {
                            Ok(d) => d,
                            Err(_) => match rng {
                                Some(r) => uniform_sample(ray, 2 * scfg.n_k, Some(r)),
                                None => uniform_sample(ray, 2 * scfg.n_k, None),
                            },
                        }
                    }
                }
            }
            SamplerKind::Uniform(n) => match rng {
                Some(r) => uniform_sample(ray, n, Some(r)),
                None => uniform_sample(ray, n, None),
            },
            SamplerKind::Surf2 => {
                if depth_value > 0.0 {
                    let mut d = vec![
                        (depth_value - scfg.offset_scale).clamp(ray.t_near, ray.t_far),
                        (depth_value + scfg.offset_scale).clamp(ray.t_near, ray.t_far),
                    ];
                    d.dedup();
                    d
                } else {
                    uniform_sample(ray, 2, None)
                }
            }
            SamplerKind::CoarseFine(n1, n2) => {
                let coarse = match rng {
                    Some(ref mut r) => uniform_sample(ray, n1, Some(&mut **r)),
                    None => uniform_sample(ray, n1, None),
                };
                self.eval_ray(ray, &coarse, ws);
                // Per-bin weights T_j alpha_j from the coarse pass.
                let mut tau = 0.0;
                let mut weights = Vec::with_capacity(n1);
                for j in 0..coarse.len() {
                    let transmittance = (-tau).exp();
                    let alpha = 1.0 - (-ws.batch.sigma[j] * ws.batch.deltas[j]).exp();
                    weights.push(transmittance * alpha);
                    tau += ws.batch.sigma[j] * ws.batch.deltas[j];
                }
                let mut edges = Vec::with_capacity(n1 + 1);
                edges.push(ray.t_near);
                for w in coarse.windows(2) {
                    edges.push(0.5 * (w[0] + w[1]));
                }
                edges.push(ray.t_far);
                let mut fallback = ChaCha8Rng::seed_from_u64(1);
                let r = match rng {
                    Some(ref mut r) => &mut **r,
                    None => &mut fallback,
                };
                let fine = sample_pdf(&edges, &weights, n2, r);
                let mut all = coarse;
                all.extend(fine);
                all.sort_by(|a, b| a.partial_cmp(b).unwrap());
                all.dedup();
                all
            }
        }
    }
}

/// Rendered view: color image, opacity-weighted depth (ray parameter
/// converted to camera z), and accumulated opacity.
pub struct RenderedImage {
    pub rgb: Plane,
    pub depth: Plane,
    pub acc: Plane,
}

/// Renders a full view. `seed = None` renders noise-free; with a seed the
/// per-pixel RNG streams are derived deterministically, so fixed seeds
/// give bit-identical images regardless of thread count.
pub fn render_image(
    field: &NeuralPointField,
    index: &SpatialIndex,
    view: &CameraView,
    agg: Aggregator<'_>,
    query: KernelQueryConfig,
    sampler: SamplerKind,
    scfg: &LogSamplingConfig,
    seed: Option<u64>,
) -> RenderedImage {
    let (bc, br) = field.bounding_sphere();
    let bound_r = br * 1.05 + query.radius;
    let w = view.width;
    let h = view.height;
    let ctx = FrameContext::new(field, index, view, agg, query);
    let depth_map = view.depth_map.as_ref();
    let z_rate_of = |ray: &Ray| (ctx.rot * ray.direction).z;
    let z_off = (ctx.rot * view.center() + ctx.trans).z;

    let rows: Vec<Vec<(f64, f64, f64, f64, f64)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut ws = RayWorkspace::default();
            let mut out = Vec::with_capacity(w);
            for x in 0..w {
                let ray = match pixel_ray(view, x, y, bc, bound_r) {
                    Some(r) => r,
                    None => {
                        out.push((0.0, 0.0, 0.0, 0.0, 0.0));
                        continue;
                    }
                };
                let dv = depth_map.map_or(0.0, |d| d.pixel(x, y)[0]);
                // Depth maps store camera z; samplers work in ray t.
                let z_rate = z_rate_of(&ray);
                let center_t = if dv > 0.0 && z_rate.abs() > 1e-12 { (dv - z_off) / z_rate } else { 0.0 };
                let mut rng = seed.map(|s| {
                    ChaCha8Rng::seed_from_u64(derive_seed(s, 0x7269, (y * w + x) as u64))
                });
                let depths =
                    ctx.pixel_depths(&ray, center_t, sampler, scfg, rng.as_mut(), &mut ws);
                let r = ctx.eval_ray(&ray, &depths, &mut ws);
                let z = r.depth * z_rate + z_off;
                out.push((r.color[0], r.color[1], r.color[2], if r.acc > 1e-6 { z } else { 0.0 }, r.acc));
            }
            out
        })
        .collect();

    let mut rgb = Plane::zeros(w, h, 3);
    let mut depth = Plane::zeros(w, h, 1);
    let mut acc = Plane::zeros(w, h, 1);
    for (y, row) in rows.into_iter().enumerate() {
        for (x, (r, g, b, d, a)) in row.into_iter().enumerate() {
            rgb.pixel_mut(x, y).copy_from_slice(&[r, g, b]);
            depth.pixel_mut(x, y)[0] = d;
            acc.pixel_mut(x, y)[0] = a;
        }
    }
    RenderedImage { rgb, depth, acc }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn batch_from(
        depths: Vec<f64>,
        t_far: f64,
        sigma: Vec<f64>,
        color: Vec<[f64; 3]>,
    ) -> RaySampleBatch {
        let mut b = RaySampleBatch::default();
        b.reset(&depths, t_far);
        let survived = sigma.iter().map(|s| *s > 0.0).collect();
        b.sigma = sigma;
        b.color = color;
        b.survived = survived;
        b
    }

    #[test]
    fn opaque_limit() {
        let b = batch_from(vec![1.0], 2.0, vec![1e16], vec![[0.2, 0.6, 0.9]]);
        let r = render_ray(&b);
        assert_eq!(r.color, [0.2, 0.6, 0.9]);
        assert_eq!(r.acc, 1.0);
    }

    #[test]
    fn transparent_limit() {
        let b = batch_from(vec![0.5, 1.0, 1.5], 2.0, vec![0.0; 3], vec![[1.0; 3]; 3]);
        let r = render_ray(&b);
        assert_eq!(r.color, [0.0; 3]);
        assert_eq!(r.acc, 0.0);
    }

    #[test]
    fn matches_prefix_product_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let n = rng.gen_range(1..20);
            let depths: Vec<f64> = {
                let mut d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..5.0)).collect();
                d.sort_by(|a, b| a.partial_cmp(b).unwrap());
                d.dedup();
                d
            };
            let n = depths.len();
            let t_far = 6.0;
            let sigma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..8.0)).collect();
            let color: Vec<[f64; 3]> =
                (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
            let b = batch_from(depths.clone(), t_far, sigma.clone(), color.clone());
            let r = render_ray(&b);

            // Literal prefix-product re-implementation.
            let mut deltas = Vec::new();
            for w in depths.windows(2) {
                deltas.push(w[1] - w[0]);
            }
            deltas.push(t_far - depths[n - 1]);
            let mut want = [0.0; 3];
            let mut acc = 0.0;
            for j in 0..n {
                let mut t = 1.0;
                for i in 0..j {
                    t *= (-sigma[i] * deltas[i]).exp();
                }
                let a = 1.0 - (-sigma[j] * deltas[j]).exp();
                for c in 0..3 {
                    want[c] += t * a * color[j][c];
                }
                acc += t * a;
            }
            for c in 0..3 {
                assert!((r.color[c] - want[c]).abs() < 1e-10);
            }
            assert!((r.acc - acc).abs() < 1e-10);
            assert!((0.0..=1.0 + 1e-12).contains(&r.acc));
        }
    }

    #[test]
    fn weights_nonnegative_and_sum_bounded_million_rays() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1_000_000 {
            let n = rng.gen_range(1..6);
            let sigma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..50.0)).collect();
            let deltas: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..0.5)).collect();
            let mut tau = 0.0;
            let mut acc = 0.0;
            for j in 0..n {
                let w = (-tau).exp() * (1.0 - (-sigma[j] * deltas[j]).exp());
                assert!(w >= 0.0);
                acc += w;
                tau += sigma[j] * deltas[j];
            }
            assert!((0.0..=1.0 + 1e-12).contains(&acc));
        }
    }

    #[test]
    fn render_backward_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let n = rng.gen_range(1..8);
            let mut depths: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..4.0)).collect();
            depths.sort_by(|a, b| a.partial_cmp(b).unwrap());
            depths.dedup();
            let n = depths.len();
            let sigma: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..4.0)).collect();
            let color: Vec<[f64; 3]> =
                (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
            let gt = [rng.gen(), rng.gen(), rng.gen()];
            let b = batch_from(depths.clone(), 5.0, sigma.clone(), color.clone());

            let loss = |sig: &[f64], col: &[[f64; 3]]| -> f64 {
                let bb = batch_from(depths.clone(), 5.0, sig.to_vec(), col.to_vec());
                let r = render_ray(&bb);
                (0..3).map(|c| (r.color[c] - gt[c]).powi(2)).sum::<f64>()
            };

            let r = render_ray(&b);
            let d_color = [
                2.0 * (r.color[0] - gt[0]),
                2.0 * (r.color[1] - gt[1]),
                2.0 * (r.color[2] - gt[2]),
            ];
            let mut d_sigma = Vec::new();
            let mut d_rgb = Vec::new();
            render_ray_backward(&b, d_color, &mut d_sigma, &mut d_rgb);

            for j in 0..n {
                let h = 1e-6;
                let mut sp = sigma.clone();
                sp[j] += h;
                let mut sm = sigma.clone();
                sm[j] -= h;
                let num = (loss(&sp, &color) - loss(&sm, &color)) / (2.0 * h);
                let err = (num - d_sigma[j]).abs() / (num.abs() + d_sigma[j].abs()).max(1e-8);
                assert!(err < 1e-5, "sigma {j}: {num} vs {}", d_sigma[j]);
                for c in 0..3 {
                    let mut cp = color.clone();
                    cp[j][c] += h;
                    let mut cm = color.clone();
                    cm[j][c] -= h;
                    let num = (loss(&sigma, &cp) - loss(&sigma, &cm)) / (2.0 * h);
                    let err =
                        (num - d_rgb[j][c]).abs() / (num.abs() + d_rgb[j][c].abs()).max(1e-8);
                    assert!(err < 1e-5, "color {j},{c}: {num} vs {}", d_rgb[j][c]);
                }
            }
        }
    }

    #[test]
    fn mse_loss_conventions() {
        let (l, g) = mse_loss(&[[1.0, 0.0, 0.0]], &[[0.0, 0.0, 0.0]]).unwrap();
        assert!((l - 1.0 / 3.0).abs() < 1e-12);
        assert!((g[0][0] - 2.0 / 3.0).abs() < 1e-12);
        let (l, g) = mse_loss(&[[0.3, 0.4, 0.5]], &[[0.3, 0.4, 0.5]]).unwrap();
        assert_eq!(l, 0.0);
        assert!(g[0].iter().all(|v| *v == 0.0));
        assert!(mse_loss(&[[0.0; 3]], &[]).is_err());
    }
}
