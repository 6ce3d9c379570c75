//! Feature-augmented learnable kernel and decoders.
//!
//! For a ray sample and its k nearest neural points, a spatial MLP encodes
//! each neighbor's camera-frame position, relative offset and L1 distance.
//! That encoding yields a raw weight; fused with the neighbor's features
//! it yields a tuning coefficient (sigmoid) and a value vector (ReLU).
//! Softmax of tuning-times-weight blends the value vectors into one
//! feature, decoded to density (softplus) or color (sigmoid).
//!
//! Positions enter in the rendering camera's frame, which keeps renders
//! equivariant under joint rigid motion of scene and camera.
//!
//! All backward passes are hand-derived and checked against central
//! finite differences.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::math::{sigmoid, softmax_backward, softmax_inplace, softplus, softplus_deriv, Mat3, Vec3};
use crate::mlp::{Mlp, MlpTrace};
use crate::scene::{F_C_DIM, F_H_DIM, F_L_DIM};

pub const HIDDEN: usize = 32;
pub const SPATIAL_IN: usize = 7;
const FUSE_D_IN: usize = HIDDEN + F_H_DIM; // 64
const FUSE_C_IN: usize = HIDDEN + F_L_DIM + F_C_DIM; // 43
const FUSE_OUT: usize = 1 + HIDDEN; // tuning coefficient + value vector

/// Which quantity a kernel aggregation feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    Density,
    Color,
}

/// All trainable weights of the kernel and decoders.
#[derive(Debug, Clone)]
pub struct KernelParameters {
    /// 7 -> 32 -> 32 spatial encoder (ReLU outputs).
    pub spatial: Mlp,
    /// 32 -> 32 -> 1 raw spatial weight head.
    pub weight: Mlp,
    /// concat(h_s, f_h) -> (v, H) for the density path.
    pub fuse_density: Mlp,
    /// concat(h_s, f_l, f_c) -> (v, H) for the color path.
    pub fuse_color: Mlp,
    /// 32 -> 32 -> 1, softplus output.
    pub sigma_decoder: Mlp,
    /// 32 -> 32 -> 3, sigmoid output.
    pub color_decoder: Mlp,
}

impl KernelParameters {
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        KernelParameters {
            spatial: Mlp::glorot(&[SPATIAL_IN, HIDDEN, HIDDEN], &mut rng),
            weight: Mlp::glorot(&[HIDDEN, HIDDEN, 1], &mut rng),
            fuse_density: Mlp::glorot(&[FUSE_D_IN, HIDDEN, FUSE_OUT], &mut rng),
            fuse_color: Mlp::glorot(&[FUSE_C_IN, HIDDEN, FUSE_OUT], &mut rng),
            sigma_decoder: Mlp::glorot(&[HIDDEN, HIDDEN, 1], &mut rng),
            color_decoder: Mlp::glorot(&[HIDDEN, HIDDEN, 3], &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        KernelParameters {
            spatial: self.spatial.zeros_like(),
            weight: self.weight.zeros_like(),
            fuse_density: self.fuse_density.zeros_like(),
            fuse_color: self.fuse_color.zeros_like(),
            sigma_decoder: self.sigma_decoder.zeros_like(),
            color_decoder: self.color_decoder.zeros_like(),
        }
    }

    fn mlps(&self) -> [&Mlp; 6] {
        [
            &self.spatial,
            &self.weight,
            &self.fuse_density,
            &self.fuse_color,
            &self.sigma_decoder,
            &self.color_decoder,
        ]
    }

    fn mlps_mut(&mut self) -> [&mut Mlp; 6] {
        [
            &mut self.spatial,
            &mut self.weight,
            &mut self.fuse_density,
            &mut self.fuse_color,
            &mut self.sigma_decoder,
            &mut self.color_decoder,
        ]
    }

    pub fn param_count(&self) -> usize {
        self.mlps().iter().map(|m| m.param_count()).sum()
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        for m in self.mlps() {
            m.append_params(out);
        }
    }

    pub fn load_params(&mut self, src: &[f64], cursor: &mut usize) {
        for m in self.mlps_mut() {
            m.load_params(src, cursor);
        }
    }

    pub fn add_scaled(&mut self, other: &KernelParameters, s: f64) {
        self.spatial.add_scaled(&other.spatial, s);
        self.weight.add_scaled(&other.weight, s);
        self.fuse_density.add_scaled(&other.fuse_density, s);
        self.fuse_color.add_scaled(&other.fuse_color, s);
        self.sigma_decoder.add_scaled(&other.sigma_decoder, s);
        self.color_decoder.add_scaled(&other.color_decoder, s);
    }
}

/// One neighbor of a ray sample, in the rendering camera's frame.
#[derive(Debug, Clone, Copy)]
pub struct NeighborInput<'a> {
    pub index: u32,
    pub pos_cam: Vec3,
    pub f_c: &'a [f64; F_C_DIM],
    pub f_l: &'a [f64; F_L_DIM],
    pub f_h: &'a [f64; F_H_DIM],
}

/// Spatial-encoding input layout: neighbor position, relative offset,
/// L1 distance.
#[inline]
pub fn spatial_input(query_cam: Vec3, neighbor_cam: Vec3) -> [f64; SPATIAL_IN] {
    let off = neighbor_cam - query_cam;
    [
        neighbor_cam.x,
        neighbor_cam.y,
        neighbor_cam.z,
        off.x,
        off.y,
        off.z,
        off.x.abs() + off.y.abs() + off.z.abs(),
    ]
}

/// h_s for one (query, neighbor) pair.
pub fn spatial_encode(
    params: &KernelParameters,
    query_cam: Vec3,
    neighbor_cam: Vec3,
) -> [f64; HIDDEN] {
    let input = spatial_input(query_cam, neighbor_cam);
    let mut out = [0.0; HIDDEN];
    params.spatial.forward(&input, &mut out);
    // Spatial encoder output is a hidden representation: apply ReLU.
    for v in out.iter_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    out
}

/// Density from the sigma decoder: softplus of the raw output.
pub fn decode_sigma(params: &KernelParameters, feature: &[f64; HIDDEN]) -> f64 {
    let mut out = [0.0];
    params.sigma_decoder.forward(feature, &mut out);
    softplus(out[0])
}

/// Color from the color decoder: per-channel sigmoid.
pub fn decode_color(params: &KernelParameters, feature: &[f64; HIDDEN]) -> [f64; 3] {
    let mut out = [0.0; 3];
    params.color_decoder.forward(feature, &mut out);
    [sigmoid(out[0]), sigmoid(out[1]), sigmoid(out[2])]
}

/// Forward-trace state for one ray sample (both targets share the
/// spatial encodings). Buffers are reused across samples.
#[derive(Debug, Clone, Default)]
pub struct SampleTrace {
    pub k_used: usize,
    pub neighbor_ids: Vec<u32>,
    pub inputs: Vec<[f64; SPATIAL_IN]>,
    pub spatial: Vec<MlpTrace>,
    pub weight: Vec<MlpTrace>,
    pub fuse_d: Vec<MlpTrace>,
    pub fuse_c: Vec<MlpTrace>,
    pub w_hat: Vec<f64>,
    pub a_d: Vec<f64>,
    pub a_c: Vec<f64>,
    pub feat_d: [f64; HIDDEN],
    pub feat_c: [f64; HIDDEN],
    pub sigma_dec: MlpTrace,
    pub color_dec: MlpTrace,
    pub sigma: f64,
    pub rgb: [f64; 3],
}

impl SampleTrace {
    fn ensure_capacity(&mut self, k: usize) {
        if self.inputs.len() < k {
            self.neighbor_ids.resize(k, 0);
            self.inputs.resize(k, [0.0; SPATIAL_IN]);
            self.spatial.resize_with(k, MlpTrace::default);
            self.weight.resize_with(k, MlpTrace::default);
            self.fuse_d.resize_with(k, MlpTrace::default);
            self.fuse_c.resize_with(k, MlpTrace::default);
            self.w_hat.resize(k, 0.0);
            self.a_d.resize(k, 0.0);
            self.a_c.resize(k, 0.0);
        }
    }
}

#[inline]
fn relu_sum_into(a: f64, raw: &[f64], acc: &mut [f64; HIDDEN]) {
    for (o, r) in acc.iter_mut().zip(&raw[1..]) {
        if *r > 0.0 {
            *o += a * r;
        }
    }
}

/// Evaluates sigma and color for one sample, recording the trace.
/// `neighbors` must be non-empty (empty sets are filtered upstream).
pub fn eval_sample(
    params: &KernelParameters,
    query_cam: Vec3,
    neighbors: &[NeighborInput<'_>],
    trace: &mut SampleTrace,
) {
    let k = neighbors.len();
    assert!(k >= 1, "eval_sample requires at least one neighbor");
    trace.ensure_capacity(k);
    trace.k_used = k;

    let mut scratch = [0.0; FUSE_C_IN.max(FUSE_D_IN)];
    for (i, n) in neighbors.iter().enumerate() {
        trace.neighbor_ids[i] = n.index;
        trace.inputs[i] = spatial_input(query_cam, n.pos_cam);
        params.spatial.forward_trace(&trace.inputs[i], &mut trace.spatial[i]);
        // h_s is the ReLU of the spatial output; gate a copy in place.
        let hs_raw = trace.spatial[i].acts.last_mut().unwrap();
        for v in hs_raw.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        params
            .weight
            .forward_trace(trace.spatial[i].acts.last().unwrap(), &mut trace.weight[i]);
        trace.w_hat[i] = trace.weight[i].acts.last().unwrap()[0];

        scratch[..HIDDEN].copy_from_slice(trace.spatial[i].acts.last().unwrap());
        for (d, s) in scratch[HIDDEN..FUSE_D_IN].iter_mut().zip(n.f_h.iter()) {
            *d = *s;
        }
        params.fuse_density.forward_trace(&scratch[..FUSE_D_IN], &mut trace.fuse_d[i]);

        for (d, s) in scratch[HIDDEN..HIDDEN + F_L_DIM].iter_mut().zip(n.f_l.iter()) {
            *d = *s;
        }
        for (d, s) in scratch[HIDDEN + F_L_DIM..FUSE_C_IN].iter_mut().zip(n.f_c.iter()) {
            *d = *s;
        }
        params.fuse_color.forward_trace(&scratch[..FUSE_C_IN], &mut trace.fuse_c[i]);
    }

    // Softmax(v * w_hat) per target, then blend the value vectors.
    for i in 0..k {
        let raw_d = trace.fuse_d[i].acts.last().unwrap();
        let raw_c = trace.fuse_c[i].acts.last().unwrap();
        trace.a_d[i] = sigmoid(raw_d[0]) * trace.w_hat[i];
        trace.a_c[i] = sigmoid(raw_c[0]) * trace.w_hat[i];
    }
    softmax_inplace(&mut trace.a_d[..k]);
    softmax_inplace(&mut trace.a_c[..k]);

    trace.feat_d = [0.0; HIDDEN];
    trace.feat_c = [0.0; HIDDEN];
    for i in 0..k {
        relu_sum_into(trace.a_d[i], trace.fuse_d[i].acts.last().unwrap(), &mut trace.feat_d);
        relu_sum_into(trace.a_c[i], trace.fuse_c[i].acts.last().unwrap(), &mut trace.feat_c);
    }

    params.sigma_decoder.forward_trace(&trace.feat_d, &mut trace.sigma_dec);
    trace.sigma = softplus(trace.sigma_dec.acts.last().unwrap()[0]);
    params.color_decoder.forward_trace(&trace.feat_c, &mut trace.color_dec);
    let raw = trace.color_dec.acts.last().unwrap();
    trace.rgb = [sigmoid(raw[0]), sigmoid(raw[1]), sigmoid(raw[2])];
}

/// Aggregated kernel feature for one target, as a standalone operation.
pub fn kernel_aggregate(
    params: &KernelParameters,
    query_cam: Vec3,
    neighbors: &[NeighborInput<'_>],
    target: Target,
) -> [f64; HIDDEN] {
    let mut trace = SampleTrace::default();
    eval_sample(params, query_cam, neighbors, &mut trace);
    match target {
        Target::Density => trace.feat_d,
        Target::Color => trace.feat_c,
    }
}

/// Where per-point gradients accumulate during backward.
pub struct PointGradSinks<'a> {
    pub d_f_c: Option<&'a mut Vec<[f64; F_C_DIM]>>,
    pub d_f_l: Option<&'a mut Vec<[f64; F_L_DIM]>>,
    pub d_f_h: Option<&'a mut Vec<[f64; F_H_DIM]>>,
    /// World-frame position gradients (per point); used by refinement.
    pub d_pos: Option<&'a mut Vec<Vec3>>,
    /// Transpose rotation of the rendering camera (cam -> world).
    pub rot_t: Mat3,
}

impl<'a> PointGradSinks<'a> {
    pub fn none(rot_t: Mat3) -> Self {
        PointGradSinks { d_f_c: None, d_f_l: None, d_f_h: None, d_pos: None, rot_t }
    }
}

/// Reverse pass of [`eval_sample`] from dL/d(sigma) and dL/d(rgb).
/// Accumulates parameter gradients and, when sinks are present, feature
/// and position gradients per neighbor point.
#[allow(clippy::too_many_arguments)]
pub fn backward_sample(
    params: &KernelParameters,
    trace: &SampleTrace,
    d_sigma: f64,
    d_rgb: [f64; 3],
    grads: &mut KernelParameters,
    sinks: &mut PointGradSinks<'_>,
    scratch: &mut BackwardScratch,
) {
    let k = trace.k_used;

    // Decoder heads.
    let sig_raw = trace.sigma_dec.acts.last().unwrap()[0];
    let d_sig_raw = [d_sigma * softplus_deriv(sig_raw)];
    let mut d_feat_d = [0.0; HIDDEN];
    params
        .sigma_decoder
        .backward(&trace.sigma_dec, &d_sig_raw, &mut d_feat_d, &mut grads.sigma_decoder);

    let col_raw = trace.color_dec.acts.last().unwrap();
    let d_col_raw: Vec<f64> = (0..3)
        .map(|c| {
            let s = sigmoid(col_raw[c]);
            d_rgb[c] * s * (1.0 - s)
        })
        .collect();
    let mut d_feat_c = [0.0; HIDDEN];
    params
        .color_decoder
        .backward(&trace.color_dec, &d_col_raw, &mut d_feat_c, &mut grads.color_decoder);

    // Blend: F = sum_i a_i relu(H_i). dH and da per neighbor, then softmax
    // backward to the logits s_i = v_i * w_hat_i.
    let da_d = &mut scratch.da_d;
    let da_c = &mut scratch.da_c;
    da_d.resize(k, 0.0);
    da_c.resize(k, 0.0);
    for i in 0..k {
        let raw_d = trace.fuse_d[i].acts.last().unwrap();
        let raw_c = trace.fuse_c[i].acts.last().unwrap();
        let mut gd = 0.0;
        let mut gc = 0.0;
        for (c, (fd_raw, fc_raw)) in raw_d[1..].iter().zip(&raw_c[1..]).enumerate() {
            if *fd_raw > 0.0 {
                gd += d_feat_d[c] * fd_raw;
            }
            if *fc_raw > 0.0 {
                gc += d_feat_c[c] * fc_raw;
            }
        }
        da_d[i] = gd;
        da_c[i] = gc;
    }
    let ds_d = &mut scratch.ds_d;
    let ds_c = &mut scratch.ds_c;
    ds_d.resize(k, 0.0);
    ds_c.resize(k, 0.0);
    softmax_backward(&trace.a_d[..k], &da_d[..k], ds_d);
    softmax_backward(&trace.a_c[..k], &da_c[..k], ds_c);

    for i in 0..k {
        let raw_d = trace.fuse_d[i].acts.last().unwrap();
        let raw_c = trace.fuse_c[i].acts.last().unwrap();
        let v_d = sigmoid(raw_d[0]);
        let v_c = sigmoid(raw_c[0]);
        let w_hat = trace.w_hat[i];

        // s = v * w_hat.
        let dv_d = ds_d[i] * w_hat;
        let dv_c = ds_c[i] * w_hat;
        let mut d_w_hat = ds_d[i] * v_d + ds_c[i] * v_c;

        // Fuse outputs: slot 0 via sigmoid to v, slots 1.. via ReLU to H.
        let d_raw_d = &mut scratch.d_fuse_out_d;
        d_raw_d.resize(FUSE_OUT, 0.0);
        d_raw_d[0] = dv_d * v_d * (1.0 - v_d);
        for c in 0..HIDDEN {
            d_raw_d[c + 1] = if raw_d[c + 1] > 0.0 { trace.a_d[i] * d_feat_d[c] } else { 0.0 };
        }
        let d_in_d = &mut scratch.d_fuse_in_d;
        d_in_d.resize(FUSE_D_IN, 0.0);
        params.fuse_density.backward(&trace.fuse_d[i], d_raw_d, d_in_d, &mut grads.fuse_density);

        let d_raw_c = &mut scratch.d_fuse_out_c;
        d_raw_c.resize(FUSE_OUT, 0.0);
        d_raw_c[0] = dv_c * v_c * (1.0 - v_c);
        for c in 0..HIDDEN {
            d_raw_c[c + 1] = if raw_c[c + 1] > 0.0 { trace.a_c[i] * d_feat_c[c] } else { 0.0 };
        }
        let d_in_c = &mut scratch.d_fuse_in_c;
        d_in_c.resize(FUSE_C_IN, 0.0);
        params.fuse_color.backward(&trace.fuse_c[i], d_raw_c, d_in_c, &mut grads.fuse_color);

        let pid = trace.neighbor_ids[i] as usize;
        if let Some(dfh) = sinks.d_f_h.as_deref_mut() {
            for (g, d) in dfh[pid].iter_mut().zip(&d_in_d[HIDDEN..FUSE_D_IN]) {
                *g += d;
            }
        }
        if let Some(dfl) = sinks.d_f_l.as_deref_mut() {
            for (g, d) in dfl[pid].iter_mut().zip(&d_in_c[HIDDEN..HIDDEN + F_L_DIM]) {
                *g += d;
            }
        }
        if let Some(dfc) = sinks.d_f_c.as_deref_mut() {
            for (g, d) in dfc[pid].iter_mut().zip(&d_in_c[HIDDEN + F_L_DIM..FUSE_C_IN]) {
                *g += d;
            }
        }

        // h_s gradient gathers from both fuse inputs and the weight head.
        let d_hs = &mut scratch.d_hs;
        d_hs.resize(HIDDEN, 0.0);
        for c in 0..HIDDEN {
            d_hs[c] = d_in_d[c] + d_in_c[c];
        }
        let d_w_out = [std::mem::take(&mut d_w_hat)];
        let d_hs_from_w = &mut scratch.d_hs_tmp;
        d_hs_from_w.resize(HIDDEN, 0.0);
        params.weight.backward(&trace.weight[i], &d_w_out, d_hs_from_w, &mut grads.weight);
        for c in 0..HIDDEN {
            d_hs[c] += d_hs_from_w[c];
        }
        // ReLU gate on h_s itself.
        let hs = trace.spatial[i].acts.last().unwrap();
        for c in 0..HIDDEN {
            if hs[c] <= 0.0 {
                d_hs[c] = 0.0;
            }
        }
        let d_in7 = &mut scratch.d_in7;
        d_in7.resize(SPATIAL_IN, 0.0);
        params.spatial.backward(&trace.spatial[i], d_hs, d_in7, &mut grads.spatial);

        if let Some(dpos) = sinks.d_pos.as_deref_mut() {
            // input7 = [p_cam, p_cam - q_cam, l1(p_cam - q_cam)]
            let off = &trace.inputs[i][3..6];
            let g_cam = Vec3::new(
                d_in7[0] + d_in7[3] + d_in7[6] * off[0].signum(),
                d_in7[1] + d_in7[4] + d_in7[6] * off[1].signum(),
                d_in7[2] + d_in7[5] + d_in7[6] * off[2].signum(),
            );
            dpos[pid] += sinks.rot_t * g_cam;
        }
    }
}

/// Reusable buffers for [`backward_sample`].
#[derive(Debug, Default)]
pub struct BackwardScratch {
    da_d: Vec<f64>,
    da_c: Vec<f64>,
    ds_d: Vec<f64>,
    ds_c: Vec<f64>,
    d_fuse_out_d: Vec<f64>,
    d_fuse_out_c: Vec<f64>,
    d_fuse_in_d: Vec<f64>,
    d_fuse_in_c: Vec<f64>,
    d_hs: Vec<f64>,
    d_hs_tmp: Vec<f64>,
    d_in7: Vec<f64>,
}

/// Inverse-distance-weighting ablation: the kernel is replaced by IDW
/// feature blends; only the two decoders are trainable.
#[derive(Debug, Clone)]
pub struct IdwParameters {
    /// 32 -> 32 -> 1, softplus output, on IDW-blended f_h.
    pub sigma_decoder: Mlp,
    /// 11 -> 32 -> 3, sigmoid output, on IDW-blended concat(f_l, f_c).
    pub color_decoder: Mlp,
}

pub const IDW_COLOR_IN: usize = F_L_DIM + F_C_DIM;

impl IdwParameters {
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        IdwParameters {
            sigma_decoder: Mlp::glorot(&[F_H_DIM, HIDDEN, 1], &mut rng),
            color_decoder: Mlp::glorot(&[IDW_COLOR_IN, HIDDEN, 3], &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        IdwParameters {
            sigma_decoder: self.sigma_decoder.zeros_like(),
            color_decoder: self.color_decoder.zeros_like(),
        }
    }

    pub fn param_count(&self) -> usize {
        self.sigma_decoder.param_count() + self.color_decoder.param_count()
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        self.sigma_decoder.append_params(out);
        self.color_decoder.append_params(out);
    }

    pub fn load_params(&mut self, src: &[f64], cursor: &mut usize) {
        self.sigma_decoder.load_params(src, cursor);
        self.color_decoder.load_params(src, cursor);
    }

    pub fn add_scaled(&mut self, other: &IdwParameters, s: f64) {
        self.sigma_decoder.add_scaled(&other.sigma_decoder, s);
        self.color_decoder.add_scaled(&other.color_decoder, s);
    }
}

/// IDW weights 1/d, with exact coincidence collapsing to a copy of the
/// first zero-distance neighbor.
pub fn idw_weights(dists: &[f64], out: &mut Vec<f64>) {
    out.clear();
    if let Some(zero) = dists.iter().position(|d| *d == 0.0) {
        out.resize(dists.len(), 0.0);
        out[zero] = 1.0;
        return;
    }
    let mut sum = 0.0;
    for d in dists {
        let w = 1.0 / d;
        out.push(w);
        sum += w;
    }
    for w in out.iter_mut() {
        *w /= sum;
    }
}

/// IDW trace for one sample.
#[derive(Debug, Clone, Default)]
pub struct IdwSampleTrace {
    pub k_used: usize,
    pub neighbor_ids: Vec<u32>,
    pub weights: Vec<f64>,
    pub feat_h: [f64; F_H_DIM],
    pub feat_lc: [f64; IDW_COLOR_IN],
    pub sigma_dec: MlpTrace,
    pub color_dec: MlpTrace,
    pub sigma: f64,
    pub rgb: [f64; 3],
}

pub fn idw_eval_sample(
    params: &IdwParameters,
    neighbors: &[NeighborInput<'_>],
    dists: &[f64],
    trace: &mut IdwSampleTrace,
) {
    let k = neighbors.len();
    assert!(k >= 1);
    trace.k_used = k;
    trace.neighbor_ids.clear();
    trace.neighbor_ids.extend(neighbors.iter().map(|n| n.index));
    idw_weights(dists, &mut trace.weights);
    trace.feat_h = [0.0; F_H_DIM];
    trace.feat_lc = [0.0; IDW_COLOR_IN];
    for (n, w) in neighbors.iter().zip(&trace.weights) {
        for (o, v) in trace.feat_h.iter_mut().zip(n.f_h.iter()) {
            *o += w * v;
        }
        for (o, v) in trace.feat_lc[..F_L_DIM].iter_mut().zip(n.f_l.iter()) {
            *o += w * v;
        }
        for (o, v) in trace.feat_lc[F_L_DIM..].iter_mut().zip(n.f_c.iter()) {
            *o += w * v;
        }
    }
    params.sigma_decoder.forward_trace(&trace.feat_h, &mut trace.sigma_dec);
    trace.sigma = softplus(trace.sigma_dec.acts.last().unwrap()[0]);
    params.color_decoder.forward_trace(&trace.feat_lc, &mut trace.color_dec);
    let raw = trace.color_dec.acts.last().unwrap();
    trace.rgb = [sigmoid(raw[0]), sigmoid(raw[1]), sigmoid(raw[2])];
}

pub fn idw_backward_sample(
    params: &IdwParameters,
    trace: &IdwSampleTrace,
    d_sigma: f64,
    d_rgb: [f64; 3],
    grads: &mut IdwParameters,
    sinks: &mut PointGradSinks<'_>,
) {
    let sig_raw = trace.sigma_dec.acts.last().unwrap()[0];
    let d_sig_raw = [d_sigma * softplus_deriv(sig_raw)];
    let mut d_feat_h = [0.0; F_H_DIM];
    params
        .sigma_decoder
        .backward(&trace.sigma_dec, &d_sig_raw, &mut d_feat_h, &mut grads.sigma_decoder);

    let col_raw = trace.color_dec.acts.last().unwrap();
    let d_col_raw: Vec<f64> = (0..3)
        .map(|c| {
            let s = sigmoid(col_raw[c]);
            d_rgb[c] * s * (1.0 - s)
        })
        .collect();
    let mut d_feat_lc = [0.0; IDW_COLOR_IN];
    params
        .color_decoder
        .backward(&trace.color_dec, &d_col_raw, &mut d_feat_lc, &mut grads.color_decoder);

    for (i, &w) in trace.weights.iter().enumerate().take(trace.k_used) {
        let pid = trace.neighbor_ids[i] as usize;
        if let Some(dfh) = sinks.d_f_h.as_deref_mut() {
            for (g, d) in dfh[pid].iter_mut().zip(&d_feat_h) {
                *g += w * d;
            }
        }
        if let Some(dfl) = sinks.d_f_l.as_deref_mut() {
            for (g, d) in dfl[pid].iter_mut().zip(&d_feat_lc[..F_L_DIM]) {
                *g += w * d;
            }
        }
        if let Some(dfc) = sinks.d_f_c.as_deref_mut() {
            for (g, d) in dfc[pid].iter_mut().zip(&d_feat_lc[F_L_DIM..]) {
                *g += w * d;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk_neighbors<'a>(
        positions: &[Vec3],
        f_c: &'a [[f64; F_C_DIM]],
        f_l: &'a [[f64; F_L_DIM]],
        f_h: &'a [[f64; F_H_DIM]],
    ) -> Vec<NeighborInput<'a>> {
        positions
            .iter()
            .enumerate()
            .map(|(i, &p)| NeighborInput {
                index: i as u32,
                pos_cam: p,
                f_c: &f_c[i],
                f_l: &f_l[i],
                f_h: &f_h[i],
            })
            .collect()
    }

    fn demo_features(n: usize, seed: u64) -> (Vec<[f64; 3]>, Vec<[f64; 8]>, Vec<[f64; 32]>) {
        use rand::prelude::*;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f_c: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let f_l: Vec<[f64; 8]> =
            (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        let f_h: Vec<[f64; 32]> =
            (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        (f_c, f_l, f_h)
    }

    #[test]
    fn spatial_input_layout() {
        let q = Vec3::new(1.0, 2.0, 3.0);
        let input = spatial_input(q, q);
        assert_eq!(&input[3..], &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(&input[..3], &[1.0, 2.0, 3.0]);

        // Joint translation shifts only the absolute-position slot.
        let n = Vec3::new(1.5, 2.0, 2.0);
        let t = Vec3::new(0.3, -0.7, 0.2);
        let a = spatial_input(q, n);
        let b = spatial_input(q + t, n + t);
        assert_eq!(&a[3..], &b[3..]);
        assert!((b[0] - a[0] - t.x).abs() < 1e-12);
    }

    #[test]
    fn spatial_encode_matches_independent_forward() {
        let params = KernelParameters::init(9);
        let q = Vec3::new(0.1, -0.2, 1.4);
        let n = Vec3::new(0.15, -0.1, 1.3);
        let got = spatial_encode(&params, q, n);

        // Independently coded forward pass (plain loops over the weights).
        let input = spatial_input(q, n);
        let mut cur: Vec<f64> = input.to_vec();
        for (li, layer) in params.spatial.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.out_dim];
            for (j, o) in next.iter_mut().enumerate() {
                let mut acc = layer.b[j];
                for i in 0..layer.in_dim {
                    acc += layer.w[j * layer.in_dim + i] * cur[i];
                }
                *o = acc;
            }
            if li + 1 != params.spatial.layers.len() {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            cur = next;
        }
        for v in cur.iter_mut() {
            *v = v.max(0.0); // h_s ReLU
        }
        for (a, b) in got.iter().zip(&cur) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_neighbor_softmax_weight_is_one() {
        let params = KernelParameters::init(3);
        let (f_c, f_l, f_h) = demo_features(1, 0);
        let pos = [Vec3::new(0.2, 0.1, 1.0)];
        let neigh = mk_neighbors(&pos, &f_c, &f_l, &f_h);
        let mut trace = SampleTrace::default();
        eval_sample(&params, Vec3::new(0.0, 0.0, 1.0), &neigh, &mut trace);
        assert!((trace.a_d[0] - 1.0).abs() < 1e-12);
        assert!((trace.a_c[0] - 1.0).abs() < 1e-12);
        // F equals relu(H_1) exactly.
        let raw = trace.fuse_d[0].acts.last().unwrap();
        for (c, f) in trace.feat_d.iter().enumerate() {
            assert!((f - raw[c + 1].max(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn neighbor_permutation_invariance() {
        let params = KernelParameters::init(5);
        let (f_c, f_l, f_h) = demo_features(4, 1);
        let pos = [
            Vec3::new(0.1, 0.0, 1.0),
            Vec3::new(-0.1, 0.05, 0.9),
            Vec3::new(0.0, -0.1, 1.1),
            Vec3::new(0.05, 0.05, 1.05),
        ];
        let neigh = mk_neighbors(&pos, &f_c, &f_l, &f_h);
        let q = Vec3::new(0.0, 0.0, 1.0);
        let f1 = kernel_aggregate(&params, q, &neigh, Target::Density);
        let perm: Vec<NeighborInput> = [2usize, 0, 3, 1].iter().map(|&i| neigh[i]).collect();
        let f2 = kernel_aggregate(&params, q, &perm, Target::Density);
        for (a, b) in f1.iter().zip(&f2) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn softmax_weights_sum_to_one_random_inputs() {
        use rand::prelude::*;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for trial in 0..20 {
            let params = KernelParameters::init(trial);
            let n = rng.gen_range(1..8);
            let (f_c, f_l, f_h) = demo_features(n, trial + 100);
            let pos: Vec<Vec3> = (0..n)
                .map(|_| {
                    Vec3::new(
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(-0.5..0.5),
                        rng.gen_range(0.5..1.5),
                    )
                })
                .collect();
            let neigh = mk_neighbors(&pos, &f_c, &f_l, &f_h);
            let mut trace = SampleTrace::default();
            eval_sample(&params, Vec3::new(0.0, 0.0, 1.0), &neigh, &mut trace);
            let sd: f64 = trace.a_d[..n].iter().sum();
            let sc: f64 = trace.a_c[..n].iter().sum();
            assert!((sd - 1.0).abs() < 1e-9);
            assert!((sc - 1.0).abs() < 1e-9);
            assert!(trace.sigma >= 0.0);
            assert!(trace.rgb.iter().all(|c| (0.0..=1.0).contains(c)));
        }
    }

    #[test]
    fn zero_decoder_gives_softplus_zero() {
        let mut params = KernelParameters::init(0);
        params.sigma_decoder = params.sigma_decoder.zeros_like();
        let f = [0.3; HIDDEN];
        let sigma = decode_sigma(&params, &f);
        assert!((sigma - 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn decode_matches_dual_implementation() {
        let params = KernelParameters::init(77);
        let f: [f64; HIDDEN] = std::array::from_fn(|i| ((i as f64) * 0.37).sin());
        let sigma = decode_sigma(&params, &f);
        // Dual implementation with explicit loops.
        let m = &params.sigma_decoder;
        let mut h = vec![0.0; HIDDEN];
        for j in 0..HIDDEN {
            let mut acc = m.layers[0].b[j];
            for i in 0..HIDDEN {
                acc += m.layers[0].w[j * HIDDEN + i] * f[i];
            }
            h[j] = acc.max(0.0);
        }
        let mut raw = m.layers[1].b[0];
        for i in 0..HIDDEN {
            raw += m.layers[1].w[i] * h[i];
        }
        let want = (1.0 + raw.exp()).ln();
        assert!((sigma - want).abs() < 1e-12);

        let rgb = decode_color(&params, &f);
        assert!(rgb.iter().all(|c| *c > 0.0 && *c < 1.0));
    }

    #[test]
    fn coincident_neighbor_is_finite() {
        // L1 distance 0 is a valid input: no NaN anywhere.
        let params = KernelParameters::init(2);
        let (f_c, f_l, f_h) = demo_features(2, 3);
        let q = Vec3::new(0.0, 0.0, 1.0);
        let pos = [q, Vec3::new(0.1, 0.0, 1.0)];
        let neigh = mk_neighbors(&pos, &f_c, &f_l, &f_h);
        let mut trace = SampleTrace::default();
        eval_sample(&params, q, &neigh, &mut trace);
        assert!(trace.sigma.is_finite());
        assert!(trace.rgb.iter().all(|c| c.is_finite()));
    }

    #[test]
    fn idw_weights_basics() {
        let mut w = Vec::new();
        idw_weights(&[1.0, 2.0], &mut w);
        assert!((w[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((w[1] - 1.0 / 3.0).abs() < 1e-12);
        idw_weights(&[0.5, 0.0, 1.0], &mut w);
        assert_eq!(w, vec![0.0, 1.0, 0.0]);
    }
}
