//! Visibility-weighted fetching of image features onto the point scaffold.
//!
//! Each point selects its top-k views by physical visibility. Per view,
//! bilinear samples of the low/high feature maps and the source color are
//! run through a small aggregator MLP that emits a tuning weight (sigmoid)
//! and a value vector. Weights are multiplied by the visibility scores and
//! normalized to sum to one, so an occluded view (score 0) contributes
//! exactly nothing. The high-level aggregator additionally sees the mean
//! and variance of its per-view inputs across the selected views.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::math::sigmoid;
use crate::mlp::{Mlp, MlpTrace};
use crate::scene::{project_point, CameraView, NeuralPointField, F_C_DIM, F_H_DIM, F_L_DIM};
use crate::visibility::VisibilityTable;

/// Low path input: f_l + color + visibility score.
pub const LOW_IN: usize = F_L_DIM + F_C_DIM + 1; // 12
/// Low path output: tuning weight + 8-dim value.
pub const LOW_OUT: usize = 1 + F_L_DIM; // 9
/// High path per-view vector: f_h + color.
pub const HIGH_X: usize = F_H_DIM + F_C_DIM; // 35
/// High path input: per-view vector + mean + variance.
pub const HIGH_IN: usize = 3 * HIGH_X; // 105
pub const HIGH_OUT: usize = 1 + F_H_DIM; // 33

const HIDDEN: usize = 32;

/// Trainable weights of the two fetch aggregators.
#[derive(Debug, Clone)]
pub struct FetchAggregatorParams {
    pub low: Mlp,
    pub high: Mlp,
}

impl FetchAggregatorParams {
    pub fn init(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        FetchAggregatorParams {
            low: Mlp::glorot(&[LOW_IN, HIDDEN, HIDDEN, LOW_OUT], &mut rng),
            high: Mlp::glorot(&[HIGH_IN, HIDDEN, HIDDEN, HIGH_OUT], &mut rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        FetchAggregatorParams { low: self.low.zeros_like(), high: self.high.zeros_like() }
    }

    pub fn param_count(&self) -> usize {
        self.low.param_count() + self.high.param_count()
    }

    pub fn append_params(&self, out: &mut Vec<f64>) {
        self.low.append_params(out);
        self.high.append_params(out);
    }

    pub fn load_params(&mut self, src: &[f64], cursor: &mut usize) {
        self.low.load_params(src, cursor);
        self.high.load_params(src, cursor);
    }
}

/// Fetched features plus the zero-visibility flags.
#[derive(Debug, Clone)]
pub struct FetchOutput {
    pub f_c: Vec<[f64; F_C_DIM]>,
    pub f_l: Vec<[f64; F_L_DIM]>,
    pub f_h: Vec<[f64; F_H_DIM]>,
    /// True where no view saw the point; such points carry zero features.
    pub zero_visibility: Vec<bool>,
}

/// Per-point record needed to backpropagate through the fetch.
#[derive(Debug, Clone, Default)]
pub struct PointFetchTrace {
    pub views: Vec<usize>,
    pub scores: Vec<f64>,
    pub low_traces: Vec<MlpTrace>,
    pub high_traces: Vec<MlpTrace>,
    pub colors: Vec<[f64; 3]>,
    pub a_low: Vec<f64>,
    pub a_high: Vec<f64>,
}

fn clamp01(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

fn fetch_one_point(
    point: usize,
    field: &NeuralPointField,
    views: &[CameraView],
    table: &VisibilityTable,
    params: &FetchAggregatorParams,
    top_k: usize,
    trace: Option<&mut PointFetchTrace>,
) -> ([f64; F_C_DIM], [f64; F_L_DIM], [f64; F_H_DIM], bool) {
    let selected = table.top_k_views(point, top_k);
    if selected.is_empty() {
        return ([0.0; F_C_DIM], [0.0; F_L_DIM], [0.0; F_H_DIM], true);
    }
    let p = field.positions()[point];
    let k = selected.len();

    let mut low_traces: Vec<MlpTrace> = vec![MlpTrace::default(); k];
    let mut high_traces: Vec<MlpTrace> = vec![MlpTrace::default(); k];
    let mut colors = vec![[0.0f64; 3]; k];
    let mut scores = vec![0.0f64; k];
    let mut high_x = vec![[0.0f64; HIGH_X]; k];

    for (i, &vi) in selected.iter().enumerate() {
        let view = &views[vi];
        let pyr = view.pyramid.as_ref().expect("fetch requires pyramids on all views");
        let (px, _z) = project_point(p, view).expect("positive visibility implies projectable");
        let mut f_l = [0.0; F_L_DIM];
        pyr.sample_low(px.x, px.y, &mut f_l);
        let mut col = [0.0; 3];
        view.image.sample_bilinear(px.x, px.y, &mut col);
        let mut f_h = [0.0; F_H_DIM];
        pyr.sample_high(px.x, px.y, &mut f_h);

        let mut low_in = [0.0; LOW_IN];
        low_in[..F_L_DIM].copy_from_slice(&f_l);
        low_in[F_L_DIM..F_L_DIM + 3].copy_from_slice(&col);
        low_in[LOW_IN - 1] = table.score(point, vi);
        params.low.forward_trace(&low_in, &mut low_traces[i]);

        high_x[i][..F_H_DIM].copy_from_slice(&f_h);
        high_x[i][F_H_DIM..].copy_from_slice(&col);
        colors[i] = col;
        scores[i] = table.score(point, vi);
    }

    // Mean/variance across the selected views augment the high path.
    let mut mean = [0.0; HIGH_X];
    for x in &high_x {
        for (m, v) in mean.iter_mut().zip(x) {
            *m += v;
        }
    }
    for m in mean.iter_mut() {
        *m /= k as f64;
    }
    let mut var = [0.0; HIGH_X];
    for x in &high_x {
        for ((s, v), m) in var.iter_mut().zip(x).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    for s in var.iter_mut() {
        *s /= k as f64;
    }
    for i in 0..k {
        let mut high_in = [0.0; HIGH_IN];
        high_in[..HIGH_X].copy_from_slice(&high_x[i]);
        high_in[HIGH_X..2 * HIGH_X].copy_from_slice(&mean);
        high_in[2 * HIGH_X..].copy_from_slice(&var);
        params.high.forward_trace(&high_in, &mut high_traces[i]);
    }

    // Normalized weights: Norm(w * v), guaranteed non-negative.
    let mut a_low = vec![0.0f64; k];
    let mut a_high = vec![0.0f64; k];
    let mut s_low = 0.0;
    let mut s_high = 0.0;
    for i in 0..k {
        let w_l = sigmoid(low_traces[i].acts.last().unwrap()[0]);
        let w_h = sigmoid(high_traces[i].acts.last().unwrap()[0]);
        a_low[i] = w_l * scores[i];
        a_high[i] = w_h * scores[i];
        s_low += a_low[i];
        s_high += a_high[i];
    }
    // top_k_views drops zero scores, so the sums are strictly positive.
    for i in 0..k {
        a_low[i] /= s_low;
        a_high[i] /= s_high;
    }

    let mut f_c = [0.0; F_C_DIM];
    let mut f_l = [0.0; F_L_DIM];
    let mut f_h = [0.0; F_H_DIM];
    for i in 0..k {
        let low_out = low_traces[i].acts.last().unwrap();
        for (o, h) in f_l.iter_mut().zip(&low_out[1..]) {
            *o += a_low[i] * h;
        }
        for (o, c) in f_c.iter_mut().zip(&colors[i]) {
            *o += a_low[i] * c;
        }
        let high_out = high_traces[i].acts.last().unwrap();
        for (o, h) in f_h.iter_mut().zip(&high_out[1..]) {
            *o += a_high[i] * h;
        }
    }
    for c in f_c.iter_mut() {
        *c = clamp01(*c);
    }

    if let Some(t) = trace {
        t.views = selected;
        t.scores = scores;
        t.low_traces = low_traces;
        t.high_traces = high_traces;
        t.colors = colors;
        t.a_low = a_low;
        t.a_high = a_high;
    }
    (f_c, f_l, f_h, false)
}

/// Fetches features for every point. Views need pyramids; the table must
/// match `views`. `top_k` larger than the view count is clamped.
pub fn fetch_point_features(
    field: &NeuralPointField,
    views: &[CameraView],
    table: &VisibilityTable,
    params: &FetchAggregatorParams,
    top_k: usize,
) -> FetchOutput {
    let top_k = top_k.clamp(1, views.len());
    let rows: Vec<_> = (0..field.len())
        .into_par_iter()
        .map(|i| fetch_one_point(i, field, views, table, params, top_k, None))
        .collect();
    let mut out = FetchOutput {
        f_c: Vec::with_capacity(rows.len()),
        f_l: Vec::with_capacity(rows.len()),
        f_h: Vec::with_capacity(rows.len()),
        zero_visibility: Vec::with_capacity(rows.len()),
    };
    for (c, l, h, z) in rows {
        out.f_c.push(c);
        out.f_l.push(l);
        out.f_h.push(h);
        out.zero_visibility.push(z);
    }
    out
}

/// Trace-recording variant used by the end-to-end gradient path.
pub fn fetch_with_traces(
    field: &NeuralPointField,
    views: &[CameraView],
    table: &VisibilityTable,
    params: &FetchAggregatorParams,
    top_k: usize,
) -> (FetchOutput, Vec<PointFetchTrace>) {
    let top_k = top_k.clamp(1, views.len());
    let mut out = FetchOutput {
        f_c: Vec::with_capacity(field.len()),
        f_l: Vec::with_capacity(field.len()),
        f_h: Vec::with_capacity(field.len()),
        zero_visibility: Vec::with_capacity(field.len()),
    };
    let mut traces = vec![PointFetchTrace::default(); field.len()];
    for i in 0..field.len() {
        let (c, l, h, z) =
            fetch_one_point(i, field, views, table, params, top_k, Some(&mut traces[i]));
        out.f_c.push(c);
        out.f_l.push(l);
        out.f_h.push(h);
        out.zero_visibility.push(z);
    }
    (out, traces)
}

/// Backpropagates per-point feature gradients through the fetch into the
/// aggregator parameters.
///
/// Color clamping is treated as inactive (desk-scale fetches keep colors
/// strictly inside (0,1); gradient checks regenerate configs otherwise).
pub fn fetch_backward(
    params: &FetchAggregatorParams,
    traces: &[PointFetchTrace],
    d_f_c: &[[f64; F_C_DIM]],
    d_f_l: &[[f64; F_L_DIM]],
    d_f_h: &[[f64; F_H_DIM]],
    grads: &mut FetchAggregatorParams,
) {
    let mut dx_low = vec![0.0; LOW_IN];
    let mut dx_high = vec![0.0; HIGH_IN];
    for (pt, trace) in traces.iter().enumerate() {
        let k = trace.views.len();
        if k == 0 {
            continue;
        }
        // Low path: F_l = sum a_i h_i, F_c = sum a_i col_i, a = Norm(w v).
        // Recover S = sum w_i v_i from the stored traces.
        let s_low: f64 = (0..k)
            .map(|i| sigmoid(trace.low_traces[i].acts.last().unwrap()[0]) * trace.scores[i])
            .sum();
        let mut da: Vec<f64> = Vec::with_capacity(k);
        for i in 0..k {
            let h = &trace.low_traces[i].acts.last().unwrap()[1..];
            let mut v = 0.0;
            for (g, hv) in d_f_l[pt].iter().zip(h) {
                v += g * hv;
            }
            for (g, cv) in d_f_c[pt].iter().zip(&trace.colors[i]) {
                v += g * cv;
            }
            da.push(v);
        }
        let dot: f64 = da.iter().zip(&trace.a_low).map(|(x, a)| x * a).sum();
        for i in 0..k {
            let du = (da[i] - dot) / s_low;
            let w = sigmoid(trace.low_traces[i].acts.last().unwrap()[0]);
            let dw_raw = du * trace.scores[i] * w * (1.0 - w);
            let mut dout = vec![0.0; LOW_OUT];
            dout[0] = dw_raw;
            for (o, g) in dout[1..].iter_mut().zip(&d_f_l[pt]) {
                *o = trace.a_low[i] * g;
            }
            params.low.backward(&trace.low_traces[i], &dout, &mut dx_low, &mut grads.low);
        }

        // High path: F_h = sum a_i h_i.
        let s_high: f64 = (0..k)
            .map(|i| sigmoid(trace.high_traces[i].acts.last().unwrap()[0]) * trace.scores[i])
            .sum();
        let mut da: Vec<f64> = Vec::with_capacity(k);
        for i in 0..k {
            let h = &trace.high_traces[i].acts.last().unwrap()[1..];
            let mut v = 0.0;
            for (g, hv) in d_f_h[pt].iter().zip(h) {
                v += g * hv;
            }
            da.push(v);
        }
        let dot: f64 = da.iter().zip(&trace.a_high).map(|(x, a)| x * a).sum();
        for i in 0..k {
            let du = (da[i] - dot) / s_high;
            let w = sigmoid(trace.high_traces[i].acts.last().unwrap()[0]);
            let dw_raw = du * trace.scores[i] * w * (1.0 - w);
            let mut dout = vec![0.0; HIGH_OUT];
            dout[0] = dw_raw;
            for (o, g) in dout[1..].iter_mut().zip(&d_f_h[pt]) {
                *o = trace.a_high[i] * g;
            }
            params.high.backward(&trace.high_traces[i], &dout, &mut dx_high, &mut grads.high);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::img::Plane;
    use crate::math::{Mat4, Vec3};
    use crate::pyramid::extract_feature_pyramid;
    use crate::scene::intrinsics_from_fov;

    fn textured_view(seed: u64) -> CameraView {
        let w = 24;
        let h = 24;
        let mut img = Plane::zeros(w, h, 3);
        for y in 0..h {
            for x in 0..w {
                let f = (x as f64 * 0.7 + y as f64 * 0.3 + seed as f64).sin() * 0.4 + 0.5;
                img.pixel_mut(x, y).copy_from_slice(&[f, 1.0 - f, 0.5 * f + 0.2]);
            }
        }
        let k = intrinsics_from_fov(w, h, 60f64.to_radians());
        let view = CameraView::new(k, Mat4::identity(), img.clone()).unwrap();
        let pyr = extract_feature_pyramid(&img).unwrap();
        let mut dm = Plane::zeros(w, h, 1);
        dm.data.fill(2.0);
        view.with_pyramid(pyr).with_depth_map(dm)
    }

    fn small_field() -> NeuralPointField {
        let pts = vec![
            Vec3::new(0.0, 0.0, 2.0),
            Vec3::new(0.2, 0.1, 2.0),
            Vec3::new(-0.3, -0.2, 2.0),
        ];
        NeuralPointField::from_positions_colors(pts, vec![[0.5; 3]; 3]).unwrap()
    }

    fn uniform_table(n_points: usize, scores: &[f64]) -> VisibilityTable {
        VisibilityTable {
            n_points,
            n_views: scores.len(),
            scores: (0..n_points).flat_map(|_| scores.iter().cloned()).collect(),
        }
    }

    #[test]
    fn single_view_weight_is_one_and_output_matches_head() {
        let field = small_field();
        let views = vec![textured_view(0)];
        let table = uniform_table(field.len(), &[0.8]);
        let params = FetchAggregatorParams::init(3);
        let (out, traces) = fetch_with_traces(&field, &views, &table, &params, 3);
        for p in 0..field.len() {
            assert!((traces[p].a_low[0] - 1.0).abs() < 1e-12);
            assert!((traces[p].a_high[0] - 1.0).abs() < 1e-12);
            let low_out = traces[p].low_traces[0].acts.last().unwrap();
            for (got, want) in out.f_l[p].iter().zip(&low_out[1..]) {
                assert!((got - want).abs() < 1e-12);
            }
            // F_c equals the sampled color exactly.
            for (got, want) in out.f_c[p].iter().zip(&traces[p].colors[0]) {
                assert!((got - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identical_views_equal_scores_are_order_invariant() {
        let field = small_field();
        let views = vec![textured_view(5), textured_view(5)];
        let table = uniform_table(field.len(), &[0.7, 0.7]);
        let params = FetchAggregatorParams::init(4);
        let a = fetch_point_features(&field, &views, &table, &params, 2);
        let table_rev = uniform_table(field.len(), &[0.7, 0.7]);
        let b = fetch_point_features(&field, &views, &table_rev, &params, 2);
        assert_eq!(a.f_l, b.f_l);
        assert_eq!(a.f_h, b.f_h);
    }

    #[test]
    fn weights_sum_to_one_and_zero_score_gets_zero_weight() {
        let field = small_field();
        let views = vec![textured_view(1), textured_view(2), textured_view(3)];
        let table = uniform_table(field.len(), &[0.9, 0.0, 0.4]);
        let params = FetchAggregatorParams::init(5);
        let (_, traces) = fetch_with_traces(&field, &views, &table, &params, 3);
        for t in &traces {
            let s: f64 = t.a_low.iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(t.a_low.iter().all(|a| *a >= 0.0));
            // View with score 0 must have been dropped entirely.
            assert!(!t.views.contains(&1));
        }
    }

    #[test]
    fn all_zero_visibility_points_are_flagged() {
        let field = small_field();
        let views = vec![textured_view(1)];
        let table = uniform_table(field.len(), &[0.0]);
        let params = FetchAggregatorParams::init(6);
        let out = fetch_point_features(&field, &views, &table, &params, 1);
        assert!(out.zero_visibility.iter().all(|z| *z));
        assert!(out.f_h.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn top_k_clamped_to_view_count() {
        let field = small_field();
        let views = vec![textured_view(1), textured_view(2)];
        let table = uniform_table(field.len(), &[0.5, 0.6]);
        let params = FetchAggregatorParams::init(7);
        // Does not panic; clamps to 2.
        let out = fetch_point_features(&field, &views, &table, &params, 10);
        assert_eq!(out.f_c.len(), field.len());
    }

    #[test]
    fn fetch_gradients_match_finite_differences() {
        let field = small_field();
        let views = vec![textured_view(1), textured_view(2)];
        let table = uniform_table(field.len(), &[0.9, 0.5]);
        let params = FetchAggregatorParams::init(8);

        // Loss: L = sum over points of (f_l . u) + (f_c . w) + (f_h . z)
        // with fixed random projections.
        use rand::prelude::*;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let proj_l: Vec<[f64; F_L_DIM]> =
            (0..3).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        let proj_c: Vec<[f64; F_C_DIM]> =
            (0..3).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        let proj_h: Vec<[f64; F_H_DIM]> =
            (0..3).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();

        let loss_of = |p: &FetchAggregatorParams| -> f64 {
            let out = fetch_point_features(&field, &views, &table, p, 2);
            let mut l = 0.0;
            for i in 0..3 {
                for (a, b) in out.f_l[i].iter().zip(&proj_l[i]) {
                    l += a * b;
                }
                for (a, b) in out.f_c[i].iter().zip(&proj_c[i]) {
                    l += a * b;
                }
                for (a, b) in out.f_h[i].iter().zip(&proj_h[i]) {
                    l += a * b;
                }
            }
            l
        };

        let (_, traces) = fetch_with_traces(&field, &views, &table, &params, 2);
        let mut grads = params.zeros_like();
        fetch_backward(&params, &traces, &proj_c, &proj_l, &proj_h, &mut grads);

        let mut flat = Vec::new();
        params.append_params(&mut flat);
        let mut gflat = Vec::new();
        grads.append_params(&mut gflat);
        let mut rng = ChaCha8Rng::seed_from_u64(123);
        let mut checked = 0;
        let mut worst: f64 = 0.0;
        while checked < 120 {
            let i = rng.gen_range(0..flat.len());
            let h = 1e-5 * flat[i].abs().max(1.0);
            let mut pp = params.clone();
            let mut fp = flat.clone();
            fp[i] += h;
            let mut c = 0;
            pp.load_params(&fp, &mut c);
            let mut pm = params.clone();
            let mut fm = flat.clone();
            fm[i] -= h;
            c = 0;
            pm.load_params(&fm, &mut c);
            let num = (loss_of(&pp) - loss_of(&pm)) / (2.0 * h);
            let err = (num - gflat[i]).abs() / (num.abs() + gflat[i].abs()).max(1e-6);
            worst = worst.max(err);
            checked += 1;
        }
        assert!(worst < 1e-4, "worst relative fetch-gradient error {worst}");
    }
}
