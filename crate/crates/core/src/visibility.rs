//! Visible depth maps from point density and per-point visibility scores.
//!
//! Depth: rays are cast through every pixel, query points are placed
//! uniformly along them, each query's density comes from its neighbors
//! within radius r, transmittance decays with accumulated density, and
//! the depth is the opacity-weighted soft argmax of camera-space sample
//! depths. Visibility: a point scores 1 when its camera-space z matches
//! the interpolated visible depth at its projection and decays toward 0
//! as the mismatch grows; out-of-frustum projections score 0 via zero
//! padding.

use rayon::prelude::*;

use crate::error::Result;
use crate::grid::SpatialIndex;
use crate::img::Plane;
use crate::math::Vec2;
use crate::scene::{pixel_ray, project_point, CameraView, NeuralPointField};

/// Settings for depth estimation and view selection.
///
/// `search_radius_r` and `bandwidth` are absolute scene units; use
/// [`DepthEstimationConfig::default_for_scale`] for the scene-relative
/// defaults (r = 0.005 x scene_scale, bandwidth = r).
#[derive(Debug, Clone)]
pub struct DepthEstimationConfig {
    pub samples_per_ray: usize,
    pub search_radius_r: f64,
    pub bandwidth: f64,
    pub top_k_views: usize,
}

impl DepthEstimationConfig {
    pub fn default_for_scale(scene_scale: f64) -> Self {
        let r = 0.005 * scene_scale;
        DepthEstimationConfig { samples_per_ray: 128, search_radius_r: r, bandwidth: r, top_k_views: 3 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples_per_ray < 2 {
            return Err(crate::Error::invalid("samples_per_ray must be >= 2"));
        }
        if self.search_radius_r <= 0.0 || self.bandwidth <= 0.0 {
            return Err(crate::Error::invalid("search radius and bandwidth must be positive"));
        }
        if self.top_k_views < 1 {
            return Err(crate::Error::invalid("top_k_views must be >= 1"));
        }
        Ok(())
    }
}

/// Per-point, per-view visibility scores in [0, 1].
#[derive(Debug, Clone)]
pub struct VisibilityTable {
    pub n_points: usize,
    pub n_views: usize,
    /// Row-major `n_points x n_views`.
    pub scores: Vec<f64>,
}

impl VisibilityTable {
    #[inline]
    pub fn score(&self, point: usize, view: usize) -> f64 {
        self.scores[point * self.n_views + view]
    }

    pub fn row(&self, point: usize) -> &[f64] {
        &self.scores[point * self.n_views..(point + 1) * self.n_views]
    }

    /// Indices of the top-k views for a point, descending score, ties
    /// broken by lower view index. Views with zero score are excluded.
    pub fn top_k_views(&self, point: usize, k: usize) -> Vec<usize> {
        let row = self.row(point);
        let mut order: Vec<usize> = (0..self.n_views).collect();
        order.sort_by(|&a, &b| row[b].partial_cmp(&row[a]).unwrap().then(a.cmp(&b)));
        order.truncate(k.min(self.n_views));
        order.retain(|&v| row[v] > 0.0);
        order
    }
}

/// Spatial density of a query from its neighbor distances:
/// d = (1/N) sum_n exp(-0.5 dist^2 / bandwidth^2), in (0, 1].
///
/// Callers filter out queries with no neighbors; an empty list is a
/// contract violation.
pub fn point_density(neighbors: &[(u32, f64)], bandwidth: f64) -> f64 {
    assert!(!neighbors.is_empty(), "point_density requires at least one neighbor");
    let inv2 = 1.0 / (bandwidth * bandwidth);
    let sum: f64 = neighbors.iter().map(|(_, d)| (-0.5 * d * d * inv2).exp()).sum();
    sum / neighbors.len() as f64
}

/// Transmittance along a ray: T_n = exp(-sum_{i<n} 2 d_i r) with T_0 = 1.
/// Exclusive prefix; non-increasing, values in (0, 1].
pub fn ray_transmittance(densities: &[f64], r: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(densities.len());
    let mut acc = 0.0;
    for &d in densities {
        out.push((-acc).exp());
        acc += 2.0 * d * r;
    }
    out
}

/// Estimates the visible depth map of `view` from the point cloud.
/// Pixels whose rays gather no density are 0 (unknown).
pub fn estimate_depth_map(
    field: &NeuralPointField,
    index: &SpatialIndex,
    view: &CameraView,
    cfg: &DepthEstimationConfig,
) -> Plane {
    let (c, radius) = field.bounding_sphere();
    let bound_r = radius * 1.05 + cfg.search_radius_r;
    let w = view.width;
    let h = view.height;
    let mut depth = Plane::zeros(w, h, 1);
    let rows: Vec<Vec<f64>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![0.0; w];
            let mut neigh = Vec::new();
            for (x, out) in row.iter_mut().enumerate() {
                let ray = match pixel_ray(view, x, y, c, bound_r) {
                    Some(r) => r,
                    None => continue,
                };
                let n = cfg.samples_per_ray;
                let dt = (ray.t_far - ray.t_near) / n as f64;
                // Forward z-rate of this ray in camera space: z = t * rate.
                let z_rate = (view.rotation() * ray.direction).z;
                let mut acc_tau = 0.0;
                let mut w_sum = 0.0;
                let mut wz_sum = 0.0;
                for i in 0..n {
                    let t = ray.t_near + (i as f64 + 0.5) * dt;
                    let q = ray.at(t);
                    index.radius_neighbors_into(field, q, cfg.search_radius_r, &mut neigh);
                    if neigh.is_empty() {
                        continue;
                    }
                    let d = point_density(&neigh, cfg.bandwidth);
                    let transmittance = (-acc_tau).exp();
                    let wi = transmittance * d;
                    let z = t * z_rate + (view.rotation() * ray.origin + view.translation()).z;
                    w_sum += wi;
                    wz_sum += wi * z;
                    acc_tau += 2.0 * d * cfg.search_radius_r;
                }
                if w_sum > 0.0 {
                    *out = wz_sum / w_sum;
                }
            }
            row
        })
        .collect();
    for (y, row) in rows.into_iter().enumerate() {
        for (x, v) in row.into_iter().enumerate() {
            depth.pixel_mut(x, y)[0] = v;
        }
    }
    depth
}

/// Physical visibility of a world point against a view's depth map:
/// 1 - |P_z - D| / P_z clamped to [0, 1], with D bilinearly interpolated
/// under zero padding; unknown depth (0) or a point behind the camera
/// scores 0.
pub fn visibility_score(p: crate::math::Vec3, view: &CameraView) -> f64 {
    let depth_map = view
        .depth_map
        .as_ref()
        .expect("visibility_score requires a depth map on the view");
    let (px, pz) = match project_point(p, view) {
        Ok(v) => v,
        Err(_) => return 0.0,
    };
    let d = sample_depth(depth_map, px);
    if d <= 0.0 {
        return 0.0;
    }
    (1.0 - (pz - d).abs() / pz).clamp(0.0, 1.0)
}

/// Depth-map interpolation with zero padding, skipping unknown (0) texels
/// so surface borders do not bleed to zero depth.
fn sample_depth(depth_map: &Plane, px: Vec2) -> f64 {
    let gx = px.x - 0.5;
    let gy = px.y - 0.5;
    let x0 = gx.floor();
    let y0 = gy.floor();
    let fx = gx - x0;
    let fy = gy - y0;
    let x0 = x0 as i64;
    let y0 = y0 as i64;
    let mut num = 0.0;
    let mut den = 0.0;
    for (cx, cy, w) in [
        (x0, y0, (1.0 - fx) * (1.0 - fy)),
        (x0 + 1, y0, fx * (1.0 - fy)),
        (x0, y0 + 1, (1.0 - fx) * fy),
        (x0 + 1, y0 + 1, fx * fy),
    ] {
        if cx < 0 || cy < 0 || cx >= depth_map.width as i64 || cy >= depth_map.height as i64 {
            continue; // zero padding: contributes weight toward "unknown"
        }
        let v = depth_map.pixel(cx as usize, cy as usize)[0];
        if v > 0.0 {
            num += w * v;
            den += w;
        }
    }
    // Mostly-unknown neighborhoods stay unknown.
    if den >= 0.5 {
        num / den
    } else {
        0.0
    }
}

/// Precomputes visibility scores for every point against every view.
/// All views must carry depth maps.
pub fn build_visibility_table(field: &NeuralPointField, views: &[CameraView]) -> VisibilityTable {
    let n_views = views.len();
    let scores: Vec<f64> = field
        .positions()
        .par_iter()
        .flat_map_iter(|&p| views.iter().map(move |v| visibility_score(p, v)))
        .collect();
    VisibilityTable { n_points: field.len(), n_views, scores }
}
