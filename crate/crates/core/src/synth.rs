//! Deterministic synthetic scenes with analytic surfaces, used in place
//! of captured datasets at desk scale: ground-truth images, depths and
//! point scaffolds all come from the same closed-form geometry.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::img::Plane;
use crate::math::{ray_sphere, Vec3};
use crate::scene::{intrinsics_from_fov, look_at, CameraView, NeuralPointField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SceneKind {
    Sphere,
    Slab,
    TwoSlabs,
    TexturedCube,
    HoleSlab,
}

impl std::str::FromStr for SceneKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sphere" => Ok(SceneKind::Sphere),
            "slab" => Ok(SceneKind::Slab),
            "two_slabs" => Ok(SceneKind::TwoSlabs),
            "textured_cube" => Ok(SceneKind::TexturedCube),
            "hole_slab" => Ok(SceneKind::HoleSlab),
            other => Err(Error::invalid(format!(
                "unknown scene kind '{other}' (sphere|slab|two_slabs|textured_cube|hole_slab)"
            ))),
        }
    }
}

/// Geometry constants shared by generator and tests.
pub const SPHERE_RADIUS: f64 = 1.0;
pub const SLAB_Z: f64 = 2.0;
pub const REAR_SLAB_Z: f64 = 4.0;
pub const SLAB_HALF: f64 = 1.0;
pub const HOLE_CENTER: [f64; 2] = [0.15, -0.1];
pub const HOLE_RADIUS: f64 = 0.35;

#[derive(Debug, Clone)]
pub struct SynthScene {
    pub kind: SceneKind,
    pub field: NeuralPointField,
    pub views: Vec<CameraView>,
    /// Exact per-view depth (camera z; 0 where no surface).
    pub gt_depths: Vec<Plane>,
}

/// Procedural Lambertian albedo: smooth per-channel sinusoids.
pub fn albedo(p: Vec3) -> [f64; 3] {
    let f = |w: Vec3, phase: f64| 0.5 + 0.33 * (w.dot(&p) + phase).sin();
    [
        f(Vec3::new(2.3, 1.7, 1.1), 0.3),
        f(Vec3::new(1.9, -2.6, 0.8), 1.7),
        f(Vec3::new(-1.2, 2.2, 2.9), 4.1),
    ]
}

fn shade(normal: Vec3) -> f64 {
    let light = Vec3::new(0.35, -0.45, 0.82).normalize();
    0.6 + 0.4 * normal.dot(&light).abs()
}

/// Surface color at a point with the given normal, in [0,1].
pub fn surface_color(p: Vec3, normal: Vec3) -> [f64; 3] {
    let a = albedo(p);
    let s = shade(normal);
    [
        (a[0] * s).clamp(0.0, 1.0),
        (a[1] * s).clamp(0.0, 1.0),
        (a[2] * s).clamp(0.0, 1.0),
    ]
}

/// First intersection of a ray with the scene's analytic surface.
/// Returns (t, point, normal).
pub fn intersect_surface(kind: SceneKind, origin: Vec3, dir: Vec3) -> Option<(f64, Vec3, Vec3)> {
    match kind {
        SceneKind::Sphere => {
            let (t0, t1) = ray_sphere(origin, dir, Vec3::zeros(), SPHERE_RADIUS)?;
            let t = if t0 > 1e-9 { t0 } else if t1 > 1e-9 { t1 } else { return None };
            let p = origin + dir * t;
            Some((t, p, p.normalize()))
        }
        SceneKind::Slab | SceneKind::HoleSlab => {
            // Ground truth is always the full slab; the hole exists only in
            // the initial point scaffold.
            intersect_rect(origin, dir, SLAB_Z)
        }
        SceneKind::TwoSlabs => {
            let front = intersect_rect(origin, dir, SLAB_Z);
            let rear = intersect_rect(origin, dir, REAR_SLAB_Z);
            match (front, rear) {
                (Some(f), Some(r)) => Some(if f.0 <= r.0 { f } else { r }),
                (a, b) => a.or(b),
            }
        }
        SceneKind::TexturedCube => intersect_box(origin, dir),
    }
}

fn intersect_rect(origin: Vec3, dir: Vec3, z0: f64) -> Option<(f64, Vec3, Vec3)> {
    if dir.z.abs() < 1e-12 {
        return None;
    }
    let t = (z0 - origin.z) / dir.z;
    if t <= 1e-9 {
        return None;
    }
    let p = origin + dir * t;
    if p.x.abs() <= SLAB_HALF && p.y.abs() <= SLAB_HALF {
        Some((t, p, Vec3::new(0.0, 0.0, -dir.z.signum())))
    } else {
        None
    }
}

fn intersect_box(origin: Vec3, dir: Vec3) -> Option<(f64, Vec3, Vec3)> {
    let mut t_near = f64::NEG_INFINITY;
    let mut t_far = f64::INFINITY;
    let mut axis = 0usize;
    for a in 0..3 {
        let o = origin[a];
        let d = dir[a];
        if d.abs() < 1e-12 {
            if o.abs() > 1.0 {
                return None;
            }
            continue;
        }
        let mut t0 = (-1.0 - o) / d;
        let mut t1 = (1.0 - o) / d;
        if t0 > t1 {
            std::mem::swap(&mut t0, &mut t1);
        }
        if t0 > t_near {
            t_near = t0;
            axis = a;
        }
        t_far = t_far.min(t1);
        if t_near > t_far {
            return None;
        }
    }
    if t_near <= 1e-9 {
        return None; // origin inside or behind: not used by our cameras
    }
    let p = origin + dir * t_near;
    let mut n = Vec3::zeros();
    n[axis] = p[axis].signum();
    Some((t_near, p, n))
}

fn sample_points(kind: SceneKind, n: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec3>, Vec<Vec3>) {
    let mut pts = Vec::with_capacity(n);
    let mut normals = Vec::with_capacity(n);
    match kind {
        SceneKind::Sphere => {
            while pts.len() < n {
                let v = Vec3::new(
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                    rng.sample::<f64, _>(rand_distr::StandardNormal),
                );
                if v.norm() < 1e-9 {
                    continue;
                }
                let d = v.normalize();
                pts.push(d * SPHERE_RADIUS);
                normals.push(d);
            }
        }
        SceneKind::Slab => {
            for _ in 0..n {
                pts.push(Vec3::new(
                    rng.gen_range(-SLAB_HALF..SLAB_HALF),
                    rng.gen_range(-SLAB_HALF..SLAB_HALF),
                    SLAB_Z,
                ));
                normals.push(Vec3::new(0.0, 0.0, -1.0));
            }
        }
        SceneKind::TwoSlabs => {
            for i in 0..n {
                let z = if i % 2 == 0 { SLAB_Z } else { REAR_SLAB_Z };
                pts.push(Vec3::new(
                    rng.gen_range(-SLAB_HALF..SLAB_HALF),
                    rng.gen_range(-SLAB_HALF..SLAB_HALF),
                    z,
                ));
                normals.push(Vec3::new(0.0, 0.0, -1.0));
            }
        }
        SceneKind::TexturedCube => {
            for _ in 0..n {
                let face = rng.gen_range(0..6usize);
                let u = rng.gen_range(-1.0..1.0);
                let v = rng.gen_range(-1.0..1.0);
                let (p, nrm) = match face {
                    0 => (Vec3::new(1.0, u, v), Vec3::new(1.0, 0.0, 0.0)),
                    1 => (Vec3::new(-1.0, u, v), Vec3::new(-1.0, 0.0, 0.0)),
                    2 => (Vec3::new(u, 1.0, v), Vec3::new(0.0, 1.0, 0.0)),
                    3 => (Vec3::new(u, -1.0, v), Vec3::new(0.0, -1.0, 0.0)),
                    4 => (Vec3::new(u, v, 1.0), Vec3::new(0.0, 0.0, 1.0)),
                    _ => (Vec3::new(u, v, -1.0), Vec3::new(0.0, 0.0, -1.0)),
                };
                pts.push(p);
                normals.push(nrm);
            }
        }
        SceneKind::HoleSlab => {
            while pts.len() < n {
                let x = rng.gen_range(-SLAB_HALF..SLAB_HALF);
                let y = rng.gen_range(-SLAB_HALF..SLAB_HALF);
                let dx = x - HOLE_CENTER[0];
                let dy = y - HOLE_CENTER[1];
                if (dx * dx + dy * dy).sqrt() < HOLE_RADIUS {
                    continue;
                }
                pts.push(Vec3::new(x, y, SLAB_Z));
                normals.push(Vec3::new(0.0, 0.0, -1.0));
            }
        }
    }
    (pts, normals)
}

fn make_cameras(kind: SceneKind, n_views: usize, resolution: usize) -> Vec<(crate::math::Mat3, crate::math::Mat4)> {
    let mut cams = Vec::with_capacity(n_views);
    match kind {
        SceneKind::Slab | SceneKind::TwoSlabs | SceneKind::HoleSlab => {
            // View 0 exactly fronto-parallel at the origin; the rest on a
            // small ring, all looking at the slab center.
            let k = intrinsics_from_fov(resolution, resolution, 56f64.to_radians());
            for i in 0..n_views {
                let eye = if i == 0 {
                    Vec3::zeros()
                } else {
                    let a = 2.0 * std::f64::consts::PI * (i as f64) / (n_views as f64);
                    Vec3::new(0.35 * a.cos(), 0.35 * a.sin(), -0.15)
                };
                let w2c = look_at(eye, Vec3::new(0.0, 0.0, SLAB_Z), Vec3::new(0.0, 1.0, 0.0));
                cams.push((k, w2c));
            }
        }
        SceneKind::Sphere | SceneKind::TexturedCube => {
            let k = intrinsics_from_fov(resolution, resolution, 42f64.to_radians());
            let dist = if kind == SceneKind::Sphere { 3.6 } else { 4.4 };
            for i in 0..n_views {
                let a = 2.0 * std::f64::consts::PI * (i as f64) / (n_views as f64);
                let elev = if i % 2 == 0 { 0.32 } else { -0.22 };
                let eye = Vec3::new(
                    dist * a.cos() * elev.cos(),
                    dist * a.sin() * elev.cos(),
                    dist * elev.sin(),
                );
                let w2c = look_at(eye, Vec3::zeros(), Vec3::new(0.0, 0.0, -1.0));
                cams.push((k, w2c));
            }
        }
    }
    cams
}

/// Ray-traces the analytic ground truth for one camera.
pub fn render_gt(kind: SceneKind, view: &CameraView) -> (Plane, Plane) {
    let mut img = Plane::zeros(view.width, view.height, 3);
    let mut depth = Plane::zeros(view.width, view.height, 1);
    let origin = view.center();
    for y in 0..view.height {
        for x in 0..view.width {
            let px = crate::math::Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
            let dir = crate::scene::pixel_direction(view, px);
            if let Some((_t, p, n)) = intersect_surface(kind, origin, dir) {
                let c = surface_color(p, n);
                img.pixel_mut(x, y).copy_from_slice(&c);
                depth.pixel_mut(x, y)[0] = view.to_camera(p).z;
            }
        }
    }
    (img, depth)
}

/// Builds a deterministic synthetic scene: point scaffold with exact
/// surface colors, posed cameras, ground-truth images and depth maps.
pub fn synth_scene(
    kind: SceneKind,
    n_points: usize,
    n_views: usize,
    resolution: usize,
    seed: u64,
) -> Result<SynthScene> {
    if n_points < 100 {
        return Err(Error::invalid("synth_scene requires n_points >= 100"));
    }
    if n_views < 2 {
        return Err(Error::invalid("synth_scene requires n_views >= 2"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (pts, normals) = sample_points(kind, n_points, &mut rng);
    let colors: Vec<[f64; 3]> =
        pts.iter().zip(&normals).map(|(p, n)| surface_color(*p, *n)).collect();
    let field = NeuralPointField::from_positions_colors(pts, colors)?;

    let mut views = Vec::with_capacity(n_views);
    let mut gt_depths = Vec::with_capacity(n_views);
    for (k, w2c) in make_cameras(kind, n_views, resolution) {
        let blank = CameraView::new(k, w2c, Plane::zeros(resolution, resolution, 3))?;
        let (img, depth) = render_gt(kind, &blank);
        views.push(CameraView::new(k, w2c, img)?);
        gt_depths.push(depth);
    }
    Ok(SynthScene { kind, field, views, gt_depths })
}

/// True if a point lies inside the punched hole of the hole_slab scene.
pub fn in_hole_region(p: Vec3) -> bool {
    let dx = p.x - HOLE_CENTER[0];
    let dy = p.y - HOLE_CENTER[1];
    (dx * dx + dy * dy).sqrt() < HOLE_RADIUS && (p.z - SLAB_Z).abs() < 0.2
}
