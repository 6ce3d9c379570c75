//! Scene types: neural point field, camera views, rays and projection math.
//!
//! Conventions: right-handed coordinates, camera looks down +z in camera
//! space, pixel x right / y down, pixel (i, j) has center (i+0.5, j+0.5).
//! Scene units are arbitrary; tolerances elsewhere are expressed as
//! fractions of [`NeuralPointField::scene_scale`].

use crate::error::{Error, Result};
use crate::img::Plane;
use crate::math::{Mat3, Mat4, Vec2, Vec3};
use crate::pyramid::FeaturePyramid;

pub const F_C_DIM: usize = 3;
pub const F_L_DIM: usize = 8;
pub const F_H_DIM: usize = 32;
/// Total per-point feature payload (color + low + high).
pub const FEATURE_DIM: usize = F_C_DIM + F_L_DIM + F_H_DIM;

/// Point cloud with per-point neural features; the scene representation.
///
/// `positions`, `f_c`, `f_l`, `f_h` always have identical length.
/// `f_c` components stay in [0, 1]; all features stay finite.
/// `scene_scale` is the bounding-box diagonal of the positions.
/// `revision` ties derived structures (spatial index) to this field;
/// every mutation bumps it.
#[derive(Debug, Clone)]
pub struct NeuralPointField {
    positions: Vec<Vec3>,
    f_c: Vec<[f64; F_C_DIM]>,
    f_l: Vec<[f64; F_L_DIM]>,
    f_h: Vec<[f64; F_H_DIM]>,
    scene_scale: f64,
    revision: u64,
}

impl NeuralPointField {
    /// Builds a field with zeroed low/high features and the given colors.
    pub fn from_positions_colors(positions: Vec<Vec3>, colors: Vec<[f64; 3]>) -> Result<Self> {
        let n = positions.len();
        Self::new(positions, colors, vec![[0.0; F_L_DIM]; n], vec![[0.0; F_H_DIM]; n])
    }

    pub fn new(
        positions: Vec<Vec3>,
        f_c: Vec<[f64; F_C_DIM]>,
        f_l: Vec<[f64; F_L_DIM]>,
        f_h: Vec<[f64; F_H_DIM]>,
    ) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::invalid("point field must contain at least one point"));
        }
        if f_c.len() != positions.len() || f_l.len() != positions.len() || f_h.len() != positions.len()
        {
            return Err(Error::invalid("feature arrays must match position count"));
        }
        if positions.iter().any(|p| !p.x.is_finite() || !p.y.is_finite() || !p.z.is_finite()) {
            return Err(Error::invalid("non-finite point position"));
        }
        for c in &f_c {
            if c.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
                return Err(Error::invalid("point color outside [0,1]"));
            }
        }
        if f_l.iter().flatten().any(|v| !v.is_finite())
            || f_h.iter().flatten().any(|v| !v.is_finite())
        {
            return Err(Error::invalid("non-finite feature component"));
        }
        let scene_scale = bbox_diagonal(&positions);
        if scene_scale <= 0.0 {
            return Err(Error::invalid("degenerate point cloud: zero bounding-box diagonal"));
        }
        Ok(NeuralPointField { positions, f_c, f_l, f_h, scene_scale, revision: 0 })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Vec3] {
        &self.positions
    }

    pub fn f_c(&self) -> &[[f64; F_C_DIM]] {
        &self.f_c
    }

    pub fn f_l(&self) -> &[[f64; F_L_DIM]] {
        &self.f_l
    }

    pub fn f_h(&self) -> &[[f64; F_H_DIM]] {
        &self.f_h
    }

    pub fn scene_scale(&self) -> f64 {
        self.scene_scale
    }

    pub fn revision(&self) -> u64 {
        self.revision
    }

    /// Centroid-based bounding sphere; rotation-covariant, so rays built
    /// from it keep renders rigid-equivariant.
    pub fn bounding_sphere(&self) -> (Vec3, f64) {
        let mut c = Vec3::zeros();
        for p in &self.positions {
            c += p;
        }
        c /= self.positions.len() as f64;
        let r = self
            .positions
            .iter()
            .map(|p| (p - c).norm())
            .fold(0.0f64, f64::max);
        (c, r.max(self.scene_scale * 1e-6))
    }

    /// Replaces feature vectors wholesale (same length required).
    pub fn set_features(
        &mut self,
        f_c: Vec<[f64; F_C_DIM]>,
        f_l: Vec<[f64; F_L_DIM]>,
        f_h: Vec<[f64; F_H_DIM]>,
    ) -> Result<()> {
        if f_c.len() != self.len() || f_l.len() != self.len() || f_h.len() != self.len() {
            return Err(Error::invalid("feature arrays must match position count"));
        }
        self.f_c = f_c;
        self.f_l = f_l;
        self.f_h = f_h;
        self.revision += 1;
        Ok(())
    }

    /// Applies additive updates to features with clamping of colors to [0,1].
    pub(crate) fn apply_feature_step(
        &mut self,
        d_c: &[[f64; F_C_DIM]],
        d_l: &[[f64; F_L_DIM]],
        d_h: &[[f64; F_H_DIM]],
        lr_c: f64,
        lr_lh: f64,
    ) {
        for i in 0..self.len() {
            for k in 0..F_C_DIM {
                self.f_c[i][k] = (self.f_c[i][k] - lr_c * d_c[i][k]).clamp(0.0, 1.0);
            }
            for k in 0..F_L_DIM {
                self.f_l[i][k] -= lr_lh * d_l[i][k];
            }
            for k in 0..F_H_DIM {
                self.f_h[i][k] -= lr_lh * d_h[i][k];
            }
        }
        self.revision += 1;
    }

    /// Moves existing points to new positions (same count), recomputing scale.
    pub fn set_positions(&mut self, positions: Vec<Vec3>) -> Result<()> {
        if positions.len() != self.len() {
            return Err(Error::invalid("position count mismatch"));
        }
        if positions.iter().any(|p| !p.x.is_finite() || !p.y.is_finite() || !p.z.is_finite()) {
            return Err(Error::invalid("non-finite point position"));
        }
        self.positions = positions;
        self.scene_scale = bbox_diagonal(&self.positions);
        self.revision += 1;
        Ok(())
    }

    /// Appends a point; caller guarantees color in [0,1] and finite features.
    pub fn push_point(
        &mut self,
        p: Vec3,
        c: [f64; F_C_DIM],
        l: [f64; F_L_DIM],
        h: [f64; F_H_DIM],
    ) {
        self.positions.push(p);
        self.f_c.push(c);
        self.f_l.push(l);
        self.f_h.push(h);
        self.scene_scale = bbox_diagonal(&self.positions);
        self.revision += 1;
    }

    /// Removes the points whose indices appear in `sorted_indices`
    /// (ascending, unique). Errors if this would empty the field.
    pub fn remove_points(&mut self, sorted_indices: &[usize]) -> Result<()> {
        if sorted_indices.len() >= self.len() {
            return Err(Error::invalid("removal would empty the point field"));
        }
        let mut keep = vec![true; self.len()];
        for &i in sorted_indices {
            keep[i] = false;
        }
        let mut j = 0;
        for i in 0..self.len() {
            if keep[i] {
                if i != j {
                    self.positions[j] = self.positions[i];
                    self.f_c[j] = self.f_c[i];
                    self.f_l[j] = self.f_l[i];
                    self.f_h[j] = self.f_h[i];
                }
                j += 1;
            }
        }
        self.positions.truncate(j);
        self.f_c.truncate(j);
        self.f_l.truncate(j);
        self.f_h.truncate(j);
        self.scene_scale = bbox_diagonal(&self.positions);
        self.revision += 1;
        Ok(())
    }
}

fn bbox_diagonal(points: &[Vec3]) -> f64 {
    let mut lo = points[0];
    let mut hi = points[0];
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    (hi - lo).norm()
}

/// Posed pinhole camera with its source image and derived per-view data.
#[derive(Debug, Clone)]
pub struct CameraView {
    pub intrinsics: Mat3,
    pub world_to_cam: Mat4,
    pub width: usize,
    pub height: usize,
    /// H x W x 3 source image in [0, 1].
    pub image: Plane,
    pub pyramid: Option<FeaturePyramid>,
    /// H x W estimated visible depth; 0 means unknown.
    pub depth_map: Option<Plane>,
}

impl CameraView {
    pub fn new(intrinsics: Mat3, world_to_cam: Mat4, image: Plane) -> Result<Self> {
        let width = image.width;
        let height = image.height;
        if image.channels != 3 {
            return Err(Error::invalid("camera image must have 3 channels"));
        }
        if !image.is_finite() {
            return Err(Error::invalid("camera image contains non-finite pixels"));
        }
        let fx = intrinsics[(0, 0)];
        let fy = intrinsics[(1, 1)];
        let cx = intrinsics[(0, 2)];
        let cy = intrinsics[(1, 2)];
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::invalid("intrinsics must have positive focal lengths"));
        }
        if cx <= 0.0 || cx >= width as f64 || cy <= 0.0 || cy >= height as f64 {
            return Err(Error::invalid("principal point must lie inside the image"));
        }
        let r = world_to_cam.fixed_view::<3, 3>(0, 0).into_owned();
        let rrt = r * r.transpose();
        if (rrt - Mat3::identity()).norm() > 1e-6 || (r.determinant() - 1.0).abs() > 1e-6 {
            return Err(Error::invalid("world_to_cam rotation block must be orthonormal, det 1"));
        }
        let bottom = world_to_cam.row(3);
        if (bottom[0].abs() + bottom[1].abs() + bottom[2].abs() + (bottom[3] - 1.0).abs()) > 1e-9 {
            return Err(Error::invalid("world_to_cam bottom row must be [0,0,0,1]"));
        }
        Ok(CameraView { intrinsics, world_to_cam, width, height, image, pyramid: None, depth_map: None })
    }

    pub fn rotation(&self) -> Mat3 {
        self.world_to_cam.fixed_view::<3, 3>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vec3 {
        self.world_to_cam.fixed_view::<3, 1>(0, 3).into_owned()
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vec3 {
        -self.rotation().transpose() * self.translation()
    }

    #[inline]
    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation() * p + self.translation()
    }

    pub fn with_pyramid(mut self, pyr: FeaturePyramid) -> Self {
        self.pyramid = Some(pyr);
        self
    }

    pub fn with_depth_map(mut self, depth: Plane) -> Self {
        self.depth_map = Some(depth);
        self
    }
}

/// A ray with a valid sampling interval. `direction` is unit length and
/// `0 <= t_near < t_far`.
#[derive(Debug, Clone, Copy)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
    pub t_near: f64,
    pub t_far: f64,
}

impl Ray {
    pub fn new(origin: Vec3, direction: Vec3, t_near: f64, t_far: f64) -> Result<Self> {
        if (direction.norm() - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("ray direction must be unit length"));
        }
        if !(0.0 <= t_near && t_near < t_far) {
            return Err(Error::invalid("ray requires 0 <= t_near < t_far"));
        }
        Ok(Ray { origin, direction, t_near, t_far })
    }

    #[inline]
    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

/// Projects a world point into a view. Returns the continuous pixel
/// coordinates and the camera-space depth. The pixel may lie outside
/// the image; callers decide padding behavior.
pub fn project_point(p: Vec3, view: &CameraView) -> Result<(Vec2, f64)> {
    let pc = view.to_camera(p);
    if pc.z <= 0.0 {
        return Err(Error::BehindCamera { z: pc.z });
    }
    let fx = view.intrinsics[(0, 0)];
    let fy = view.intrinsics[(1, 1)];
    let cx = view.intrinsics[(0, 2)];
    let cy = view.intrinsics[(1, 2)];
    Ok((Vec2::new(fx * pc.x / pc.z + cx, fy * pc.y / pc.z + cy), pc.z))
}

/// Algebraic inverse of [`project_point`]: pixel plus camera-space depth
/// back to the world point.
pub fn unproject(pixel: Vec2, depth: f64, view: &CameraView) -> Vec3 {
    let fx = view.intrinsics[(0, 0)];
    let fy = view.intrinsics[(1, 1)];
    let cx = view.intrinsics[(0, 2)];
    let cy = view.intrinsics[(1, 2)];
    let pc = Vec3::new((pixel.x - cx) * depth / fx, (pixel.y - cy) * depth / fy, depth);
    view.rotation().transpose() * (pc - view.translation())
}

/// Unit world-space direction of the ray through a continuous pixel.
pub fn pixel_direction(view: &CameraView, pixel: Vec2) -> Vec3 {
    let fx = view.intrinsics[(0, 0)];
    let fy = view.intrinsics[(1, 1)];
    let cx = view.intrinsics[(0, 2)];
    let cy = view.intrinsics[(1, 2)];
    let dir_cam = Vec3::new((pixel.x - cx) / fx, (pixel.y - cy) / fy, 1.0);
    (view.rotation().transpose() * dir_cam).normalize()
}

/// Builds rays through the given pixels, bounded by the scene sphere.
/// Pixels whose rays miss the bounds yield `None`.
pub fn generate_rays(
    view: &CameraView,
    pixels: &[Vec2],
    bounds_center: Vec3,
    bounds_radius: f64,
) -> Vec<Option<Ray>> {
    let origin = view.center();
    let min_t = bounds_radius * 1e-6;
    pixels
        .iter()
        .map(|&px| {
            let dir = pixel_direction(view, px);
            let (t0, t1) = crate::math::ray_sphere(origin, dir, bounds_center, bounds_radius)?;
            if t1 <= min_t {
                return None;
            }
            let t_near = t0.max(min_t);
            if t_near >= t1 {
                return None;
            }
            Ray::new(origin, dir, t_near, t1).ok()
        })
        .collect()
}

/// Ray through the center of pixel (x, y), or None if it misses the bounds.
pub fn pixel_ray(
    view: &CameraView,
    x: usize,
    y: usize,
    bounds_center: Vec3,
    bounds_radius: f64,
) -> Option<Ray> {
    let px = Vec2::new(x as f64 + 0.5, y as f64 + 0.5);
    generate_rays(view, &[px], bounds_center, bounds_radius).pop().unwrap()
}

/// Right-handed look-at pose: camera at `eye` looking at `target`,
/// x right, y down, z forward. Returns the world-to-camera matrix.
pub fn look_at(eye: Vec3, target: Vec3, up_hint: Vec3) -> Mat4 {
    let f = (target - eye).normalize();
    let mut right = up_hint.cross(&f);
    if right.norm() < 1e-9 {
        right = Vec3::new(1.0, 0.0, 0.0).cross(&f);
        if right.norm() < 1e-9 {
            right = Vec3::new(0.0, 1.0, 0.0).cross(&f);
        }
    }
    let right = right.normalize();
    let down = f.cross(&right);
    let mut m = Mat4::identity();
    for c in 0..3 {
        m[(0, c)] = right[c];
        m[(1, c)] = down[c];
        m[(2, c)] = f[c];
    }
    let t = Vec3::new(-right.dot(&eye), -down.dot(&eye), -f.dot(&eye));
    m[(0, 3)] = t.x;
    m[(1, 3)] = t.y;
    m[(2, 3)] = t.z;
    m
}

/// Simple intrinsics with square pixels, given full horizontal fov.
pub fn intrinsics_from_fov(width: usize, height: usize, fov_x_rad: f64) -> Mat3 {
    let f = 0.5 * width as f64 / (0.5 * fov_x_rad).tan();
    let mut k = Mat3::identity();
    k[(0, 0)] = f;
    k[(1, 1)] = f;
    k[(0, 2)] = width as f64 * 0.5;
    k[(1, 2)] = height as f64 * 0.5;
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn test_view(width: usize, height: usize) -> CameraView {
        let k = intrinsics_from_fov(width, height, 60f64.to_radians());
        CameraView::new(k, Mat4::identity(), Plane::zeros(width, height, 3)).unwrap()
    }

    #[test]
    fn on_axis_point_projects_to_principal_point() {
        let mut k = Mat3::identity();
        k[(0, 0)] = 100.0;
        k[(1, 1)] = 100.0;
        k[(0, 2)] = 50.0;
        k[(1, 2)] = 50.0;
        let view = CameraView::new(k, Mat4::identity(), Plane::zeros(100, 100, 3)).unwrap();
        let (px, depth) = project_point(Vec3::new(0.0, 0.0, 2.0), &view).unwrap();
        assert!((px.x - 50.0).abs() < 1e-12 && (px.y - 50.0).abs() < 1e-12);
        assert!((depth - 2.0).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_errors() {
        let view = test_view(64, 64);
        let err = project_point(Vec3::new(0.0, 0.0, -1.0), &view);
        assert!(matches!(err, Err(Error::BehindCamera { .. })));
    }

    #[test]
    fn project_unproject_round_trip() {
        let w2c = look_at(Vec3::new(1.0, -2.0, 0.5), Vec3::new(0.0, 0.0, 3.0), Vec3::new(0.0, -1.0, 0.0));
        let k = intrinsics_from_fov(80, 60, 55f64.to_radians());
        let view = CameraView::new(k, w2c, Plane::zeros(80, 60, 3)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let p = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(2.0..5.0),
            );
            let (px, depth) = match project_point(p, &view) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let q = unproject(px, depth, &view);
            assert!((q - p).norm() <= 1e-9 * p.norm().max(1.0), "round trip failed: {p:?} vs {q:?}");
        }
    }

    #[test]
    fn joint_rigid_motion_preserves_projections() {
        let w2c = look_at(Vec3::new(0.5, 0.2, -3.0), Vec3::zeros(), Vec3::new(0.0, -1.0, 0.0));
        let k = intrinsics_from_fov(64, 64, 50f64.to_radians());
        let view = CameraView::new(k, w2c, Plane::zeros(64, 64, 3)).unwrap();

        // Arbitrary rigid transform T.
        let axis = Vec3::new(0.3, -0.8, 0.52).normalize();
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), 0.7);
        let mut t = Mat4::identity();
        t.fixed_view_mut::<3, 3>(0, 0).copy_from(rot.matrix());
        t[(0, 3)] = 0.4;
        t[(1, 3)] = -1.1;
        t[(2, 3)] = 2.0;

        let view_t =
            CameraView::new(k, view.world_to_cam * t.try_inverse().unwrap(), Plane::zeros(64, 64, 3))
                .unwrap();

        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let p = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let a = project_point(p, &view);
            let tp = rot * p + Vec3::new(0.4, -1.1, 2.0);
            let b = project_point(tp, &view_t);
            match (a, b) {
                (Ok((pa, da)), Ok((pb, db))) => {
                    assert!((pa - pb).norm() < 1e-6);
                    assert!((da - db).abs() < 1e-6);
                }
                (Err(_), Err(_)) => {}
                _ => panic!("visibility changed under joint rigid motion"),
            }
        }
    }

    #[test]
    fn center_pixel_ray_is_optical_axis() {
        let view = test_view(64, 64);
        let dir = pixel_direction(&view, Vec2::new(32.0, 32.0));
        assert!((dir - Vec3::new(0.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn corner_rays_symmetric_about_axis() {
        let view = test_view(64, 64);
        let corners = [
            Vec2::new(0.5, 0.5),
            Vec2::new(63.5, 0.5),
            Vec2::new(0.5, 63.5),
            Vec2::new(63.5, 63.5),
        ];
        let dirs: Vec<Vec3> = corners.iter().map(|&c| pixel_direction(&view, c)).collect();
        for d in &dirs {
            assert!((d.z - dirs[0].z).abs() < 1e-12);
            assert!((d.x.abs() - dirs[0].x.abs()).abs() < 1e-12);
            assert!((d.y.abs() - dirs[0].y.abs()).abs() < 1e-12);
        }
    }

    #[test]
    fn ray_round_trip_through_generating_pixel() {
        let w2c = look_at(Vec3::new(2.0, 1.0, -4.0), Vec3::zeros(), Vec3::new(0.0, -1.0, 0.0));
        let k = intrinsics_from_fov(48, 48, 45f64.to_radians());
        let view = CameraView::new(k, w2c, Plane::zeros(48, 48, 3)).unwrap();
        let pixels: Vec<Vec2> = (0..20)
            .map(|i| Vec2::new(4.0 + 2.0 * i as f64, 40.0 - 1.5 * i as f64))
            .collect();
        let rays = generate_rays(&view, &pixels, Vec3::zeros(), 2.0);
        for (px, ray) in pixels.iter().zip(&rays) {
            let ray = ray.expect("ray should hit bounds");
            assert!((ray.direction.norm() - 1.0).abs() < 1e-12);
            let mid = ray.at(0.5 * (ray.t_near + ray.t_far));
            let (proj, _) = project_point(mid, &view).unwrap();
            assert!((proj - px).norm() < 1e-7, "pixel {px:?} vs reprojection {proj:?}");
        }
    }

    #[test]
    fn field_invariants_enforced() {
        assert!(NeuralPointField::from_positions_colors(vec![], vec![]).is_err());
        let bad_color = NeuralPointField::from_positions_colors(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)],
            vec![[0.5; 3], [1.5, 0.0, 0.0]],
        );
        assert!(bad_color.is_err());
        let f = NeuralPointField::from_positions_colors(
            vec![Vec3::zeros(), Vec3::new(1.0, 1.0, 1.0)],
            vec![[0.5; 3], [0.2; 3]],
        )
        .unwrap();
        assert!((f.scene_scale() - 3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mutation_bumps_revision() {
        let mut f = NeuralPointField::from_positions_colors(
            vec![Vec3::zeros(), Vec3::new(1.0, 0.0, 0.0)],
            vec![[0.5; 3]; 2],
        )
        .unwrap();
        let r0 = f.revision();
        f.push_point(Vec3::new(0.0, 1.0, 0.0), [0.1; 3], [0.0; F_L_DIM], [0.0; F_H_DIM]);
        assert!(f.revision() > r0);
        let r1 = f.revision();
        f.remove_points(&[2]).unwrap();
        assert!(f.revision() > r1);
    }
}
