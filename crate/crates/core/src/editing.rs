//! Direct edits on a deployed point field: rigid/affine movement of a
//! selection, inverse-distance feature transfer between fields, and
//! region-based selection. Derived depth maps and visibility tables are
//! invalidated by the field's revision bump.

use std::collections::BTreeSet;

use crate::error::{Error, Result};
use crate::grid::SpatialIndex;
use crate::math::{Mat4, Vec3};
use crate::scene::{NeuralPointField, F_C_DIM, F_H_DIM, F_L_DIM};

/// Selection region.
#[derive(Debug, Clone, Copy)]
pub enum Region {
    /// Axis-aligned box, inclusive bounds.
    Box { min: Vec3, max: Vec3 },
    Sphere { center: Vec3, radius: f64 },
}

impl Region {
    pub fn contains(&self, p: Vec3) -> bool {
        match self {
            Region::Box { min, max } => {
                p.x >= min.x && p.x <= max.x && p.y >= min.y && p.y <= max.y && p.z >= min.z
                    && p.z <= max.z
            }
            Region::Sphere { center, radius } => (p - center).norm() <= *radius,
        }
    }
}

/// Exactly the point indices inside the region.
pub fn select_points(field: &NeuralPointField, region: Region) -> BTreeSet<usize> {
    field
        .positions()
        .iter()
        .enumerate()
        .filter_map(|(i, p)| region.contains(*p).then_some(i))
        .collect()
}

/// Applies a 4x4 rigid/affine transform to the selected points; features
/// stay untouched. The transform must be invertible.
pub fn transform_points(
    field: &mut NeuralPointField,
    selection: &BTreeSet<usize>,
    transform: &Mat4,
) -> Result<()> {
    if selection.is_empty() {
        return Err(Error::invalid("transform_points requires a non-empty selection"));
    }
    if transform.determinant().abs() < 1e-12 {
        return Err(Error::invalid("singular transform"));
    }
    let mut positions = field.positions().to_vec();
    for &i in selection {
        if i >= positions.len() {
            return Err(Error::invalid(format!("selection index {i} out of range")));
        }
        let p = positions[i];
        let q = transform * nalgebra::Vector4::new(p.x, p.y, p.z, 1.0);
        if q.w.abs() < 1e-12 {
            return Err(Error::invalid("transform sent a point to infinity"));
        }
        positions[i] = Vec3::new(q.x / q.w, q.y / q.w, q.z / q.w);
    }
    field.set_positions(positions)
}

/// Which feature groups a transfer replaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferWhich {
    /// Color and low-level appearance (recoloring keeps geometry features).
    ColorLow,
    /// High-level geometry features only.
    High,
    All,
}

impl std::str::FromStr for TransferWhich {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "color+low" => Ok(TransferWhich::ColorLow),
            "high" => Ok(TransferWhich::High),
            "all" => Ok(TransferWhich::All),
            other => Err(Error::invalid(format!(
                "unknown transfer group '{other}' (color+low|high|all)"
            ))),
        }
    }
}

/// Interpolates source features onto destination points with inverse
/// distance weights over the k nearest source points; exact coincidence
/// copies that source point directly.
pub fn transfer_features(
    src: &NeuralPointField,
    dst: &mut NeuralPointField,
    which: TransferWhich,
    k: usize,
) -> Result<()> {
    if src.is_empty() {
        return Err(Error::invalid("transfer_features requires a non-empty source"));
    }
    let k = k.max(1);
    let cell = (src.scene_scale() / (src.len() as f64).cbrt()).max(src.scene_scale() * 1e-6);
    let index = SpatialIndex::build(src, cell);

    let mut f_c = dst.f_c().to_vec();
    let mut f_l = dst.f_l().to_vec();
    let mut f_h = dst.f_h().to_vec();
    let mut neigh = Vec::new();
    for (i, &p) in dst.positions().iter().enumerate() {
        index.k_nearest_into(src, p, k, f64::INFINITY, &mut neigh);
        let mut c = [0.0; F_C_DIM];
        let mut l = [0.0; F_L_DIM];
        let mut h = [0.0; F_H_DIM];
        if let Some(&(j, _)) = neigh.iter().find(|(_, d)| *d == 0.0) {
            c = src.f_c()[j as usize];
            l = src.f_l()[j as usize];
            h = src.f_h()[j as usize];
        } else {
            let wsum: f64 = neigh.iter().map(|(_, d)| 1.0 / d).sum();
            for &(j, d) in &neigh {
                let w = (1.0 / d) / wsum;
                let j = j as usize;
                for (o, v) in c.iter_mut().zip(&src.f_c()[j]) {
                    *o += w * v;
                }
                for (o, v) in l.iter_mut().zip(&src.f_l()[j]) {
                    *o += w * v;
                }
                for (o, v) in h.iter_mut().zip(&src.f_h()[j]) {
                    *o += w * v;
                }
            }
        }
        if matches!(which, TransferWhich::ColorLow | TransferWhich::All) {
            f_c[i] = [c[0].clamp(0.0, 1.0), c[1].clamp(0.0, 1.0), c[2].clamp(0.0, 1.0)];
            f_l[i] = l;
        }
        if matches!(which, TransferWhich::High | TransferWhich::All) {
            f_h[i] = h;
        }
    }
    dst.set_features(f_c, f_l, f_h)
}

/// Sets the color of every selected point (recoloring without a source
/// field).
pub fn recolor_points(
    field: &mut NeuralPointField,
    selection: &BTreeSet<usize>,
    color: [f64; 3],
) -> Result<()> {
    if selection.is_empty() {
        return Err(Error::invalid("recolor requires a non-empty selection"));
    }
    if color.iter().any(|c| !(0.0..=1.0).contains(c)) {
        return Err(Error::invalid("recolor color must lie in [0,1]"));
    }
    let mut f_c = field.f_c().to_vec();
    for &i in selection {
        f_c[i] = color;
    }
    field.set_features(f_c, field.f_l().to_vec(), field.f_h().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn random_field(n: usize, seed: u64) -> NeuralPointField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Vec3> = (0..n)
            .map(|_| {
                Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
            })
            .collect();
        let f_c: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
        let f_l: Vec<[f64; 8]> =
            (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        let f_h: Vec<[f64; 32]> =
            (0..n).map(|_| std::array::from_fn(|_| rng.gen_range(-1.0..1.0))).collect();
        NeuralPointField::new(pts, f_c, f_l, f_h).unwrap()
    }

    #[test]
    fn select_whole_scene_and_empty_region() {
        let field = random_field(50, 1);
        let all = select_points(
            &field,
            Region::Box { min: Vec3::repeat(-10.0), max: Vec3::repeat(10.0) },
        );
        assert_eq!(all.len(), 50);
        let none = select_points(&field, Region::Sphere { center: Vec3::repeat(100.0), radius: 0.1 });
        assert!(none.is_empty());
    }

    #[test]
    fn select_matches_brute_force_containment() {
        let field = random_field(300, 2);
        let region = Region::Sphere { center: Vec3::new(0.2, -0.1, 0.3), radius: 0.6 };
        let got = select_points(&field, region);
        for (i, p) in field.positions().iter().enumerate() {
            let inside = (p - Vec3::new(0.2, -0.1, 0.3)).norm() <= 0.6;
            assert_eq!(got.contains(&i), inside);
        }
    }

    #[test]
    fn identity_transform_is_bit_exact() {
        let mut field = random_field(40, 3);
        let before = field.positions().to_vec();
        let sel = select_points(&field, Region::Box { min: Vec3::repeat(-10.0), max: Vec3::repeat(10.0) });
        transform_points(&mut field, &sel, &Mat4::identity()).unwrap();
        assert_eq!(field.positions(), before.as_slice());
    }

    #[test]
    fn translate_then_inverse_recovers_positions() {
        let mut field = random_field(40, 4);
        let before = field.positions().to_vec();
        let sel = select_points(&field, Region::Box { min: Vec3::repeat(-10.0), max: Vec3::repeat(10.0) });
        let mut t = Mat4::identity();
        t[(0, 3)] = 0.7;
        t[(1, 3)] = -0.3;
        t[(2, 3)] = 1.9;
        transform_points(&mut field, &sel, &t).unwrap();
        let inv = t.try_inverse().unwrap();
        transform_points(&mut field, &sel, &inv).unwrap();
        for (a, b) in field.positions().iter().zip(&before) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn singular_transform_rejected() {
        let mut field = random_field(10, 5);
        let sel = select_points(&field, Region::Box { min: Vec3::repeat(-10.0), max: Vec3::repeat(10.0) });
        let z = Mat4::zeros();
        assert!(transform_points(&mut field, &sel, &z).is_err());
        assert!(transform_points(&mut field, &BTreeSet::new(), &Mat4::identity()).is_err());
    }

    #[test]
    fn transfer_to_self_is_identity() {
        let src = random_field(60, 6);
        let mut dst = src.clone();
        transfer_features(&src, &mut dst, TransferWhich::All, 8).unwrap();
        assert_eq!(dst.f_c(), src.f_c());
        assert_eq!(dst.f_l(), src.f_l());
        assert_eq!(dst.f_h(), src.f_h());
        // Idempotent: a second transfer changes nothing.
        let snapshot = dst.f_h().to_vec();
        transfer_features(&src, &mut dst, TransferWhich::All, 8).unwrap();
        assert_eq!(dst.f_h(), snapshot.as_slice());
    }

    #[test]
    fn midpoint_between_two_sources_gets_their_mean() {
        let src = NeuralPointField::new(
            vec![Vec3::new(-1.0, 0.0, 0.0), Vec3::new(1.0, 0.0, 0.0)],
            vec![[0.2, 0.4, 0.6], [0.4, 0.6, 0.8]],
            vec![[1.0; 8], [3.0; 8]],
            vec![[0.0; 32], [2.0; 32]],
        )
        .unwrap();
        let mut dst = NeuralPointField::from_positions_colors(
            vec![Vec3::zeros(), Vec3::new(0.0, 5.0, 0.0)],
            vec![[0.0; 3]; 2],
        )
        .unwrap();
        transfer_features(&src, &mut dst, TransferWhich::All, 2).unwrap();
        for (c, want) in dst.f_c()[0].iter().zip(&[0.3, 0.5, 0.7]) {
            assert!((c - want).abs() < 1e-12);
        }
        assert!(dst.f_l()[0].iter().all(|v| (v - 2.0).abs() < 1e-12));
        assert!(dst.f_h()[0].iter().all(|v| (v - 1.0).abs() < 1e-12));
    }

    #[test]
    fn transfer_matches_brute_force_idw() {
        let src = random_field(80, 7);
        let mut dst = random_field(40, 8);
        let dst_before = dst.clone();
        transfer_features(&src, &mut dst, TransferWhich::All, 8).unwrap();
        for (i, &p) in dst_before.positions().iter().enumerate() {
            // Brute-force IDW oracle over the 8 nearest by (distance, index).
            let mut order: Vec<(usize, f64)> = src
                .positions()
                .iter()
                .enumerate()
                .map(|(j, q)| (j, (q - p).norm()))
                .collect();
            order.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
            order.truncate(8);
            let wsum: f64 = order.iter().map(|(_, d)| 1.0 / d).sum();
            let mut want = [0.0; 32];
            for &(j, d) in &order {
                for (o, v) in want.iter_mut().zip(&src.f_h()[j]) {
                    *o += (1.0 / d) / wsum * v;
                }
            }
            for (a, b) in dst.f_h()[i].iter().zip(&want) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn recolor_only_touches_selection_colors() {
        let mut field = random_field(30, 9);
        let fl_before = field.f_l().to_vec();
        let sel: BTreeSet<usize> = [1usize, 3, 5].into_iter().collect();
        recolor_points(&mut field, &sel, [1.0, 0.0, 0.0]).unwrap();
        for &i in &sel {
            assert_eq!(field.f_c()[i], [1.0, 0.0, 0.0]);
        }
        assert_eq!(field.f_l(), fl_before.as_slice());
    }
}
