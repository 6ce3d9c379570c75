//! Uniform-grid acceleration structure for radius and k-NN queries.
//!
//! Cells are keyed by integer coordinates; point indices live in one flat
//! array sorted by cell, so a query touches at most a handful of
//! contiguous slices. Results always equal brute force: exact distances,
//! ascending order, ties broken by lower point index.

use std::collections::HashMap;

use crate::math::Vec3;
use crate::scene::NeuralPointField;

#[derive(Debug, Clone)]
pub struct SpatialIndex {
    cell_size: f64,
    cells: HashMap<(i64, i64, i64), (u32, u32)>,
    /// Point indices grouped by cell; (start, len) ranges in `cells`.
    slots: Vec<u32>,
    source_revision: u64,
    n_points: usize,
}

#[inline]
fn cell_of(p: Vec3, inv_cell: f64) -> (i64, i64, i64) {
    (
        (p.x * inv_cell).floor() as i64,
        (p.y * inv_cell).floor() as i64,
        (p.z * inv_cell).floor() as i64,
    )
}

impl SpatialIndex {
    /// Builds the index over all points of `field`.
    pub fn build(field: &NeuralPointField, cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell_size must be positive");
        let inv = 1.0 / cell_size;
        let mut counts: HashMap<(i64, i64, i64), u32> = HashMap::new();
        for p in field.positions() {
            *counts.entry(cell_of(*p, inv)).or_insert(0) += 1;
        }
        let mut cells = HashMap::with_capacity(counts.len());
        let mut offset = 0u32;
        for (key, count) in counts {
            cells.insert(key, (offset, count));
            offset += count;
        }
        let mut slots = vec![0u32; field.len()];
        let mut cursor: HashMap<(i64, i64, i64), u32> = HashMap::with_capacity(cells.len());
        for (i, p) in field.positions().iter().enumerate() {
            let key = cell_of(*p, inv);
            let (start, _) = cells[&key];
            let c = cursor.entry(key).or_insert(0);
            slots[(start + *c) as usize] = i as u32;
            *c += 1;
        }
        // Within-cell order by point index keeps every downstream scan
        // deterministic.
        for (start, len) in cells.values() {
            slots[*start as usize..(*start + *len) as usize].sort_unstable();
        }
        SpatialIndex {
            cell_size,
            cells,
            slots,
            source_revision: field.revision(),
            n_points: field.len(),
        }
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    pub fn occupied_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn source_revision(&self) -> u64 {
        self.source_revision
    }

    #[inline]
    fn check_revision(&self, field: &NeuralPointField) {
        assert_eq!(
            self.source_revision,
            field.revision(),
            "stale spatial index: built for field revision {}, queried with revision {}",
            self.source_revision,
            field.revision()
        );
        debug_assert_eq!(self.n_points, field.len());
    }

    /// All points with ||p - q|| <= r, ascending by (distance, index).
    pub fn radius_neighbors(
        &self,
        field: &NeuralPointField,
        q: Vec3,
        r: f64,
    ) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        self.radius_neighbors_into(field, q, r, &mut out);
        out
    }

    /// Allocation-reusing variant of [`SpatialIndex::radius_neighbors`].
    pub fn radius_neighbors_into(
        &self,
        field: &NeuralPointField,
        q: Vec3,
        r: f64,
        out: &mut Vec<(u32, f64)>,
    ) {
        assert!(r > 0.0, "radius must be positive");
        self.check_revision(field);
        out.clear();
        let positions = field.positions();
        let r2 = r * r;
        let inv = 1.0 / self.cell_size;
        let lo = cell_of(q - Vec3::repeat(r), inv);
        let hi = cell_of(q + Vec3::repeat(r), inv);
        for cx in lo.0..=hi.0 {
            for cy in lo.1..=hi.1 {
                for cz in lo.2..=hi.2 {
                    if let Some(&(start, len)) = self.cells.get(&(cx, cy, cz)) {
                        for &i in &self.slots[start as usize..(start + len) as usize] {
                            let d2 = (positions[i as usize] - q).norm_squared();
                            if d2 <= r2 {
                                out.push((i, d2.sqrt()));
                            }
                        }
                    }
                }
            }
        }
        out.sort_unstable_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
    }

    /// Up to k nearest points within `r_max`, ascending by (distance, index).
    /// `r_max` may be `f64::INFINITY`; the search then expands ring by ring.
    pub fn k_nearest(
        &self,
        field: &NeuralPointField,
        q: Vec3,
        k: usize,
        r_max: f64,
    ) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        self.k_nearest_into(field, q, k, r_max, &mut out);
        out
    }

    pub fn k_nearest_into(
        &self,
        field: &NeuralPointField,
        q: Vec3,
        k: usize,
        r_max: f64,
        out: &mut Vec<(u32, f64)>,
    ) {
        assert!(k >= 1, "k must be at least 1");
        self.check_revision(field);
        out.clear();
        if r_max.is_finite() {
            self.radius_neighbors_into(field, q, r_max, out);
            out.truncate(k);
            return;
        }
        // Unbounded: scan growing cube rings around the query cell until the
        // closest possible remaining distance exceeds the current k-th best.
        let positions = field.positions();
        let inv = 1.0 / self.cell_size;
        let qc = cell_of(q, inv);
        let mut ring = 0i64;
        loop {
            let mut found_any = false;
            for cx in (qc.0 - ring)..=(qc.0 + ring) {
                for cy in (qc.1 - ring)..=(qc.1 + ring) {
                    for cz in (qc.2 - ring)..=(qc.2 + ring) {
                        let on_shell = (cx - qc.0).abs() == ring
                            || (cy - qc.1).abs() == ring
                            || (cz - qc.2).abs() == ring;
                        if !on_shell {
                            continue;
                        }
                        if let Some(&(start, len)) = self.cells.get(&(cx, cy, cz)) {
                            found_any = true;
                            for &i in &self.slots[start as usize..(start + len) as usize] {
                                let d = (positions[i as usize] - q).norm();
                                out.push((i, d));
                            }
                        }
                    }
                }
            }
            if found_any {
                out.sort_unstable_by(|a, b| {
                    a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0))
                });
                out.truncate(k.max(64));
            }
            // Any point in an unscanned cell is at least this far away.
            let safe = ring as f64 * self.cell_size;
            if out.len() >= k && out[k - 1].1 <= safe {
                break;
            }
            if out.len() >= self.n_points.min(k) && ring as usize > self.slots.len() {
                break;
            }
            ring += 1;
            if ring > 1_000_000 {
                break; // all cells exhausted long before this
            }
        }
        out.truncate(k);
    }
}
