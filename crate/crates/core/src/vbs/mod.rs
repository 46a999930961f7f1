//! Virtual base stations: mirror images of the BS across reflecting
//! facades, their clustering, and per-grid-cell coverage.
//!
//! A [`VbsStore`] holds only positions and integer ids: record 0 is the
//! physical BS (order 0), record 1 the ground image, and the rest are
//! clustered facade images. Each coverage cell lists the ids of the records
//! that reach its centre.

mod construct;
mod store;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

pub use construct::{
    build_store, cluster_vbs, compute_coverage, compute_raw_vbs, covers, valid_reflector, NoisePolicy, RawVbs,
    Reflectors, VbsParams,
};
pub use store::{load_store, save_store};

use crate::geom::Vec3;

/// One (virtual) base station.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VbsRecord {
    /// Reflection order: 0 for the BS itself, 1 for single-bounce images.
    pub order: u32,
    /// Index within the order, starting at 1.
    pub index: u32,
    pub location: Vec3,
    /// Reflector triangles whose planes generate this image.
    pub triangle_ids: BTreeSet<usize>,
}

impl VbsRecord {
    /// The order-0 record for a BS at `location`.
    pub fn bs(location: Vec3) -> Self {
        Self { order: 0, index: 1, location, triangle_ids: BTreeSet::new() }
    }
}

/// Rectangular grid of `dx × dy` cells over `bounds = [xmin, ymin, xmax, ymax]`
/// evaluated at height `ue_height`. Cell `(ix, iy)` is stored at
/// `iy * dx + ix`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub dx: usize,
    pub dy: usize,
    pub bounds: [f64; 4],
    pub ue_height: f64,
}

impl GridSpec {
    pub fn n_cells(&self) -> usize {
        self.dx * self.dy
    }

    pub fn cell_center(&self, cell: usize) -> Vec3 {
        let (ix, iy) = (cell % self.dx, cell / self.dx);
        let [x0, y0, x1, y1] = self.bounds;
        Vec3::new(
            x0 + (ix as f64 + 0.5) * (x1 - x0) / self.dx as f64,
            y0 + (iy as f64 + 0.5) * (y1 - y0) / self.dy as f64,
            self.ue_height,
        )
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        let [x0, y0, x1, y1] = self.bounds;
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    /// The `k` cells whose centres are closest to `(x, y)`; ties go to the
    /// lower cell index.
    pub fn nearest_cells(&self, x: f64, y: f64, k: usize) -> Vec<usize> {
        let mut d: Vec<(f64, usize)> = (0..self.n_cells())
            .map(|c| {
                let p = self.cell_center(c);
                ((p.x - x).powi(2) + (p.y - y).powi(2), c)
            })
            .collect();
        let k = k.min(d.len());
        if k == 0 {
            return Vec::new();
        }
        d.select_nth_unstable_by(k - 1, |a, b| a.partial_cmp(b).expect("finite distances"));
        d.truncate(k);
        d.sort_by(|a, b| a.partial_cmp(b).expect("finite distances"));
        d.into_iter().map(|(_, c)| c).collect()
    }
}

/// Coverage map: the set of serving record ids per grid cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoverageGrid {
    pub dx: usize,
    pub dy: usize,
    pub bounds: [f64; 4],
    pub ue_height: f64,
    pub cells: Vec<Vec<usize>>,
}

impl CoverageGrid {
    pub fn spec(&self) -> GridSpec {
        GridSpec { dx: self.dx, dy: self.dy, bounds: self.bounds, ue_height: self.ue_height }
    }

    pub fn cell_center(&self, cell: usize) -> Vec3 {
        self.spec().cell_center(cell)
    }

    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        self.spec().contains_xy(x, y)
    }

    pub fn nearest_cells(&self, x: f64, y: f64, k: usize) -> Vec<usize> {
        self.spec().nearest_cells(x, y, k)
    }
}

/// The persisted result of VBS construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VbsStore {
    pub bs_location: Vec3,
    pub records: Vec<VbsRecord>,
    pub grid: CoverageGrid,
}

impl VbsStore {
    /// Number of order-1 records.
    pub fn n_virtual(&self) -> usize {
        self.records.iter().filter(|r| r.order == 1).count()
    }

    /// Checks the store invariants, naming the offending field.
    pub fn validate(&self) -> Result<(), (String, String)> {
        let bad = |f: &str, m: String| Err((f.to_string(), m));
        let bs: Vec<&VbsRecord> = self.records.iter().filter(|r| r.order == 0).collect();
        if bs.len() != 1 {
            return bad("records", format!("expected exactly one order-0 record, found {}", bs.len()));
        }
        if bs[0].location.distance(self.bs_location) > 1e-6 || !bs[0].triangle_ids.is_empty() {
            return bad("records", "order-0 record must sit at bs_location with no triangles".into());
        }
        let mut seen = BTreeSet::new();
        for (i, r) in self.records.iter().enumerate() {
            if r.order > 1 {
                return bad(&format!("records[{i}].order"), format!("unsupported order {}", r.order));
            }
            if r.order == 1 && r.triangle_ids.is_empty() {
                return bad(&format!("records[{i}].triangle_ids"), "order-1 record without triangles".into());
            }
            if !r.location.is_finite() {
                return bad(&format!("records[{i}].location"), "non-finite coordinate".into());
            }
            if !seen.insert((r.order, r.index)) {
                return bad(&format!("records[{i}].index"), format!("duplicate id ({}, {})", r.order, r.index));
            }
        }
        let g = &self.grid;
        if g.cells.len() != g.dx * g.dy {
            return bad("grid.cells", format!("expected {} cells, found {}", g.dx * g.dy, g.cells.len()));
        }
        for (c, ids) in g.cells.iter().enumerate() {
            if let Some(id) = ids.iter().find(|&&id| id >= self.records.len()) {
                return bad(&format!("grid.cells[{c}]"), format!("unknown record id {id}"));
            }
        }
        Ok(())
    }
}
