use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{trace_paths, Scene};
use crate::chan::{ArrayConfig, PathParams};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::vbs::GridSpec;

/// Paths kept per cell.
pub const CKM_PATHS: usize = 4;

/// Channel knowledge map: the strongest traced paths at each grid cell
/// centre, sorted by descending magnitude.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CkmTable {
    pub bs_location: Vec3,
    pub dx: usize,
    pub dy: usize,
    pub bounds: [f64; 4],
    pub ue_height: f64,
    pub cells: Vec<Vec<PathParams>>,
}

impl CkmTable {
    pub fn spec(&self) -> GridSpec {
        GridSpec { dx: self.dx, dy: self.dy, bounds: self.bounds, ue_height: self.ue_height }
    }

    /// Records of the cell whose centre is nearest to `(x, y)`.
    pub fn nearest(&self, x: f64, y: f64) -> &[PathParams] {
        self.spec().nearest_cells(x, y, 1).first().map_or(&[], |&c| &self.cells[c])
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::json(path, e))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let t: CkmTable = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        if t.cells.len() != t.dx * t.dy {
            return Err(Error::invalid(path, "cells", format!("expected {} cells, found {}", t.dx * t.dy, t.cells.len())));
        }
        Ok(t)
    }
}

/// Traces every cell centre and keeps the `CKM_PATHS` strongest paths.
pub fn build_ckm(
    scene: &Scene,
    o_bs: Vec3,
    spec: &GridSpec,
    max_order: u32,
    bs_cfg: &ArrayConfig,
    ue_cfg: &ArrayConfig,
    f_c: f64,
) -> CkmTable {
    let cells = (0..spec.n_cells())
        .into_par_iter()
        .map(|c| {
            let mut paths: Vec<PathParams> = trace_paths(scene, o_bs, spec.cell_center(c), max_order, bs_cfg, ue_cfg, f_c)
                .into_iter()
                .map(|p| p.params)
                .collect();
            // Stable: equal magnitudes keep the (order, length) order.
            paths.sort_by(|a, b| b.gain_mag.total_cmp(&a.gain_mag));
            paths.truncate(CKM_PATHS);
            paths
        })
        .collect();
    CkmTable { bs_location: o_bs, dx: spec.dx, dy: spec.dy, bounds: spec.bounds, ue_height: spec.ue_height, cells }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::SceneBox;

    const FC: f64 = 40e9;

    fn cfg() -> ArrayConfig {
        ArrayConfig::half_wavelength(8, FC)
    }

    #[test]
    fn open_scene_has_two_records_everywhere() {
        let scene = Scene::new(0.0, [0.0, 0.0, 100.0, 100.0], vec![]);
        let spec = GridSpec { dx: 5, dy: 5, bounds: scene.region, ue_height: 1.5 };
        let t = build_ckm(&scene, Vec3::new(50.0, 50.0, 4.0), &spec, 2, &cfg(), &cfg(), FC);
        assert!(t.cells.iter().all(|c| c.len() == 2));
    }

    #[test]
    fn sorted_and_shadowed() {
        let scene = Scene::new(0.0, [0.0, 0.0, 100.0, 100.0], vec![
            SceneBox::new([30.0, 30.0, 0.0], [70.0, 70.0, 30.0], 10.0),
            SceneBox::new([80.0, 0.0, 0.0], [100.0, 20.0, 10.0], 10.0),
        ]);
        let spec = GridSpec { dx: 10, dy: 10, bounds: scene.region, ue_height: 1.5 };
        let t = build_ckm(&scene, Vec3::new(10.0, 10.0, 4.0), &spec, 2, &cfg(), &cfg(), FC);
        for c in &t.cells {
            assert!(c.len() <= CKM_PATHS);
            for w in c.windows(2) {
                assert!(w[0].gain_mag >= w[1].gain_mag);
            }
        }
        // Cell centred inside the big box has no paths.
        let inside = (0..spec.n_cells()).find(|&c| spec.cell_center(c).distance(Vec3::new(45.0, 45.0, 1.5)) < 1e-9).unwrap();
        assert!(t.cells[inside].is_empty());
        assert!(t.nearest(44.0, 46.0).is_empty());

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ckm.json");
        t.save(&path).unwrap();
        assert_eq!(CkmTable::load(&path).unwrap(), t);
    }
}
