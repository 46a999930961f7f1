//! Point cloud to VBS store: records and their coverage over the grid.

use vbs_beamsim::config::ExperimentConfig;
use vbs_beamsim::oracle::Scene;
use vbs_beamsim::pipeline::{build_vbs, scan_scene};

fn main() -> vbs_beamsim::Result<()> {
    let scene = Scene::urban();
    let cfg = ExperimentConfig::default();
    let cloud = scan_scene(&scene, &cfg, cfg.seed)?;
    let (store, _, stats) = build_vbs(&cloud, &cfg)?;
    println!(
        "{} objects, {} -> {} faces, {} raw images, {} records",
        stats.objects, stats.faces_before, stats.faces_after, stats.raw_vbs, stats.records
    );
    let n_cells = store.grid.cells.len() as f64;
    for (id, rec) in store.records.iter().enumerate() {
        let covered = store.grid.cells.iter().filter(|c| c.contains(&id)).count() as f64;
        println!(
            "  #{id:<2} order {} index {:<2} at ({:7.2}, {:7.2}, {:6.2})  {:>3} triangles  covers {:5.1}% of cells",
            rec.order,
            rec.index,
            rec.location.x,
            rec.location.y,
            rec.location.z,
            rec.triangle_ids.len(),
            100.0 * covered / n_cells
        );
    }
    let dark = store.grid.cells.iter().filter(|c| c.is_empty()).count();
    println!("{dark} of {} cells have no serving VBS", store.grid.cells.len());
    Ok(())
}
