//! Simulated LiDAR scan of the urban scene, ground removal and HDBSCAN
//! object separation.

use vbs_beamsim::cloud::{estimate_ground_z, split_ground};
use vbs_beamsim::config::ExperimentConfig;
use vbs_beamsim::oracle::Scene;
use vbs_beamsim::pipeline::{scan_scene, segment_objects};

fn main() -> vbs_beamsim::Result<()> {
    let scene = Scene::urban();
    let cfg = ExperimentConfig { scan_density: 2.0, ..Default::default() };
    let cloud = scan_scene(&scene, &cfg, 0)?;
    let ground_z = estimate_ground_z(&cloud.points).expect("non-empty scan");
    let (above, ground) = split_ground(&cloud.points, ground_z, cfg.ground_band);
    println!("{} points: {} ground (z ≈ {ground_z:.2}), {} above", cloud.len(), ground.len(), above.len());

    let objects = segment_objects(&above, &cfg);
    println!("{} objects for {} buildings", objects.len(), scene.boxes.len());
    for (i, obj) in objects.iter().enumerate() {
        let (mut lo, mut hi) = ([f64::INFINITY; 3], [f64::NEG_INFINITY; 3]);
        for p in obj {
            for (k, v) in p.to_array().into_iter().enumerate() {
                lo[k] = lo[k].min(v);
                hi[k] = hi[k].max(v);
            }
        }
        println!("  object {i}: {:>6} points, x {:.1}..{:.1}, y {:.1}..{:.1}, top {:.1}", obj.len(), lo[0], hi[0], lo[1], hi[1], hi[2]);
    }
    Ok(())
}
