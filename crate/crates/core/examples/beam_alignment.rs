//! VBS-BA against the location-based and CKM baselines and exhaustive
//! search, for a few UEs and candidate budgets.

use vbs_beamsim::align::{run_exhaustive, run_loc_ba, run_rckm_ba, run_vbs_ba};
use vbs_beamsim::config::ExperimentConfig;
use vbs_beamsim::geom::Vec3;
use vbs_beamsim::oracle::{build_ckm, ground_truth_channel, trace_paths, Scene};
use vbs_beamsim::pipeline::{align_setup, build_vbs, drop_ues, grid_spec, scan_scene};

fn main() -> vbs_beamsim::Result<()> {
    let scene = Scene::urban();
    let cfg = ExperimentConfig::default();
    let (store, _, _) = build_vbs(&scan_scene(&scene, &cfg, 0)?, &cfg)?;
    let setup = align_setup(&cfg, 64, 8)?;
    let ckm = build_ckm(&scene, cfg.bs(), &grid_spec(&cfg), cfg.oracle_max_order, &setup.bs_cfg, &setup.ue_cfg, cfg.f_c);
    println!("{} × {} codewords, {} pairs for exhaustive search", setup.u_bs.len(), setup.u_ue.len(), setup.n_pairs());

    // One UE in line of sight, then the first two shadowed UEs that still
    // receive a reflected path.
    let nlos = drop_ues(&scene, &cfg, 100, 1).into_iter().filter(|&p| {
        scene.segment_blocked(cfg.bs(), p)
            && !trace_paths(&scene, cfg.bs(), p, cfg.oracle_max_order, &setup.bs_cfg, &setup.ue_cfg, cfg.f_c).is_empty()
    });
    for ue in std::iter::once(Vec3::new(125.0, 70.0, 1.5)).chain(nlos.take(2)) {
        let paths = trace_paths(&scene, cfg.bs(), ue, cfg.oracle_max_order, &setup.bs_cfg, &setup.ue_cfg, cfg.f_c);
        let h = ground_truth_channel(&paths, &setup.bs_cfg, &setup.ue_cfg, cfg.f_c);
        let los = !scene.segment_blocked(cfg.bs(), ue);
        let opt = run_exhaustive(&h, &setup)?;
        println!("UE ({:.1}, {:.1}) {}: optimum {:.2} bps/Hz", ue.x, ue.y, if los { "LoS" } else { "NLoS" }, opt.se);
        for s in [1, 3, 5, 10] {
            let v = run_vbs_ba(&store, &h, ue, &setup, s)?;
            let l = run_loc_ba(cfg.bs(), &h, ue, &setup, s)?;
            let r = run_rckm_ba(&ckm, &h, ue, &setup, s)?;
            println!("  S={s:<2}  vbs-ba {:5.2}  loc-ba {:5.2}  rckm-ba {:5.2}", v.se, l.se, r.se);
        }
    }
    Ok(())
}
