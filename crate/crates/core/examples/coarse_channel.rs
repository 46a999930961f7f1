//! Coarse channel from the VBS store versus the ray-traced channel for a
//! shadowed UE, and their beamspace peaks.

use num_complex::Complex64;
use vbs_beamsim::align::{beamspace, top_s};
use vbs_beamsim::chan::{reconstruct_channel, serving_vbs_set};
use vbs_beamsim::config::ExperimentConfig;
use vbs_beamsim::oracle::{ground_truth_channel, trace_paths, Scene};
use vbs_beamsim::pipeline::{align_setup, build_vbs, scan_scene};

fn main() -> vbs_beamsim::Result<()> {
    let scene = Scene::urban();
    let cfg = ExperimentConfig::default();
    let (store, _, _) = build_vbs(&scan_scene(&scene, &cfg, 0)?, &cfg)?;
    let setup = align_setup(&cfg, 64, 8)?;

    // First shadowed grid cell that a facade VBS serves and that the
    // tracer also reaches.
    let (ue, truth) = (0..store.grid.cells.len())
        .filter(|&c| {
            let ids = &store.grid.cells[c];
            !ids.contains(&0) && ids.iter().any(|&i| i >= 2)
        })
        .map(|c| store.grid.cell_center(c))
        .filter(|&p| !scene.inside_any_box(p))
        .map(|p| (p, trace_paths(&scene, cfg.bs(), p, cfg.oracle_max_order, &setup.bs_cfg, &setup.ue_cfg, cfg.f_c)))
        .find(|(_, paths)| !paths.is_empty())
        .expect("some shadowed cell is reachable");
    println!("UE at ({:.1}, {:.1}), LoS blocked: {}", ue.x, ue.y, scene.segment_blocked(cfg.bs(), ue));
    let serving = serving_vbs_set(ue, &store, cfg.k)?;
    let coarse = reconstruct_channel(&serving.ids, &store, ue, &setup.bs_cfg, &setup.ue_cfg, cfg.f_c, cfg.gamma_db);
    println!("serving VBSs {:?}, {} coarse paths", serving.ids, coarse.paths.len());
    for p in &coarse.paths {
        println!("  order {} AoD az {:6.1}°  r_tx {:6.1} m  |a| {:.3e}", p.order, p.aod_az.to_degrees(), p.r_tx, p.gain_mag);
    }

    println!("{} traced paths", truth.len());
    let h = ground_truth_channel(&truth, &setup.bs_cfg, &setup.ue_cfg, cfg.f_c);

    let inner: Complex64 = h.iter().zip(coarse.h.iter()).map(|(a, b)| a.conj() * b).sum();
    let norm = |m: &ndarray::Array2<Complex64>| m.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    println!("normalised correlation |<H, Ĥ>| = {:.3}", inner.norm() / (norm(&h) * norm(&coarse.h)));

    let g_true = beamspace(&h, &setup.u_bs, &setup.u_ue)?;
    let g_hat = beamspace(&coarse.h, &setup.u_bs, &setup.u_ue)?;
    println!("best pair on H: {:?}", top_s(&g_true, 1)?[0]);
    println!("top-5 on Ĥ:    {:?}", top_s(&g_hat, 5)?);
    Ok(())
}
