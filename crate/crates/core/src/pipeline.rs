//! End-to-end orchestration: scene → scan → VBS store → alignment sweep →
//! report. The `cmd_*` functions read and write the artifacts in an output
//! directory; the other functions are the in-memory steps they wrap.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use log::info;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::align::{AlignSetup, LinkBudget, Method};
use crate::chan::{build_polar_codebook, ArrayConfig};
use crate::cloud::{
    estimate_ground_z, hdbscan, preprocess, read_xyz, simulate_scan, split_ground, voxel_downsample, write_xyz,
    PointCloud, ScanParams,
};
use crate::config::{ExperimentConfig, SceneKind};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::{reconstruct_object_mesh, simplify_qem, write_obj, TriMesh};
use crate::oracle::{build_ckm, ground_truth_channel, trace_paths, CkmTable, Scene};
use crate::vbs::{build_store, load_store, save_store, GridSpec, Reflectors, VbsStore};

pub const SCENE_FILE: &str = "scene.json";
pub const CLOUD_FILE: &str = "cloud.xyz";
pub const STORE_FILE: &str = "vbs_store.json";
pub const MESH_FILE: &str = "meshes.obj";
pub const CKM_FILE: &str = "ckm.json";
pub const RESULTS_FILE: &str = "results.csv";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TABLE_FILE: &str = "se_table.csv";

/// Independent streams derived from the experiment seed.
fn sub_seed(seed: u64, stream: u64) -> u64 {
    seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(stream)
}

pub fn grid_spec(cfg: &ExperimentConfig) -> GridSpec {
    GridSpec { dx: cfg.d_x, dy: cfg.d_y, bounds: cfg.region, ue_height: cfg.ue_height }
}

pub fn generate_scene(cfg: &ExperimentConfig, seed: u64) -> Scene {
    match cfg.scene {
        SceneKind::Urban => Scene::urban(),
        SceneKind::Random => Scene::random(cfg.region, cfg.n_boxes, cfg.bs(), sub_seed(seed, 1)),
    }
}

/// Simulated scan followed by statistical outlier removal.
pub fn scan_scene(scene: &Scene, cfg: &ExperimentConfig, seed: u64) -> Result<PointCloud> {
    let params = ScanParams { density: cfg.scan_density, noise_sigma: cfg.noise_sigma, drop_rate: cfg.drop_rate };
    let raw = simulate_scan(scene, &params, sub_seed(seed, 2))?;
    let clean = preprocess(&raw, cfg.sor_k, cfg.sor_std_ratio)?;
    info!("scan: {} points, {} after outlier removal", raw.len(), clean.len());
    Ok(clean)
}

/// Counts logged while building a store.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct BuildStats {
    pub points: usize,
    pub ground_points: usize,
    pub ground_z: f64,
    pub objects: usize,
    pub faces_before: usize,
    pub faces_after: usize,
    pub raw_vbs: usize,
    pub records: usize,
}

/// Separates above-ground points into objects: HDBSCAN on voxel
/// centroids, labels carried back to the points. Objects are ordered by
/// cluster label.
pub fn segment_objects(points: &[Vec3], cfg: &ExperimentConfig) -> Vec<Vec<Vec3>> {
    let (reps, assign) = voxel_downsample(points, cfg.object_voxel);
    let labels = hdbscan(&reps, cfg.object_min_cluster_size, cfg.object_min_samples);
    let mut objects = vec![Vec::new(); labels.n_clusters()];
    for (p, &v) in points.iter().zip(&assign) {
        let l = labels.labels[v];
        if l >= 0 {
            objects[l as usize].push(*p);
        }
    }
    objects
}

/// Object meshes and the full reflector model (meshes plus a ground
/// rectangle over the configured region).
pub fn reconstruct_reflectors(cloud: &PointCloud, cfg: &ExperimentConfig) -> Result<(Reflectors, Vec<TriMesh>, BuildStats)> {
    let ground_z = estimate_ground_z(&cloud.points).ok_or_else(|| Error::Domain("empty point cloud".into()))?;
    let (above, ground) = split_ground(&cloud.points, ground_z, cfg.ground_band);
    let objects = segment_objects(&above, cfg);
    let built: Vec<(usize, TriMesh)> = objects
        .par_iter()
        .map(|pts| {
            let m = reconstruct_object_mesh(pts, &cfg.mesh);
            (m.len(), simplify_qem(&m, cfg.mesh.target_faces))
        })
        .collect();
    let stats = BuildStats {
        points: cloud.len(),
        ground_points: ground.len(),
        ground_z,
        objects: objects.len(),
        faces_before: built.iter().map(|b| b.0).sum(),
        faces_after: built.iter().map(|b| b.1.len()).sum(),
        ..Default::default()
    };
    let meshes: Vec<TriMesh> = built.into_iter().map(|b| b.1).collect();
    let tris = meshes.iter().flat_map(|m| m.triangles().iter().copied()).collect();
    Ok((Reflectors::with_ground(tris, cfg.region, ground_z), meshes, stats))
}

/// Point cloud to VBS store.
pub fn build_vbs(cloud: &PointCloud, cfg: &ExperimentConfig) -> Result<(VbsStore, Vec<TriMesh>, BuildStats)> {
    let (refl, meshes, mut stats) = reconstruct_reflectors(cloud, cfg)?;
    stats.raw_vbs = crate::vbs::compute_raw_vbs(&refl, cfg.bs()).1.len();
    let store = build_store(&refl, cfg.bs(), &cfg.vbs, &grid_spec(cfg));
    stats.records = store.records.len();
    info!(
        "build-vbs: {} objects, {} faces before / {} after simplification, {} raw VBSs, {} records",
        stats.objects, stats.faces_before, stats.faces_after, stats.raw_vbs, stats.records
    );
    Ok((store, meshes, stats))
}

/// `n` UE positions uniform over the region at `ue_height`, skipping
/// positions inside buildings.
pub fn drop_ues(scene: &Scene, cfg: &ExperimentConfig, n: usize, seed: u64) -> Vec<Vec3> {
    let mut rng = ChaCha8Rng::seed_from_u64(sub_seed(seed, 3));
    let [x0, y0, x1, y1] = cfg.region;
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let p = Vec3::new(rng.gen_range(x0..x1), rng.gen_range(y0..y1), cfg.ue_height);
        if !scene.inside_any_box(p) {
            out.push(p);
        }
    }
    out
}

pub fn align_setup(cfg: &ExperimentConfig, n_bs: usize, n_ue: usize) -> Result<AlignSetup> {
    let bs_cfg = ArrayConfig::half_wavelength(n_bs, cfg.f_c);
    let ue_cfg = ArrayConfig::half_wavelength(n_ue, cfg.f_c);
    Ok(AlignSetup {
        u_bs: build_polar_codebook(&bs_cfg, cfg.f_c, &cfg.rings)?,
        u_ue: build_polar_codebook(&ue_cfg, cfg.f_c, &cfg.rings)?,
        bs_cfg,
        ue_cfg,
        f_c: cfg.f_c,
        gamma_db: cfg.gamma_db,
        k: cfg.k,
        budget: LinkBudget::from_dbm(cfg.p_t_dbm, cfg.n_0_dbm_hz, cfg.w),
    })
}

/// One line of the results table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub ue_x: f64,
    pub ue_y: f64,
    pub method: Method,
    #[serde(rename = "S")]
    pub s: usize,
    pub n_bs: usize,
    pub n_ue: usize,
    pub chosen_b_bs: usize,
    pub chosen_b_ue: usize,
    pub gain: f64,
    pub se_bps_hz: f64,
    pub pairs_trained: usize,
    pub covered_flag: u8,
}

/// Every method at every S for every UE, for one antenna configuration.
pub fn evaluate_config(
    scene: &Scene,
    store: &VbsStore,
    ckm: &CkmTable,
    ues: &[Vec3],
    setup: &AlignSetup,
    cfg: &ExperimentConfig,
) -> Result<Vec<ResultRow>> {
    let n_pairs = setup.n_pairs();
    let mut s_list: Vec<usize> = cfg.s_list.iter().map(|&s| s.min(n_pairs)).collect();
    s_list.dedup();
    let s_max = *s_list.iter().max().expect("validated non-empty");
    let (n_bs, n_ue) = (setup.bs_cfg.n_elements, setup.ue_cfg.n_elements);
    let bs = store.bs_location;
    let per_ue: Vec<Result<Vec<ResultRow>>> = ues
        .par_iter()
        .map(|&ue| {
            let paths = trace_paths(scene, bs, ue, cfg.oracle_max_order, &setup.bs_cfg, &setup.ue_cfg, cfg.f_c);
            let h = ground_truth_channel(&paths, &setup.bs_cfg, &setup.ue_cfg, cfg.f_c);
            let rankings = [
                (Method::VbsBa, setup.rank_vbs(store, ue, s_max)?),
                (Method::LocBa, setup.rank_loc(bs, ue, s_max)?),
                (Method::RckmBa, setup.rank_rckm(ckm, ue, s_max)?),
            ];
            let mut rows = Vec::new();
            let row = |r: crate::align::AlignmentResult| ResultRow {
                ue_x: ue.x,
                ue_y: ue.y,
                method: r.method,
                s: r.s,
                n_bs,
                n_ue,
                chosen_b_bs: r.pair.b_bs,
                chosen_b_ue: r.pair.b_ue,
                gain: r.gain,
                se_bps_hz: r.se,
                pairs_trained: r.pairs_trained,
                covered_flag: r.covered as u8,
            };
            for (method, (ranking, covered)) in &rankings {
                for &s in &s_list {
                    rows.push(row(setup.train_prefix(*method, ranking, s, &h, *covered)?));
                }
            }
            rows.push(row(crate::align::run_exhaustive(&h, setup)?));
            Ok(rows)
        })
        .collect();
    let mut out = Vec::new();
    for r in per_ue {
        out.extend(r?);
    }
    Ok(out)
}

pub fn write_results(rows: &[ResultRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_results(path: &Path) -> Result<Vec<ResultRow>> {
    let mut r = csv::Reader::from_path(path)?;
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Mean SE per `(n_bs, n_ue, method, S)`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub n_bs: usize,
    pub n_ue: usize,
    pub method: Method,
    #[serde(rename = "S")]
    pub s: usize,
    pub mean_se: f64,
    pub mean_pairs_trained: f64,
    pub n_drops: usize,
}

/// `(n_bs, n_ue, method, S)` → `(Σ SE, Σ pairs trained, count)`.
type Totals = BTreeMap<(usize, usize, Method, usize), (f64, f64, usize)>;

pub fn summarize(rows: &[ResultRow]) -> Vec<SummaryRow> {
    let mut acc = Totals::new();
    for r in rows {
        let e = acc.entry((r.n_bs, r.n_ue, r.method, r.s)).or_default();
        e.0 += r.se_bps_hz;
        e.1 += r.pairs_trained as f64;
        e.2 += 1;
    }
    acc.into_iter()
        .map(|((n_bs, n_ue, method, s), (se, pt, n))| SummaryRow {
            n_bs,
            n_ue,
            method,
            s,
            mean_se: se / n as f64,
            mean_pairs_trained: pt / n as f64,
            n_drops: n,
        })
        .collect()
}

/// Comparison rows: one per antenna configuration, mean SE of each
/// method at `s`, plus the exhaustive optimum and its training overhead.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TableRow {
    pub n_bs: usize,
    pub n_ue: usize,
    #[serde(rename = "S")]
    pub s: usize,
    pub loc_ba: f64,
    pub vbs_ba: f64,
    pub rckm_ba: f64,
    pub optimal: f64,
    pub exhaustive_pairs: usize,
}

pub fn table(summary: &[SummaryRow], s: usize) -> Vec<TableRow> {
    let mut configs: Vec<(usize, usize)> = summary.iter().map(|r| (r.n_bs, r.n_ue)).collect();
    configs.dedup();
    configs
        .into_iter()
        .map(|(n_bs, n_ue)| {
            let of = |m: Method| summary.iter().filter(move |r| (r.n_bs, r.n_ue, r.method) == (n_bs, n_ue, m));
            // Largest swept S not above the requested one.
            let pick = |m: Method| {
                of(m).rfind(|r| r.s <= s).or_else(|| of(m).next()).map_or(f64::NAN, |r| r.mean_se)
            };
            let ex = of(Method::Exhaustive).next();
            TableRow {
                n_bs,
                n_ue,
                s,
                loc_ba: pick(Method::LocBa),
                vbs_ba: pick(Method::VbsBa),
                rckm_ba: pick(Method::RckmBa),
                optimal: ex.map_or(f64::NAN, |r| r.mean_se),
                exhaustive_pairs: ex.map_or(0, |r| r.s),
            }
        })
        .collect()
}

/// Writes `summary.csv`, `se_table.csv` and one two-column `S mean_se` file
/// per (antenna configuration, method). Returns the table rows.
pub fn write_report(rows: &[ResultRow], out: &Path) -> Result<Vec<TableRow>> {
    let summary = summarize(rows);
    let mut w = csv::Writer::from_path(out.join(SUMMARY_FILE))?;
    for r in &summary {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(out.join(SUMMARY_FILE), e))?;

    let mut configs: Vec<(usize, usize)> = summary.iter().map(|r| (r.n_bs, r.n_ue)).collect();
    configs.dedup();
    for (n_bs, n_ue) in configs {
        let of = |m: Method| summary.iter().filter(move |r| (r.n_bs, r.n_ue, r.method) == (n_bs, n_ue, m));
        let s_values: Vec<usize> = of(Method::VbsBa).map(|r| r.s).collect();
        for m in Method::ALL {
            let mut text = String::from("# S mean_se\n");
            if m == Method::Exhaustive {
                let opt = of(m).next().map_or(f64::NAN, |r| r.mean_se);
                for s in &s_values {
                    writeln!(text, "{s} {opt}").expect("string write");
                }
            } else {
                for r in of(m) {
                    writeln!(text, "{} {}", r.s, r.mean_se).expect("string write");
                }
            }
            let path = out.join(format!("se_vs_s_{n_bs}x{n_ue}_{m}.dat"));
            std::fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
    }

    let t = table(&summary, 5);
    let mut w = csv::Writer::from_path(out.join(TABLE_FILE))?;
    for r in &t {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| Error::io(out.join(TABLE_FILE), e))?;
    Ok(t)
}

fn ensure_dir(out: &Path) -> Result<()> {
    std::fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

fn seed_of(cfg: &ExperimentConfig) -> u64 {
    cfg.seed
}

pub fn cmd_generate_scene(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let scene = generate_scene(cfg, seed_of(cfg));
    let path = out.join(SCENE_FILE);
    scene.save(&path)?;
    info!("generate-scene: {} boxes -> {}", scene.boxes.len(), path.display());
    Ok(path)
}

pub fn cmd_scan(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let scene = Scene::load(&out.join(SCENE_FILE))?;
    let mut cloud = scan_scene(&scene, cfg, seed_of(cfg))?;
    cloud.meta.scene_id = format!("seed-{}", seed_of(cfg));
    let path = out.join(CLOUD_FILE);
    write_xyz(&cloud, &path)?;
    Ok(path)
}

pub fn cmd_build_vbs(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let cloud = read_xyz(&out.join(CLOUD_FILE))?;
    let (store, meshes, _) = build_vbs(&cloud, cfg)?;
    write_obj(&TriMesh::merge(&meshes), &out.join(MESH_FILE))?;
    let path = out.join(STORE_FILE);
    save_store(&store, &path)?;
    Ok(path)
}

pub fn cmd_align(cfg: &ExperimentConfig, out: &Path) -> Result<PathBuf> {
    ensure_dir(out)?;
    let scene = Scene::load(&out.join(SCENE_FILE))?;
    let store = load_store(&out.join(STORE_FILE))?;
    let ues = drop_ues(&scene, cfg, cfg.n_ue, seed_of(cfg));
    let mut rows = Vec::new();
    let mut ckm_saved = false;
    for &[n_bs, n_ue] in &cfg.antennas {
        let setup = align_setup(cfg, n_bs, n_ue)?;
        let ckm = build_ckm(&scene, cfg.bs(), &grid_spec(cfg), cfg.oracle_max_order, &setup.bs_cfg, &setup.ue_cfg, cfg.f_c);
        if !ckm_saved {
            ckm.save(&out.join(CKM_FILE))?;
            ckm_saved = true;
        }
        info!("align: N_BS={n_bs} N_UE={n_ue}, codebooks {}×{}", setup.u_bs.len(), setup.u_ue.len());
        rows.extend(evaluate_config(&scene, &store, &ckm, &ues, &setup, cfg)?);
    }
    let path = out.join(RESULTS_FILE);
    write_results(&rows, &path)?;
    Ok(path)
}

pub fn cmd_report(out: &Path) -> Result<Vec<TableRow>> {
    let rows = read_results(&out.join(RESULTS_FILE))?;
    let t = write_report(&rows, out)?;
    for r in &t {
        info!(
            "report: ({}, {}) S={} loc-ba {:.2} vbs-ba {:.2} rckm-ba {:.2} optimal {:.2} ({} pairs)",
            r.n_bs, r.n_ue, r.s, r.loc_ba, r.vbs_ba, r.rckm_ba, r.optimal, r.exhaustive_pairs
        );
    }
    Ok(t)
}

pub fn cmd_all(cfg: &ExperimentConfig, out: &Path) -> Result<Vec<TableRow>> {
    cmd_generate_scene(cfg, out)?;
    cmd_scan(cfg, out)?;
    cmd_build_vbs(cfg, out)?;
    cmd_align(cfg, out)?;
    cmd_report(out)
}
