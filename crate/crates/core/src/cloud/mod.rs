//! Point clouds: synthetic LiDAR scans, statistical outlier removal,
//! density-based clustering and the ASCII `x y z` file format.

mod hdbscan;
pub mod kdtree;

use std::collections::BTreeMap;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use hdbscan::{hdbscan, hdbscan_with, ClusterLabels, HdbscanParams, NOISE};
pub use kdtree::KdTree;

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::oracle::{Face, FaceKind, Scene};

/// Where a cloud came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ScanMeta {
    pub scene_id: String,
    pub noise_sigma: f64,
    pub drop_rate: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    pub meta: ScanMeta,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points, meta: ScanMeta::default() }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// LiDAR sampling parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanParams {
    /// Points per square metre of surface.
    pub density: f64,
    /// Isotropic Gaussian position noise (m).
    pub noise_sigma: f64,
    /// Independent per-point drop probability.
    pub drop_rate: f64,
}

/// Samples `faces` uniformly at `params.density`, adds noise and drops
/// points. Each face contributes `round(area · density)` candidate points.
/// Ground samples falling inside a building footprint in `scene` are
/// discarded.
pub fn scan_faces(faces: &[Face], scene: Option<&Scene>, params: &ScanParams, seed: u64) -> Result<PointCloud> {
    if !(params.density > 0.0) {
        return Err(Error::Domain(format!("scan density must be positive, got {}", params.density)));
    }
    if !(0.0..1.0).contains(&params.drop_rate) {
        return Err(Error::Domain(format!("drop rate must be in [0, 1), got {}", params.drop_rate)));
    }
    if !(params.noise_sigma >= 0.0) {
        return Err(Error::Domain(format!("noise sigma must be non-negative, got {}", params.noise_sigma)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, params.noise_sigma.max(f64::MIN_POSITIVE)).expect("finite sigma");
    let mut points = Vec::new();
    for face in faces {
        let n = (face.area() * params.density).round() as usize;
        points.reserve(n);
        for _ in 0..n {
            let (a, b): (f64, f64) = (rng.gen(), rng.gen());
            let mut p = face.point_at(a, b);
            if params.noise_sigma > 0.0 {
                p += Vec3::new(noise.sample(&mut rng), noise.sample(&mut rng), noise.sample(&mut rng));
            }
            let dropped = rng.gen::<f64>() < params.drop_rate;
            if dropped {
                continue;
            }
            if face.kind == FaceKind::Ground {
                if let Some(s) = scene {
                    if s.boxes.iter().any(|b| b.footprint_contains(p.x, p.y, 0.0)) {
                        continue;
                    }
                }
            }
            points.push(p);
        }
    }
    Ok(PointCloud {
        points,
        meta: ScanMeta { scene_id: String::new(), noise_sigma: params.noise_sigma, drop_rate: params.drop_rate },
    })
}

/// Simulated LiDAR scan of every visible scene surface (ground and the
/// walls and roofs of all boxes). An empty scene yields an empty cloud.
pub fn simulate_scan(scene: &Scene, params: &ScanParams, seed: u64) -> Result<PointCloud> {
    let mut cloud = scan_faces(&scene.faces(), Some(scene), params, seed)?;
    cloud.meta.scene_id = format!("seed-{seed}");
    Ok(cloud)
}

/// Mean distance from each point to its `k` nearest neighbours (itself
/// excluded).
pub fn mean_knn_distances(points: &[Vec3], k: usize) -> Vec<f64> {
    let tree = KdTree::new(points);
    points
        .par_iter()
        .enumerate()
        .map(|(i, &p)| {
            let nn = tree.knn(p, k + 1);
            let others: Vec<f64> = nn.iter().filter(|&&(_, j)| j != i).take(k).map(|&(d2, _)| d2.sqrt()).collect();
            others.iter().sum::<f64>() / others.len().max(1) as f64
        })
        .collect()
}

/// Statistical outlier removal: drops points whose mean k-NN distance
/// exceeds `mean + std_ratio · std` of that statistic over the cloud.
/// Clouds with at most `k_neighbors` points are returned unchanged.
pub fn preprocess(cloud: &PointCloud, k_neighbors: usize, std_ratio: f64) -> Result<PointCloud> {
    if k_neighbors < 1 {
        return Err(Error::Domain("k_neighbors must be at least 1".into()));
    }
    if cloud.len() < k_neighbors + 1 {
        return Ok(cloud.clone());
    }
    let stat = mean_knn_distances(&cloud.points, k_neighbors);
    let n = stat.len() as f64;
    let mean = stat.iter().sum::<f64>() / n;
    let var = stat.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let limit = mean + std_ratio * var.sqrt();
    let points = cloud.points.iter().zip(&stat).filter(|(_, &d)| d <= limit).map(|(&p, _)| p).collect();
    Ok(PointCloud { points, meta: cloud.meta.clone() })
}

/// Splits off points within `band` metres above `ground_z`.
/// Returns `(above, ground)`.
pub fn split_ground(points: &[Vec3], ground_z: f64, band: f64) -> (Vec<Vec3>, Vec<Vec3>) {
    points.iter().partition(|p| p.z >= ground_z + band)
}

/// Ground level estimate: median height of the points in the lowest
/// half-metre of the cloud.
pub fn estimate_ground_z(points: &[Vec3]) -> Option<f64> {
    let zmin = points.iter().map(|p| p.z).min_by(f64::total_cmp)?;
    let mut low: Vec<f64> = points.iter().map(|p| p.z).filter(|&z| z < zmin + 0.5).collect();
    low.sort_by(f64::total_cmp);
    Some(low[low.len() / 2])
}

/// Replaces points by voxel centroids. Returns the representatives and,
/// for every input point, the index of its representative. Voxels are
/// ordered by integer key so the output is independent of input order.
pub fn voxel_downsample(points: &[Vec3], voxel: f64) -> (Vec<Vec3>, Vec<usize>) {
    let key = |p: &Vec3| {
        ((p.x / voxel).floor() as i64, (p.y / voxel).floor() as i64, (p.z / voxel).floor() as i64)
    };
    let mut cells: BTreeMap<(i64, i64, i64), (Vec3, usize)> = BTreeMap::new();
    for p in points {
        let e = cells.entry(key(p)).or_insert((Vec3::ZERO, 0));
        e.0 += *p;
        e.1 += 1;
    }
    let index: BTreeMap<(i64, i64, i64), usize> = cells.keys().enumerate().map(|(i, k)| (*k, i)).collect();
    let reps = cells.values().map(|(s, n)| *s / *n as f64).collect();
    let assign = points.iter().map(|p| index[&key(p)]).collect();
    (reps, assign)
}

/// Writes `x y z` lines with a commented metadata header.
pub fn write_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    writeln!(w, "# scene_id: {}", cloud.meta.scene_id).map_err(io)?;
    writeln!(w, "# noise_sigma: {}", cloud.meta.noise_sigma).map_err(io)?;
    writeln!(w, "# drop_rate: {}", cloud.meta.drop_rate).map_err(io)?;
    for p in &cloud.points {
        writeln!(w, "{} {} {}", p.x, p.y, p.z).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads an `x y z` file. Lines starting with `#` are comments; the
/// metadata keys written by [`write_xyz`] are picked up when present.
pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut cloud = PointCloud::default();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some((k, v)) = comment.split_once(':') {
                let v = v.trim();
                match k.trim() {
                    "scene_id" => cloud.meta.scene_id = v.to_string(),
                    "noise_sigma" => cloud.meta.noise_sigma = v.parse().unwrap_or(0.0),
                    "drop_rate" => cloud.meta.drop_rate = v.parse().unwrap_or(0.0),
                    _ => {}
                }
            }
            continue;
        }
        let parse_err = |msg: String| Error::Parse { path: path.into(), line: lineno + 1, msg };
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(parse_err(format!("expected 3 coordinates, found {}", fields.len())));
        }
        let mut xyz = [0.0f64; 3];
        for (slot, f) in xyz.iter_mut().zip(&fields) {
            *slot = f.parse().map_err(|_| parse_err(format!("bad coordinate `{f}`")))?;
            if !slot.is_finite() {
                return Err(parse_err(format!("non-finite coordinate `{f}`")));
            }
        }
        cloud.points.push(xyz.into());
    }
    Ok(cloud)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::SceneBox;

    fn wall_face() -> Face {
        Face {
            origin: Vec3::new(5.0, 0.0, 0.0),
            edge_u: Vec3::new(0.0, 10.0, 0.0),
            edge_v: Vec3::new(0.0, 0.0, 10.0),
            normal: Vec3::new(-1.0, 0.0, 0.0),
            gamma_db: 10.0,
            kind: FaceKind::Box { index: 0, side: 0 },
        }
    }

    fn params(noise: f64, drop: f64) -> ScanParams {
        ScanParams { density: 100.0, noise_sigma: noise, drop_rate: drop }
    }

    #[test]
    fn noiseless_wall_scan() {
        let c = scan_faces(&[wall_face()], None, &params(0.0, 0.0), 1).unwrap();
        assert_eq!(c.len(), 10_000);
        assert!(c.points.iter().all(|p| (p.x - 5.0).abs() < 1e-12));
    }

    #[test]
    fn drop_rate_within_binomial_interval() {
        let c = scan_faces(&[wall_face()], None, &params(0.0, 0.05), 2).unwrap();
        // 99.9% two-sided interval: 9500 ± 3.29·sqrt(10000·0.05·0.95).
        let half = 3.29 * (10_000.0f64 * 0.05 * 0.95).sqrt();
        assert!((c.len() as f64 - 9500.0).abs() <= half, "{}", c.len());
    }

    #[test]
    fn noise_has_half_normal_plane_distance() {
        let c = scan_faces(&[wall_face()], None, &params(0.05, 0.0), 3).unwrap();
        let mean = c.points.iter().map(|p| (p.x - 5.0).abs()).sum::<f64>() / c.len() as f64;
        let expected = 0.05 * (2.0 / std::f64::consts::PI).sqrt();
        assert!((mean / expected - 1.0).abs() < 0.05, "{mean} vs {expected}");
    }

    #[test]
    fn scan_is_seeded() {
        let s = Scene::new(0.0, [0.0, 0.0, 20.0, 20.0], vec![SceneBox::new([5.0, 5.0, 0.0], [10.0, 10.0, 5.0], 10.0)]);
        let p = ScanParams { density: 5.0, noise_sigma: 0.05, drop_rate: 0.05 };
        let a = simulate_scan(&s, &p, 9).unwrap();
        let b = simulate_scan(&s, &p, 9).unwrap();
        assert_eq!(a, b);
        // No ground samples inside the footprint.
        assert!(!a.points.iter().any(|q| q.z.abs() < 0.2 && q.x > 5.2 && q.x < 9.8 && q.y > 5.2 && q.y < 9.8));
    }

    #[test]
    fn empty_scene_scans_ground_only() {
        let s = Scene::new(0.0, [0.0, 0.0, 0.0 + 1.0, 1.0], vec![]);
        let c = simulate_scan(&s, &ScanParams { density: 10.0, noise_sigma: 0.0, drop_rate: 0.0 }, 1).unwrap();
        assert_eq!(c.len(), 10);
    }

    #[test]
    fn bad_scan_params() {
        assert!(scan_faces(&[], None, &ScanParams { density: 0.0, noise_sigma: 0.0, drop_rate: 0.0 }, 0).is_err());
        assert!(scan_faces(&[], None, &ScanParams { density: 1.0, noise_sigma: 0.0, drop_rate: 1.0 }, 0).is_err());
    }

    #[test]
    fn outlier_removal_drops_isolated_points() {
        let mut c = scan_faces(&[wall_face()], None, &params(0.0, 0.0), 4).unwrap();
        let n_wall = c.len();
        for i in 0..10 {
            c.points.push(Vec3::new(55.0 + 7.0 * i as f64, 50.0, 5.0 * i as f64));
        }
        let out = preprocess(&c, 8, 2.0).unwrap();
        assert!(out.points.iter().all(|p| p.x < 10.0));
        assert!(out.len() <= n_wall);
    }

    #[test]
    fn outlier_removal_retains_clean_plane() {
        let c = scan_faces(&[wall_face()], None, &params(0.0, 0.0), 5).unwrap();
        let out = preprocess(&c, 8, 3.0).unwrap();
        assert!(out.len() as f64 >= 0.99 * c.len() as f64, "{} of {}", out.len(), c.len());
    }

    #[test]
    fn outlier_removal_small_and_empty() {
        let empty = PointCloud::default();
        assert!(preprocess(&empty, 8, 2.0).unwrap().is_empty());
        let tiny = PointCloud::new(vec![Vec3::ZERO, Vec3::Z]);
        assert_eq!(preprocess(&tiny, 8, 2.0).unwrap(), tiny);
        assert!(preprocess(&tiny, 0, 2.0).is_err());
    }

    #[test]
    fn xyz_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.xyz");
        let mut c = scan_faces(&[wall_face()], None, &ScanParams { density: 1.0, noise_sigma: 0.05, drop_rate: 0.0 }, 6).unwrap();
        c.meta.scene_id = "wall".into();
        write_xyz(&c, &path).unwrap();
        let back = read_xyz(&path).unwrap();
        assert_eq!(back.meta, c.meta);
        assert_eq!(back.len(), c.len());
        for (a, b) in back.points.iter().zip(&c.points) {
            assert!(a.distance(*b) < 1e-6);
        }
    }

    #[test]
    fn xyz_reports_line_of_bad_record() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.xyz");
        std::fs::write(&path, "# c\n1 2 3\n4 five 6\n").unwrap();
        match read_xyz(&path) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn voxel_representatives() {
        let pts = vec![Vec3::new(0.1, 0.1, 0.1), Vec3::new(0.3, 0.1, 0.1), Vec3::new(2.1, 0.0, 0.0)];
        let (reps, assign) = voxel_downsample(&pts, 1.0);
        assert_eq!(reps.len(), 2);
        assert_eq!(assign[0], assign[1]);
        assert!(reps[assign[0]].distance(Vec3::new(0.2, 0.1, 0.1)) < 1e-12);
    }

    #[test]
    fn ground_estimate() {
        let pts = vec![Vec3::new(0.0, 0.0, 0.01), Vec3::new(0.0, 0.0, -0.01), Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 9.0)];
        assert!((estimate_ground_z(&pts).unwrap()).abs() < 1e-12);
        let (above, ground) = split_ground(&pts, 0.0, 0.3);
        assert_eq!((above.len(), ground.len()), (1, 3));
    }
}
