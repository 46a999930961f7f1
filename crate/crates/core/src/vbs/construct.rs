use std::collections::{BTreeSet, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CoverageGrid, GridSpec, VbsRecord, VbsStore};
use crate::cloud::{hdbscan_with, HdbscanParams};
use crate::geom::{centroid, mirror_point, ray_triangle_intersect, segment_occluded_by, Triangle, Vec3, EPS_T};

/// The reflector model: all triangles of the scene, with the ground
/// triangles listed separately.
#[derive(Clone, Debug, Default)]
pub struct Reflectors {
    pub triangles: Vec<Triangle>,
    pub ground: BTreeSet<usize>,
    pub ground_z: f64,
}

impl Reflectors {
    /// Object triangles plus two ground triangles spanning `region` at
    /// `ground_z`.
    pub fn with_ground(object_triangles: Vec<Triangle>, region: [f64; 4], ground_z: f64) -> Self {
        let [x0, y0, x1, y1] = region;
        let mut triangles = object_triangles;
        let first = triangles.len();
        let c = |x, y| Vec3::new(x, y, ground_z);
        triangles.push(Triangle::new(c(x0, y0), c(x1, y0), c(x1, y1)).expect("non-empty region"));
        triangles.push(Triangle::new(c(x0, y0), c(x1, y1), c(x0, y1)).expect("non-empty region"));
        Self { triangles, ground: [first, first + 1].into(), ground_z }
    }

    fn occluded(&self, a: Vec3, b: Vec3, skip: Option<usize>) -> bool {
        segment_occluded_by(a, b, self.triangles.iter().enumerate(), |i| Some(i) == skip)
    }
}

/// How HDBSCAN noise points among raw VBSs are treated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoisePolicy {
    /// Each noise point becomes its own record.
    #[default]
    Keep,
    Drop,
}

/// VBS clustering parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VbsParams {
    pub min_cluster_size: usize,
    pub min_samples: usize,
    /// Images closer than this (m) are never split into separate records.
    pub cluster_epsilon: f64,
    pub noise: NoisePolicy,
}

impl Default for VbsParams {
    fn default() -> Self {
        Self { min_cluster_size: 2, min_samples: 1, cluster_epsilon: 0.5, noise: NoisePolicy::Keep }
    }
}

/// A mirror image of the BS across one triangle.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RawVbs {
    pub location: Vec3,
    pub triangle_id: usize,
}

/// Whether triangle `tri_id` can produce a first-order reflection of the
/// BS: it faces the BS (outward normal has a positive component towards
/// it), and at least one BS→vertex segment is clear of every other
/// triangle.
pub fn valid_reflector(tri_id: usize, all: &[Triangle], o_bs: Vec3) -> bool {
    let tri = &all[tri_id];
    if tri.normal.dot(o_bs - tri.centroid) <= 0.0 {
        return false;
    }
    tri.vertices()
        .iter()
        .any(|&v| !segment_occluded_by(o_bs, v, all.iter().enumerate(), |j| j == tri_id))
}

/// Mirror images of the BS across every valid non-ground reflector.
/// Returns `(ground image, facade images)`; the ground image is the mirror
/// across `z = ground_z` and is always present.
pub fn compute_raw_vbs(refl: &Reflectors, o_bs: Vec3) -> (Vec3, Vec<RawVbs>) {
    let ground = Vec3::new(o_bs.x, o_bs.y, 2.0 * refl.ground_z - o_bs.z);
    let raw = (0..refl.triangles.len())
        .into_par_iter()
        .filter(|i| !refl.ground.contains(i))
        .filter(|&i| valid_reflector(i, &refl.triangles, o_bs))
        .map(|i| {
            let t = &refl.triangles[i];
            RawVbs { location: mirror_point(o_bs, t.v1, t.normal).expect("triangle normals are unit"), triangle_id: i }
        })
        .collect();
    (ground, raw)
}

/// Clusters raw images with HDBSCAN (single cluster allowed, splits below
/// `cluster_epsilon` merged). Each cluster yields one order-1
/// record at the member centroid carrying the union of member triangles.
/// Records are returned with `index` 0; the caller numbers them.
pub fn cluster_vbs(raw: &[RawVbs], params: &VbsParams) -> Vec<VbsRecord> {
    if raw.is_empty() {
        return Vec::new();
    }
    let locs: Vec<Vec3> = raw.iter().map(|r| r.location).collect();
    let labels = hdbscan_with(&locs, &HdbscanParams {
        min_cluster_size: params.min_cluster_size,
        min_samples: params.min_samples,
        cluster_selection_epsilon: params.cluster_epsilon,
        allow_single_cluster: true,
    });
    let mut out: Vec<VbsRecord> = labels
        .members()
        .into_iter()
        .map(|m| {
            let pts: Vec<Vec3> = m.iter().map(|&i| locs[i]).collect();
            VbsRecord {
                order: 1,
                index: 0,
                location: centroid(&pts).expect("clusters are non-empty"),
                triangle_ids: m.iter().map(|&i| raw[i].triangle_id).collect(),
            }
        })
        .collect();
    if params.noise == NoisePolicy::Keep {
        out.extend(labels.noise().into_iter().map(|i| VbsRecord {
            order: 1,
            index: 0,
            location: raw[i].location,
            triangle_ids: [raw[i].triangle_id].into(),
        }));
    }
    out
}

/// Whether record `rec` serves `point`. Order 0: the BS→point segment is
/// clear. Order 1: for some associated triangle, the segment image→point
/// crosses that triangle, and both legs of the bounce are clear of every
/// other triangle.
pub fn covers(rec: &VbsRecord, refl: &Reflectors, o_bs: Vec3, point: Vec3) -> bool {
    match rec.order {
        0 => !refl.occluded(o_bs, point, None),
        1 => rec.triangle_ids.iter().any(|&tid| {
            let Some(tri) = refl.triangles.get(tid) else { return false };
            let dir = point - rec.location;
            let Some(hit) = ray_triangle_intersect(rec.location, dir, tri) else { return false };
            if hit.t >= 1.0 - EPS_T / dir.norm() {
                return false;
            }
            let bounce = hit.point;
            !refl.occluded(o_bs, bounce, Some(tid)) && !refl.occluded(bounce, point, Some(tid))
        }),
        _ => false,
    }
}

/// Coverage sets for every grid cell centre. The ground image (record id
/// `ground_id`) is given the LoS coverage, matching the convention that a
/// ground bounce exists wherever the direct path does.
pub fn compute_coverage(
    records: &[VbsRecord],
    refl: &Reflectors,
    spec: &GridSpec,
    o_bs: Vec3,
    ground_id: Option<usize>,
) -> CoverageGrid {
    let cells = (0..spec.n_cells())
        .into_par_iter()
        .map(|c| {
            let p = spec.cell_center(c);
            let mut ids = Vec::new();
            let los = !refl.occluded(o_bs, p, None);
            for (id, rec) in records.iter().enumerate() {
                let hit = if rec.order == 0 || Some(id) == ground_id { los } else { covers(rec, refl, o_bs, p) };
                if hit {
                    ids.push(id);
                }
            }
            ids
        })
        .collect();
    CoverageGrid { dx: spec.dx, dy: spec.dy, bounds: spec.bounds, ue_height: spec.ue_height, cells }
}

/// Full VBS construction from a reflector model: BS record, ground image,
/// clustered facade images and their coverage.
pub fn build_store(refl: &Reflectors, o_bs: Vec3, params: &VbsParams, spec: &GridSpec) -> VbsStore {
    let (ground, raw) = compute_raw_vbs(refl, o_bs);
    let mut records = vec![
        VbsRecord::bs(o_bs),
        VbsRecord { order: 1, index: 1, location: ground, triangle_ids: refl.ground.clone() },
    ];
    for (k, mut r) in cluster_vbs(&raw, params).into_iter().enumerate() {
        r.index = k as u32 + 2;
        records.push(r);
    }
    let grid = compute_coverage(&records, refl, spec, o_bs, Some(1));
    VbsStore { bs_location: o_bs, records, grid }
}

/// Ids of triangles whose plane passes within `tol` of the plane through
/// `point` with normal `normal`. Handy for matching records to facades.
#[allow(dead_code)]
pub(crate) fn coplanar_ids(refl: &Reflectors, point: Vec3, normal: Vec3, tol: f64) -> HashSet<usize> {
    refl.triangles
        .iter()
        .enumerate()
        .filter(|(_, t)| t.normal.dot(normal) > 1.0 - 1e-6 && t.signed_distance(point).abs() < tol)
        .map(|(i, _)| i)
        .collect()
}
