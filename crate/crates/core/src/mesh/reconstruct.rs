use delaunator::{triangulate, Point};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{MeshParams, TriMesh};
use crate::geom::{centroid, Vec3};

/// Eigen-decomposition of a symmetric 3×3 matrix by cyclic Jacobi
/// rotations. Returns eigenvalues and column eigenvectors.
#[allow(clippy::needless_range_loop)]
fn sym_eigen(mut a: [[f64; 3]; 3]) -> ([f64; 3], [[f64; 3]; 3]) {
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for _ in 0..50 {
        let off = a[0][1].powi(2) + a[0][2].powi(2) + a[1][2].powi(2);
        if off < 1e-30 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q].abs() < 1e-300 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
            let t = if theta == 0.0 { 1.0 } else { t };
            let c = 1.0 / (t * t + 1.0).sqrt();
            let s = t * c;
            for k in 0..3 {
                let (akp, akq) = (a[k][p], a[k][q]);
                a[k][p] = c * akp - s * akq;
                a[k][q] = s * akp + c * akq;
            }
            for k in 0..3 {
                let (apk, aqk) = (a[p][k], a[q][k]);
                a[p][k] = c * apk - s * aqk;
                a[q][k] = s * apk + c * aqk;
            }
            for row in v.iter_mut() {
                let (vp, vq) = (row[p], row[q]);
                row[p] = c * vp - s * vq;
                row[q] = s * vp + c * vq;
            }
        }
    }
    ([a[0][0], a[1][1], a[2][2]], v)
}

/// Least-squares plane `(centroid, unit normal)` through `points`.
/// `None` for fewer than three points or a degenerate (collinear) set.
pub fn fit_plane(points: &[Vec3]) -> Option<(Vec3, Vec3)> {
    if points.len() < 3 {
        return None;
    }
    let c = centroid(points)?;
    let mut m = [[0.0; 3]; 3];
    for p in points {
        let d = (*p - c).to_array();
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] += d[i] * d[j];
            }
        }
    }
    let (vals, vecs) = sym_eigen(m);
    let mut order = [0, 1, 2];
    order.sort_by(|&i, &j| vals[i].total_cmp(&vals[j]));
    // Collinear sets have two vanishing eigenvalues.
    if vals[order[1]] <= 1e-12 * vals[order[2]].max(1e-300) {
        return None;
    }
    let k = order[0];
    Vec3::new(vecs[0][k], vecs[1][k], vecs[2][k]).normalized().map(|n| (c, n))
}

fn plane_through(a: Vec3, b: Vec3, c: Vec3) -> Option<Vec3> {
    (b - a).cross(c - a).normalized()
}

/// Largest consensus plane among `idx` by RANSAC; returns the refined
/// plane and its inliers.
fn ransac_plane(
    points: &[Vec3],
    idx: &[usize],
    params: &MeshParams,
    rng: &mut ChaCha8Rng,
) -> Option<(Vec3, Vec3, Vec<usize>)> {
    let n = idx.len();
    let thr = params.plane_dist_thresh;
    let count = |c: Vec3, nrm: Vec3| idx.iter().filter(|&&i| nrm.dot(points[i] - c).abs() < thr).count();
    let mut best: Option<(usize, Vec3, Vec3)> = None;
    let mut needed = params.ransac_iterations;
    let mut it = 0;
    while it < needed.min(params.ransac_iterations) {
        it += 1;
        let s = sample(rng, n, 3);
        let (a, b, c) = (points[idx[s.index(0)]], points[idx[s.index(1)]], points[idx[s.index(2)]]);
        let Some(nrm) = plane_through(a, b, c) else { continue };
        let k = count(a, nrm);
        if best.is_none_or(|(bk, _, _)| k > bk) {
            best = Some((k, a, nrm));
            let w = k as f64 / n as f64;
            let p_good = w.powi(3);
            if p_good >= 1.0 {
                needed = 0;
            } else if p_good > 0.0 {
                needed = ((1.0f64 - 0.999).ln() / (1.0 - p_good).ln()).ceil() as usize;
            }
        }
    }
    let (_, c, nrm) = best?;
    let inliers: Vec<usize> = idx.iter().copied().filter(|&i| nrm.dot(points[i] - c).abs() < thr).collect();
    let pts: Vec<Vec3> = inliers.iter().map(|&i| points[i]).collect();
    let (c2, n2) = fit_plane(&pts)?;
    let refined: Vec<usize> = idx.iter().copied().filter(|&i| n2.dot(points[i] - c2).abs() < thr).collect();
    Some((c2, n2, refined))
}

/// Normal sign rule: pointing away from the object centroid; horizontal
/// patches point up; a patch through the centroid points along the
/// positive dominant axis.
fn orient(n: Vec3, patch_c: Vec3, obj_c: Vec3) -> Vec3 {
    if n.z.abs() > 0.9 {
        return if n.z < 0.0 { -n } else { n };
    }
    let s = n.dot(patch_c - obj_c);
    if s.abs() > 1e-6 {
        return if s < 0.0 { -n } else { n };
    }
    let a = n.to_array();
    let k = (0..3).max_by(|&i, &j| a[i].abs().total_cmp(&a[j].abs())).expect("three axes");
    if a[k] < 0.0 {
        -n
    } else {
        n
    }
}

fn circumradius(a: Vec3, b: Vec3, c: Vec3) -> f64 {
    let area2 = (b - a).cross(c - a).norm();
    if area2 <= 0.0 {
        return f64::INFINITY;
    }
    a.distance(b) * b.distance(c) * c.distance(a) / (2.0 * area2)
}

/// Triangulates the alpha shape of points projected on the plane
/// `(c, n)`, wound so every face normal equals `n`.
fn alpha_patch(points: &[Vec3], c: Vec3, n: Vec3, alpha: f64) -> TriMesh {
    let helper = if n.x.abs() < 0.9 { Vec3::new(1.0, 0.0, 0.0) } else { Vec3::new(0.0, 1.0, 0.0) };
    let e1 = n.cross(helper).normalized().expect("helper not parallel to n");
    let e2 = n.cross(e1);
    let uv: Vec<Point> = points.iter().map(|p| Point { x: (*p - c).dot(e1), y: (*p - c).dot(e2) }).collect();
    let verts: Vec<Vec3> = uv.iter().map(|q| c + e1 * q.x + e2 * q.y).collect();
    let tri = triangulate(&uv);
    let mut faces = Vec::new();
    for t in tri.triangles.chunks_exact(3) {
        let (a, b, d) = (verts[t[0]], verts[t[1]], verts[t[2]]);
        if circumradius(a, b, d) >= alpha {
            continue;
        }
        let f = if (b - a).cross(d - a).dot(n) >= 0.0 { [t[0], t[1], t[2]] } else { [t[0], t[2], t[1]] };
        faces.push(f);
    }
    TriMesh::new_lossy(verts, faces)
}

/// Planar-patch surface reconstruction of one object.
///
/// Repeatedly extracts the largest consensus plane (inliers within
/// `plane_dist_thresh`), projects its inliers onto the fitted plane and
/// keeps the Delaunay triangles whose circumradius is below `alpha`.
/// Stops when fewer than `min_inliers` points remain or no plane gathers
/// that many. Objects without such a plane give an empty mesh.
pub fn reconstruct_object_mesh(points: &[Vec3], params: &MeshParams) -> TriMesh {
    if points.len() < params.min_inliers.max(3) {
        return TriMesh::default();
    }
    let obj_c = centroid(points).expect("non-empty");
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    let mut patches = Vec::new();
    while remaining.len() >= params.min_inliers.max(3) {
        let Some((c, n, inliers)) = ransac_plane(points, &remaining, params, &mut rng) else { break };
        if inliers.len() < params.min_inliers.max(3) {
            break;
        }
        let pts: Vec<Vec3> = inliers.iter().map(|&i| points[i]).collect();
        let n = orient(n, centroid(&pts).expect("non-empty"), obj_c);
        let patch = alpha_patch(&pts, c, n, params.alpha);
        if !patch.is_empty() {
            patches.push(patch);
        }
        let mut used = vec![false; points.len()];
        for &i in &inliers {
            used[i] = true;
        }
        remaining.retain(|&i| !used[i]);
    }
    TriMesh::merge(&patches)
}
