//! Per-object triangle meshes: planar-patch reconstruction from points,
//! quadric-error simplification and a minimal OBJ reader/writer.

mod qem;
mod reconstruct;

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use qem::simplify_qem;
pub use reconstruct::{fit_plane, reconstruct_object_mesh};

use crate::error::{Error, Result};
use crate::geom::{Triangle, Vec3};

/// Reconstruction parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeshParams {
    /// Maximum point-to-plane distance of a patch inlier (m).
    pub plane_dist_thresh: f64,
    /// Smallest patch worth keeping.
    pub min_inliers: usize,
    /// 2D alpha-shape radius (m).
    pub alpha: f64,
    /// Face budget per object after simplification.
    pub target_faces: usize,
    pub ransac_iterations: usize,
    pub seed: u64,
}

impl Default for MeshParams {
    fn default() -> Self {
        Self { plane_dist_thresh: 0.15, min_inliers: 100, alpha: 1.0, target_faces: 50, ransac_iterations: 1000, seed: 0 }
    }
}

/// Indexed triangle mesh. Every face is non-degenerate and its winding
/// gives the outward normal.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    triangles: Vec<Triangle>,
}

impl TriMesh {
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let mut triangles = Vec::with_capacity(faces.len());
        for (i, f) in faces.iter().enumerate() {
            if let Some(&bad) = f.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::Dimension(format!("face {i} references vertex {bad} of {}", vertices.len())));
            }
            triangles.push(Triangle::new(vertices[f[0]], vertices[f[1]], vertices[f[2]])?);
        }
        Ok(Self { vertices, faces, triangles })
    }

    /// Builds a mesh, silently dropping degenerate faces and unused
    /// vertices.
    pub fn new_lossy(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Self {
        let faces: Vec<[usize; 3]> = faces
            .into_iter()
            .filter(|f| f.iter().all(|&v| v < vertices.len()))
            .filter(|f| Triangle::new(vertices[f[0]], vertices[f[1]], vertices[f[2]]).is_ok())
            .collect();
        let mut remap = vec![usize::MAX; vertices.len()];
        let mut kept = Vec::new();
        let faces = faces
            .into_iter()
            .map(|f| {
                f.map(|v| {
                    if remap[v] == usize::MAX {
                        remap[v] = kept.len();
                        kept.push(vertices[v]);
                    }
                    remap[v]
                })
            })
            .collect();
        Self::new(kept, faces).expect("faces were filtered")
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.faces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn area(&self) -> f64 {
        self.triangles.iter().map(Triangle::area).sum()
    }

    /// Concatenates meshes.
    pub fn merge(meshes: &[TriMesh]) -> TriMesh {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        let mut triangles = Vec::new();
        for m in meshes {
            let off = vertices.len();
            vertices.extend_from_slice(&m.vertices);
            faces.extend(m.faces.iter().map(|f| f.map(|v| v + off)));
            triangles.extend_from_slice(&m.triangles);
        }
        TriMesh { vertices, faces, triangles }
    }
}

/// Writes `v` and 1-based `f` lines.
pub fn write_obj(mesh: &TriMesh, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(std::fs::File::create(path).map_err(io)?);
    for v in &mesh.vertices {
        writeln!(w, "v {} {} {}", v.x, v.y, v.z).map_err(io)?;
    }
    for f in &mesh.faces {
        writeln!(w, "f {} {} {}", f[0] + 1, f[1] + 1, f[2] + 1).map_err(io)?;
    }
    w.flush().map_err(io)
}

/// Reads the `v` / `f` subset of OBJ. Other records are ignored; face
/// entries of the form `i/j/k` use the vertex index only.
pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let err = |msg: String| Error::Parse { path: path.into(), line: lineno + 1, msg };
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .map(|s| s.parse::<f64>().map_err(|_| err(format!("bad coordinate `{s}`"))))
                    .collect::<Result<_>>()?;
                if c.len() < 3 {
                    return Err(err("vertex needs 3 coordinates".into()));
                }
                vertices.push(Vec3::new(c[0], c[1], c[2]));
            }
            Some("f") => {
                let idx: Vec<usize> = it
                    .map(|s| {
                        let head = s.split('/').next().unwrap_or("");
                        match head.parse::<usize>() {
                            Ok(i) if i >= 1 => Ok(i - 1),
                            _ => Err(err(format!("bad face index `{s}`"))),
                        }
                    })
                    .collect::<Result<_>>()?;
                if idx.len() != 3 {
                    return Err(err(format!("expected a triangle, found {} indices", idx.len())));
                }
                faces.push([idx[0], idx[1], idx[2]]);
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, faces)
}
