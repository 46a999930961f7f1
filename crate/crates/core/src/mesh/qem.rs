use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashMap};

use super::TriMesh;
use crate::geom::{Vec3, EPS_AREA};

/// Weight of the boundary-constraint planes relative to face planes.
const BOUNDARY_WEIGHT: f64 = 1e3;

/// Symmetric 4×4 error quadric stored as its upper triangle.
#[derive(Clone, Copy, Debug, Default)]
struct Quadric([f64; 10]);

impl Quadric {
    fn plane(n: Vec3, d: f64, w: f64) -> Self {
        let (a, b, c) = (n.x, n.y, n.z);
        Quadric([a * a, a * b, a * c, a * d, b * b, b * c, b * d, c * c, c * d, d * d].map(|x| x * w))
    }

    fn add(&mut self, o: &Quadric) {
        for (x, y) in self.0.iter_mut().zip(o.0) {
            *x += y;
        }
    }

    fn eval(&self, p: Vec3) -> f64 {
        let q = &self.0;
        let (x, y, z) = (p.x, p.y, p.z);
        q[0] * x * x + 2.0 * q[1] * x * y + 2.0 * q[2] * x * z + 2.0 * q[3] * x
            + q[4] * y * y + 2.0 * q[5] * y * z + 2.0 * q[6] * y
            + q[7] * z * z + 2.0 * q[8] * z
            + q[9]
    }
}

/// Heap entry: contract `remove` into `keep` at `keep`'s position.
#[derive(Clone, Copy, Debug)]
struct Candidate {
    cost: f64,
    remove: usize,
    keep: usize,
    stamps: (u32, u32),
}

impl PartialEq for Candidate {
    fn eq(&self, o: &Self) -> bool {
        self.cmp(o) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Candidate {
    // Reversed so the max-heap pops the cheapest, lowest-index candidate.
    fn cmp(&self, o: &Self) -> Ordering {
        o.cost.total_cmp(&self.cost).then(o.remove.cmp(&self.remove)).then(o.keep.cmp(&self.keep))
    }
}

struct State {
    pos: Vec<Vec3>,
    quad: Vec<Quadric>,
    faces: Vec<[usize; 3]>,
    face_alive: Vec<bool>,
    vert_faces: Vec<Vec<usize>>,
    vert_alive: Vec<bool>,
    stamp: Vec<u32>,
}

impl State {
    fn live_faces(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        self.vert_faces[v].iter().copied().filter(|&f| self.face_alive[f])
    }

    fn neighbours(&self, v: usize) -> BTreeSet<usize> {
        self.live_faces(v).flat_map(|f| self.faces[f]).filter(|&w| w != v).collect()
    }

    fn push_edges(&self, v: usize, heap: &mut BinaryHeap<Candidate>) {
        for w in self.neighbours(v) {
            let q = {
                let mut q = self.quad[v];
                q.add(&self.quad[w]);
                q
            };
            for (remove, keep) in [(v, w), (w, v)] {
                heap.push(Candidate {
                    cost: q.eval(self.pos[keep]),
                    remove,
                    keep,
                    stamps: (self.stamp[remove], self.stamp[keep]),
                });
            }
        }
    }

    fn normal_area2(&self, f: [usize; 3]) -> Vec3 {
        let [a, b, c] = f.map(|i| self.pos[i]);
        (b - a).cross(c - a)
    }

    /// Whether contracting `u` into `v` keeps the mesh valid: the edge
    /// exists, the link condition holds, and no surviving face degenerates
    /// or turns by 90° or more.
    fn can_collapse(&self, u: usize, v: usize) -> bool {
        let shared: Vec<usize> = self.live_faces(u).filter(|&f| self.faces[f].contains(&v)).collect();
        if shared.is_empty() {
            return false;
        }
        let opposite: BTreeSet<usize> =
            shared.iter().flat_map(|&f| self.faces[f]).filter(|&w| w != u && w != v).collect();
        let common = self.neighbours(u).intersection(&self.neighbours(v)).count();
        if common != opposite.len() {
            return false;
        }
        for f in self.live_faces(u) {
            let old = self.faces[f];
            if old.contains(&v) {
                continue;
            }
            let new = old.map(|w| if w == u { v } else { w });
            let (n_old, n_new) = (self.normal_area2(old), self.normal_area2(new));
            if 0.5 * n_new.norm() <= EPS_AREA || n_old.dot(n_new) <= 0.0 {
                return false;
            }
        }
        true
    }

    fn collapse(&mut self, u: usize, v: usize) -> usize {
        let mut removed = 0;
        let incident: Vec<usize> = self.live_faces(u).collect();
        for f in incident {
            if self.faces[f].contains(&v) {
                self.face_alive[f] = false;
                removed += 1;
            } else {
                for w in self.faces[f].iter_mut() {
                    if *w == u {
                        *w = v;
                    }
                }
                self.vert_faces[v].push(f);
            }
        }
        let qu = self.quad[u];
        self.quad[v].add(&qu);
        self.vert_alive[u] = false;
        self.vert_faces[u].clear();
        let alive = &self.face_alive;
        self.vert_faces[v].retain(|&f| alive[f]);
        self.stamp[v] += 1;
        removed
    }
}

/// Quadric-error edge contraction down to at most `target_faces` faces.
///
/// Each vertex carries the area-weighted quadrics of its faces plus heavy
/// quadrics for planes through boundary edges, perpendicular to the face,
/// so outlines are kept. A contraction places the merged vertex at the
/// surviving endpoint, so every output vertex is an input vertex. Meshes
/// already within the budget are returned unchanged.
pub fn simplify_qem(mesh: &TriMesh, target_faces: usize) -> TriMesh {
    let target = target_faces.max(1);
    if mesh.len() <= target {
        return mesh.clone();
    }
    let nv = mesh.vertices.len();
    let mut st = State {
        pos: mesh.vertices.clone(),
        quad: vec![Quadric::default(); nv],
        faces: mesh.faces.clone(),
        face_alive: vec![true; mesh.faces.len()],
        vert_faces: vec![Vec::new(); nv],
        vert_alive: vec![true; nv],
        stamp: vec![0; nv],
    };
    let mut edge_use: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (fi, (f, t)) in mesh.faces.iter().zip(mesh.triangles()).enumerate() {
        let q = Quadric::plane(t.normal, -t.normal.dot(t.v1), t.area());
        for &v in f {
            st.quad[v].add(&q);
            st.vert_faces[v].push(fi);
        }
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            edge_use.entry((a.min(b), a.max(b))).or_default().push(fi);
        }
    }
    let mut boundary: Vec<(&(usize, usize), &Vec<usize>)> = edge_use.iter().filter(|(_, fs)| fs.len() == 1).collect();
    boundary.sort();
    for (&(a, b), fs) in boundary {
        let n = mesh.triangles()[fs[0]].normal;
        if let Some(bn) = (st.pos[b] - st.pos[a]).cross(n).normalized() {
            let q = Quadric::plane(bn, -bn.dot(st.pos[a]), BOUNDARY_WEIGHT);
            st.quad[a].add(&q);
            st.quad[b].add(&q);
        }
    }

    let mut heap = BinaryHeap::new();
    for v in 0..nv {
        st.push_edges(v, &mut heap);
    }
    let mut live = mesh.len();
    while live > target {
        let Some(c) = heap.pop() else { break };
        let (u, v) = (c.remove, c.keep);
        if !st.vert_alive[u] || !st.vert_alive[v] || c.stamps != (st.stamp[u], st.stamp[v]) {
            continue;
        }
        if !st.can_collapse(u, v) {
            continue;
        }
        live -= st.collapse(u, v);
        st.push_edges(v, &mut heap);
    }
    let faces: Vec<[usize; 3]> = st.faces.iter().zip(&st.face_alive).filter(|(_, &a)| a).map(|(f, _)| *f).collect();
    TriMesh::new_lossy(st.pos, faces)
}
