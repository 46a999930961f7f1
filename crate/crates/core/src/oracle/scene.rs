//! Box-world scenes: a flat ground plus axis-aligned buildings.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

fn default_gamma() -> f64 {
    10.0
}

/// An axis-aligned building standing on the ground.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneBox {
    pub min: Vec3,
    pub max: Vec3,
    /// Reflection loss of every face of this box.
    #[serde(default = "default_gamma")]
    pub gamma_db: f64,
}

impl SceneBox {
    pub fn new(min: [f64; 3], max: [f64; 3], gamma_db: f64) -> Self {
        Self { min: min.into(), max: max.into(), gamma_db }
    }

    /// Whether `p` lies in the closed footprint, inflated by `margin`.
    pub fn footprint_contains(&self, x: f64, y: f64, margin: f64) -> bool {
        x >= self.min.x - margin && x <= self.max.x + margin && y >= self.min.y - margin && y <= self.max.y + margin
    }

    pub fn contains(&self, p: Vec3) -> bool {
        self.footprint_contains(p.x, p.y, 0.0) && p.z >= self.min.z && p.z <= self.max.z
    }

    fn overlaps(&self, o: &SceneBox) -> bool {
        self.min.x < o.max.x && o.min.x < self.max.x && self.min.y < o.max.y && o.min.y < self.max.y
    }

    /// Whether the open segment `a → b` (trimmed by `eps` metres at each end)
    /// passes through the open interior of the box. Grazing a face does not
    /// count.
    pub fn blocks_segment(&self, a: Vec3, b: Vec3, eps: f64) -> bool {
        let d = b - a;
        let len = d.norm();
        if len <= 2.0 * eps {
            return false;
        }
        let mut t0 = eps / len;
        let mut t1 = 1.0 - eps / len;
        for axis in 0..3 {
            let (lo, hi, o, v) = (self.min[axis], self.max[axis], a[axis], d[axis]);
            if v.abs() < 1e-15 {
                if o <= lo || o >= hi {
                    return false;
                }
                continue;
            }
            let (mut ta, mut tb) = ((lo - o) / v, (hi - o) / v);
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 >= t1 {
                return false;
            }
        }
        // Require a non-trivial run inside the box.
        (t1 - t0) * len > 1e-9
    }
}

/// Which scene surface a [`Face`] belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FaceKind {
    Ground,
    /// Box index and face: 0 = −x, 1 = +x, 2 = −y, 3 = +y, 4 = roof.
    Box { index: usize, side: u8 },
}

/// A planar rectangular reflector `origin + a·edge_u + b·edge_v`, `a, b ∈ [0,1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Face {
    pub origin: Vec3,
    pub edge_u: Vec3,
    pub edge_v: Vec3,
    /// Outward unit normal.
    pub normal: Vec3,
    pub gamma_db: f64,
    pub kind: FaceKind,
}

impl Face {
    pub fn area(&self) -> f64 {
        self.edge_u.cross(self.edge_v).norm()
    }

    pub fn point_at(&self, a: f64, b: f64) -> Vec3 {
        self.origin + self.edge_u * a + self.edge_v * b
    }

    /// Signed distance of `p` from the face plane.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p - self.origin)
    }

    /// Whether a point on the face plane lies inside the rectangle (with
    /// tolerance `tol` metres).
    pub fn contains_planar(&self, p: Vec3, tol: f64) -> bool {
        let rel = p - self.origin;
        let (lu, lv) = (self.edge_u.norm(), self.edge_v.norm());
        let a = rel.dot(self.edge_u) / lu;
        let b = rel.dot(self.edge_v) / lv;
        a >= -tol && a <= lu + tol && b >= -tol && b <= lv + tol
    }

    pub fn centroid(&self) -> Vec3 {
        self.point_at(0.5, 0.5)
    }
}

/// A static scene: ground at `ground_z`, rectangular `region`
/// `[xmin, ymin, xmax, ymax]`, and non-overlapping boxes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub ground_z: f64,
    pub region: [f64; 4],
    pub boxes: Vec<SceneBox>,
    #[serde(default = "default_gamma")]
    pub ground_gamma_db: f64,
}

impl Scene {
    pub fn new(ground_z: f64, region: [f64; 4], boxes: Vec<SceneBox>) -> Self {
        Self { ground_z, region, boxes, ground_gamma_db: default_gamma() }
    }

    /// Checks the scene invariants: boxes above ground, inside the region,
    /// non-degenerate and pairwise non-overlapping.
    pub fn validate(&self) -> std::result::Result<(), String> {
        let [x0, y0, x1, y1] = self.region;
        if !(x1 > x0 && y1 > y0) {
            return Err(format!("empty region {:?}", self.region));
        }
        for (i, b) in self.boxes.iter().enumerate() {
            if !(b.max.x > b.min.x && b.max.y > b.min.y && b.max.z > b.min.z) {
                return Err(format!("box {i} is degenerate"));
            }
            if b.min.z < self.ground_z - 1e-9 {
                return Err(format!("box {i} extends below ground"));
            }
            if b.min.x < x0 || b.max.x > x1 || b.min.y < y0 || b.max.y > y1 {
                return Err(format!("box {i} leaves the region"));
            }
            if let Some(j) = self.boxes[..i].iter().position(|o| o.overlaps(b)) {
                return Err(format!("boxes {j} and {i} overlap"));
            }
        }
        Ok(())
    }

    pub fn ground_face(&self) -> Face {
        let [x0, y0, x1, y1] = self.region;
        Face {
            origin: Vec3::new(x0, y0, self.ground_z),
            edge_u: Vec3::new(x1 - x0, 0.0, 0.0),
            edge_v: Vec3::new(0.0, y1 - y0, 0.0),
            normal: Vec3::Z,
            gamma_db: self.ground_gamma_db,
            kind: FaceKind::Ground,
        }
    }

    /// Four walls and the roof of every box, in a fixed order.
    pub fn box_faces(&self) -> Vec<Face> {
        let mut faces = Vec::with_capacity(self.boxes.len() * 5);
        for (index, b) in self.boxes.iter().enumerate() {
            let (lo, hi) = (b.min, b.max);
            let (dx, dy, dz) = (hi.x - lo.x, hi.y - lo.y, hi.z - lo.z);
            let g = b.gamma_db;
            let mk = |origin: Vec3, u: Vec3, v: Vec3, normal: Vec3, side: u8| Face {
                origin,
                edge_u: u,
                edge_v: v,
                normal,
                gamma_db: g,
                kind: FaceKind::Box { index, side },
            };
            let up = Vec3::new(0.0, 0.0, dz);
            faces.push(mk(lo, Vec3::new(0.0, dy, 0.0), up, Vec3::new(-1.0, 0.0, 0.0), 0));
            faces.push(mk(Vec3::new(hi.x, lo.y, lo.z), Vec3::new(0.0, dy, 0.0), up, Vec3::new(1.0, 0.0, 0.0), 1));
            faces.push(mk(lo, Vec3::new(dx, 0.0, 0.0), up, Vec3::new(0.0, -1.0, 0.0), 2));
            faces.push(mk(Vec3::new(lo.x, hi.y, lo.z), Vec3::new(dx, 0.0, 0.0), up, Vec3::new(0.0, 1.0, 0.0), 3));
            faces.push(mk(
                Vec3::new(lo.x, lo.y, hi.z),
                Vec3::new(dx, 0.0, 0.0),
                Vec3::new(0.0, dy, 0.0),
                Vec3::Z,
                4,
            ));
        }
        faces
    }

    /// Ground followed by all box faces.
    pub fn faces(&self) -> Vec<Face> {
        let mut f = vec![self.ground_face()];
        f.extend(self.box_faces());
        f
    }

    /// Whether the open segment passes through any building.
    pub fn segment_blocked(&self, a: Vec3, b: Vec3) -> bool {
        self.boxes.iter().any(|bx| bx.blocks_segment(a, b, 1e-7))
    }

    /// Whether a ground position at height `z` falls inside a building.
    pub fn inside_any_box(&self, p: Vec3) -> bool {
        self.boxes.iter().any(|b| b.contains(p))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let scene: Scene = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
        scene.validate().map_err(|m| Error::invalid(path, "boxes", m))?;
        Ok(scene)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("scene serialises");
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    /// Random box world inside `region`, keeping a clearance around `keep_clear`
    /// (the BS site). Deterministic for a given seed.
    pub fn random(region: [f64; 4], n_boxes: usize, keep_clear: Vec3, seed: u64) -> Scene {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [x0, y0, x1, y1] = region;
        let mut boxes: Vec<SceneBox> = Vec::new();
        let street = 6.0;
        let mut attempts = 0;
        while boxes.len() < n_boxes && attempts < 10_000 {
            attempts += 1;
            let w = rng.gen_range(8.0..25.0);
            let d = rng.gen_range(8.0..25.0);
            let h = rng.gen_range(6.0..20.0);
            let bx = rng.gen_range(x0 + 2.0..(x1 - w - 2.0).max(x0 + 2.1));
            let by = rng.gen_range(y0 + 2.0..(y1 - d - 2.0).max(y0 + 2.1));
            let cand = SceneBox::new([bx, by, 0.0], [bx + w, by + d, h], 10.0);
            if cand.max.x > x1 || cand.max.y > y1 {
                continue;
            }
            if cand.footprint_contains(keep_clear.x, keep_clear.y, 8.0) {
                continue;
            }
            let padded = SceneBox::new(
                [bx - street, by - street, 0.0],
                [bx + w + street, by + d + street, h],
                0.0,
            );
            if boxes.iter().any(|o| o.overlaps(&padded)) {
                continue;
            }
            boxes.push(cand);
        }
        let mut scene = Scene::new(0.0, region, boxes);
        for b in &mut scene.boxes {
            b.min.z = scene.ground_z;
        }
        scene
    }

    /// A fixed street-canyon layout around the default BS site (140, 60, 4):
    /// buildings shadow part of the region so that many UEs rely on facade
    /// reflections.
    pub fn urban() -> Scene {
        Scene::new(
            0.0,
            [0.0, 0.0, 160.0, 120.0],
            vec![
                SceneBox::new([100.0, 20.0, 0.0], [118.0, 44.0, 14.0], 10.0),
                SceneBox::new([100.0, 76.0, 0.0], [116.0, 100.0, 12.0], 10.0),
                SceneBox::new([60.0, 48.0, 0.0], [80.0, 70.0, 18.0], 10.0),
                SceneBox::new([20.0, 14.0, 0.0], [44.0, 36.0, 16.0], 10.0),
                SceneBox::new([24.0, 84.0, 0.0], [46.0, 106.0, 10.0], 10.0),
                SceneBox::new([130.0, 96.0, 0.0], [150.0, 114.0, 15.0], 10.0),
            ],
        )
    }
}
