//! Geometric kernel: vectors, triangles, Möller–Trumbore ray/triangle
//! intersection, mirror images, specular reflection points and segment
//! occlusion queries.
//!
//! Everything here is double precision. Mirroring a source across a plane
//! 100 m away amplifies single-precision rounding to centimetres.

use std::collections::HashSet;
use std::fmt;
use std::ops::{Add, AddAssign, Div, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum ray parameter accepted as a hit (metres along a unit direction).
pub const EPS_T: f64 = 1e-6;
/// Triangles with area at or below this are rejected as degenerate (m²).
pub const EPS_AREA: f64 = 1e-8;
/// Smallest admissible reflection-point denominator.
pub const EPS_DEN: f64 = 1e-9;

/// A point or displacement in metres.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "[f64; 3]", into = "[f64; 3]")]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub const ZERO: Vec3 = Vec3::new(0.0, 0.0, 0.0);
    pub const Z: Vec3 = Vec3::new(0.0, 0.0, 1.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    #[inline]
    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    #[inline]
    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    #[inline]
    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }

    /// Unit vector in the same direction, or `None` for the zero vector.
    pub fn normalized(self) -> Option<Vec3> {
        let n = self.norm();
        (n > 0.0 && n.is_finite()).then(|| self / n)
    }

    #[inline]
    pub fn distance(self, o: Vec3) -> f64 {
        (self - o).norm()
    }

    #[inline]
    pub fn distance_sq(self, o: Vec3) -> f64 {
        (self - o).norm_sq()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }
}

impl From<[f64; 3]> for Vec3 {
    fn from(a: [f64; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl From<Vec3> for [f64; 3] {
    fn from(v: Vec3) -> Self {
        v.to_array()
    }
}

impl fmt::Display for Vec3 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for Vec3 {
    type Output = Vec3;
    #[inline]
    fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl AddAssign for Vec3 {
    #[inline]
    fn add_assign(&mut self, o: Vec3) {
        *self = *self + o;
    }
}

impl Sub for Vec3 {
    type Output = Vec3;
    #[inline]
    fn sub(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Neg for Vec3 {
    type Output = Vec3;
    #[inline]
    fn neg(self) -> Vec3 {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl Mul<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn mul(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Mul<Vec3> for f64 {
    type Output = Vec3;
    #[inline]
    fn mul(self, v: Vec3) -> Vec3 {
        v * self
    }
}

impl Div<f64> for Vec3 {
    type Output = Vec3;
    #[inline]
    fn div(self, s: f64) -> Vec3 {
        Vec3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Index<usize> for Vec3 {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Mean of a non-empty set of points.
pub fn centroid(points: &[Vec3]) -> Option<Vec3> {
    if points.is_empty() {
        return None;
    }
    let sum = points.iter().fold(Vec3::ZERO, |acc, &p| acc + p);
    Some(sum / points.len() as f64)
}

/// A non-degenerate triangle with cached unit normal and centroid.
///
/// The normal follows the right-hand rule over `(v1, v2, v3)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Triangle {
    pub v1: Vec3,
    pub v2: Vec3,
    pub v3: Vec3,
    pub normal: Vec3,
    pub centroid: Vec3,
}

impl Triangle {
    pub fn new(v1: Vec3, v2: Vec3, v3: Vec3) -> Result<Self> {
        let c = (v2 - v1).cross(v3 - v1);
        let area = 0.5 * c.norm();
        if !(area > EPS_AREA) || !v1.is_finite() || !v2.is_finite() || !v3.is_finite() {
            return Err(Error::DegenerateTriangle { area });
        }
        Ok(Self {
            v1,
            v2,
            v3,
            normal: c / (2.0 * area),
            centroid: (v1 + v2 + v3) / 3.0,
        })
    }

    pub fn area(&self) -> f64 {
        0.5 * (self.v2 - self.v1).cross(self.v3 - self.v1).norm()
    }

    /// Same triangle with reversed winding (and normal).
    pub fn flipped(&self) -> Triangle {
        Triangle {
            v1: self.v1,
            v2: self.v3,
            v3: self.v2,
            normal: -self.normal,
            centroid: self.centroid,
        }
    }

    /// Signed distance of `p` from the supporting plane, positive on the
    /// normal side.
    pub fn signed_distance(&self, p: Vec3) -> f64 {
        self.normal.dot(p - self.v1)
    }

    pub fn vertices(&self) -> [Vec3; 3] {
        [self.v1, self.v2, self.v3]
    }
}

/// A ray/triangle hit: `point = origin + t * direction` and
/// `point = (1-u-v) v1 + u v2 + v v3`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub u: f64,
    pub v: f64,
    pub point: Vec3,
}

/// Möller–Trumbore intersection of the ray `origin + t·direction`, `t ≥ EPS_T`,
/// with `tri`. Boundary hits count.
///
/// `t` is expressed in units of `direction`; pass a unit direction to get
/// metres.
pub fn ray_triangle_intersect(origin: Vec3, direction: Vec3, tri: &Triangle) -> Option<Hit> {
    let e1 = tri.v2 - tri.v1;
    let e2 = tri.v3 - tri.v1;
    let pvec = direction.cross(e2);
    let det = e1.dot(pvec);
    // Ray parallel to the plane.
    if det.abs() <= 1e-14 * e1.norm() * e2.norm() * direction.norm() {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = origin - tri.v1;
    let u = tvec.dot(pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = direction.dot(qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(qvec) * inv_det;
    if t < EPS_T {
        return None;
    }
    Some(Hit {
        t,
        u,
        v,
        point: origin + direction * t,
    })
}

/// Reflect `p` across the plane through `plane_point` with unit normal
/// `unit_normal`.
pub fn mirror_point(p: Vec3, plane_point: Vec3, unit_normal: Vec3) -> Result<Vec3> {
    let n = unit_normal.norm();
    if (n - 1.0).abs() > 1e-9 {
        return Err(Error::NonUnitNormal(n));
    }
    let d = unit_normal.dot(p - plane_point);
    Ok(p - unit_normal * (2.0 * d))
}

/// Specular reflection point of the single-bounce path BS → plane → UE,
/// given the BS image `o_vbs` across the reflecting plane.
///
/// The result lies on the perpendicular bisector plane of `o_bs`–`o_vbs`,
/// on the line from `o_vbs` to `o_ue`.
pub fn reflection_point(o_vbs: Vec3, o_bs: Vec3, o_ue: Vec3) -> Result<Vec3> {
    let (point, _) = reflection_point_param(o_vbs, o_bs, o_ue)?;
    Ok(point)
}

/// Like [`reflection_point`] but also returns the fraction `s` along
/// `o_vbs → o_ue` at which the bounce happens. A physical path has
/// `0 < s < 1`.
pub fn reflection_point_param(o_vbs: Vec3, o_bs: Vec3, o_ue: Vec3) -> Result<(Vec3, f64)> {
    let to_bs = o_bs - o_vbs;
    let to_ue = o_ue - o_vbs;
    let den = 2.0 * to_bs.dot(to_ue);
    if den.abs() <= EPS_DEN || !den.is_finite() {
        return Err(Error::InvalidReflection);
    }
    let s = to_bs.norm_sq() / den;
    Ok((o_vbs + to_ue * s, s))
}

/// Whether the open segment `p1 → p2` crosses any triangle not listed in
/// `exclude`. Intersections within `EPS_T` of either endpoint are ignored.
pub fn segment_occluded(p1: Vec3, p2: Vec3, meshes: &[Triangle], exclude: &HashSet<usize>) -> bool {
    segment_occluded_by(p1, p2, meshes.iter().enumerate(), |i| exclude.contains(&i))
}

/// Occlusion test with an arbitrary exclusion predicate over triangle ids.
pub fn segment_occluded_by<'a, I, F>(p1: Vec3, p2: Vec3, tris: I, excluded: F) -> bool
where
    I: IntoIterator<Item = (usize, &'a Triangle)>,
    F: Fn(usize) -> bool,
{
    let delta = p2 - p1;
    let len = delta.norm();
    if len <= 2.0 * EPS_T {
        return false;
    }
    let dir = delta / len;
    let t_max = len - EPS_T;
    tris.into_iter().any(|(i, tri)| {
        !excluded(i)
            && ray_triangle_intersect(p1, dir, tri).is_some_and(|h| h.t > EPS_T && h.t < t_max)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn tri(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Triangle {
        Triangle::new(a.into(), b.into(), c.into()).unwrap()
    }

    /// Square wall in the plane x = `x`, spanning y∈[-10,10], z∈[0,10].
    fn wall(x: f64) -> Vec<Triangle> {
        vec![
            tri([x, -10.0, 0.0], [x, 10.0, 0.0], [x, 10.0, 10.0]),
            tri([x, -10.0, 0.0], [x, 10.0, 10.0], [x, -10.0, 10.0]),
        ]
    }

    #[test]
    fn hit_through_interior() {
        let t = tri([2.0, -1.0, -1.0], [2.0, 1.0, -1.0], [2.0, 0.0, 1.0]);
        let h = ray_triangle_intersect(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), &t).unwrap();
        assert!(close(h.t, 2.0, 1e-12));
        assert!(close(h.u, 0.25, 1e-12));
        assert!(close(h.v, 0.5, 1e-12));
        assert!(h.point.distance(Vec3::new(2.0, 0.0, 0.0)) < 1e-12);
    }

    #[test]
    fn ray_pointing_away_misses() {
        let t = tri([2.0, -1.0, -1.0], [2.0, 1.0, -1.0], [2.0, 0.0, 1.0]);
        assert!(ray_triangle_intersect(Vec3::ZERO, Vec3::new(-1.0, 0.0, 0.0), &t).is_none());
    }

    #[test]
    fn plane_crossed_outside_triangle_misses() {
        let t = tri([2.0, 1.0, 1.0], [2.0, 2.0, 1.0], [2.0, 1.0, 2.0]);
        assert!(ray_triangle_intersect(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), &t).is_none());
    }

    #[test]
    fn boundary_hits_count() {
        let t = tri([1.0, 0.0, 0.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0]);
        // Vertex and edge midpoint.
        for target in [[1.0, 0.0, 0.0], [1.0, 0.5, 0.5], [1.0, 0.5, 0.0]] {
            let d = Vec3::from(target);
            assert!(ray_triangle_intersect(Vec3::ZERO, d, &t).is_some(), "{target:?}");
        }
    }

    #[test]
    fn degenerate_triangle_rejected() {
        let r = Triangle::new(Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(2.0, 0.0, 0.0));
        assert!(matches!(r, Err(Error::DegenerateTriangle { .. })));
    }

    #[test]
    fn mirror_examples() {
        let m = mirror_point(Vec3::new(0.0, 0.0, 10.0), Vec3::ZERO, Vec3::Z).unwrap();
        assert_eq!(m, Vec3::new(0.0, 0.0, -10.0));
        let m = mirror_point(Vec3::ZERO, Vec3::new(5.0, 0.0, 0.0), Vec3::new(-1.0, 0.0, 0.0)).unwrap();
        assert_eq!(m, Vec3::new(10.0, 0.0, 0.0));
        assert!(matches!(
            mirror_point(Vec3::ZERO, Vec3::ZERO, Vec3::new(0.0, 0.0, 2.0)),
            Err(Error::NonUnitNormal(_))
        ));
    }

    #[test]
    fn reflection_point_examples() {
        let r = reflection_point(Vec3::new(10.0, 0.0, 0.0), Vec3::ZERO, Vec3::new(0.0, 10.0, 0.0)).unwrap();
        assert!(r.distance(Vec3::new(5.0, 5.0, 0.0)) < 1e-12);

        let r = reflection_point(
            Vec3::new(0.0, 0.0, -10.0),
            Vec3::new(0.0, 0.0, 10.0),
            Vec3::new(20.0, 0.0, 1.5),
        )
        .unwrap();
        assert!(r.z.abs() < 1e-12);
        // Ground bounce of the two-ray model lies at x = 20·10/11.5.
        assert!(close(r.x, 200.0 / 11.5, 1e-9));
    }

    #[test]
    fn grazing_reflection_is_an_error() {
        // UE on the bisector plane through the VBS-side: denominator zero.
        let r = reflection_point(Vec3::new(10.0, 0.0, 0.0), Vec3::ZERO, Vec3::new(10.0, 5.0, 0.0));
        assert!(matches!(r, Err(Error::InvalidReflection)));
    }

    #[test]
    fn occlusion_examples() {
        let w = wall(5.0);
        let p1 = Vec3::new(0.0, 0.0, 5.0);
        let p2 = Vec3::new(10.0, 0.0, 5.0);
        assert!(segment_occluded(p1, p2, &w, &HashSet::new()));
        let all: HashSet<usize> = [0, 1].into_iter().collect();
        assert!(!segment_occluded(p1, p2, &w, &all));
        assert!(!segment_occluded(p1, p2, &wall(20.0), &HashSet::new()));
    }

    #[test]
    fn endpoints_on_a_triangle_do_not_occlude() {
        let w = wall(5.0);
        let on_wall = Vec3::new(5.0, 0.0, 5.0);
        assert!(!segment_occluded(Vec3::new(0.0, 0.0, 5.0), on_wall, &w, &HashSet::new()));
    }

    fn arb_vec(scale: f64) -> impl Strategy<Value = Vec3> {
        (-scale..scale, -scale..scale, -scale..scale).prop_map(|(x, y, z)| Vec3::new(x, y, z))
    }

    fn arb_unit() -> impl Strategy<Value = Vec3> {
        arb_vec(1.0).prop_filter_map("zero", |v| (v.norm() > 1e-3).then(|| v.normalized().unwrap()))
    }

    proptest! {
        #[test]
        fn mirror_is_an_involution(p in arb_vec(100.0), q in arb_vec(100.0), n in arb_unit()) {
            let once = mirror_point(p, q, n).unwrap();
            let twice = mirror_point(once, q, n).unwrap();
            prop_assert!(twice.distance(p) <= 1e-9 * (1.0 + p.norm() + q.norm()));
            // Signed distance flips.
            prop_assert!((n.dot(once - q) + n.dot(p - q)).abs() <= 1e-9 * (1.0 + p.norm() + q.norm()));
        }

        #[test]
        fn mirror_is_an_isometry(a in arb_vec(100.0), b in arb_vec(100.0), q in arb_vec(100.0), n in arb_unit()) {
            let d0 = a.distance(b);
            let d1 = mirror_point(a, q, n).unwrap().distance(mirror_point(b, q, n).unwrap());
            prop_assert!((d0 - d1).abs() <= 1e-9 * (1.0 + d0));
        }

        #[test]
        fn reflection_satisfies_image_identity(
            plane_pt in arb_vec(50.0),
            n in arb_unit(),
            bs_off in arb_vec(50.0),
            ue_off in arb_vec(50.0),
        ) {
            // Put BS and UE strictly in front of the plane.
            let bs = plane_pt + bs_off + n * (bs_off.dot(n).abs() - bs_off.dot(n) + 1.0);
            let ue = plane_pt + ue_off + n * (ue_off.dot(n).abs() - ue_off.dot(n) + 1.0);
            let vbs = mirror_point(bs, plane_pt, n).unwrap();
            let r = reflection_point(vbs, bs, ue).unwrap();
            let scale = 1.0 + bs.norm() + ue.norm() + plane_pt.norm();
            prop_assert!(n.dot(r - plane_pt).abs() <= 1e-9 * scale);
            let lhs = r.distance(bs) + r.distance(ue);
            prop_assert!((lhs - vbs.distance(ue)).abs() <= 1e-9 * scale);
        }
    }
}
