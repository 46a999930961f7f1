use ndarray::Array2;
use num_complex::Complex64;

use super::{Face, FaceKind, Scene};
use crate::chan::{channel_from_paths, params_from_displacements, path_loss_free, wavenumber, ArrayConfig, PathParams};
use crate::geom::{mirror_point, Vec3};

/// Tolerance for a bounce point to count as inside its finite face (m).
const FACE_TOL: f64 = 1e-9;
/// Points closer than this to a face plane are not on either side of it.
const SIDE_EPS: f64 = 1e-9;

/// One exact specular path.
#[derive(Clone, Debug, PartialEq)]
pub struct TruePath {
    pub order: u32,
    /// BS, bounce points, UE.
    pub vertices: Vec<Vec3>,
    pub faces: Vec<FaceKind>,
    pub length: f64,
    /// Complex amplitude: loss-model magnitude, phase `−k·length`.
    pub gain: Complex64,
    /// Angles and ranges at both ends; `gain_mag = |gain|`.
    pub params: PathParams,
}

fn segments_clear(scene: &Scene, vertices: &[Vec3]) -> bool {
    vertices.windows(2).all(|w| !scene.segment_blocked(w[0], w[1]))
}

/// Intersection of segment `a → b` with the plane of `face`, if `a` and
/// `b` are strictly on opposite sides.
fn cross_plane(a: Vec3, b: Vec3, face: &Face) -> Option<Vec3> {
    let (da, db) = (face.signed_distance(a), face.signed_distance(b));
    if !(da * db < 0.0) {
        return None;
    }
    Some(a + (b - a) * (da / (da - db)))
}

fn make_path(
    order: u32,
    vertices: Vec<Vec3>,
    faces: Vec<&Face>,
    bs_cfg: &ArrayConfig,
    ue_cfg: &ArrayConfig,
    f_c: f64,
) -> Option<TruePath> {
    let length: f64 = vertices.windows(2).map(|w| w[0].distance(w[1])).sum();
    let n = vertices.len();
    let (bs, ue) = (vertices[0], vertices[n - 1]);
    let mut params = params_from_displacements(order, 0, vertices[1] - bs, vertices[n - 2] - ue, bs_cfg, ue_cfg);
    let mut pl = path_loss_free(f_c, length).ok()?;
    if order > 0 {
        let gamma = faces.iter().map(|f| f.gamma_db).sum::<f64>() / faces.len() as f64;
        pl += gamma + 10.0 * (order as f64).log10();
    }
    let mag = 10f64.powf(-pl / 20.0);
    params.gain_mag = mag;
    Some(TruePath {
        order,
        faces: faces.iter().map(|f| f.kind).collect(),
        vertices,
        length,
        gain: Complex64::from_polar(mag, -wavenumber(f_c) * length),
        params,
    })
}

/// Every LoS, single- and double-bounce path from `o_bs` to `o_ue` with
/// `order ≤ max_order`, sorted by `(order, length)`. A bounce must land
/// inside the finite face with both endpoints of the bounce on the face's
/// outer side, and every leg must avoid box interiors.
pub fn trace_paths(
    scene: &Scene,
    o_bs: Vec3,
    o_ue: Vec3,
    max_order: u32,
    bs_cfg: &ArrayConfig,
    ue_cfg: &ArrayConfig,
    f_c: f64,
) -> Vec<TruePath> {
    let faces = scene.faces();
    let mut out = Vec::new();
    if o_bs.distance(o_ue) > 0.0 && !scene.segment_blocked(o_bs, o_ue) {
        out.extend(make_path(0, vec![o_bs, o_ue], vec![], bs_cfg, ue_cfg, f_c));
    }
    let images: Vec<Option<Vec3>> = faces
        .iter()
        .map(|f| (f.signed_distance(o_bs) > SIDE_EPS).then(|| mirror_point(o_bs, f.origin, f.normal).ok()).flatten())
        .collect();
    if max_order >= 1 {
        for (f, img) in faces.iter().zip(&images) {
            let Some(img) = *img else { continue };
            let Some(p) = cross_plane(img, o_ue, f) else { continue };
            if !f.contains_planar(p, FACE_TOL) {
                continue;
            }
            let verts = vec![o_bs, p, o_ue];
            if segments_clear(scene, &verts) {
                out.extend(make_path(1, verts, vec![f], bs_cfg, ue_cfg, f_c));
            }
        }
    }
    if max_order >= 2 {
        for (i, f1) in faces.iter().enumerate() {
            let Some(img1) = images[i] else { continue };
            for (j, f2) in faces.iter().enumerate() {
                if i == j || f2.signed_distance(img1) <= SIDE_EPS {
                    continue;
                }
                let Ok(img2) = mirror_point(img1, f2.origin, f2.normal) else { continue };
                let Some(p2) = cross_plane(img2, o_ue, f2) else { continue };
                if !f2.contains_planar(p2, FACE_TOL) {
                    continue;
                }
                let Some(p1) = cross_plane(img1, p2, f1) else { continue };
                if !f1.contains_planar(p1, FACE_TOL) {
                    continue;
                }
                let verts = vec![o_bs, p1, p2, o_ue];
                if segments_clear(scene, &verts) {
                    out.extend(make_path(2, verts, vec![f1, f2], bs_cfg, ue_cfg, f_c));
                }
            }
        }
    }
    out.sort_by(|a, b| a.order.cmp(&b.order).then(a.length.total_cmp(&b.length)));
    for (k, p) in out.iter_mut().enumerate() {
        p.params.index = k as u32 + 1;
    }
    out
}

/// `√(N_BS N_UE) Σ g_l a_r a_tᴴ` with complex path gains; zero on outage.
pub fn ground_truth_channel(paths: &[TruePath], bs_cfg: &ArrayConfig, ue_cfg: &ArrayConfig, f_c: f64) -> Array2<Complex64> {
    channel_from_paths(paths.iter().map(|p| (&p.params, p.gain)), bs_cfg, ue_cfg, f_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::SceneBox;

    const FC: f64 = 40e9;

    fn cfgs() -> (ArrayConfig, ArrayConfig) {
        (ArrayConfig::half_wavelength(16, FC), ArrayConfig::half_wavelength(4, FC))
    }

    fn trace(scene: &Scene, bs: Vec3, ue: Vec3, order: u32) -> Vec<TruePath> {
        let (b, u) = cfgs();
        trace_paths(scene, bs, ue, order, &b, &u, FC)
    }

    fn check_specular(p: &TruePath, scene: &Scene) {
        let faces = scene.faces();
        for (k, kind) in p.faces.iter().enumerate() {
            let f = faces.iter().find(|f| f.kind == *kind).unwrap();
            let (a, q, b) = (p.vertices[k], p.vertices[k + 1], p.vertices[k + 2]);
            assert!(f.signed_distance(q).abs() < 1e-9);
            assert!(f.contains_planar(q, 1e-6));
            let (din, dout) = ((q - a).normalized().unwrap(), (b - q).normalized().unwrap());
            let refl = din - f.normal * (2.0 * din.dot(f.normal));
            assert!((refl - dout).norm() < 1e-9);
        }
    }

    #[test]
    fn two_ray_open_scene() {
        let scene = Scene::new(0.0, [-100.0, -100.0, 100.0, 100.0], vec![]);
        let (bs, ue) = (Vec3::new(0.0, 0.0, 4.0), Vec3::new(50.0, 0.0, 1.5));
        let paths = trace(&scene, bs, ue, 2);
        assert_eq!(paths.len(), 2);
        assert_eq!(paths[0].order, 0);
        assert_eq!(paths[1].faces, vec![FaceKind::Ground]);
        assert!((paths[0].length - bs.distance(ue)).abs() < 1e-12);
        assert!((paths[1].length - Vec3::new(0.0, 0.0, -4.0).distance(ue)).abs() < 1e-9);
        let phase = Complex64::from_polar(1.0, -wavenumber(FC) * paths[1].length);
        assert!((paths[1].gain / paths[1].gain.norm() - phase).norm() < 1e-9);
        check_specular(&paths[1], &scene);
    }

    #[test]
    fn ue_behind_box_has_no_los() {
        let scene = Scene::new(0.0, [-100.0, -100.0, 100.0, 100.0], vec![SceneBox::new([20.0, -10.0, 0.0], [30.0, 10.0, 20.0], 10.0)]);
        let paths = trace(&scene, Vec3::new(0.0, 0.0, 4.0), Vec3::new(50.0, 0.0, 1.5), 2);
        assert!(paths.iter().all(|p| p.order > 0));
        for p in &paths {
            check_specular(p, &scene);
        }
    }

    #[test]
    fn single_wall_matches_fermat_search() {
        // A thin box whose −x face at x = 20 spans y∈[0,10], z∈[0,8].
        let scene = Scene::new(0.0, [-100.0, -100.0, 100.0, 100.0], vec![SceneBox::new([20.0, 0.0, 0.0], [21.0, 10.0, 8.0], 10.0)]);
        let bs = Vec3::new(0.0, 0.0, 4.0);
        let wall = scene.box_faces()[0];
        for ue in [Vec3::new(5.0, 12.0, 1.5), Vec3::new(10.0, 30.0, 1.5), Vec3::new(2.0, -20.0, 1.5)] {
            // Brute-force the shortest BS → wall → UE route over a fine grid.
            let mut best = (f64::INFINITY, Vec3::ZERO);
            let n = 400;
            for a in 0..=n {
                for b in 0..=n {
                    let q = wall.point_at(a as f64 / n as f64, b as f64 / n as f64);
                    let l = bs.distance(q) + q.distance(ue);
                    if l < best.0 {
                        best = (l, q);
                    }
                }
            }
            let interior = wall.contains_planar(best.1, -0.05);
            let paths = trace(&scene, bs, ue, 1);
            let wall_path = paths.iter().find(|p| p.faces == vec![wall.kind]);
            assert_eq!(wall_path.is_some(), interior, "ue {ue}");
            if let Some(p) = wall_path {
                assert!((p.length - best.0).abs() < 1e-3);
                assert!(p.vertices[1].distance(best.1) < 0.1);
            }
        }
    }

    #[test]
    fn second_order_paths_obey_specular_law() {
        let scene = Scene::new(
            0.0,
            [-100.0, -100.0, 100.0, 100.0],
            vec![
                SceneBox::new([-30.0, 15.0, 0.0], [30.0, 25.0, 20.0], 10.0),
                SceneBox::new([-30.0, -25.0, 0.0], [30.0, -15.0, 20.0], 10.0),
            ],
        );
        let paths = trace(&scene, Vec3::new(-10.0, 0.0, 4.0), Vec3::new(12.0, 3.0, 1.5), 2);
        let second: Vec<&TruePath> = paths.iter().filter(|p| p.order == 2).collect();
        assert!(!second.is_empty());
        for p in &paths {
            check_specular(p, &scene);
        }
        // Sorted by (order, length).
        for w in paths.windows(2) {
            assert!((w[0].order, w[0].length) <= (w[1].order, w[1].length));
        }
    }

    #[test]
    fn single_path_channel_norm() {
        let scene = Scene::new(0.0, [-100.0, -100.0, 100.0, 100.0], vec![]);
        let (b, u) = cfgs();
        let paths = trace(&scene, Vec3::new(0.0, 0.0, 4.0), Vec3::new(30.0, 5.0, 1.5), 0);
        assert_eq!(paths.len(), 1);
        let h = ground_truth_channel(&paths, &b, &u, FC);
        let frob = h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        assert!((frob - 8.0 * paths[0].gain.norm()).abs() < 1e-12 * frob);
        assert!(ground_truth_channel(&[], &b, &u, FC).iter().all(|z| z.norm() == 0.0));
    }
}
