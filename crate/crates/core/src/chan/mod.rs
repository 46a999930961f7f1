//! Coarse channel reconstruction from VBS geometry.
//!
//! A VBS record plus the BS and UE positions fix the angles and segment
//! lengths of one specular path; an empirical path-loss model supplies its
//! magnitude. Summing near-field steering-vector outer products over the
//! VBSs serving a UE gives the coarse channel Ĥ used to rank beam pairs.

mod codebook;

use std::collections::BTreeSet;
use std::f64::consts::PI;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use codebook::{build_polar_codebook, write_codebook_csv, Codebook, Codeword, RingSpec};

use crate::error::{Error, Result};
use crate::geom::{reflection_point_param, Vec3};
use crate::vbs::{VbsRecord, VbsStore};

/// Speed of light (m/s).
pub const C: f64 = 299_792_458.0;

pub fn wavelength(f_c: f64) -> f64 {
    C / f_c
}

pub fn wavenumber(f_c: f64) -> f64 {
    2.0 * PI * f_c / C
}

/// Uniform linear array along the global y axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    pub n_elements: usize,
    /// Element spacing (m).
    pub spacing: f64,
    /// Azimuth offset Δφ added to geometric azimuths (rad).
    #[serde(default)]
    pub az_offset: f64,
    /// Elevation offset Δψ added to geometric elevations (rad).
    #[serde(default)]
    pub el_offset: f64,
}

impl ArrayConfig {
    /// Half-wavelength ULA without orientation offsets.
    pub fn half_wavelength(n_elements: usize, f_c: f64) -> Self {
        Self { n_elements, spacing: wavelength(f_c) / 2.0, az_offset: 0.0, el_offset: 0.0 }
    }

    pub fn aperture(&self) -> f64 {
        (self.n_elements.max(1) - 1) as f64 * self.spacing
    }

    /// Rayleigh distance 2D²/λ.
    pub fn rayleigh_distance(&self, f_c: f64) -> f64 {
        2.0 * self.aperture().powi(2) / wavelength(f_c)
    }

    fn validate(&self) -> Result<()> {
        if self.n_elements < 1 || !(self.spacing > 0.0) {
            return Err(Error::Domain(format!("invalid array {self:?}")));
        }
        Ok(())
    }
}

/// Geometry and magnitude of one propagation path.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathParams {
    pub order: u32,
    pub index: u32,
    /// Azimuth / elevation of arrival at the UE (rad).
    pub aoa_az: f64,
    pub aoa_el: f64,
    /// Azimuth / elevation of departure at the BS (rad).
    pub aod_az: f64,
    pub aod_el: f64,
    /// UE to last interaction point (m).
    pub r_rx: f64,
    /// BS to first interaction point (m).
    pub r_tx: f64,
    /// Linear amplitude.
    pub gain_mag: f64,
}

/// `(azimuth, elevation)` of displacement `p`, plus the array offsets.
/// Azimuth uses the four-quadrant arctangent.
pub fn direction_angles(p: Vec3, cfg: &ArrayConfig) -> (f64, f64) {
    let az = p.y.atan2(p.x) + cfg.az_offset;
    let el = (p.z / p.norm()).clamp(-1.0, 1.0).acos() + cfg.el_offset;
    (az, el)
}

/// Path parameters from the two displacement vectors seen at each end:
/// `p_bs` points from the BS towards its first interaction, `p_ue` from the
/// UE towards its last one.
pub fn params_from_displacements(
    order: u32,
    index: u32,
    p_bs: Vec3,
    p_ue: Vec3,
    bs_cfg: &ArrayConfig,
    ue_cfg: &ArrayConfig,
) -> PathParams {
    let (aod_az, aod_el) = direction_angles(p_bs, bs_cfg);
    let (aoa_az, aoa_el) = direction_angles(p_ue, ue_cfg);
    PathParams { order, index, aoa_az, aoa_el, aod_az, aod_el, r_rx: p_ue.norm(), r_tx: p_bs.norm(), gain_mag: 0.0 }
}

/// Geometric part of the path associated with `record` (gain left at 0).
/// Returns `None` when the record does not yield a physical path for this
/// UE: grazing geometry, or a reflection point outside the VBS→UE segment.
pub fn path_params(
    record: &VbsRecord,
    o_bs: Vec3,
    o_ue: Vec3,
    bs_cfg: &ArrayConfig,
    ue_cfg: &ArrayConfig,
) -> Option<PathParams> {
    match record.order {
        0 => {
            let p_bs = o_ue - o_bs;
            if p_bs.norm() <= 0.0 {
                return None;
            }
            let mut p = params_from_displacements(0, record.index, p_bs, o_bs - o_ue, bs_cfg, ue_cfg);
            p.r_rx = p.r_tx;
            Some(p)
        }
        1 => {
            let (o_ref, s) = reflection_point_param(record.location, o_bs, o_ue).ok()?;
            if !(s > 0.0 && s < 1.0) {
                return None;
            }
            let (p_bs, p_ue) = (o_ref - o_bs, o_ref - o_ue);
            if p_bs.norm() <= 0.0 || p_ue.norm() <= 0.0 {
                return None;
            }
            Some(params_from_displacements(1, record.index, p_bs, p_ue, bs_cfg, ue_cfg))
        }
        _ => None,
    }
}

/// Free-space path loss in dB.
pub fn path_loss_free(f_c: f64, d: f64) -> Result<f64> {
    if !(d > 0.0) || !(f_c > 0.0) {
        return Err(Error::Domain(format!("path loss needs d > 0 and f_c > 0 (d = {d}, f_c = {f_c})")));
    }
    Ok(20.0 * (4.0 * PI * f_c / C).log10() + 20.0 * d.log10())
}

/// Path loss of a `u`-bounce path with per-bounce coefficient `gamma_db`.
pub fn path_loss_reflect(f_c: f64, d: f64, u: u32, gamma_db: f64) -> Result<f64> {
    if u < 1 {
        return Err(Error::Domain("reflection order must be at least 1".into()));
    }
    Ok(path_loss_free(f_c, d)? + gamma_db + 10.0 * (u as f64).log10())
}

/// Linear amplitude 10^(−PL/20) of a LoS (order 0) or single-bounce path.
pub fn path_gain(params: &PathParams, f_c: f64, gamma_db: f64) -> f64 {
    let pl = if params.order == 0 {
        path_loss_free(f_c, params.r_tx)
    } else {
        path_loss_reflect(f_c, params.r_rx + params.r_tx, 1, gamma_db)
    };
    pl.map_or(0.0, |pl| 10f64.powf(-pl / 20.0))
}

/// Near-field ULA steering vector. Element n is
/// `exp(j k (r_n − r)) / √N` with `r_n` the distance from element n
/// (offset `δ_n d` along the array axis) to the source at range `r`.
pub fn steering_vector(el: f64, az: f64, r: f64, cfg: &ArrayConfig, f_c: f64) -> Result<Array1<Complex64>> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("steering range must be positive, got {r}")));
    }
    cfg.validate()?;
    Ok(steering_from_sine(el.sin() * az.sin(), r, cfg, f_c))
}

/// Steering vector parameterised by the direction cosine along the array
/// axis (`sin ψ sin φ`).
pub(crate) fn steering_from_sine(s: f64, r: f64, cfg: &ArrayConfig, f_c: f64) -> Array1<Complex64> {
    let n = cfg.n_elements;
    let k = wavenumber(f_c);
    let amp = 1.0 / (n as f64).sqrt();
    let half = (n as f64 - 1.0) / 2.0;
    Array1::from_shape_fn(n, |i| {
        let x = (i as f64 - half) * cfg.spacing;
        let rn = (r * r + x * x - 2.0 * r * s * x).max(0.0).sqrt();
        Complex64::from_polar(amp, k * (rn - r))
    })
}

/// Channel `√(N_BS N_UE) Σ g_l a_r a_tᴴ` from per-path parameters and
/// complex gains. Returns an `N_UE × N_BS` matrix.
pub fn channel_from_paths<'a, I>(paths: I, bs_cfg: &ArrayConfig, ue_cfg: &ArrayConfig, f_c: f64) -> Array2<Complex64>
where
    I: IntoIterator<Item = (&'a PathParams, Complex64)>,
{
    let (nb, nu) = (bs_cfg.n_elements, ue_cfg.n_elements);
    let scale = ((nb * nu) as f64).sqrt();
    let mut h = Array2::<Complex64>::zeros((nu, nb));
    for (p, g) in paths {
        let a_r = steering_from_sine(p.aoa_el.sin() * p.aoa_az.sin(), p.r_rx, ue_cfg, f_c);
        let a_t = steering_from_sine(p.aod_el.sin() * p.aod_az.sin(), p.r_tx, bs_cfg, f_c);
        let g = g * scale;
        for (i, ar) in a_r.iter().enumerate() {
            let gi = g * ar;
            for (j, at) in a_t.iter().enumerate() {
                h[[i, j]] += gi * at.conj();
            }
        }
    }
    h
}

/// Coarse channel from magnitude-only path parameters.
pub fn coarse_channel(paths: &[PathParams], bs_cfg: &ArrayConfig, ue_cfg: &ArrayConfig, f_c: f64) -> Array2<Complex64> {
    channel_from_paths(paths.iter().map(|p| (p, Complex64::new(p.gain_mag, 0.0))), bs_cfg, ue_cfg, f_c)
}

/// VBS ids serving a UE: the union of the id sets of the `k` grid cells
/// whose centres are nearest to the UE in the grid plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ServingSet {
    pub ids: BTreeSet<usize>,
    /// UE lies outside the grid bounds.
    pub outside_grid: bool,
}

pub fn serving_vbs_set(o_ue: Vec3, store: &VbsStore, k: usize) -> Result<ServingSet> {
    if k < 1 {
        return Err(Error::Domain("K must be at least 1".into()));
    }
    let grid = &store.grid;
    let mut ids = BTreeSet::new();
    for cell in grid.nearest_cells(o_ue.x, o_ue.y, k) {
        ids.extend(grid.cells[cell].iter().copied());
    }
    Ok(ServingSet { ids, outside_grid: !grid.contains_xy(o_ue.x, o_ue.y) })
}

/// Parameters (with gains) of every serving VBS that yields a path.
pub fn serving_paths(
    serving: &BTreeSet<usize>,
    store: &VbsStore,
    o_ue: Vec3,
    bs_cfg: &ArrayConfig,
    ue_cfg: &ArrayConfig,
    f_c: f64,
    gamma_db: f64,
) -> Vec<PathParams> {
    serving
        .iter()
        .filter_map(|&id| store.records.get(id))
        .filter_map(|rec| path_params(rec, store.bs_location, o_ue, bs_cfg, ue_cfg))
        .map(|mut p| {
            p.gain_mag = path_gain(&p, f_c, gamma_db);
            p
        })
        .collect()
}

/// Coarse channel estimate for a UE.
#[derive(Clone, Debug)]
pub struct CoarseChannel {
    pub h: Array2<Complex64>,
    pub paths: Vec<PathParams>,
    /// False when no serving VBS produced a path.
    pub covered: bool,
}

/// Coarse channel Ĥ summed over the serving VBSs. An empty serving set (or
/// one where no VBS yields a path) gives the zero matrix and
/// `covered = false`.
#[allow(clippy::too_many_arguments)]
pub fn reconstruct_channel(
    serving: &BTreeSet<usize>,
    store: &VbsStore,
    o_ue: Vec3,
    bs_cfg: &ArrayConfig,
    ue_cfg: &ArrayConfig,
    f_c: f64,
    gamma_db: f64,
) -> CoarseChannel {
    let paths = serving_paths(serving, store, o_ue, bs_cfg, ue_cfg, f_c, gamma_db);
    let h = coarse_channel(&paths, bs_cfg, ue_cfg, f_c);
    CoarseChannel { covered: !paths.is_empty(), h, paths }
}

/// LoS-only path for a BS/UE pair, used by location-based alignment.
pub fn los_path(o_bs: Vec3, o_ue: Vec3, bs_cfg: &ArrayConfig, ue_cfg: &ArrayConfig, f_c: f64) -> Option<PathParams> {
    let rec = VbsRecord::bs(o_bs);
    let mut p = path_params(&rec, o_bs, o_ue, bs_cfg, ue_cfg)?;
    p.gain_mag = path_gain(&p, f_c, 0.0);
    Some(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const FC: f64 = 40e9;

    fn frob(h: &Array2<Complex64>) -> f64 {
        h.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    #[test]
    fn free_space_loss_values() {
        assert!((path_loss_free(FC, 1.0).unwrap() - 64.49).abs() < 0.01);
        assert!((path_loss_free(FC, 100.0).unwrap() - 104.49).abs() < 0.01);
        let d = path_loss_free(FC, 20.0).unwrap() - path_loss_free(FC, 10.0).unwrap();
        assert!((d - 20.0 * 2f64.log10()).abs() < 1e-12);
        assert!(path_loss_free(FC, 0.0).is_err());
        assert!(path_loss_free(FC, -1.0).is_err());
    }

    #[test]
    fn reflection_loss_values() {
        assert!((path_loss_reflect(FC, 100.0, 1, 10.0).unwrap() - 114.49).abs() < 0.01);
        let d = path_loss_reflect(FC, 100.0, 2, 10.0).unwrap() - path_loss_reflect(FC, 100.0, 1, 10.0).unwrap();
        assert!((d - 10.0 * 2f64.log10()).abs() < 1e-12);
        assert_eq!(path_loss_reflect(FC, 50.0, 1, 0.0).unwrap(), path_loss_free(FC, 50.0).unwrap());
        assert!(path_loss_reflect(FC, 50.0, 0, 10.0).is_err());
    }

    #[test]
    fn gains() {
        let mut p = PathParams {
            order: 0, index: 1, aoa_az: 0.0, aoa_el: 0.0, aod_az: 0.0, aod_el: 0.0,
            r_rx: 100.0, r_tx: 100.0, gain_mag: 0.0,
        };
        let los = path_gain(&p, FC, 10.0);
        assert!((los / 5.96e-6 - 1.0).abs() < 2e-3, "{los}");
        p.order = 1;
        p.r_rx = 40.0;
        p.r_tx = 60.0;
        let vlos = path_gain(&p, FC, 10.0);
        assert!((vlos / 1.89e-6 - 1.0).abs() < 3e-3, "{vlos}");
        assert!((los / vlos - 10f64.sqrt()).abs() < 1e-9);
        p.r_tx = 70.0;
        assert!(path_gain(&p, FC, 10.0) < vlos);
    }

    #[test]
    fn los_angles() {
        let cfg = ArrayConfig::half_wavelength(4, FC);
        let rec = VbsRecord::bs(Vec3::ZERO);
        let p = path_params(&rec, Vec3::ZERO, Vec3::new(10.0, 10.0, 0.0), &cfg, &cfg).unwrap();
        assert!((p.aod_az - PI / 4.0).abs() < 1e-12);
        assert!((p.aoa_az + 3.0 * PI / 4.0).abs() < 1e-12);
        assert!((p.aod_el - PI / 2.0).abs() < 1e-12);
        assert!((p.r_tx - 200f64.sqrt()).abs() < 1e-12);
        assert_eq!(p.r_tx, p.r_rx);
    }

    #[test]
    fn vlos_distances() {
        let cfg = ArrayConfig::half_wavelength(4, FC);
        let rec = VbsRecord { order: 1, index: 2, location: Vec3::new(10.0, 0.0, 0.0), triangle_ids: [0].into() };
        let p = path_params(&rec, Vec3::ZERO, Vec3::new(0.0, 10.0, 0.0), &cfg, &cfg).unwrap();
        assert!((p.r_tx - 50f64.sqrt()).abs() < 1e-12);
        assert!((p.r_rx - 50f64.sqrt()).abs() < 1e-12);
        // UE on the far side of the mirror: no path.
        assert!(path_params(&rec, Vec3::ZERO, Vec3::new(12.0, 1.0, 0.0), &cfg, &cfg).is_none());
    }

    #[test]
    fn steering_examples() {
        let one = steering_vector(1.0, 0.3, 5.0, &ArrayConfig::half_wavelength(1, FC), FC).unwrap();
        assert_eq!(one.len(), 1);
        assert!((one[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);

        let two = steering_vector(PI / 2.0, 0.0, 1e6, &ArrayConfig::half_wavelength(2, FC), FC).unwrap();
        for z in two.iter() {
            assert!(z.arg().abs() < 1e-6);
            assert!((z.norm() - 1.0 / 2f64.sqrt()).abs() < 1e-12);
        }
        assert!(steering_vector(0.0, 0.0, 0.0, &ArrayConfig::half_wavelength(2, FC), FC).is_err());
    }

    #[test]
    fn rank_one_channel_norm() {
        let (bs, ue) = (ArrayConfig::half_wavelength(16, FC), ArrayConfig::half_wavelength(4, FC));
        let p = los_path(Vec3::new(0.0, 0.0, 4.0), Vec3::new(30.0, 12.0, 1.5), &bs, &ue, FC).unwrap();
        let h = coarse_channel(&[p], &bs, &ue, FC);
        assert!((frob(&h) - 8.0 * p.gain_mag).abs() < 1e-12 * frob(&h));
        let uncovered = coarse_channel(&[], &bs, &ue, FC);
        assert_eq!(frob(&uncovered), 0.0);
    }

    #[test]
    fn orthogonal_paths_add_in_power() {
        // Far-field DFT directions s = 0 and s = 2/N are orthogonal on the
        // half-wavelength grid.
        let n = 8;
        let cfg = ArrayConfig::half_wavelength(n, FC);
        let far = 1e9;
        let mk = |s: f64, g: f64| PathParams {
            order: 0, index: 1, aoa_az: s.asin(), aoa_el: PI / 2.0, aod_az: s.asin(), aod_el: PI / 2.0,
            r_rx: far, r_tx: far, gain_mag: g,
        };
        let (p1, p2) = (mk(0.0, 2e-6), mk(2.0 / n as f64, 1e-6));
        let h = coarse_channel(&[p1, p2], &cfg, &cfg, FC);
        let expected = (n * n) as f64 * (4e-12 + 1e-12);
        assert!((frob(&h).powi(2) / expected - 1.0).abs() < 1e-6);
    }

    #[test]
    fn reversed_link_gives_conjugate_transpose() {
        let (a, b) = (ArrayConfig::half_wavelength(12, FC), ArrayConfig::half_wavelength(5, FC));
        let (x, y) = (Vec3::new(3.0, -2.0, 6.0), Vec3::new(25.0, 14.0, 1.5));
        let fwd = los_path(x, y, &a, &b, FC).unwrap();
        let rev = los_path(y, x, &b, &a, FC).unwrap();
        let h = coarse_channel(&[fwd], &a, &b, FC);
        let hr = coarse_channel(&[rev], &b, &a, FC);
        let ht = h.t().mapv(|z| z.conj());
        let diff: f64 = (&ht - &hr).iter().map(|z| z.norm()).fold(0.0, f64::max);
        assert!(diff < 1e-9 * frob(&h));
    }

    #[test]
    fn vlos_weaker_than_los_of_same_length() {
        let base = PathParams {
            order: 0, index: 1, aoa_az: 0.0, aoa_el: 0.0, aod_az: 0.0, aod_el: 0.0,
            r_rx: 37.0, r_tx: 37.0, gain_mag: 0.0,
        };
        let vlos = PathParams { order: 1, r_rx: 12.0, r_tx: 25.0, ..base };
        assert!(path_gain(&vlos, FC, 0.5) < path_gain(&base, FC, 0.5));
    }

    proptest! {
        #[test]
        fn steering_vectors_are_unit_norm(
            n in 1usize..64, el in 0.0..PI, az in -PI..PI, r in 0.5f64..500.0
        ) {
            let v = steering_vector(el, az, r, &ArrayConfig::half_wavelength(n, FC), FC).unwrap();
            let norm: f64 = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
            for z in v.iter() {
                prop_assert!((z.norm() - 1.0 / (n as f64).sqrt()).abs() < 1e-12);
            }
        }

        #[test]
        fn los_angles_are_antipodal(
            bx in -50.0f64..50.0, by in -50.0f64..50.0, bz in 0.0f64..20.0,
            ux in -50.0f64..50.0, uy in -50.0f64..50.0, uz in 0.0f64..3.0,
        ) {
            let cfg = ArrayConfig::half_wavelength(4, FC);
            let (bs, ue) = (Vec3::new(bx, by, bz), Vec3::new(ux, uy, uz));
            prop_assume!(bs.distance(ue) > 1e-3);
            let p = path_params(&VbsRecord::bs(bs), bs, ue, &cfg, &cfg).unwrap();
            let dir = |az: f64, el: f64| Vec3::new(el.sin() * az.cos(), el.sin() * az.sin(), el.cos());
            let sum = dir(p.aoa_az, p.aoa_el) + dir(p.aod_az, p.aod_el);
            prop_assert!(sum.norm() < 1e-9);
        }
    }
}
