//! Beam alignment: beamspace projection of an estimated channel, top-S
//! candidate selection, partial training against the true channel, and
//! the baselines it is compared with.
//!
//! Every method measures beam pairs with the same routine
//! ([`pair_gain`]), so a method that trains all pairs reproduces the
//! exhaustive optimum bit for bit.

use std::collections::HashMap;
use std::fmt;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::chan::{coarse_channel, los_path, reconstruct_channel, serving_vbs_set, ArrayConfig, Codebook};
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::oracle::CkmTable;
use crate::vbs::VbsStore;

/// Codebook column indices at each end.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BeamPair {
    pub b_bs: usize,
    pub b_ue: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    VbsBa,
    LocBa,
    RckmBa,
    Exhaustive,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::VbsBa, Method::LocBa, Method::RckmBa, Method::Exhaustive];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::VbsBa => "vbs-ba",
            Method::LocBa => "loc-ba",
            Method::RckmBa => "rckm-ba",
            Method::Exhaustive => "exhaustive",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one alignment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AlignmentResult {
    pub method: Method,
    pub pair: BeamPair,
    /// `|wᴴ H f|` on the true channel.
    pub gain: f64,
    pub se: f64,
    /// Candidate-set size requested.
    pub s: usize,
    /// Pairs actually measured.
    pub pairs_trained: usize,
    /// False when the estimate fell back to the LoS-only construction.
    pub covered: bool,
}

/// Transmit power, noise density and bandwidth, in SI units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkBudget {
    pub p_t_w: f64,
    pub n0_w_hz: f64,
    pub bandwidth_hz: f64,
}

impl LinkBudget {
    pub fn from_dbm(p_t_dbm: f64, n0_dbm_hz: f64, bandwidth_hz: f64) -> Self {
        Self { p_t_w: dbm_to_watts(p_t_dbm), n0_w_hz: dbm_to_watts(n0_dbm_hz), bandwidth_hz }
    }

    pub fn se(&self, gain: f64) -> f64 {
        spectral_efficiency(gain, self.p_t_w, self.n0_w_hz, self.bandwidth_hz)
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// `log2(1 + P_T g² / (N_0 W))`.
pub fn spectral_efficiency(gain: f64, p_t: f64, n0: f64, bandwidth: f64) -> f64 {
    (1.0 + p_t * gain * gain / (n0 * bandwidth)).log2()
}

fn check_dims(h: &Array2<Complex64>, u_bs: &Codebook, u_ue: &Codebook) -> Result<()> {
    if h.nrows() != u_ue.n_antennas() || h.ncols() != u_bs.n_antennas() {
        return Err(Error::Dimension(format!(
            "channel is {}×{}, codebooks expect {}×{}",
            h.nrows(),
            h.ncols(),
            u_ue.n_antennas(),
            u_bs.n_antennas()
        )));
    }
    Ok(())
}

/// `G = |U_UEᴴ H U_BS|`, an `M_UE × M_BS` matrix.
pub fn beamspace(h: &Array2<Complex64>, u_bs: &Codebook, u_ue: &Codebook) -> Result<Array2<f64>> {
    check_dims(h, u_bs, u_ue)?;
    let hu = h.dot(&u_bs.matrix);
    let uh = u_ue.matrix.t().mapv(|z| z.conj());
    Ok(uh.dot(&hu).mapv(|z| z.norm()))
}

/// The `s` largest entries of `g` in non-increasing order; ties go to the
/// smaller `(b_ue, b_bs)`.
pub fn top_s(g: &Array2<f64>, s: usize) -> Result<Vec<BeamPair>> {
    let total = g.len();
    if s < 1 || s > total {
        return Err(Error::Domain(format!("S must be in 1..={total}, got {s}")));
    }
    let m_bs = g.ncols();
    let flat = g.as_standard_layout();
    let vals = flat.as_slice().expect("standard layout");
    let mut idx: Vec<usize> = (0..total).collect();
    let cmp = |a: &usize, b: &usize| vals[*b].total_cmp(&vals[*a]).then(a.cmp(b));
    if s < total {
        idx.select_nth_unstable_by(s - 1, cmp);
        idx.truncate(s);
    }
    idx.sort_by(cmp);
    Ok(idx.into_iter().map(|i| BeamPair { b_ue: i / m_bs, b_bs: i % m_bs }).collect())
}

/// `H f` for one BS codeword.
fn apply_bs(h: &Array2<Complex64>, f: ndarray::ArrayView1<'_, Complex64>) -> Array1<Complex64> {
    h.dot(&f)
}

/// `|wᴴ (H f)|` given the precomputed `H f`.
fn project_ue(w: ndarray::ArrayView1<'_, Complex64>, hf: &Array1<Complex64>) -> f64 {
    w.iter().zip(hf).map(|(a, b)| a.conj() * b).sum::<Complex64>().norm()
}

/// Virtual channel gain `|wᴴ H f|` of one pair.
pub fn pair_gain(h: &Array2<Complex64>, pair: BeamPair, u_bs: &Codebook, u_ue: &Codebook) -> f64 {
    project_ue(u_ue.column(pair.b_ue), &apply_bs(h, u_bs.column(pair.b_bs)))
}

/// Measures every candidate on `h_true` and returns the best (first on
/// ties). `pairs_trained = candidates.len()`.
pub fn partial_training(
    h_true: &Array2<Complex64>,
    candidates: &[BeamPair],
    u_bs: &Codebook,
    u_ue: &Codebook,
) -> Result<(BeamPair, f64)> {
    check_dims(h_true, u_bs, u_ue)?;
    if candidates.is_empty() {
        return Err(Error::EmptyCandidates);
    }
    let mut cache: HashMap<usize, Array1<Complex64>> = HashMap::new();
    let mut best = (candidates[0], f64::NEG_INFINITY);
    for &c in candidates {
        if c.b_bs >= u_bs.len() || c.b_ue >= u_ue.len() {
            return Err(Error::Domain(format!("beam pair {c:?} out of range")));
        }
        let hf = cache.entry(c.b_bs).or_insert_with(|| apply_bs(h_true, u_bs.column(c.b_bs)));
        let g = project_ue(u_ue.column(c.b_ue), hf);
        if g > best.1 {
            best = (c, g);
        }
    }
    Ok(best)
}

/// Everything an alignment run needs besides the UE position and the true
/// channel.
#[derive(Clone, Debug)]
pub struct AlignSetup {
    pub bs_cfg: ArrayConfig,
    pub ue_cfg: ArrayConfig,
    pub u_bs: Codebook,
    pub u_ue: Codebook,
    pub f_c: f64,
    pub gamma_db: f64,
    /// Nearest grid cells pooled by VBS-BA.
    pub k: usize,
    pub budget: LinkBudget,
}

impl AlignSetup {
    pub fn n_pairs(&self) -> usize {
        self.u_bs.len() * self.u_ue.len()
    }

    fn finish(&self, method: Method, s: usize, cands: &[BeamPair], h_true: &Array2<Complex64>, covered: bool) -> Result<AlignmentResult> {
        let (pair, gain) = partial_training(h_true, cands, &self.u_bs, &self.u_ue)?;
        Ok(AlignmentResult { method, pair, gain, se: self.budget.se(gain), s, pairs_trained: cands.len(), covered })
    }

    /// LoS-only channel estimate between `o_bs` and `o_ue`.
    pub fn los_estimate(&self, o_bs: Vec3, o_ue: Vec3) -> Array2<Complex64> {
        let paths: Vec<_> = los_path(o_bs, o_ue, &self.bs_cfg, &self.ue_cfg, self.f_c).into_iter().collect();
        coarse_channel(&paths, &self.bs_cfg, &self.ue_cfg, self.f_c)
    }

    /// Ranked candidates from an estimate, falling back to the LoS-only
    /// estimate when it is identically zero. Returns `(ranking, covered)`.
    pub fn rank(&self, h_hat: &Array2<Complex64>, o_bs: Vec3, o_ue: Vec3, s: usize) -> Result<(Vec<BeamPair>, bool)> {
        let s = s.min(self.n_pairs());
        if h_hat.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            let g = beamspace(&self.los_estimate(o_bs, o_ue), &self.u_bs, &self.u_ue)?;
            return Ok((top_s(&g, s)?, false));
        }
        Ok((top_s(&beamspace(h_hat, &self.u_bs, &self.u_ue)?, s)?, true))
    }

    /// VBS-BA ranking: coarse channel from the VBSs serving the `k`
    /// nearest grid cells.
    pub fn rank_vbs(&self, store: &VbsStore, o_ue: Vec3, s: usize) -> Result<(Vec<BeamPair>, bool)> {
        let serving = serving_vbs_set(o_ue, store, self.k)?;
        let est = reconstruct_channel(&serving.ids, store, o_ue, &self.bs_cfg, &self.ue_cfg, self.f_c, self.gamma_db);
        self.rank(&est.h, store.bs_location, o_ue, s)
    }

    /// Loc-BA ranking: LoS path only.
    pub fn rank_loc(&self, o_bs: Vec3, o_ue: Vec3, s: usize) -> Result<(Vec<BeamPair>, bool)> {
        let (r, _) = self.rank(&self.los_estimate(o_bs, o_ue), o_bs, o_ue, s)?;
        Ok((r, true))
    }

    /// RCKM-BA ranking: stored path magnitudes of the nearest CKM cell.
    pub fn rank_rckm(&self, ckm: &CkmTable, o_ue: Vec3, s: usize) -> Result<(Vec<BeamPair>, bool)> {
        let h = coarse_channel(ckm.nearest(o_ue.x, o_ue.y), &self.bs_cfg, &self.ue_cfg, self.f_c);
        self.rank(&h, ckm.bs_location, o_ue, s)
    }

    /// Partial training on the first `s` entries of a ranking.
    pub fn train_prefix(
        &self,
        method: Method,
        ranking: &[BeamPair],
        s: usize,
        h_true: &Array2<Complex64>,
        covered: bool,
    ) -> Result<AlignmentResult> {
        self.finish(method, s, &ranking[..s.min(ranking.len())], h_true, covered)
    }
}

pub fn run_vbs_ba(store: &VbsStore, h_true: &Array2<Complex64>, o_ue: Vec3, setup: &AlignSetup, s: usize) -> Result<AlignmentResult> {
    let (r, covered) = setup.rank_vbs(store, o_ue, s)?;
    setup.finish(Method::VbsBa, s, &r, h_true, covered)
}

pub fn run_loc_ba(o_bs: Vec3, h_true: &Array2<Complex64>, o_ue: Vec3, setup: &AlignSetup, s: usize) -> Result<AlignmentResult> {
    let (r, covered) = setup.rank_loc(o_bs, o_ue, s)?;
    setup.finish(Method::LocBa, s, &r, h_true, covered)
}

pub fn run_rckm_ba(ckm: &CkmTable, h_true: &Array2<Complex64>, o_ue: Vec3, setup: &AlignSetup, s: usize) -> Result<AlignmentResult> {
    let (r, covered) = setup.rank_rckm(ckm, o_ue, s)?;
    setup.finish(Method::RckmBa, s, &r, h_true, covered)
}

/// Trains all `M_BS · M_UE` pairs.
pub fn run_exhaustive(h_true: &Array2<Complex64>, setup: &AlignSetup) -> Result<AlignmentResult> {
    let all: Vec<BeamPair> = (0..setup.u_ue.len())
        .flat_map(|b_ue| (0..setup.u_bs.len()).map(move |b_bs| BeamPair { b_bs, b_ue }))
        .collect();
    setup.finish(Method::Exhaustive, all.len(), &all, h_true, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chan::{build_polar_codebook, RingSpec};
    use proptest::prelude::*;

    const FC: f64 = 40e9;

    fn books(nb: usize, nu: usize) -> (Codebook, Codebook) {
        let rs = RingSpec::far_field_only();
        (
            build_polar_codebook(&ArrayConfig::half_wavelength(nb, FC), FC, &rs).unwrap(),
            build_polar_codebook(&ArrayConfig::half_wavelength(nu, FC), FC, &rs).unwrap(),
        )
    }

    fn outer(a: ndarray::ArrayView1<'_, Complex64>, b: ndarray::ArrayView1<'_, Complex64>) -> Array2<Complex64> {
        Array2::from_shape_fn((a.len(), b.len()), |(i, j)| a[i] * b[j].conj())
    }

    fn random_channel(nu: usize, nb: usize, seed: u64) -> Array2<Complex64> {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_fn((nu, nb), |_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn se_values() {
        assert_eq!(spectral_efficiency(0.0, 10.0, 1e-20, 5e8), 0.0);
        let n0 = dbm_to_watts(-174.0);
        let snr = 10.0 * 1e-10 / (n0 * 5e8);
        assert!((snr - 502.5).abs() < 0.5, "{snr}");
        let se = spectral_efficiency(1e-5, dbm_to_watts(40.0), n0, 5e8);
        assert!((se - 8.98).abs() < 0.01, "{se}");
        assert!(spectral_efficiency(2e-5, 10.0, n0, 5e8) > se);
    }

    #[test]
    fn matched_column_maximises_beamspace() {
        let (ub, uu) = books(16, 4);
        let h = outer(uu.column(2), ub.column(11));
        let g = beamspace(&h, &ub, &uu).unwrap();
        let best = top_s(&g, 1).unwrap()[0];
        assert_eq!(best, BeamPair { b_bs: 11, b_ue: 2 });
        let zero = Array2::zeros((4, 16));
        assert!(beamspace(&zero, &ub, &uu).unwrap().iter().all(|&x| x == 0.0));
        let rotated = h.mapv(|z| z * Complex64::from_polar(1.0, 0.7));
        let g2 = beamspace(&rotated, &ub, &uu).unwrap();
        assert!(g.iter().zip(&g2).all(|(a, b)| (a - b).abs() < 1e-12));
        assert!(beamspace(&Array2::zeros((3, 16)), &ub, &uu).is_err());
    }

    #[test]
    fn top_s_contract() {
        let g = Array2::from_shape_vec((2, 3), vec![1.0, 5.0, 5.0, 0.0, 2.0, 5.0]).unwrap();
        let all = top_s(&g, 6).unwrap();
        assert_eq!(all[0], BeamPair { b_ue: 0, b_bs: 1 });
        assert_eq!(all[1], BeamPair { b_ue: 0, b_bs: 2 });
        assert_eq!(all[2], BeamPair { b_ue: 1, b_bs: 2 });
        let mut sorted = all.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), 6);
        for s in 1..6 {
            assert_eq!(top_s(&g, s).unwrap(), all[..s]);
        }
        assert!(top_s(&g, 0).is_err());
        assert!(top_s(&g, 7).is_err());
    }

    #[test]
    fn partial_training_contract() {
        let (ub, uu) = books(8, 2);
        let h = random_channel(2, 8, 1);
        let all: Vec<BeamPair> = (0..2).flat_map(|u| (0..8).map(move |b| BeamPair { b_bs: b, b_ue: u })).collect();
        let (_, g_all) = partial_training(&h, &all, &ub, &uu).unwrap();
        // Brute force over all pairs with an independent formula.
        let brute = all
            .iter()
            .map(|p| {
                let w = uu.column(p.b_ue);
                let f = ub.column(p.b_bs);
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..2 {
                    for j in 0..8 {
                        acc += w[i].conj() * h[[i, j]] * f[j];
                    }
                }
                acc.norm()
            })
            .fold(0.0, f64::max);
        assert!((g_all - brute).abs() < 1e-12 * brute);
        let single = [BeamPair { b_bs: 3, b_ue: 1 }];
        assert_eq!(partial_training(&h, &single, &ub, &uu).unwrap().0, single[0]);
        assert!(matches!(partial_training(&h, &[], &ub, &uu), Err(Error::EmptyCandidates)));
    }

    #[test]
    fn full_s_on_true_channel_equals_exhaustive() {
        let (ub, uu) = books(8, 2);
        let setup = AlignSetup {
            bs_cfg: ArrayConfig::half_wavelength(8, FC),
            ue_cfg: ArrayConfig::half_wavelength(2, FC),
            u_bs: ub,
            u_ue: uu,
            f_c: FC,
            gamma_db: 10.0,
            k: 3,
            budget: LinkBudget::from_dbm(40.0, -174.0, 5e8),
        };
        let h = random_channel(2, 8, 2);
        let ex = run_exhaustive(&h, &setup).unwrap();
        let (rank, _) = setup.rank(&h, Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), setup.n_pairs()).unwrap();
        let full = setup.train_prefix(Method::VbsBa, &rank, setup.n_pairs(), &h, true).unwrap();
        assert_eq!(full.gain, ex.gain);
        assert_eq!(full.pairs_trained, 16);
        // With the true channel as estimate, S = 1 already finds the optimum.
        assert_eq!(setup.train_prefix(Method::VbsBa, &rank, 1, &h, true).unwrap().gain, ex.gain);
    }

    #[test]
    fn los_open_scene_s1_matches_exhaustive() {
        let (bs_cfg, ue_cfg) = (ArrayConfig::half_wavelength(16, FC), ArrayConfig::half_wavelength(4, FC));
        let setup = AlignSetup {
            u_bs: build_polar_codebook(&bs_cfg, FC, &RingSpec::default()).unwrap(),
            u_ue: build_polar_codebook(&ue_cfg, FC, &RingSpec::default()).unwrap(),
            bs_cfg,
            ue_cfg,
            f_c: FC,
            gamma_db: 10.0,
            k: 3,
            budget: LinkBudget::from_dbm(40.0, -174.0, 5e8),
        };
        let (bs, ue) = (Vec3::new(0.0, 0.0, 4.0), Vec3::new(40.0, 25.0, 1.5));
        // True channel: the same LoS path with a propagation phase.
        let p = los_path(bs, ue, &bs_cfg, &ue_cfg, FC).unwrap();
        let g = Complex64::from_polar(p.gain_mag, -1.234);
        let h = crate::chan::channel_from_paths([(&p, g)], &bs_cfg, &ue_cfg, FC);
        let loc = run_loc_ba(bs, &h, ue, &setup, 1).unwrap();
        let ex = run_exhaustive(&h, &setup).unwrap();
        assert_eq!(loc.gain, ex.gain);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn nested_prefixes_are_monotone(seed in 0u64..1000) {
            let (ub, uu) = books(8, 2);
            let h_hat = random_channel(2, 8, seed);
            let h = random_channel(2, 8, seed + 1);
            let g = beamspace(&h_hat, &ub, &uu).unwrap();
            let all = top_s(&g, 16).unwrap();
            let mut prev = 0.0;
            for s in 1..=16 {
                let (_, gain) = partial_training(&h, &all[..s], &ub, &uu).unwrap();
                prop_assert!(gain >= prev);
                prev = gain;
            }
        }
    }
}
