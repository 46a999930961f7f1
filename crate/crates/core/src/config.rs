//! Experiment configuration. Every field has a default; a config file
//! only lists what it changes. Unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::chan::RingSpec;
use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::mesh::MeshParams;
use crate::vbs::VbsParams;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    /// The fixed street layout of [`crate::oracle::Scene::urban`].
    #[default]
    Urban,
    /// Seeded random box world inside `region`.
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Carrier frequency (Hz).
    pub f_c: f64,
    /// Bandwidth (Hz).
    pub w: f64,
    pub bs_position: [f64; 3],
    pub ue_height: f64,
    pub p_t_dbm: f64,
    pub n_0_dbm_hz: f64,
    /// Reflection loss used by the coarse channel (dB).
    pub gamma_db: f64,
    /// Grid cells pooled per UE.
    pub k: usize,
    pub d_x: usize,
    pub d_y: usize,
    pub noise_sigma: f64,
    pub drop_rate: f64,
    /// `[N_BS, N_UE]` pairs to sweep.
    pub antennas: Vec<[usize; 2]>,
    pub s_list: Vec<usize>,
    pub seed: u64,
    pub n_ue: usize,

    pub scene: SceneKind,
    /// Used by random scenes and as the grid bounds.
    pub region: [f64; 4],
    pub n_boxes: usize,
    /// LiDAR points per square metre.
    pub scan_density: f64,
    pub sor_k: usize,
    pub sor_std_ratio: f64,
    /// Points below `ground + ground_band` are treated as ground.
    pub ground_band: f64,
    /// Voxel edge for object separation (m).
    pub object_voxel: f64,
    pub object_min_cluster_size: usize,
    pub object_min_samples: usize,
    pub mesh: MeshParams,
    pub vbs: VbsParams,
    pub rings: RingSpec,
    pub oracle_max_order: u32,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            f_c: 40e9,
            w: 500e6,
            bs_position: [140.0, 60.0, 4.0],
            ue_height: 1.5,
            p_t_dbm: 40.0,
            n_0_dbm_hz: -174.0,
            gamma_db: 10.0,
            k: 3,
            d_x: 40,
            d_y: 40,
            noise_sigma: 0.05,
            drop_rate: 0.05,
            antennas: vec![[64, 8], [128, 8]],
            s_list: (1..=10).collect(),
            seed: 0,
            n_ue: 200,
            scene: SceneKind::Urban,
            region: [0.0, 0.0, 160.0, 120.0],
            n_boxes: 8,
            scan_density: 5.0,
            sor_k: 8,
            sor_std_ratio: 3.0,
            ground_band: 0.3,
            object_voxel: 1.0,
            object_min_cluster_size: 50,
            object_min_samples: 10,
            mesh: MeshParams::default(),
            vbs: VbsParams::default(),
            rings: RingSpec::default(),
            oracle_max_order: 2,
        }
    }
}

impl ExperimentConfig {
    pub fn bs(&self) -> Vec3 {
        self.bs_position.into()
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        let positive = [
            ("f_c", self.f_c),
            ("w", self.w),
            ("ue_height", self.ue_height),
            ("scan_density", self.scan_density),
            ("object_voxel", self.object_voxel),
            ("sor_std_ratio", self.sor_std_ratio),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("`{name}` must be positive, got {v}"));
            }
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(format!("`noise_sigma` must be non-negative, got {}", self.noise_sigma));
        }
        if !(0.0..1.0).contains(&self.drop_rate) {
            return Err(format!("`drop_rate` must be in [0, 1), got {}", self.drop_rate));
        }
        let counts = [("k", self.k), ("d_x", self.d_x), ("d_y", self.d_y), ("n_ue", self.n_ue), ("sor_k", self.sor_k)];
        for (name, v) in counts {
            if v == 0 {
                return Err(format!("`{name}` must be at least 1"));
            }
        }
        if self.antennas.is_empty() || self.antennas.iter().any(|a| a[0] == 0 || a[1] == 0) {
            return Err("`antennas` needs at least one [N_BS, N_UE] pair of positive sizes".into());
        }
        if self.s_list.is_empty() || self.s_list.contains(&0) {
            return Err("`s_list` needs positive entries".into());
        }
        let [x0, y0, x1, y1] = self.region;
        if !(x1 > x0 && y1 > y0) {
            return Err(format!("`region` is empty: {:?}", self.region));
        }
        if self.oracle_max_order > 2 {
            return Err("`oracle_max_order` must be at most 2".into());
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate().map_err(Error::Config)?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }
}
