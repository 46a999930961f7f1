//! Near-field polar-domain codebooks.
//!
//! Angles are sampled uniformly in the direction cosine along the array
//! axis, `s_k = −1 + 2k/N`. At each angle the range is sampled uniformly in
//! 1/r between a far ring (effectively infinite range) and `r_min`, with as
//! few rings as keep the correlation between adjacent rings at or above
//! `min_correlation`.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{steering_from_sine, ArrayConfig};
use crate::error::{Error, Result};

/// Range sampling rule.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RingSpec {
    /// Closest sampled range (m).
    pub r_min: f64,
    /// The far ring sits at `far_factor × Rayleigh distance` (at least `r_min`).
    pub far_factor: f64,
    /// Required correlation between adjacent rings at the same angle.
    pub min_correlation: f64,
    /// Upper bound on rings per angle; 1 gives a far-field codebook.
    pub max_rings: usize,
}

impl Default for RingSpec {
    fn default() -> Self {
        Self { r_min: 3.0, far_factor: 10.0, min_correlation: 0.95, max_rings: 64 }
    }
}

impl RingSpec {
    pub fn far_field_only() -> Self {
        Self { max_rings: 1, ..Self::default() }
    }
}

/// Annotation of one codebook column.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Codeword {
    /// Direction cosine along the array axis.
    pub sine: f64,
    /// Focus range (m).
    pub distance: f64,
}

/// `N × M` matrix of unit-norm, constant-modulus codewords.
#[derive(Clone, Debug)]
pub struct Codebook {
    pub matrix: Array2<Complex64>,
    pub codewords: Vec<Codeword>,
}

impl Codebook {
    pub fn n_antennas(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn len(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn column(&self, b: usize) -> ndarray::ArrayView1<'_, Complex64> {
        self.matrix.column(b)
    }
}

fn correlation(a: &Array1<Complex64>, b: &Array1<Complex64>) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<Complex64>().norm()
}

fn ring_distances(r_min: f64, r_far: f64, rings: usize) -> Vec<f64> {
    if rings == 1 {
        return vec![r_far];
    }
    let (g_far, g_near) = (1.0 / r_far, 1.0 / r_min);
    (0..rings)
        .map(|j| 1.0 / (g_far + (g_near - g_far) * j as f64 / (rings - 1) as f64))
        .collect()
}

/// Builds the polar codebook for `cfg` at carrier `f_c`.
pub fn build_polar_codebook(cfg: &ArrayConfig, f_c: f64, rings: &RingSpec) -> Result<Codebook> {
    cfg.validate()?;
    if !(rings.r_min > 0.0) || rings.max_rings < 1 {
        return Err(Error::Domain(format!("invalid ring spec {rings:?}")));
    }
    let n = cfg.n_elements;
    let r_far = (rings.far_factor * cfg.rayleigh_distance(f_c)).max(rings.r_min);
    let mut columns: Vec<Array1<Complex64>> = Vec::new();
    let mut codewords = Vec::new();
    for k in 0..n {
        let s = -1.0 + 2.0 * k as f64 / n as f64;
        // Smallest ring count whose adjacent rings stay correlated. Uniform
        // 1/r spacing makes all adjacent pairs alike, so the first pair is
        // representative.
        let mut count = 1;
        loop {
            if count >= rings.max_rings {
                count = rings.max_rings;
                break;
            }
            let ds = if count == 1 { vec![r_far, rings.r_min] } else { ring_distances(rings.r_min, r_far, count) };
            let a = steering_from_sine(s, ds[0], cfg, f_c);
            let b = steering_from_sine(s, ds[1], cfg, f_c);
            if correlation(&a, &b) >= rings.min_correlation {
                break;
            }
            count += 1;
        }
        for r in ring_distances(rings.r_min, r_far, count) {
            columns.push(steering_from_sine(s, r, cfg, f_c));
            codewords.push(Codeword { sine: s, distance: r });
        }
    }
    let m = columns.len();
    let matrix = Array2::from_shape_fn((n, m), |(i, j)| columns[j][i]);
    Ok(Codebook { matrix, codewords })
}

/// Writes the codebook in long form: `column,sine,distance,element,re,im`.
pub fn write_codebook_csv(cb: &Codebook, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    let mut w = std::io::BufWriter::new(std::fs::File::create(path).map_err(io)?);
    writeln!(w, "column,sine,distance,element,re,im").map_err(io)?;
    for (j, cw) in cb.codewords.iter().enumerate() {
        for (i, z) in cb.matrix.column(j).iter().enumerate() {
            writeln!(w, "{j},{},{},{i},{},{}", cw.sine, cw.distance, z.re, z.im).map_err(io)?;
        }
    }
    w.flush().map_err(io)
}
