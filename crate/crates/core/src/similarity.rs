//! Spectrum scoring kernels.
//!
//! [`modified_cosine`] pairs peaks either directly (equal m/z within the
//! fragment tolerance) or shifted by the precursor mass difference, then
//! accepts pairs greedily from the largest intensity product down, each
//! peak being used at most once.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{EmbeddingVector, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "value")]
pub enum Tolerance {
    /// Absolute tolerance in Thomson.
    Absolute(f64),
    /// Relative tolerance in parts per million of the larger m/z.
    Ppm(f64),
}

impl Tolerance {
    #[inline]
    fn allows(self, mz_a: f64, mz_b: f64, delta: f64) -> bool {
        match self {
            Tolerance::Absolute(t) => delta.abs() <= t,
            Tolerance::Ppm(ppm) => delta.abs() <= ppm * 1e-6 * mz_a.max(mz_b),
        }
    }

    /// Half-width of a search window around `mz` that contains every value
    /// `allows` could accept. Slightly generous; callers filter exactly.
    #[inline]
    fn search_halfwidth(self, mz: f64) -> f64 {
        match self {
            Tolerance::Absolute(t) => t * (1.0 + 1e-9) + 1e-12,
            Tolerance::Ppm(ppm) => {
                let r = ppm * 1e-6;
                mz.abs() * r / (1.0 - r).max(1e-12) * (1.0 + 1e-9) + 1e-12
            }
        }
    }

    fn is_valid(self) -> bool {
        match self {
            Tolerance::Absolute(t) | Tolerance::Ppm(t) => t.is_finite() && t > 0.0,
        }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::Absolute(0.01)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CosineConfig {
    pub tolerance: Tolerance,
    pub intensity_power: f64,
}

impl Default for CosineConfig {
    fn default() -> Self {
        CosineConfig {
            tolerance: Tolerance::default(),
            intensity_power: 1.0,
        }
    }
}

impl CosineConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.tolerance.is_valid() {
            return Err(Error::invalid("fragment tolerance must be positive"));
        }
        if !(self.intensity_power.is_finite() && self.intensity_power > 0.0) {
            return Err(Error::invalid("intensity power must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchKind {
    Direct,
    Shifted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PeakMatch {
    pub index_a: usize,
    pub index_b: usize,
    pub kind: MatchKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SimilarityScore {
    pub score: f64,
    pub n_matched: usize,
}

fn weights(s: &Spectrum, power: f64) -> Result<Vec<f64>> {
    if !s.has_signal() {
        return Err(Error::DegenerateSpectrum(s.id.clone()));
    }
    Ok(s.peaks
        .iter()
        .map(|p| {
            if power == 1.0 {
                p.intensity
            } else {
                p.intensity.powf(power)
            }
        })
        .collect())
}

fn norm(w: &[f64]) -> f64 {
    w.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Index range of peaks in `s` (sorted by m/z) with m/z in `[lo, hi]`.
fn peak_range(s: &Spectrum, lo: f64, hi: f64) -> std::ops::Range<usize> {
    let start = s.peaks.partition_point(|p| p.mz < lo);
    let end = s.peaks.partition_point(|p| p.mz <= hi);
    start..end.max(start)
}

/// All `(i, j)` pairs satisfying the direct or the shifted condition, one
/// entry per pair. A pair satisfying both is reported as direct.
pub fn candidate_pairs(a: &Spectrum, b: &Spectrum, tol: Tolerance) -> Vec<PeakMatch> {
    let shift = b.precursor_mz - a.precursor_mz;
    let mut out = Vec::new();
    for (i, pa) in a.peaks.iter().enumerate() {
        let hw = tol.search_halfwidth(pa.mz);
        let direct = peak_range(b, pa.mz - hw, pa.mz + hw);
        for j in direct.clone() {
            let mb = b.peaks[j].mz;
            if tol.allows(pa.mz, mb, pa.mz - mb) {
                out.push(PeakMatch {
                    index_a: i,
                    index_b: j,
                    kind: MatchKind::Direct,
                });
            }
        }
        if shift == 0.0 {
            continue;
        }
        let target = pa.mz + shift;
        let hw = tol.search_halfwidth(target.abs().max(pa.mz));
        for j in peak_range(b, target - hw, target + hw) {
            let mb = b.peaks[j].mz;
            if tol.allows(pa.mz, mb, pa.mz - mb + shift) {
                let is_direct = direct.contains(&j) && tol.allows(pa.mz, mb, pa.mz - mb);
                if !is_direct {
                    out.push(PeakMatch {
                        index_a: i,
                        index_b: j,
                        kind: MatchKind::Shifted,
                    });
                }
            }
        }
    }
    out
}

/// Modified cosine with the accepted peak pairing.
pub fn modified_cosine_matches(
    a: &Spectrum,
    b: &Spectrum,
    cfg: &CosineConfig,
) -> Result<(SimilarityScore, Vec<PeakMatch>)> {
    let wa = weights(a, cfg.intensity_power)?;
    let wb = weights(b, cfg.intensity_power)?;

    let mut candidates: Vec<(f64, PeakMatch)> = candidate_pairs(a, b, cfg.tolerance)
        .into_iter()
        .map(|m| (wa[m.index_a] * wb[m.index_b], m))
        .filter(|(w, _)| *w > 0.0)
        .collect();
    candidates.sort_by(|(wx, x), (wy, y)| {
        wy.total_cmp(wx)
            .then(x.index_a.cmp(&y.index_a))
            .then(x.index_b.cmp(&y.index_b))
    });

    let mut used_a = vec![false; wa.len()];
    let mut used_b = vec![false; wb.len()];
    let mut total = 0.0;
    let mut accepted = Vec::new();
    for (w, m) in candidates {
        if used_a[m.index_a] || used_b[m.index_b] {
            continue;
        }
        used_a[m.index_a] = true;
        used_b[m.index_b] = true;
        total += w;
        accepted.push(m);
    }

    let score = if accepted.is_empty() {
        0.0
    } else {
        (total / (norm(&wa) * norm(&wb))).clamp(0.0, 1.0)
    };
    Ok((
        SimilarityScore {
            score,
            n_matched: accepted.len(),
        },
        accepted,
    ))
}

pub fn modified_cosine(a: &Spectrum, b: &Spectrum, cfg: &CosineConfig) -> Result<SimilarityScore> {
    modified_cosine_matches(a, b, cfg).map(|(s, _)| s)
}

/// Cosine of the angle between two embeddings.
pub fn cosine_embedding(u: &EmbeddingVector, v: &EmbeddingVector) -> Result<f64> {
    if u.dim() != v.dim() {
        return Err(Error::invalid(format!(
            "embedding dimensions differ: {} vs {}",
            u.dim(),
            v.dim()
        )));
    }
    let (nu, nv) = (u.norm(), v.norm());
    if !(nu > 0.0 && nv > 0.0) {
        return Err(Error::invalid("zero-norm embedding"));
    }
    let dot: f64 = u.values().iter().zip(v.values()).map(|(x, y)| x * y).sum();
    Ok((dot / (nu * nv)).clamp(-1.0, 1.0))
}
