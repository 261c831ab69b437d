//! Core data model: peaks, spectra, analytes, the reference library and
//! embedding vectors.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Peak {
    pub mz: f64,
    pub intensity: f64,
}

impl Peak {
    pub fn new(mz: f64, intensity: f64) -> Self {
        Peak { mz, intensity }
    }
}

#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
    #[default]
    Unknown,
}

impl Polarity {
    pub fn as_str(self) -> &'static str {
        match self {
            Polarity::Positive => "positive",
            Polarity::Negative => "negative",
            Polarity::Unknown => "unknown",
        }
    }
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A centroided MS/MS spectrum.
///
/// Spectra built through [`Spectrum::new`] are canonical: peaks strictly
/// ascending in m/z, with coincident m/z values merged by summing their
/// intensities. Intensities stay in raw units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub id: String,
    pub precursor_mz: f64,
    #[serde(default)]
    pub polarity: Polarity,
    pub peaks: Vec<Peak>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sample_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub analyte_key: Option<String>,
}

impl Spectrum {
    pub fn new(
        id: impl Into<String>,
        precursor_mz: f64,
        polarity: Polarity,
        peaks: Vec<Peak>,
    ) -> Result<Self> {
        let mut s = Spectrum {
            id: id.into(),
            precursor_mz,
            polarity,
            peaks,
            sample_id: None,
            analyte_key: None,
        };
        s.canonicalize()?;
        Ok(s)
    }

    pub fn with_sample(mut self, sample_id: impl Into<String>) -> Self {
        self.sample_id = Some(sample_id.into());
        self
    }

    pub fn with_analyte(mut self, key2d: impl Into<String>) -> Self {
        self.analyte_key = Some(key2d.into());
        self
    }

    /// Validates values, sorts peaks and merges peaks sharing one m/z.
    pub fn canonicalize(&mut self) -> Result<()> {
        if !(self.precursor_mz.is_finite() && self.precursor_mz > 0.0) {
            return Err(self.invalid(format!(
                "precursor m/z {} is not positive",
                self.precursor_mz
            )));
        }
        if self.peaks.is_empty() {
            return Err(self.invalid("no peaks".into()));
        }
        for p in &self.peaks {
            if !(p.mz.is_finite() && p.mz > 0.0) {
                return Err(self.invalid(format!("peak m/z {} is not positive", p.mz)));
            }
            if !(p.intensity.is_finite() && p.intensity >= 0.0) {
                return Err(self.invalid(format!(
                    "peak intensity {} is negative or non-finite",
                    p.intensity
                )));
            }
        }
        self.peaks.sort_by(|a, b| a.mz.total_cmp(&b.mz));
        self.peaks.dedup_by(|next, kept| {
            if next.mz == kept.mz {
                kept.intensity += next.intensity;
                true
            } else {
                false
            }
        });
        Ok(())
    }

    pub fn is_canonical(&self) -> bool {
        self.peaks.windows(2).all(|w| w[0].mz < w[1].mz)
    }

    /// Total ion current.
    pub fn tic(&self) -> f64 {
        self.peaks.iter().map(|p| p.intensity).sum()
    }

    pub fn has_signal(&self) -> bool {
        self.peaks.iter().any(|p| p.intensity > 0.0)
    }

    fn invalid(&self, message: String) -> Error {
        Error::InvalidSpectrum {
            id: self.id.clone(),
            message,
        }
    }
}

/// Identity of a compound at 2D-structure resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnalyteRecord {
    pub key2d: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inchikey_full: Option<String>,
    pub smiles: String,
    pub registry_id: u64,
    #[serde(default)]
    pub name: String,
}

impl AnalyteRecord {
    pub fn validate(&self) -> Result<()> {
        let bad = |message: &str| Error::InvalidAnalyte {
            key2d: self.key2d.clone(),
            message: message.to_string(),
        };
        if !is_key2d(&self.key2d) {
            return Err(bad("key2d must be 14 uppercase letters"));
        }
        if let Some(full) = &self.inchikey_full {
            if full.len() != 27 || !full.is_char_boundary(14) || full[..14] != self.key2d {
                return Err(bad("full InChIKey does not start with key2d"));
            }
        }
        Ok(())
    }
}

pub fn is_key2d(s: &str) -> bool {
    s.len() == 14 && s.bytes().all(|b| b.is_ascii_uppercase())
}

/// Reference spectra grouped by analyte.
///
/// Maps are ordered so that iteration, and therefore every downstream
/// result, is deterministic.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ReferenceLibrary {
    pub analytes: BTreeMap<String, AnalyteRecord>,
    pub spectra: BTreeMap<String, Spectrum>,
    pub spectra_by_analyte: BTreeMap<String, Vec<String>>,
}

impl ReferenceLibrary {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts an analyte. A second record with the same key and the same
    /// structure merges into the first; a different structure is a conflict.
    pub fn add_analyte(&mut self, record: AnalyteRecord) -> Result<()> {
        record.validate()?;
        match self.analytes.get_mut(&record.key2d) {
            Some(existing) if existing.smiles != record.smiles => Err(Error::AnalyteConflict {
                key2d: record.key2d,
                existing: existing.smiles.clone(),
                incoming: record.smiles,
            }),
            Some(existing) => {
                if record.registry_id < existing.registry_id {
                    existing.registry_id = record.registry_id;
                }
                if existing.inchikey_full.is_none() {
                    existing.inchikey_full = record.inchikey_full;
                }
                if existing.name.is_empty() {
                    existing.name = record.name;
                }
                Ok(())
            }
            None => {
                self.spectra_by_analyte
                    .entry(record.key2d.clone())
                    .or_default();
                self.analytes.insert(record.key2d.clone(), record);
                Ok(())
            }
        }
    }

    /// Inserts a spectrum whose analyte is already present.
    pub fn add_spectrum(&mut self, spectrum: Spectrum) -> Result<()> {
        let key = match &spectrum.analyte_key {
            Some(k) if self.analytes.contains_key(k) => k.clone(),
            _ => {
                return Err(Error::Integrity {
                    spectrum_ids: vec![spectrum.id.clone()],
                })
            }
        };
        if self.spectra.contains_key(&spectrum.id) {
            return Err(Error::DuplicateSpectrum(spectrum.id));
        }
        self.spectra_by_analyte
            .entry(key)
            .or_default()
            .push(spectrum.id.clone());
        self.spectra.insert(spectrum.id.clone(), spectrum);
        Ok(())
    }

    pub fn contains_analyte(&self, key2d: &str) -> bool {
        self.analytes.contains_key(key2d)
    }

    pub fn n_analytes(&self) -> usize {
        self.analytes.len()
    }

    pub fn n_spectra(&self) -> usize {
        self.spectra.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectra.is_empty()
    }

    /// Spectra in analyte-major order (the manifest serialization order).
    pub fn spectra_in_order(&self) -> impl Iterator<Item = &Spectrum> {
        self.spectra_by_analyte
            .values()
            .flat_map(move |ids| ids.iter().map(move |id| &self.spectra[id]))
    }
}

/// Fixed-dimension real vector attached to a spectrum or a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EmbeddingVector(pub Vec<f64>);

impl EmbeddingVector {
    pub fn zeros(dim: usize) -> Self {
        EmbeddingVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }
}

impl From<Vec<f64>> for EmbeddingVector {
    fn from(v: Vec<f64>) -> Self {
        EmbeddingVector(v)
    }
}
