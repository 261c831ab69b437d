//! Newline-delimited JSON library manifest.
//!
//! ```text
//! {"type":"analyte","key2d":"QNAYBMKLOCPYGJ","smiles":"CC(N)C(=O)O","registry_id":5950,"name":"alanine"}
//! {"type":"spectrum","id":"ref1","precursor_mz":90.055,"polarity":"positive","peaks":[[44.05,100.0]],"analyte_key":"QNAYBMKLOCPYGJ"}
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::canonical_2d_key;
use crate::spectrum::{AnalyteRecord, Peak, Polarity, ReferenceLibrary, Spectrum};

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum Record {
    Analyte(AnalyteRecord),
    Spectrum(SpectrumRecord),
}

#[derive(Debug, Serialize, Deserialize)]
struct SpectrumRecord {
    id: String,
    precursor_mz: f64,
    #[serde(default)]
    polarity: Polarity,
    peaks: Vec<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sample_id: Option<String>,
    analyte_key: Option<String>,
}

/// Parses a manifest into a fully linked library. Analyte and spectrum
/// records may appear in any order.
pub fn parse_library_manifest(input: &[u8]) -> Result<ReferenceLibrary> {
    let text = std::str::from_utf8(input).map_err(|e| Error::Manifest {
        line: 1 + input[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count(),
        message: "invalid UTF-8".into(),
    })?;

    let mut lib = ReferenceLibrary::new();
    let mut spectra = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let record: Record = serde_json::from_str(line).map_err(|e| Error::Manifest {
            line: lineno,
            message: e.to_string(),
        })?;
        match record {
            Record::Analyte(a) => lib.add_analyte(a).map_err(|e| match e {
                conflict @ Error::AnalyteConflict { .. } => conflict,
                other => Error::Manifest {
                    line: lineno,
                    message: other.to_string(),
                },
            })?,
            Record::Spectrum(s) => {
                let peaks = s
                    .peaks
                    .into_iter()
                    .map(|(mz, i)| Peak::new(mz, i))
                    .collect();
                let mut spectrum =
                    Spectrum::new(s.id, s.precursor_mz, s.polarity, peaks).map_err(|e| {
                        Error::Manifest {
                            line: lineno,
                            message: e.to_string(),
                        }
                    })?;
                spectrum.sample_id = s.sample_id;
                spectrum.analyte_key = s.analyte_key;
                spectra.push(spectrum);
            }
        }
    }

    let orphans: Vec<String> = spectra
        .iter()
        .filter(|s| {
            !s.analyte_key
                .as_ref()
                .is_some_and(|k| lib.contains_analyte(k))
        })
        .map(|s| s.id.clone())
        .collect();
    if !orphans.is_empty() {
        return Err(Error::Integrity {
            spectrum_ids: orphans,
        });
    }
    for s in spectra {
        lib.add_spectrum(s)?;
    }
    Ok(lib)
}

#[derive(Debug, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
enum RawRecord {
    Analyte(RawAnalyte),
    Spectrum(SpectrumRecord),
}

#[derive(Debug, Deserialize)]
struct RawAnalyte {
    #[serde(default)]
    key2d: String,
    #[serde(default)]
    inchikey_full: Option<String>,
    smiles: String,
    registry_id: u64,
    #[serde(default)]
    name: String,
}

/// Reads manifest records without linking or validating them, for input
/// to curation. Analytes may omit `key2d` when they carry a full InChIKey,
/// and spectra may reference an analyte by its full InChIKey.
pub fn parse_manifest_records(input: &[u8]) -> Result<(Vec<AnalyteRecord>, Vec<Spectrum>)> {
    let text = std::str::from_utf8(input).map_err(|e| Error::Manifest {
        line: 1 + input[..e.valid_up_to()]
            .iter()
            .filter(|&&b| b == b'\n')
            .count(),
        message: "invalid UTF-8".into(),
    })?;
    let (mut analytes, mut spectra) = (Vec::new(), Vec::new());
    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| Error::Manifest {
            line: idx + 1,
            message,
        };
        match serde_json::from_str::<RawRecord>(line).map_err(|e| bad(e.to_string()))? {
            RawRecord::Analyte(a) => analytes.push(AnalyteRecord {
                key2d: a.key2d,
                inchikey_full: a.inchikey_full,
                smiles: a.smiles,
                registry_id: a.registry_id,
                name: a.name,
            }),
            RawRecord::Spectrum(s) => {
                let peaks = s
                    .peaks
                    .into_iter()
                    .map(|(mz, i)| Peak::new(mz, i))
                    .collect();
                let mut spectrum = Spectrum::new(s.id, s.precursor_mz, s.polarity, peaks)
                    .map_err(|e| bad(e.to_string()))?;
                spectrum.sample_id = s.sample_id;
                spectrum.analyte_key = match s.analyte_key {
                    Some(k) if k.len() == 27 => {
                        Some(canonical_2d_key(&k).map_err(|e| bad(e.to_string()))?)
                    }
                    other => other,
                };
                spectra.push(spectrum);
            }
        }
    }
    Ok((analytes, spectra))
}

/// Serializes a library: analytes in key order, then spectra grouped by
/// analyte in their stored order.
pub fn write_library_manifest(lib: &ReferenceLibrary) -> String {
    let mut out = String::new();
    for a in lib.analytes.values() {
        out.push_str(&serde_json::to_string(&Record::Analyte(a.clone())).expect("serializable"));
        out.push('\n');
    }
    for s in lib.spectra_in_order() {
        let rec = Record::Spectrum(SpectrumRecord {
            id: s.id.clone(),
            precursor_mz: s.precursor_mz,
            polarity: s.polarity,
            peaks: s.peaks.iter().map(|p| (p.mz, p.intensity)).collect(),
            sample_id: s.sample_id.clone(),
            analyte_key: s.analyte_key.clone(),
        });
        out.push_str(&serde_json::to_string(&rec).expect("serializable"));
        out.push('\n');
    }
    out
}
