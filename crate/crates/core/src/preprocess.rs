//! Library curation and spectrum normalization.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::{AnalyteRecord, EmbeddingVector, ReferenceLibrary, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    MaxOne,
    L2,
}

pub fn normalize_intensities(s: &Spectrum, mode: NormMode) -> Result<Spectrum> {
    let scale = match mode {
        NormMode::MaxOne => s.peaks.iter().map(|p| p.intensity).fold(0.0, f64::max),
        NormMode::L2 => s
            .peaks
            .iter()
            .map(|p| p.intensity * p.intensity)
            .sum::<f64>()
            .sqrt(),
    };
    if scale.is_nan() || scale <= 0.0 {
        return Err(Error::DegenerateSpectrum(s.id.clone()));
    }
    let mut out = s.clone();
    for p in &mut out.peaks {
        p.intensity /= scale;
    }
    Ok(out)
}

/// Rounding applied before hashing spectra for duplicate detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DedupConfig {
    pub mz_decimals: i32,
    pub intensity_decimals: i32,
}

impl Default for DedupConfig {
    fn default() -> Self {
        DedupConfig {
            mz_decimals: 4,
            intensity_decimals: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DedupKey {
    pub precursor_bin: i64,
    pub peak_hash: u64,
    pub analyte_key: Option<String>,
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(hash: u64, bytes: &[u8]) -> u64 {
    bytes
        .iter()
        .fold(hash, |h, &b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

fn round_to(x: f64, decimals: i32) -> i64 {
    (x * 10f64.powi(decimals)).round() as i64
}

impl DedupKey {
    pub fn of(s: &Spectrum, cfg: &DedupConfig) -> Self {
        let max = s.peaks.iter().map(|p| p.intensity).fold(0.0, f64::max);
        let mut h = FNV_OFFSET;
        for p in &s.peaks {
            let rel = if max > 0.0 { p.intensity / max } else { 0.0 };
            h = fnv1a(h, &round_to(p.mz, cfg.mz_decimals).to_le_bytes());
            h = fnv1a(h, &round_to(rel, cfg.intensity_decimals).to_le_bytes());
        }
        DedupKey {
            precursor_bin: round_to(s.precursor_mz, cfg.mz_decimals),
            peak_hash: h,
            analyte_key: s.analyte_key.clone(),
        }
    }
}

/// Keeps the first spectrum of every duplicate class, preserving order.
pub fn deduplicate_spectra(spectra: Vec<Spectrum>, cfg: &DedupConfig) -> (Vec<Spectrum>, usize) {
    let n = spectra.len();
    let mut seen = HashSet::with_capacity(n);
    let kept: Vec<Spectrum> = spectra
        .into_iter()
        .filter(|s| seen.insert(DedupKey::of(s, cfg)))
        .collect();
    let removed = n - kept.len();
    (kept, removed)
}

/// First 14 characters of a standard InChIKey, uppercased.
pub fn canonical_2d_key(inchikey: &str) -> Result<String> {
    let b = inchikey.as_bytes();
    let well_formed = b.len() == 27
        && b[14] == b'-'
        && b[25] == b'-'
        && b.iter()
            .enumerate()
            .all(|(i, c)| i == 14 || i == 25 || c.is_ascii_alphabetic());
    if !well_formed {
        return Err(Error::InvalidInchiKey(inchikey.to_string()));
    }
    Ok(inchikey[..14].to_ascii_uppercase())
}

/// Result of collapsing stereoisomers onto one record per 2D key.
#[derive(Debug, Clone, PartialEq)]
pub struct StereoMerge {
    pub records: Vec<AnalyteRecord>,
    /// Every input registry id mapped to the id of its surviving record.
    pub survivor_of: BTreeMap<u64, u64>,
    pub merged_count: usize,
}

/// One record per key2d, chosen as the record with the lowest registry id.
/// The survivor's name lists every merged name, separated by `;`.
pub fn merge_stereoisomers(analytes: Vec<AnalyteRecord>) -> StereoMerge {
    let n = analytes.len();
    let mut groups: BTreeMap<String, Vec<AnalyteRecord>> = BTreeMap::new();
    for a in analytes {
        groups.entry(a.key2d.clone()).or_default().push(a);
    }
    let mut survivor_of = BTreeMap::new();
    let mut records = Vec::with_capacity(groups.len());
    for (_, mut group) in groups {
        group.sort_by_key(|a| a.registry_id);
        let mut names: Vec<String> = Vec::new();
        for a in &group {
            survivor_of.insert(a.registry_id, group[0].registry_id);
            if !a.name.is_empty() && !names.contains(&a.name) {
                names.push(a.name.clone());
            }
        }
        let mut survivor = group.swap_remove(0);
        survivor.name = names.join(";");
        records.push(survivor);
    }
    let merged_count = n - records.len();
    StereoMerge {
        records,
        survivor_of,
        merged_count,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub input_analytes: usize,
    pub input_spectra: usize,
    pub stereoisomers_merged: usize,
    pub duplicates_removed: usize,
    pub output_analytes: usize,
    pub output_spectra: usize,
}

/// Builds a curated library from raw records: analytes without a key2d
/// take it from their full InChIKey, stereoisomers are merged, duplicate
/// spectra dropped.
pub fn curate(
    mut analytes: Vec<AnalyteRecord>,
    spectra: Vec<Spectrum>,
    cfg: &DedupConfig,
) -> Result<(ReferenceLibrary, CurationReport)> {
    let mut report = CurationReport {
        input_analytes: analytes.len(),
        input_spectra: spectra.len(),
        ..Default::default()
    };
    for a in &mut analytes {
        if a.key2d.is_empty() {
            let full = a
                .inchikey_full
                .as_deref()
                .ok_or_else(|| Error::InvalidAnalyte {
                    key2d: String::new(),
                    message: format!("record {} has neither key2d nor InChIKey", a.registry_id),
                })?;
            a.key2d = canonical_2d_key(full)?;
        }
    }
    let merge = merge_stereoisomers(analytes);
    report.stereoisomers_merged = merge.merged_count;

    let (kept, removed) = deduplicate_spectra(spectra, cfg);
    report.duplicates_removed = removed;

    let mut lib = ReferenceLibrary::new();
    for a in merge.records {
        lib.add_analyte(a)?;
    }
    let orphans: Vec<String> = kept
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
    for s in kept {
        lib.add_spectrum(s)?;
    }
    report.output_analytes = lib.n_analytes();
    report.output_spectra = lib.n_spectra();
    Ok((lib, report))
}

pub const PRECURSOR_BINS: usize = 1000;

/// Sample profile of precursor masses: one unit-width bin per m/z in
/// `[0, 1000)`, incremented once per spectrum.
pub fn binned_precursor_vector(spectra: &[Spectrum]) -> EmbeddingVector {
    let mut v = vec![0.0; PRECURSOR_BINS];
    for s in spectra {
        let mz = s.precursor_mz;
        if (0.0..PRECURSOR_BINS as f64).contains(&mz) {
            v[mz.floor() as usize] += 1.0;
        }
    }
    EmbeddingVector(v)
}

/// Deterministic fragment-bin embedding: max-normalized intensities summed
/// into bins `[k*w, (k+1)*w)`, then L2-normalized. Peaks at or beyond
/// `max_mz` are dropped.
pub fn binned_fragment_vector(
    s: &Spectrum,
    bin_width: f64,
    max_mz: f64,
) -> Result<EmbeddingVector> {
    if !(bin_width > 0.0 && bin_width.is_finite()) || !(max_mz > 0.0 && max_mz.is_finite()) {
        return Err(Error::invalid("bin width and max m/z must be positive"));
    }
    let dim = (max_mz / bin_width).ceil() as usize;
    let mut v = vec![0.0; dim];
    let max = s.peaks.iter().map(|p| p.intensity).fold(0.0, f64::max);
    if max > 0.0 {
        for p in &s.peaks {
            let bin = (p.mz / bin_width).floor() as usize;
            if bin < dim {
                v[bin] += p.intensity / max;
            }
        }
    }
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Ok(EmbeddingVector(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::{Peak, Polarity};

    fn spec(id: &str, prec: f64, peaks: &[(f64, f64)]) -> Spectrum {
        Spectrum::new(
            id,
            prec,
            Polarity::Positive,
            peaks.iter().map(|&(m, i)| Peak::new(m, i)).collect(),
        )
        .unwrap()
    }

    fn record(key: &str, id: u64, name: &str) -> AnalyteRecord {
        AnalyteRecord {
            key2d: key.into(),
            inchikey_full: None,
            smiles: format!("C{id}"),
            registry_id: id,
            name: name.into(),
        }
    }

    #[test]
    fn normalization_modes() {
        let s = spec("a", 100.0, &[(10.0, 2.0), (20.0, 4.0)]);
        let m = normalize_intensities(&s, NormMode::MaxOne).unwrap();
        assert_eq!(
            m.peaks.iter().map(|p| p.intensity).collect::<Vec<_>>(),
            vec![0.5, 1.0]
        );
        let s = spec("b", 100.0, &[(10.0, 3.0), (20.0, 4.0)]);
        let l = normalize_intensities(&s, NormMode::L2).unwrap();
        assert!((l.peaks[0].intensity - 0.6).abs() < 1e-12);
        assert!((l.peaks[1].intensity - 0.8).abs() < 1e-12);
        assert_eq!(l.peaks[1].mz, 20.0);
        let z = spec("z", 100.0, &[(10.0, 0.0), (20.0, 0.0)]);
        assert!(matches!(
            normalize_intensities(&z, NormMode::MaxOne),
            Err(Error::DegenerateSpectrum(_))
        ));
    }

    #[test]
    fn dedup_examples() {
        let cfg = DedupConfig::default();
        let a = spec("a", 200.0, &[(50.0, 1.0), (80.0, 3.0)]);
        let mut b = a.clone();
        b.id = "b".into();
        let (kept, removed) = deduplicate_spectra(vec![a.clone(), b], &cfg);
        assert_eq!((kept.len(), removed), (1, 1));
        assert_eq!(kept[0].id, "a");

        let scaled = spec("s", 200.0, &[(50.0, 10.0), (80.0, 30.0)]);
        assert_eq!(deduplicate_spectra(vec![a.clone(), scaled], &cfg).1, 1);

        // 0.001 Th survives 4-decimal rounding: 500000 vs 500010
        let shifted = spec("t", 200.0, &[(50.001, 1.0), (80.0, 3.0)]);
        assert_ne!(round_to(50.0, 4), round_to(50.001, 4));
        assert_eq!(deduplicate_spectra(vec![a, shifted], &cfg).1, 0);
    }

    #[test]
    fn inchikey_to_2d() {
        assert_eq!(
            canonical_2d_key("QNAYBMKLOCPYGJ-REOHCLBHSA-N").unwrap(),
            "QNAYBMKLOCPYGJ"
        );
        assert_eq!(
            canonical_2d_key("qnaybmklocpygj-reohclbhsa-n").unwrap(),
            "QNAYBMKLOCPYGJ"
        );
        assert!(canonical_2d_key("QNAYBMKLOCPYGJ-REOHCLBHSAN").is_err());
        assert!(canonical_2d_key("QNAYBMKLOCPYG-JREOHCLBHSA-N").is_err());
        assert!(canonical_2d_key("QNAYBMKLOCPYGJ-REOHCLBHS1-N").is_err());
    }

    #[test]
    fn stereo_merge_keeps_lowest_id() {
        let merged = merge_stereoisomers(vec![
            record("XXXXXXXXXXXXXX", 7, "L-form"),
            record("XXXXXXXXXXXXXX", 3, "D-form"),
        ]);
        assert_eq!(merged.records.len(), 1);
        assert_eq!(merged.records[0].registry_id, 3);
        assert_eq!(merged.records[0].name, "D-form;L-form");
        assert_eq!(merged.survivor_of[&7], 3);
        assert_eq!(merged.merged_count, 1);

        let single = merge_stereoisomers(vec![record("XXXXXXXXXXXXXX", 7, "x")]);
        assert_eq!(single.records, vec![record("XXXXXXXXXXXXXX", 7, "x")]);

        let three = merge_stereoisomers(vec![
            record("AAAAAAAAAAAAAA", 1, ""),
            record("BBBBBBBBBBBBBB", 2, ""),
            record("CCCCCCCCCCCCCC", 3, ""),
        ]);
        assert_eq!(three.records.len(), 3);
    }

    #[test]
    fn precursor_vector() {
        let spectra = [
            spec("a", 250.3, &[(1.0, 1.0)]),
            spec("b", 250.7, &[(1.0, 1.0)]),
            spec("c", 999.99, &[(1.0, 1.0)]),
            spec("d", 1000.0, &[(1.0, 1.0)]),
        ];
        let v = binned_precursor_vector(&spectra);
        assert_eq!(v.dim(), 1000);
        assert_eq!(v.0[250], 2.0);
        assert_eq!(v.0[999], 1.0);
        assert_eq!(v.0.iter().sum::<f64>(), 3.0);
        assert!(binned_precursor_vector(&[]).0.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn fragment_vector() {
        let s = spec("a", 100.0, &[(10.2, 1.0)]);
        let v = binned_fragment_vector(&s, 1.0, 20.0).unwrap();
        assert_eq!(v.dim(), 20);
        assert_eq!(v.0[10], 1.0);
        assert_eq!(v.0.iter().filter(|&&x| x != 0.0).count(), 1);

        let t = spec("b", 100.0, &[(15.5, 2.0)]);
        let w = binned_fragment_vector(&t, 1.0, 20.0).unwrap();
        let dot: f64 = v.0.iter().zip(&w.0).map(|(a, b)| a * b).sum();
        assert_eq!(dot, 0.0);
        assert_eq!(binned_fragment_vector(&s, 1.0, 20.0).unwrap(), v);
        assert!(binned_fragment_vector(&s, 0.0, 20.0).is_err());
    }

    #[test]
    fn curate_merges_and_dedups() {
        let mut a1 = record("", 9, "x");
        a1.inchikey_full = Some("QNAYBMKLOCPYGJ-REOHCLBHSA-N".into());
        let mut a2 = record("", 4, "y");
        a2.inchikey_full = Some("QNAYBMKLOCPYGJ-UWTATZPHSA-N".into());
        let s1 = spec("r1", 90.0, &[(44.0, 1.0)]).with_analyte("QNAYBMKLOCPYGJ");
        let mut s2 = s1.clone();
        s2.id = "r2".into();
        let (lib, report) = curate(vec![a1, a2], vec![s1, s2], &DedupConfig::default()).unwrap();
        assert_eq!(lib.analytes["QNAYBMKLOCPYGJ"].registry_id, 4);
        assert_eq!(report.stereoisomers_merged, 1);
        assert_eq!(report.duplicates_removed, 1);
        assert_eq!(report.output_spectra, 1);
    }
}
