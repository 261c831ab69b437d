//! Reference index and Top-K analyte retrieval.
//!
//! Reference spectra are held sorted by precursor m/z so the candidate set
//! for a query is a contiguous slice found by binary search over the ppm
//! window. Each candidate is scored, scores are reduced per analyte and the
//! analytes are ranked.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::EmbeddingMap;
use crate::preprocess::binned_fragment_vector;
use crate::similarity::{cosine_embedding, modified_cosine, CosineConfig};
use crate::spectrum::{EmbeddingVector, ReferenceLibrary, Spectrum};

/// Where embedding vectors come from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "source")]
pub enum EmbeddingSource {
    /// Vectors supplied from an embedding file, for references and queries.
    Precomputed,
    /// Computed on the fly with the fragment-bin baseline embedder.
    BinnedFragments { bin_width: f64, max_mz: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ScorerConfig {
    ModifiedCosine(CosineConfig),
    EmbeddingCosine(EmbeddingSource),
}

impl Default for ScorerConfig {
    fn default() -> Self {
        ScorerConfig::ModifiedCosine(CosineConfig::default())
    }
}

impl ScorerConfig {
    pub fn is_raw_peak(&self) -> bool {
        matches!(self, ScorerConfig::ModifiedCosine(_))
    }
}

/// How candidate spectra of one analyte are reduced to an analyte score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Reduction {
    #[default]
    Max,
    Mean,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IndexConfig {
    /// Precursor tolerance in ppm of the query m/z; `f64::INFINITY`
    /// disables the prefilter.
    pub ppm_tol: f64,
    pub top_k: usize,
    pub min_matched: usize,
    pub scorer: ScorerConfig,
    #[serde(default)]
    pub reduction: Reduction,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            ppm_tol: 10.0,
            top_k: 10,
            min_matched: 1,
            scorer: ScorerConfig::default(),
            reduction: Reduction::Max,
        }
    }
}

impl IndexConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ppm_tol.is_nan() || self.ppm_tol <= 0.0 {
            return Err(Error::invalid("ppm tolerance must be positive"));
        }
        if self.top_k == 0 {
            return Err(Error::invalid("top_k must be at least 1"));
        }
        match &self.scorer {
            ScorerConfig::ModifiedCosine(c) => c.validate(),
            ScorerConfig::EmbeddingCosine(EmbeddingSource::BinnedFragments {
                bin_width,
                max_mz,
            }) => {
                if *bin_width > 0.0 && *max_mz > 0.0 && bin_width.is_finite() && max_mz.is_finite()
                {
                    Ok(())
                } else {
                    Err(Error::invalid("bin width and max m/z must be positive"))
                }
            }
            ScorerConfig::EmbeddingCosine(EmbeddingSource::Precomputed) => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalHit {
    pub analyte_key: String,
    pub score: f64,
    pub best_spectrum_id: String,
    /// Matched peak count of the best spectrum; raw-peak scorer only.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_matched: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub query_id: String,
    pub hits: Vec<RetrievalHit>,
    pub candidate_count: usize,
}

impl RetrievalResult {
    pub fn top(&self) -> Option<&RetrievalHit> {
        self.hits.first()
    }
}

/// `[mz(1 - ppm e-6), mz(1 + ppm e-6)]`; an infinite tolerance spans the
/// whole real line.
pub fn ppm_window(mz: f64, ppm: f64) -> (f64, f64) {
    if ppm.is_infinite() {
        return (f64::NEG_INFINITY, f64::INFINITY);
    }
    let r = ppm * 1e-6;
    (mz * (1.0 - r), mz * (1.0 + r))
}

struct Entry {
    spectrum: Spectrum,
    analyte: String,
    embedding: Option<EmbeddingVector>,
}

/// Immutable search structure over a reference library.
pub struct SearchIndex {
    entries: Vec<Entry>,
    precursors: Vec<f64>,
    n_analytes: usize,
    cfg: IndexConfig,
}

impl SearchIndex {
    pub fn build(
        lib: &ReferenceLibrary,
        cfg: IndexConfig,
        embeddings: Option<&EmbeddingMap>,
    ) -> Result<Self> {
        cfg.validate()?;
        let mut entries = Vec::with_capacity(lib.n_spectra());
        let mut missing = Vec::new();
        let mut dim = None;
        for s in lib.spectra.values() {
            let analyte = s.analyte_key.clone().ok_or_else(|| Error::Integrity {
                spectrum_ids: vec![s.id.clone()],
            })?;
            let embedding = match cfg.scorer {
                ScorerConfig::ModifiedCosine(_) => None,
                ScorerConfig::EmbeddingCosine(EmbeddingSource::BinnedFragments {
                    bin_width,
                    max_mz,
                }) => Some(binned_fragment_vector(s, bin_width, max_mz)?),
                ScorerConfig::EmbeddingCosine(EmbeddingSource::Precomputed) => {
                    match embeddings.and_then(|m| m.get(&s.id)) {
                        Some(v) => {
                            let d = *dim.get_or_insert(v.dim());
                            if v.dim() != d {
                                return Err(Error::DimensionMismatch {
                                    id: s.id.clone(),
                                    expected: d,
                                    found: v.dim(),
                                });
                            }
                            Some(v.clone())
                        }
                        None => {
                            missing.push(s.id.clone());
                            None
                        }
                    }
                }
            };
            entries.push(Entry {
                spectrum: s.clone(),
                analyte,
                embedding,
            });
        }
        if !missing.is_empty() {
            return Err(Error::MissingEmbeddings(missing));
        }
        entries.sort_by(|a, b| {
            a.spectrum
                .precursor_mz
                .total_cmp(&b.spectrum.precursor_mz)
                .then_with(|| a.spectrum.id.cmp(&b.spectrum.id))
        });
        let precursors = entries.iter().map(|e| e.spectrum.precursor_mz).collect();
        Ok(SearchIndex {
            entries,
            precursors,
            n_analytes: lib.n_analytes(),
            cfg,
        })
    }

    pub fn config(&self) -> &IndexConfig {
        &self.cfg
    }

    pub fn n_analytes(&self) -> usize {
        self.n_analytes
    }

    pub fn n_spectra(&self) -> usize {
        self.entries.len()
    }

    /// Index range of reference spectra whose precursor lies in the window.
    pub fn candidates(&self, precursor_mz: f64) -> std::ops::Range<usize> {
        let (lo, hi) = ppm_window(precursor_mz, self.cfg.ppm_tol);
        let start = self.precursors.partition_point(|&p| p < lo);
        let end = self.precursors.partition_point(|&p| p <= hi);
        start..end.max(start)
    }

    pub fn search(
        &self,
        query: &Spectrum,
        query_embedding: Option<&EmbeddingVector>,
    ) -> Result<RetrievalResult> {
        if !query.has_signal() {
            return Err(Error::DegenerateSpectrum(query.id.clone()));
        }
        let owned;
        let q_emb = match self.cfg.scorer {
            ScorerConfig::ModifiedCosine(_) => None,
            ScorerConfig::EmbeddingCosine(EmbeddingSource::Precomputed) => Some(
                query_embedding.ok_or_else(|| Error::MissingEmbeddings(vec![query.id.clone()]))?,
            ),
            ScorerConfig::EmbeddingCosine(EmbeddingSource::BinnedFragments {
                bin_width,
                max_mz,
            }) => match query_embedding {
                Some(v) => Some(v),
                None => {
                    owned = binned_fragment_vector(query, bin_width, max_mz)?;
                    Some(&owned)
                }
            },
        };

        #[derive(Default)]
        struct Acc<'a> {
            best: f64,
            best_id: &'a str,
            best_matched: Option<usize>,
            sum: f64,
            count: usize,
        }

        let range = self.candidates(query.precursor_mz);
        let candidate_count = range.len();
        let mut per_analyte: BTreeMap<&str, Acc> = BTreeMap::new();
        for e in &self.entries[range] {
            let (score, n_matched) = match (&self.cfg.scorer, q_emb) {
                (ScorerConfig::ModifiedCosine(c), _) => {
                    let s = modified_cosine(query, &e.spectrum, c)?;
                    if s.n_matched < self.cfg.min_matched {
                        continue;
                    }
                    (s.score, Some(s.n_matched))
                }
                (ScorerConfig::EmbeddingCosine(_), Some(q)) => {
                    let r = e
                        .embedding
                        .as_ref()
                        .expect("embedding present for embedding scorer");
                    (cosine_embedding(q, r)?, None)
                }
                (ScorerConfig::EmbeddingCosine(_), None) => {
                    unreachable!("query embedding resolved above")
                }
            };
            let acc = per_analyte
                .entry(e.analyte.as_str())
                .or_insert_with(|| Acc {
                    best: f64::NEG_INFINITY,
                    ..Acc::default()
                });
            if score > acc.best {
                acc.best = score;
                acc.best_id = &e.spectrum.id;
                acc.best_matched = n_matched;
            }
            acc.sum += score;
            acc.count += 1;
        }

        let mut hits: Vec<RetrievalHit> = per_analyte
            .into_iter()
            .map(|(key, acc)| RetrievalHit {
                analyte_key: key.to_string(),
                score: match self.cfg.reduction {
                    Reduction::Max => acc.best,
                    Reduction::Mean => acc.sum / acc.count as f64,
                },
                best_spectrum_id: acc.best_id.to_string(),
                n_matched: acc.best_matched,
            })
            .collect();
        hits.sort_by(|a, b| {
            b.score
                .total_cmp(&a.score)
                .then_with(|| a.analyte_key.cmp(&b.analyte_key))
        });
        hits.truncate(self.cfg.top_k);

        Ok(RetrievalResult {
            query_id: query.id.clone(),
            hits,
            candidate_count,
        })
    }

    /// Searches every query in parallel. Output order follows input order and
    /// each element is exactly what [`SearchIndex::search`] returns.
    pub fn batch_search(
        &self,
        queries: &[Spectrum],
        query_embeddings: Option<&EmbeddingMap>,
    ) -> Vec<Result<RetrievalResult>> {
        queries
            .par_iter()
            .map(|q| self.search(q, query_embeddings.and_then(|m| m.get(&q.id))))
            .collect()
    }
}

pub fn results_to_csv(results: &[RetrievalResult]) -> String {
    let mut out = String::from("query_id,rank,analyte_key,score,n_matched\n");
    for r in results {
        for (rank, h) in r.hits.iter().enumerate() {
            let matched = h.n_matched.map(|n| n.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                r.query_id,
                rank + 1,
                h.analyte_key,
                h.score,
                matched
            );
        }
    }
    out
}

/// Reads the CSV written by [`results_to_csv`]. Queries without hits do not
/// appear in that format; spectrum ids are not recorded and come back empty.
pub fn parse_results_csv(bytes: &[u8]) -> Result<Vec<RetrievalResult>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut out: Vec<RetrievalResult> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map(|p| p.line()).unwrap_or(0);
        let bad = |what: &str| Error::invalid(format!("results line {line}: {what}"));
        if row.len() != 5 {
            return Err(bad("expected 5 columns"));
        }
        let rank: usize = row[1].parse().map_err(|_| bad("rank is not an integer"))?;
        let score: f64 = row[3].parse().map_err(|_| bad("score is not a number"))?;
        let n_matched = if row[4].is_empty() {
            None
        } else {
            Some(
                row[4]
                    .parse()
                    .map_err(|_| bad("n_matched is not an integer"))?,
            )
        };
        let hit = RetrievalHit {
            analyte_key: row[2].to_string(),
            score,
            best_spectrum_id: String::new(),
            n_matched,
        };
        match out.last_mut() {
            Some(r) if r.query_id == row[0] => {
                if rank != r.hits.len() + 1 {
                    return Err(bad("ranks are not consecutive"));
                }
                r.hits.push(hit);
            }
            _ => {
                if rank != 1 {
                    return Err(bad("first rank of a query must be 1"));
                }
                out.push(RetrievalResult {
                    query_id: row[0].to_string(),
                    hits: vec![hit],
                    candidate_count: 0,
                });
            }
        }
    }
    Ok(out)
}

pub fn results_to_json(results: &[RetrievalResult]) -> String {
    serde_json::to_string_pretty(results).expect("serializable")
}
