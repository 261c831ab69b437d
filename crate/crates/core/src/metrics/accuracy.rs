use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::retrieval::RetrievalResult;
use crate::spectrum::ReferenceLibrary;

/// Query id to true 2D key.
pub type Truth = BTreeMap<String, String>;

fn hit_in_top_k(result: &RetrievalResult, key: &str, k: usize) -> bool {
    result.hits.iter().take(k).any(|h| h.analyte_key == key)
}

fn truth_of<'a>(truth: &'a Truth, query_id: &str) -> Result<&'a str> {
    truth
        .get(query_id)
        .map(String::as_str)
        .ok_or_else(|| Error::MissingTruth(query_id.to_string()))
}

/// Fraction of queries whose true analyte is among the first `k` hits.
pub fn topk_accuracy_per_spectrum(
    results: &[RetrievalResult],
    truth: &Truth,
    k: usize,
) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::invalid("no retrieval results"));
    }
    let mut correct = 0usize;
    for r in results {
        if hit_in_top_k(r, truth_of(truth, &r.query_id)?, k) {
            correct += 1;
        }
    }
    Ok(correct as f64 / results.len() as f64)
}

/// Per-analyte mean of the per-spectrum Top-K indicator.
pub fn per_analyte_topk(
    results: &[RetrievalResult],
    truth: &Truth,
    k: usize,
) -> Result<BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for r in results {
        let key = truth_of(truth, &r.query_id)?;
        let e = sums.entry(key.to_string()).or_default();
        e.0 += hit_in_top_k(r, key, k) as usize;
        e.1 += 1;
    }
    Ok(sums
        .into_iter()
        .map(|(key, (c, n))| (key, c as f64 / n as f64))
        .collect())
}

/// Two-stage mean: per analyte first, then unweighted over analytes.
pub fn topk_accuracy_per_analyte(
    results: &[RetrievalResult],
    truth: &Truth,
    k: usize,
) -> Result<f64> {
    if results.is_empty() {
        return Err(Error::invalid("no retrieval results"));
    }
    let per = per_analyte_topk(results, truth, k)?;
    Ok(per.values().sum::<f64>() / per.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CeilingLevel {
    Spectrum,
    Analyte,
}

/// Best accuracy achievable given library coverage. Empty truth gives 0.
pub fn library_ceiling(truth: &Truth, lib: &ReferenceLibrary, level: CeilingLevel) -> f64 {
    match level {
        CeilingLevel::Spectrum => {
            if truth.is_empty() {
                return 0.0;
            }
            let present = truth.values().filter(|k| lib.contains_analyte(k)).count();
            present as f64 / truth.len() as f64
        }
        CeilingLevel::Analyte => {
            let keys: BTreeSet<&String> = truth.values().collect();
            if keys.is_empty() {
                return 0.0;
            }
            let present = keys.iter().filter(|k| lib.contains_analyte(k)).count();
            present as f64 / keys.len() as f64
        }
    }
}
