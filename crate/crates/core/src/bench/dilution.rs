use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{
    dilution_consistency, labeled_from_partition, optimal_threshold, spurious_partition, tally_at,
    tally_metrics, welch_t_test_one_tailed, Alternative, LabeledScore, WelchResult,
};
use crate::retrieval::RetrievalResult;
use crate::spectrum::{ReferenceLibrary, Spectrum};

use super::runner::{curve_thresholds, sample_value, value_order};

/// Number of best-F1 grid thresholds whose precisions feed the Welch test.
pub const TOP_F1_THRESHOLDS: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilutionLevel {
    pub dilution: String,
    pub n_queries: usize,
    pub threshold: f64,
    pub true_hits: usize,
    pub spurious_hits: usize,
    pub precision: f64,
    pub true_hit_rate: f64,
    pub f1: f64,
    /// True hits also found at the anchor dilution.
    pub consistent: usize,
    /// True hits absent at the anchor dilution.
    pub unique: usize,
    /// Precision at each of the best-F1 grid thresholds.
    pub top_f1_precisions: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DilutionReport {
    pub field: String,
    pub anchor: String,
    pub detectable: usize,
    pub levels: Vec<DilutionLevel>,
}

/// Precisions at the `n` grid thresholds with the highest F1 (ties keep the
/// higher threshold first).
pub fn top_f1_precisions(scored: &[LabeledScore], detectable: usize, n: usize) -> Vec<f64> {
    let mut grid: Vec<(f64, f64, f64)> = curve_thresholds()
        .into_iter()
        .map(|t| {
            let m = tally_metrics(tally_at(scored, t, detectable));
            (t, m.f1, m.precision)
        })
        .collect();
    grid.sort_by(|a, b| b.1.total_cmp(&a.1).then(b.0.total_cmp(&a.0)));
    grid.into_iter().take(n).map(|g| g.2).collect()
}

/// Per-dilution identification with F1-optimal thresholds chosen per level.
/// `results` are aligned with `queries`; queries whose sample lacks `field`
/// are ignored. The anchor defaults to the numerically lowest dilution.
pub fn dilution_analysis(
    results: &[RetrievalResult],
    queries: &[Spectrum],
    metadata: &BTreeMap<String, BTreeMap<String, String>>,
    field: &str,
    ground_truth: &BTreeSet<String>,
    library: &ReferenceLibrary,
    anchor: Option<&str>,
) -> Result<DilutionReport> {
    if results.len() != queries.len() {
        return Err(Error::invalid(format!(
            "{} results for {} queries",
            results.len(),
            queries.len()
        )));
    }
    let mut groups: BTreeMap<String, Vec<(String, f64)>> = BTreeMap::new();
    let mut counts: BTreeMap<String, usize> = BTreeMap::new();
    for (r, q) in results.iter().zip(queries) {
        let Some(level) = sample_value(metadata, q.sample_id.as_deref(), field) else {
            continue;
        };
        *counts.entry(level.to_string()).or_default() += 1;
        let hits = groups.entry(level.to_string()).or_default();
        if let Some(h) = r.top() {
            hits.push((h.analyte_key.clone(), h.score));
        }
    }
    if groups.is_empty() {
        return Err(Error::invalid(format!(
            "no query carries sample field {field}"
        )));
    }
    let mut order: Vec<String> = groups.keys().cloned().collect();
    order.sort_by(|a, b| value_order(a, b));
    let anchor = match anchor {
        Some(a) => a.to_string(),
        None => order[0].clone(),
    };
    let detectable = ground_truth
        .iter()
        .filter(|k| library.contains_analyte(k))
        .count();

    let mut levels = Vec::with_capacity(order.len());
    let mut found: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
    for d in &order {
        let (truth_hits, spurious) = spurious_partition(&groups[d], ground_truth);
        let labeled = labeled_from_partition(&truth_hits, &spurious);
        let (threshold, tally, metrics) = if labeled.is_empty() {
            let t = tally_at(&labeled, 0.0, detectable);
            (0.0, t, tally_metrics(t))
        } else {
            let c = optimal_threshold(&labeled, detectable)?;
            (c.threshold, c.tally, c.metrics)
        };
        found.insert(
            d.clone(),
            truth_hits
                .iter()
                .filter(|(_, &s)| s >= threshold)
                .map(|(k, _)| k.clone())
                .collect(),
        );
        levels.push(DilutionLevel {
            dilution: d.clone(),
            n_queries: counts[d],
            threshold,
            true_hits: tally.tp,
            spurious_hits: tally.fp,
            precision: metrics.precision,
            true_hit_rate: metrics.true_hit_rate,
            f1: metrics.f1,
            consistent: 0,
            unique: 0,
            top_f1_precisions: top_f1_precisions(&labeled, detectable, TOP_F1_THRESHOLDS),
        });
    }
    let consistency = dilution_consistency(&found, &anchor)?;
    for level in &mut levels {
        let c = consistency[&level.dilution];
        level.consistent = c.consistent;
        level.unique = c.unique;
    }
    Ok(DilutionReport {
        field: field.to_string(),
        anchor,
        detectable,
        levels,
    })
}

/// One-tailed Welch test per dilution that `a` has higher precision than
/// `b` over their best-F1 thresholds. Levels must match.
pub fn compare_precision(
    a: &DilutionReport,
    b: &DilutionReport,
) -> Result<Vec<(String, Result<WelchResult>)>> {
    let da: Vec<&str> = a.levels.iter().map(|l| l.dilution.as_str()).collect();
    let db: Vec<&str> = b.levels.iter().map(|l| l.dilution.as_str()).collect();
    if da != db {
        return Err(Error::invalid("dilution levels differ between reports"));
    }
    Ok(a.levels
        .iter()
        .zip(&b.levels)
        .map(|(x, y)| {
            (
                x.dilution.clone(),
                welch_t_test_one_tailed(
                    &x.top_f1_precisions,
                    &y.top_f1_precisions,
                    Alternative::AGreater,
                ),
            )
        })
        .collect())
}
