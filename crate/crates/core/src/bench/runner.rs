use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;

use crate::chem::mean_mces_at_1;
use crate::error::{Error, Result};
use crate::metrics::{
    isomer_group_stats, labeled_from_partition, library_ceiling, optimal_threshold,
    per_analyte_topk, roc_auc, spurious_partition, threshold_curve, topk_accuracy_per_analyte,
    topk_accuracy_per_spectrum, CeilingLevel, CurvePoint, LabeledScore, MetricRecord, MetricReport,
    OptimalRecord, PartitionFailure, RocRecord, Truth,
};
use crate::retrieval::{RetrievalResult, SearchIndex};

use super::spec::{config_hash, BenchmarkInputs, BenchmarkSpec, Metric, PartitionSpec};

/// Score thresholds 0.00, 0.01, ..., 1.00 used for hit-count curves.
pub fn curve_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

/// Orders partition values numerically when they parse as numbers (also
/// `1:10` style ratios, by the part after the colon), otherwise as text.
pub fn value_order(a: &str, b: &str) -> std::cmp::Ordering {
    let num = |s: &str| {
        s.rsplit(':')
            .next()
            .and_then(|t| t.trim().parse::<f64>().ok())
    };
    match (num(a), num(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => a.cmp(b),
    }
}

pub(crate) fn sample_value<'a>(
    metadata: &'a BTreeMap<String, BTreeMap<String, String>>,
    sample: Option<&'a str>,
    field: &str,
) -> Option<&'a str> {
    let sample = sample?;
    if field == "file" {
        return Some(sample);
    }
    metadata.get(sample)?.get(field).map(String::as_str)
}

/// `(partition name, query indices)`, starting with `all`. Each partition
/// field splits the queries into disjoint, exhaustive groups.
pub fn partition_queries(
    inputs: &BenchmarkInputs,
    keep: &[usize],
    partitions: &[PartitionSpec],
) -> Vec<(String, Vec<usize>)> {
    let mut out = vec![("all".to_string(), keep.to_vec())];
    for p in partitions {
        let mut groups: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for &i in keep {
            let q = &inputs.queries[i];
            let value =
                match sample_value(&inputs.sample_metadata, q.sample_id.as_deref(), &p.field) {
                    None => "NA".to_string(),
                    Some(v) => match &p.values {
                        Some(allowed) if !allowed.iter().any(|a| a == v) => "other".to_string(),
                        _ => v.to_string(),
                    },
                };
            groups.entry(value).or_default().push(i);
        }
        let mut names: Vec<String> = groups.keys().cloned().collect();
        match &p.values {
            Some(allowed) => {
                let rank = |n: &str| allowed.iter().position(|a| a == n).unwrap_or(usize::MAX);
                names.sort_by(|a, b| rank(a).cmp(&rank(b)).then_with(|| a.cmp(b)));
            }
            None => names.sort_by(|a, b| value_order(a, b)),
        }
        for n in names {
            let idx = groups.remove(&n).expect("group exists");
            out.push((format!("{}={n}", p.field), idx));
        }
    }
    out
}

struct Cell<'a> {
    bench: &'a str,
    scorer: &'a str,
    partition: &'a str,
}

impl Cell<'_> {
    fn record(&self, metric: impl Into<String>, value: f64, n: usize) -> MetricRecord {
        MetricRecord {
            benchmark: self.bench.to_string(),
            scorer: self.scorer.to_string(),
            partition: self.partition.to_string(),
            metric: metric.into(),
            value,
            n,
        }
    }

    fn failure(&self, metric: Metric, e: &Error) -> PartitionFailure {
        PartitionFailure {
            scorer: self.scorer.to_string(),
            partition: self.partition.to_string(),
            kind: e.kind().to_string(),
            message: format!("{metric:?}: {e}"),
        }
    }
}

#[derive(Default)]
struct CellOutput {
    records: Vec<MetricRecord>,
    curves: Vec<CurvePoint>,
    optimal: Vec<OptimalRecord>,
    roc: Vec<RocRecord>,
    failures: Vec<PartitionFailure>,
}

fn require<'a, T>(v: &'a Option<T>, what: &str) -> Result<&'a T> {
    v.as_ref()
        .ok_or_else(|| Error::invalid(format!("metric needs {what}")))
}

/// Best-scoring analyte of each query that has one.
fn top_hits(results: &[&RetrievalResult]) -> Vec<(String, f64)> {
    results
        .iter()
        .filter_map(|r| r.top().map(|h| (h.analyte_key.clone(), h.score)))
        .collect()
}

fn evaluate_cell(
    cell: &Cell,
    spec: &BenchmarkSpec,
    inputs: &BenchmarkInputs,
    results: &[&RetrievalResult],
    query_errors: usize,
) -> CellOutput {
    let mut out = CellOutput::default();
    out.records
        .push(cell.record("n_queries", results.len() as f64, results.len()));
    out.records
        .push(cell.record("query_errors", query_errors as f64, query_errors));
    let owned: Vec<RetrievalResult> = results.iter().map(|r| (*r).clone()).collect();

    for &metric in &spec.metrics {
        let outcome: Result<()> = (|| {
            match metric {
                Metric::Topk => {
                    let truth = require(&inputs.truth, "query truth")?;
                    let n_analytes = per_analyte_topk(&owned, truth, 1)?.len();
                    for &k in &spec.ks {
                        let ps = topk_accuracy_per_spectrum(&owned, truth, k)?;
                        let pa = topk_accuracy_per_analyte(&owned, truth, k)?;
                        out.records.push(cell.record(
                            format!("top{k}_per_spectrum"),
                            ps,
                            owned.len(),
                        ));
                        out.records.push(cell.record(
                            format!("top{k}_per_analyte"),
                            pa,
                            n_analytes,
                        ));
                    }
                }
                Metric::Ceiling => {
                    let truth = require(&inputs.truth, "query truth")?;
                    let sub: Truth = owned
                        .iter()
                        .map(|r| {
                            truth
                                .get(&r.query_id)
                                .map(|k| (r.query_id.clone(), k.clone()))
                                .ok_or_else(|| Error::MissingTruth(r.query_id.clone()))
                        })
                        .collect::<Result<_>>()?;
                    let keys: BTreeSet<&String> = sub.values().collect();
                    let spectrum_level =
                        library_ceiling(&sub, &inputs.library, CeilingLevel::Spectrum);
                    let analyte_level =
                        library_ceiling(&sub, &inputs.library, CeilingLevel::Analyte);
                    out.records.push(cell.record(
                        "ceiling_per_spectrum",
                        spectrum_level,
                        sub.len(),
                    ));
                    out.records
                        .push(cell.record("ceiling_per_analyte", analyte_level, keys.len()));
                }
                Metric::Roc => {
                    let truth = require(&inputs.truth, "query truth")?;
                    let scores = labeled_top1(&owned, truth)?;
                    let roc = roc_auc(&scores)?;
                    out.records
                        .push(cell.record("roc_auc", roc.auc, scores.len()));
                    out.roc.push(RocRecord {
                        scorer: cell.scorer.to_string(),
                        partition: cell.partition.to_string(),
                        auc: roc.auc,
                        points: roc.points,
                    });
                }
                Metric::Identification => {
                    let gt = require(&inputs.ground_truth, "a ground-truth set")?;
                    let detectable = gt
                        .iter()
                        .filter(|k| inputs.library.contains_analyte(k))
                        .count();
                    let (truth_hits, spurious) = spurious_partition(&top_hits(results), gt);
                    let labeled = labeled_from_partition(&truth_hits, &spurious);
                    for (t, tp, fp) in threshold_curve(&labeled, &curve_thresholds()) {
                        out.curves.push(CurvePoint {
                            scorer: cell.scorer.to_string(),
                            partition: cell.partition.to_string(),
                            threshold: t,
                            true_hits: tp,
                            spurious_hits: fp,
                        });
                    }
                    let choice = optimal_threshold(&labeled, detectable)?;
                    let n = labeled.len();
                    out.records.extend([
                        cell.record("optimal_threshold", choice.threshold, n),
                        cell.record("true_hits", choice.tally.tp as f64, n),
                        cell.record("spurious_hits", choice.tally.fp as f64, n),
                        cell.record("precision", choice.metrics.precision, n),
                        cell.record("true_hit_rate", choice.metrics.true_hit_rate, detectable),
                        cell.record("f1", choice.metrics.f1, n),
                    ]);
                    out.optimal.push(OptimalRecord {
                        scorer: cell.scorer.to_string(),
                        partition: cell.partition.to_string(),
                        choice,
                    });
                }
                Metric::IsomerGroups => {
                    let truth = require(&inputs.truth, "query truth")?;
                    if inputs.isomer_groups.is_empty() {
                        return Err(Error::invalid("metric needs isomer groups"));
                    }
                    let per = per_analyte_topk(&owned, truth, 1)?;
                    // Only groups fully represented in this partition.
                    let groups: Vec<_> = inputs
                        .isomer_groups
                        .iter()
                        .filter(|g| g.analyte_keys.iter().all(|k| per.contains_key(k)))
                        .cloned()
                        .collect();
                    let stats = isomer_group_stats(&per, &groups)?;
                    out.records.push(cell.record(
                        "isomer_groups_evaluated",
                        stats.len() as f64,
                        inputs.isomer_groups.len(),
                    ));
                    for (gid, st) in &stats {
                        out.records
                            .push(cell.record(format!("isomer_mean:{gid}"), st.mean, st.n));
                        out.records
                            .push(cell.record(format!("isomer_min:{gid}"), st.min, st.n));
                        out.records
                            .push(cell.record(format!("isomer_max:{gid}"), st.max, st.n));
                    }
                }
                Metric::Mces => {
                    let truth = require(&inputs.truth, "query truth")?;
                    let smiles = |k: &str| inputs.library.analytes.get(k).map(|a| a.smiles.clone());
                    let pairs: Vec<(String, String)> = owned
                        .iter()
                        .filter_map(|r| {
                            let predicted = smiles(&r.top()?.analyte_key)?;
                            let actual = smiles(truth.get(&r.query_id)?)?;
                            Some((predicted, actual))
                        })
                        .collect();
                    let mean = mean_mces_at_1(&pairs, &spec.mces)?;
                    out.records
                        .push(cell.record("mces_at_1", mean, pairs.len()));
                }
            }
            Ok(())
        })();
        if let Err(e) = outcome {
            out.failures.push(cell.failure(metric, &e));
        }
    }
    out
}

/// Runs every scorer over every partition of already-loaded inputs.
pub fn evaluate_benchmark(spec: &BenchmarkSpec, inputs: &BenchmarkInputs) -> Result<MetricReport> {
    spec.validate()?;
    let keep: Vec<usize> = (0..inputs.queries.len())
        .filter(|&i| {
            let q = &inputs.queries[i];
            !spec.exclude.iter().any(|f| {
                sample_value(&inputs.sample_metadata, q.sample_id.as_deref(), &f.field)
                    == Some(f.value.as_str())
            })
        })
        .collect();
    let partitions = partition_queries(inputs, &keep, &spec.partitions);

    let mut per_scorer = Vec::with_capacity(spec.scorers.len());
    for s in &spec.scorers {
        let index = SearchIndex::build(
            &inputs.library,
            s.config,
            inputs.reference_embeddings.as_ref(),
        )?;
        let outcomes = index.batch_search(&inputs.queries, inputs.query_embeddings.as_ref());
        let mut errors = vec![false; outcomes.len()];
        let results: Vec<RetrievalResult> = outcomes
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.unwrap_or_else(|e| {
                    log::warn!(
                        "scorer {}: query {} failed: {e}",
                        s.name,
                        inputs.queries[i].id
                    );
                    errors[i] = true;
                    RetrievalResult {
                        query_id: inputs.queries[i].id.clone(),
                        hits: Vec::new(),
                        candidate_count: 0,
                    }
                })
            })
            .collect();
        per_scorer.push((results, errors));
    }

    let cells: Vec<(usize, usize)> = (0..spec.scorers.len())
        .flat_map(|s| (0..partitions.len()).map(move |p| (s, p)))
        .collect();
    let outputs: Vec<CellOutput> = cells
        .par_iter()
        .map(|&(s, p)| {
            let (results, errors) = &per_scorer[s];
            let (name, idx) = &partitions[p];
            let subset: Vec<&RetrievalResult> = idx.iter().map(|&i| &results[i]).collect();
            let n_err = idx.iter().filter(|&&i| errors[i]).count();
            let cell = Cell {
                bench: &spec.name,
                scorer: &spec.scorers[s].name,
                partition: name,
            };
            evaluate_cell(&cell, spec, inputs, &subset, n_err)
        })
        .collect();

    let mut report = MetricReport {
        benchmark: spec.name.clone(),
        config_hash: config_hash(spec, &inputs.input_digest),
        ..Default::default()
    };
    for o in outputs {
        report.records.extend(o.records);
        report.curves.extend(o.curves);
        report.optimal.extend(o.optimal);
        report.roc.extend(o.roc);
        report.failures.extend(o.failures);
    }
    Ok(report)
}

/// Loads the inputs named by the spec and evaluates them.
pub fn run_benchmark(spec: &BenchmarkSpec) -> Result<MetricReport> {
    let inputs = BenchmarkInputs::load(spec)?;
    evaluate_benchmark(spec, &inputs)
}

/// Labeled top-1 scores from retrieval results against query truth;
/// queries without hits are skipped.
pub fn labeled_top1(results: &[RetrievalResult], truth: &Truth) -> Result<Vec<LabeledScore>> {
    let mut out = Vec::new();
    for r in results {
        let key = truth
            .get(&r.query_id)
            .ok_or_else(|| Error::MissingTruth(r.query_id.clone()))?;
        if let Some(h) = r.top() {
            out.push(LabeledScore::new(h.score, &h.analyte_key == key));
        }
    }
    Ok(out)
}
