use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricReport;

/// Win counts of two scorers over per-file partitions for one metric.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadToHead {
    pub metric: String,
    pub a_wins: usize,
    pub b_wins: usize,
    pub ties: usize,
    /// Files where only one side produced the metric.
    pub missing: usize,
    pub files: usize,
}

const LOWER_IS_BETTER: [&str; 3] = ["spurious_hits", "mces_at_1", "query_errors"];
const NOT_COMPARED: [&str; 3] = ["optimal_threshold", "n_queries", "isomer_groups_evaluated"];

/// The subset of a report belonging to one scorer.
pub fn scorer_view(report: &MetricReport, scorer: &str) -> MetricReport {
    MetricReport {
        benchmark: report.benchmark.clone(),
        config_hash: report.config_hash.clone(),
        records: report
            .records
            .iter()
            .filter(|r| r.scorer == scorer)
            .cloned()
            .collect(),
        curves: report
            .curves
            .iter()
            .filter(|r| r.scorer == scorer)
            .cloned()
            .collect(),
        optimal: report
            .optimal
            .iter()
            .filter(|r| r.scorer == scorer)
            .cloned()
            .collect(),
        roc: report
            .roc
            .iter()
            .filter(|r| r.scorer == scorer)
            .cloned()
            .collect(),
        failures: report
            .failures
            .iter()
            .filter(|r| r.scorer == scorer)
            .cloned()
            .collect(),
    }
}

fn per_file(report: &MetricReport) -> Result<BTreeMap<(&str, &str), f64>> {
    let mut out = BTreeMap::new();
    let mut scorers = BTreeSet::new();
    for r in report
        .records
        .iter()
        .filter(|r| r.partition.starts_with("file="))
    {
        scorers.insert(r.scorer.as_str());
        out.insert((r.partition.as_str(), r.metric.as_str()), r.value);
    }
    if scorers.len() > 1 {
        return Err(Error::invalid("head-to-head needs single-scorer reports"));
    }
    Ok(out)
}

fn files(report: &MetricReport) -> BTreeSet<&str> {
    report
        .records
        .iter()
        .filter(|r| r.partition.starts_with("file="))
        .map(|r| r.partition.as_str())
        .collect()
}

/// Per metric, the number of files where A beats B, B beats A, or they
/// tie. Both reports must cover the same file partitions.
pub fn per_file_head_to_head(a: &MetricReport, b: &MetricReport) -> Result<Vec<HeadToHead>> {
    let (fa, fb) = (files(a), files(b));
    if fa.is_empty() {
        return Err(Error::invalid("reports carry no per-file partitions"));
    }
    if fa != fb {
        return Err(Error::invalid("reports cover different file partitions"));
    }
    let (va, vb) = (per_file(a)?, per_file(b)?);
    let metrics: BTreeSet<&str> = va
        .keys()
        .chain(vb.keys())
        .map(|k| k.1)
        .filter(|m| !NOT_COMPARED.contains(m))
        .collect();
    let mut out = Vec::with_capacity(metrics.len());
    for m in metrics {
        let lower = LOWER_IS_BETTER.contains(&m);
        let mut row = HeadToHead {
            metric: m.to_string(),
            a_wins: 0,
            b_wins: 0,
            ties: 0,
            missing: 0,
            files: 0,
        };
        for f in &fa {
            match (va.get(&(f, m)), vb.get(&(f, m))) {
                (Some(x), Some(y)) => {
                    row.files += 1;
                    let (x, y) = if lower { (-x, -y) } else { (*x, *y) };
                    if x > y {
                        row.a_wins += 1;
                    } else if y > x {
                        row.b_wins += 1;
                    } else {
                        row.ties += 1;
                    }
                }
                (None, None) => {}
                _ => row.missing += 1,
            }
        }
        out.push(row);
    }
    Ok(out)
}

pub fn head_to_head_csv(a_name: &str, b_name: &str, rows: &[HeadToHead]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "scorer_a", "scorer_b", "metric", "a_wins", "b_wins", "ties", "missing", "files",
    ])?;
    for r in rows {
        w.write_record([
            a_name.to_string(),
            b_name.to_string(),
            r.metric.clone(),
            r.a_wins.to_string(),
            r.b_wins.to_string(),
            r.ties.to_string(),
            r.missing.to_string(),
            r.files.to_string(),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::MetricRecord;

    fn report(scorer: &str, rows: &[(&str, &str, f64)]) -> MetricReport {
        MetricReport {
            records: rows
                .iter()
                .map(|&(p, m, v)| MetricRecord {
                    benchmark: "b".into(),
                    scorer: scorer.into(),
                    partition: p.into(),
                    metric: m.into(),
                    value: v,
                    n: 1,
                })
                .collect(),
            ..Default::default()
        }
    }

    #[test]
    fn wins_ties_and_transpose() {
        let a = report(
            "a",
            &[
                ("file=1", "f1", 0.5),
                ("file=2", "f1", 0.7),
                ("file=1", "spurious_hits", 3.0),
                ("file=2", "spurious_hits", 5.0),
                ("all", "f1", 0.1),
            ],
        );
        let b = report(
            "b",
            &[
                ("file=1", "f1", 0.4),
                ("file=2", "f1", 0.7),
                ("file=1", "spurious_hits", 4.0),
                ("file=2", "spurious_hits", 4.0),
            ],
        );
        let ab = per_file_head_to_head(&a, &b).unwrap();
        assert_eq!(
            (
                ab[0].metric.as_str(),
                ab[0].a_wins,
                ab[0].b_wins,
                ab[0].ties
            ),
            ("f1", 1, 0, 1)
        );
        assert_eq!((ab[1].a_wins, ab[1].b_wins), (1, 1));
        let ba = per_file_head_to_head(&b, &a).unwrap();
        for (x, y) in ab.iter().zip(&ba) {
            assert_eq!((x.a_wins, x.b_wins, x.ties), (y.b_wins, y.a_wins, y.ties));
        }
        let same = per_file_head_to_head(&a, &a).unwrap();
        assert!(same
            .iter()
            .all(|r| r.a_wins == 0 && r.b_wins == 0 && r.ties == 2));

        let other = report("b", &[("file=9", "f1", 1.0)]);
        assert!(per_file_head_to_head(&a, &other).is_err());
    }
}
