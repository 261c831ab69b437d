use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::roc::{check_finite, score_groups, LabeledScore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct IdentificationTally {
    pub tp: usize,
    pub fp: usize,
    /// Maximum achievable number of true hits.
    pub detectable: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TallyMetrics {
    pub precision: f64,
    pub true_hit_rate: f64,
    pub f1: f64,
    /// Set when a denominator was zero and the affected value defaulted to 0.
    pub degenerate: bool,
}

pub fn tally_metrics(t: IdentificationTally) -> TallyMetrics {
    let mut degenerate = false;
    let mut ratio = |num: usize, den: usize| {
        if den == 0 {
            degenerate = true;
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(t.tp, t.tp + t.fp);
    let true_hit_rate = ratio(t.tp, t.detectable);
    // Harmonic mean written as a single division so equal F1 values
    // compare equal.
    let f1 = if t.tp > 0 && t.detectable > 0 {
        2.0 * t.tp as f64 / (t.tp + t.fp + t.detectable) as f64
    } else {
        0.0
    };
    TallyMetrics {
        precision,
        true_hit_rate,
        f1,
        degenerate,
    }
}

/// Percent change of `a` relative to `b`.
pub fn relative_delta_percent(a: f64, b: f64) -> f64 {
    (a - b) / b * 100.0
}

/// Tally of hits scoring at least `threshold`.
pub fn tally_at(scored: &[LabeledScore], threshold: f64, detectable: usize) -> IdentificationTally {
    let (mut tp, mut fp) = (0, 0);
    for s in scored.iter().filter(|s| s.score >= threshold) {
        if s.is_true_positive {
            tp += 1
        } else {
            fp += 1
        }
    }
    IdentificationTally { tp, fp, detectable }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub tally: IdentificationTally,
    pub metrics: TallyMetrics,
}

/// F1-maximizing threshold among the observed scores; ties go to the
/// higher threshold.
pub fn optimal_threshold(scored: &[LabeledScore], detectable: usize) -> Result<ThresholdChoice> {
    if scored.is_empty() {
        return Err(Error::invalid("no scored hits"));
    }
    check_finite(scored)?;
    let mut best: Option<ThresholdChoice> = None;
    let (mut tp, mut fp) = (0, 0);
    for (score, pos, neg) in score_groups(scored) {
        tp += pos;
        fp += neg;
        let tally = IdentificationTally { tp, fp, detectable };
        let metrics = tally_metrics(tally);
        if best.is_none_or(|b| metrics.f1 > b.metrics.f1) {
            best = Some(ThresholdChoice {
                threshold: score,
                tally,
                metrics,
            });
        }
    }
    Ok(best.expect("non-empty input"))
}

/// `(threshold, true hits, spurious hits)` for each threshold.
pub fn threshold_curve(scored: &[LabeledScore], thresholds: &[f64]) -> Vec<(f64, usize, usize)> {
    thresholds
        .iter()
        .map(|&t| {
            let tally = tally_at(scored, t, 0);
            (t, tally.tp, tally.fp)
        })
        .collect()
}

/// Splits hits by ground-truth membership, keeping each analyte once at
/// its best score.
pub fn spurious_partition(
    hits: &[(String, f64)],
    ground_truth: &BTreeSet<String>,
) -> (BTreeMap<String, f64>, BTreeMap<String, f64>) {
    let mut best: BTreeMap<&str, f64> = BTreeMap::new();
    for (key, score) in hits {
        best.entry(key)
            .and_modify(|s| *s = s.max(*score))
            .or_insert(*score);
    }
    let (mut truth, mut spurious) = (BTreeMap::new(), BTreeMap::new());
    for (key, score) in best {
        if ground_truth.contains(key) {
            truth.insert(key.to_string(), score);
        } else {
            spurious.insert(key.to_string(), score);
        }
    }
    (truth, spurious)
}

/// Labeled best-score list from a spurious partition, ready for
/// [`optimal_threshold`].
pub fn labeled_from_partition(
    truth: &BTreeMap<String, f64>,
    spurious: &BTreeMap<String, f64>,
) -> Vec<LabeledScore> {
    truth
        .values()
        .map(|&s| LabeledScore::new(s, true))
        .chain(spurious.values().map(|&s| LabeledScore::new(s, false)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IsomerGroup {
    pub group_id: String,
    pub analyte_keys: Vec<String>,
}

impl IsomerGroup {
    pub fn validate(&self) -> Result<()> {
        if self.analyte_keys.len() < 2 {
            return Err(Error::invalid(format!(
                "isomer group {} has fewer than 2 members",
                self.group_id
            )));
        }
        let distinct: BTreeSet<&String> = self.analyte_keys.iter().collect();
        if distinct.len() != self.analyte_keys.len() {
            return Err(Error::invalid(format!(
                "isomer group {} repeats a member",
                self.group_id
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

pub fn isomer_group_stats(
    per_analyte: &BTreeMap<String, f64>,
    groups: &[IsomerGroup],
) -> Result<BTreeMap<String, GroupStats>> {
    let mut out = BTreeMap::new();
    for g in groups {
        g.validate()?;
        let values = g
            .analyte_keys
            .iter()
            .map(|k| {
                per_analyte.get(k).copied().ok_or_else(|| {
                    Error::invalid(format!(
                        "isomer group {}: no value for analyte {k}",
                        g.group_id
                    ))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        let n = values.len();
        out.insert(
            g.group_id.clone(),
            GroupStats {
                mean: values.iter().sum::<f64>() / n as f64,
                min: values.iter().copied().fold(f64::INFINITY, f64::min),
                max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                n,
            },
        );
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Consistency {
    pub consistent: usize,
    pub unique: usize,
}

/// Overlap of each dilution's hits with the anchor dilution's hits.
pub fn dilution_consistency(
    per_dilution: &BTreeMap<String, BTreeSet<String>>,
    anchor: &str,
) -> Result<BTreeMap<String, Consistency>> {
    let anchor_hits = per_dilution
        .get(anchor)
        .ok_or_else(|| Error::invalid(format!("anchor dilution {anchor} not present")))?;
    Ok(per_dilution
        .iter()
        .map(|(d, hits)| {
            (
                d.clone(),
                Consistency {
                    consistent: hits.intersection(anchor_hits).count(),
                    unique: hits.difference(anchor_hits).count(),
                },
            )
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_tally_is_flagged() {
        let m = tally_metrics(IdentificationTally {
            tp: 0,
            fp: 0,
            detectable: 10,
        });
        assert_eq!((m.precision, m.f1, m.degenerate), (0.0, 0.0, true));
        assert!(
            !tally_metrics(IdentificationTally {
                tp: 1,
                fp: 1,
                detectable: 2
            })
            .degenerate
        );
    }

    #[test]
    fn optimal_threshold_examples() {
        let s = vec![
            LabeledScore::new(0.9, true),
            LabeledScore::new(0.8, true),
            LabeledScore::new(0.7, false),
        ];
        let c = optimal_threshold(&s, 2).unwrap();
        assert_eq!((c.threshold, c.metrics.f1), (0.8, 1.0));

        let neg = vec![LabeledScore::new(0.4, false), LabeledScore::new(0.6, false)];
        let c = optimal_threshold(&neg, 3).unwrap();
        assert_eq!((c.threshold, c.metrics.f1), (0.6, 0.0));
    }

    #[test]
    fn spurious_dedup() {
        let hits = vec![
            ("A".to_string(), 0.3),
            ("B".to_string(), 0.5),
            ("A".to_string(), 0.7),
        ];
        let truth: BTreeSet<String> = ["A".to_string()].into();
        let (t, s) = spurious_partition(&hits, &truth);
        assert_eq!(t.get("A"), Some(&0.7));
        assert_eq!(s.get("B"), Some(&0.5));
        assert_eq!((t.len(), s.len()), (1, 1));
    }

    #[test]
    fn group_stats_and_errors() {
        let per: BTreeMap<String, f64> = [
            ("L".into(), 0.48),
            ("I".into(), 0.48),
            ("X".into(), 1.0),
            ("Y".into(), 0.0),
        ]
        .into();
        let groups = vec![
            IsomerGroup {
                group_id: "leu".into(),
                analyte_keys: vec!["L".into(), "I".into()],
            },
            IsomerGroup {
                group_id: "xy".into(),
                analyte_keys: vec!["X".into(), "Y".into()],
            },
        ];
        let st = isomer_group_stats(&per, &groups).unwrap();
        assert!((st["leu"].mean - 0.48).abs() < 1e-12);
        assert_eq!((st["xy"].mean, st["xy"].min, st["xy"].max), (0.5, 0.0, 1.0));

        let missing = vec![IsomerGroup {
            group_id: "g".into(),
            analyte_keys: vec!["L".into(), "Q".into()],
        }];
        let err = isomer_group_stats(&per, &missing).unwrap_err().to_string();
        assert!(err.contains("Q"));
        let single = vec![IsomerGroup {
            group_id: "s".into(),
            analyte_keys: vec!["L".into()],
        }];
        assert!(isomer_group_stats(&per, &single).is_err());
    }

    #[test]
    fn consistency_counts() {
        let set = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        let per: BTreeMap<String, BTreeSet<String>> = [
            ("10".into(), set(&["a", "b", "c"])),
            ("20".into(), set(&["a", "d"])),
        ]
        .into();
        let c = dilution_consistency(&per, "10").unwrap();
        assert_eq!(
            c["10"],
            Consistency {
                consistent: 3,
                unique: 0
            }
        );
        assert_eq!(
            c["20"],
            Consistency {
                consistent: 1,
                unique: 1
            }
        );
        assert!(dilution_consistency(&per, "5").is_err());
    }
}
