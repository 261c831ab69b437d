use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub score: f64,
    pub is_true_positive: bool,
}

impl LabeledScore {
    pub fn new(score: f64, is_true_positive: bool) -> Self {
        LabeledScore {
            score,
            is_true_positive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RocCurve {
    pub auc: f64,
    /// `(fpr, tpr)` from `(0, 0)` to `(1, 1)`, one point per distinct score.
    pub points: Vec<(f64, f64)>,
    /// Score threshold producing each point after the origin.
    pub thresholds: Vec<f64>,
}

pub(crate) fn check_finite(scores: &[LabeledScore]) -> Result<()> {
    match scores.iter().position(|s| !s.score.is_finite()) {
        Some(i) => Err(Error::invalid(format!("score {i} is not finite"))),
        None => Ok(()),
    }
}

/// Sorted by score, descending, with runs of equal scores collapsed into
/// `(score, positives, negatives)`.
pub(crate) fn score_groups(scores: &[LabeledScore]) -> Vec<(f64, usize, usize)> {
    let mut sorted: Vec<&LabeledScore> = scores.iter().collect();
    sorted.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut groups: Vec<(f64, usize, usize)> = Vec::new();
    for s in sorted {
        match groups.last_mut() {
            Some(g) if g.0 == s.score => {
                if s.is_true_positive {
                    g.1 += 1
                } else {
                    g.2 += 1
                }
            }
            _ => groups.push((
                s.score,
                s.is_true_positive as usize,
                !s.is_true_positive as usize,
            )),
        }
    }
    groups
}

/// ROC curve over every distinct threshold and its trapezoidal AUC.
///
/// The area is accumulated in integer half-units, so it equals the
/// Mann-Whitney statistic `U / (n_pos n_neg)` up to one final rounding.
pub fn roc_auc(scores: &[LabeledScore]) -> Result<RocCurve> {
    check_finite(scores)?;
    let n_pos = scores.iter().filter(|s| s.is_true_positive).count();
    let n_neg = scores.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::invalid(
            "ROC needs both positive and negative scores",
        ));
    }
    let groups = score_groups(scores);
    let mut points = Vec::with_capacity(groups.len() + 1);
    let mut thresholds = Vec::with_capacity(groups.len());
    points.push((0.0, 0.0));
    let (mut tp, mut fp) = (0u128, 0u128);
    let mut twice_area = 0u128;
    for (score, pos, neg) in groups {
        let (pos, neg) = (pos as u128, neg as u128);
        twice_area += neg * (2 * tp + pos);
        tp += pos;
        fp += neg;
        points.push((fp as f64 / n_neg as f64, tp as f64 / n_pos as f64));
        thresholds.push(score);
    }
    let auc = twice_area as f64 / (2 * n_pos as u128 * n_neg as u128) as f64;
    Ok(RocCurve {
        auc,
        points,
        thresholds,
    })
}
