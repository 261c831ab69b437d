//! Sample-level embeddings: aggregation of spectrum embeddings per sample,
//! a deterministic PCA projection and small-data classification.

mod classify;
mod pca;

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectrum::EmbeddingVector;

pub use classify::{
    classify_evaluate, macro_f1, stratified_split, ClassifierModel, ClassifyReport, EvalProtocol,
};
pub use pca::pca_project;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleEmbedding {
    pub sample_id: String,
    pub vector: EmbeddingVector,
    pub n_spectra: usize,
    pub label: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    #[default]
    Mean,
    Median,
    /// Weighted by each spectrum's total ion current.
    WeightedMean,
}

/// Sum in a fixed order so the result does not depend on input order.
fn ordered_sum(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    xs.into_iter().sum()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

/// Combines `(embedding, weight)` pairs into one vector. Weights are only
/// used by [`Aggregation::WeightedMean`].
pub fn aggregate_sample(
    embeddings: &[(EmbeddingVector, f64)],
    strategy: Aggregation,
) -> Result<EmbeddingVector> {
    let first = embeddings
        .first()
        .ok_or_else(|| Error::invalid("cannot aggregate an empty embedding set"))?;
    let dim = first.0.dim();
    for (i, (v, w)) in embeddings.iter().enumerate() {
        if v.dim() != dim {
            return Err(Error::DimensionMismatch {
                id: format!("#{i}"),
                expected: dim,
                found: v.dim(),
            });
        }
        if !v.is_finite() {
            return Err(Error::NonFinite(format!("#{i}")));
        }
        if strategy == Aggregation::WeightedMean && !(w.is_finite() && *w >= 0.0) {
            return Err(Error::invalid(format!(
                "weight {i} must be finite and non-negative"
            )));
        }
    }
    let n = embeddings.len() as f64;
    let column = |j: usize| embeddings.iter().map(move |(v, _)| v.0[j]);
    let out = match strategy {
        Aggregation::Mean => (0..dim)
            .map(|j| ordered_sum(column(j).collect()) / n)
            .collect(),
        Aggregation::Median => (0..dim).map(|j| median(column(j).collect())).collect(),
        Aggregation::WeightedMean => {
            let total = ordered_sum(embeddings.iter().map(|(_, w)| *w).collect());
            if total <= 0.0 {
                return Err(Error::invalid("weights sum to zero"));
            }
            (0..dim)
                .map(|j| ordered_sum(embeddings.iter().map(|(v, w)| v.0[j] * w).collect()) / total)
                .collect()
        }
    };
    Ok(EmbeddingVector(out))
}

/// Cosine distance `1 - cos`; a zero vector is at distance 1 from everything.
pub(crate) fn cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        1.0
    } else {
        1.0 - dot / (na * nb)
    }
}

pub(crate) fn cmp_f64(a: f64, b: f64) -> Ordering {
    a.total_cmp(&b)
}
