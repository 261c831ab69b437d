use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{cmp_f64, cosine_distance, SampleEmbedding};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalProtocol {
    pub train_fraction: f64,
    /// Seeds `0..n_seeds` drive the split shuffles.
    pub n_seeds: u64,
    pub stratified: bool,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            train_fraction: 0.7,
            n_seeds: 5,
            stratified: true,
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::invalid("train fraction must lie in (0, 1)"));
        }
        if self.n_seeds == 0 {
            return Err(Error::invalid("at least one seed is required"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierModel {
    Knn { k: usize },
    NearestCentroid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifyReport {
    pub classes: Vec<String>,
    pub macro_f1_mean: f64,
    /// Sample standard deviation across seeds (0 for a single seed).
    pub macro_f1_std: f64,
    pub per_seed_f1: Vec<f64>,
    /// Rows are true classes, columns predicted, summed over seeds.
    pub confusion: Vec<Vec<usize>>,
}

/// Train/test indices for one seed, both sorted ascending.
///
/// Stratified: each class (in label order) is shuffled and contributes
/// `round(fraction * n_c)` training samples, clamped so that both sides keep
/// at least one sample. Unstratified: one shuffle of all indices.
pub fn stratified_split(
    labels: &[String],
    train_fraction: f64,
    seed: u64,
    stratified: bool,
) -> (Vec<usize>, Vec<usize>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let take = |n: usize| {
        ((train_fraction * n as f64).round() as usize).clamp(1.min(n), n.saturating_sub(1).max(1))
    };
    let mut train = Vec::new();
    let mut test = Vec::new();
    let groups: Vec<Vec<usize>> = if stratified {
        let mut by_class: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, l) in labels.iter().enumerate() {
            by_class.entry(l).or_default().push(i);
        }
        by_class.into_values().collect()
    } else {
        vec![(0..labels.len()).collect()]
    };
    for mut idx in groups {
        idx.shuffle(&mut rng);
        let n_train = take(idx.len());
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    (train, test)
}

/// Unweighted mean of per-class F1 over every class seen in either list.
pub fn macro_f1(truth: &[String], predicted: &[String]) -> f64 {
    let classes: BTreeSet<&String> = truth.iter().chain(predicted).collect();
    if classes.is_empty() {
        return 0.0;
    }
    let total: f64 = classes
        .iter()
        .map(|c| {
            let (mut tp, mut fp, mut fne) = (0usize, 0usize, 0usize);
            for (t, p) in truth.iter().zip(predicted) {
                match (t == *c, p == *c) {
                    (true, true) => tp += 1,
                    (false, true) => fp += 1,
                    (true, false) => fne += 1,
                    _ => {}
                }
            }
            let den = 2 * tp + fp + fne;
            if den == 0 {
                0.0
            } else {
                2.0 * tp as f64 / den as f64
            }
        })
        .sum();
    total / classes.len() as f64
}

fn predict_knn(
    samples: &[SampleEmbedding],
    labels: &[String],
    train: &[usize],
    query: usize,
    k: usize,
) -> String {
    let mut dists: Vec<(f64, usize)> = train
        .iter()
        .map(|&t| {
            (
                cosine_distance(&samples[query].vector.0, &samples[t].vector.0),
                t,
            )
        })
        .collect();
    dists.sort_by(|a, b| cmp_f64(a.0, b.0).then(a.1.cmp(&b.1)));
    // Votes, then summed distance, then label order break ties.
    let mut votes: BTreeMap<&str, (usize, f64)> = BTreeMap::new();
    for &(d, t) in dists.iter().take(k.max(1)) {
        let e = votes.entry(&labels[t]).or_insert((0, 0.0));
        e.0 += 1;
        e.1 += d;
    }
    votes
        .into_iter()
        .min_by(|a, b| {
            b.1 .0
                .cmp(&a.1 .0)
                .then(cmp_f64(a.1 .1, b.1 .1))
                .then(a.0.cmp(b.0))
        })
        .map(|(l, _)| l.to_string())
        .expect("training set is non-empty")
}

fn centroids(
    samples: &[SampleEmbedding],
    labels: &[String],
    train: &[usize],
) -> BTreeMap<String, Vec<f64>> {
    let mut sums: BTreeMap<String, (Vec<f64>, usize)> = BTreeMap::new();
    for &t in train {
        let v = &samples[t].vector.0;
        let e = sums
            .entry(labels[t].clone())
            .or_insert_with(|| (vec![0.0; v.len()], 0));
        e.0.iter_mut().zip(v).for_each(|(a, b)| *a += b);
        e.1 += 1;
    }
    sums.into_iter()
        .map(|(l, (s, n))| (l, s.into_iter().map(|x| x / n as f64).collect()))
        .collect()
}

struct SeedOutcome {
    f1: f64,
    pairs: Vec<(String, String)>,
}

fn run_seed(
    samples: &[SampleEmbedding],
    labels: &[String],
    protocol: &EvalProtocol,
    model: ClassifierModel,
    seed: u64,
) -> SeedOutcome {
    let (train, test) =
        stratified_split(labels, protocol.train_fraction, seed, protocol.stratified);
    let predicted: Vec<String> = match model {
        ClassifierModel::Knn { k } => test
            .iter()
            .map(|&q| predict_knn(samples, labels, &train, q, k))
            .collect(),
        ClassifierModel::NearestCentroid => {
            let cents = centroids(samples, labels, &train);
            test.iter()
                .map(|&q| {
                    cents
                        .iter()
                        .map(|(l, c)| (cosine_distance(&samples[q].vector.0, c), l))
                        .min_by(|a, b| cmp_f64(a.0, b.0).then(a.1.cmp(b.1)))
                        .map(|(_, l)| l.clone())
                        .expect("at least one class")
                })
                .collect()
        }
    };
    let truth: Vec<String> = test.iter().map(|&i| labels[i].clone()).collect();
    SeedOutcome {
        f1: macro_f1(&truth, &predicted),
        pairs: truth.into_iter().zip(predicted).collect(),
    }
}

/// Repeated split/fit/predict over seeds `0..n_seeds`; seeds run in parallel.
pub fn classify_evaluate(
    samples: &[SampleEmbedding],
    protocol: &EvalProtocol,
    model: ClassifierModel,
) -> Result<ClassifyReport> {
    protocol.validate()?;
    if let ClassifierModel::Knn { k: 0 } = model {
        return Err(Error::invalid("knn needs k >= 1"));
    }
    let labels = samples
        .iter()
        .map(|s| {
            s.label
                .clone()
                .ok_or_else(|| Error::invalid(format!("sample {} has no label", s.sample_id)))
        })
        .collect::<Result<Vec<String>>>()?;
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for l in &labels {
        *counts.entry(l).or_default() += 1;
    }
    if counts.len() < 2 {
        return Err(Error::invalid("classification needs at least two classes"));
    }
    if let Some((l, _)) = counts.iter().find(|(_, &n)| n < 2) {
        return Err(Error::invalid(format!(
            "class {l} has fewer than two samples"
        )));
    }
    if let Some(s) = samples
        .iter()
        .find(|s| s.vector.dim() != samples[0].vector.dim())
    {
        return Err(Error::DimensionMismatch {
            id: s.sample_id.clone(),
            expected: samples[0].vector.dim(),
            found: s.vector.dim(),
        });
    }

    let outcomes: Vec<SeedOutcome> = (0..protocol.n_seeds)
        .into_par_iter()
        .map(|seed| run_seed(samples, &labels, protocol, model, seed))
        .collect();

    let classes: Vec<String> = counts.keys().map(|s| s.to_string()).collect();
    let index: BTreeMap<&str, usize> = classes
        .iter()
        .enumerate()
        .map(|(i, c)| (c.as_str(), i))
        .collect();
    let mut confusion = vec![vec![0usize; classes.len()]; classes.len()];
    for o in &outcomes {
        for (t, p) in &o.pairs {
            confusion[index[t.as_str()]][index[p.as_str()]] += 1;
        }
    }
    let per_seed_f1: Vec<f64> = outcomes.iter().map(|o| o.f1).collect();
    let n = per_seed_f1.len() as f64;
    let mean = per_seed_f1.iter().sum::<f64>() / n;
    let std = if per_seed_f1.len() > 1 {
        (per_seed_f1.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Ok(ClassifyReport {
        classes,
        macro_f1_mean: mean,
        macro_f1_std: std,
        per_seed_f1,
        confusion,
    })
}
