//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero when any criterion fails. A positional argument filters
//! criteria by number or name substring.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::panic::{self, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use specbench::bench::{
    dilution_analysis, evaluate_benchmark, generate_dilution_fixture, generate_fixture,
    random_smiles, BenchmarkInputs, BenchmarkSpec, DilutionFixtureSpec, Metric, NamedScorer,
    SyntheticFixtureSpec,
};
use specbench::biointerp::{
    classify_evaluate, stratified_split, ClassifierModel, EvalProtocol, SampleEmbedding,
};
use specbench::chem::{
    mces_distance, mces_lower_bound, parse_smiles, BondOrder, McesConfig, MolGraph,
};
use specbench::io::{parse_library_manifest, parse_manifest_records, parse_mgf};
use specbench::metrics::{
    library_ceiling, optimal_threshold, relative_delta_percent, roc_auc, tally_metrics,
    topk_accuracy_per_analyte, topk_accuracy_per_spectrum, welch_t_test_one_tailed, Alternative,
    CeilingLevel, IdentificationTally, LabeledScore,
};
use specbench::similarity::{modified_cosine, CosineConfig};
use specbench::{
    EmbeddingVector, IndexConfig, Peak, Polarity, RetrievalResult, SearchIndex, Spectrum,
};

type Outcome = Result<String, String>;
type Criterion = (u32, &'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(actual: f64, expected: f64, tol: f64) -> bool {
    (actual - expected).abs() <= tol
}

fn budget(start: Instant, limit_s: u64) -> Result<(), String> {
    let el = start.elapsed();
    if el > Duration::from_secs(limit_s) {
        Err(format!("took {:.1}s, budget {limit_s}s", el.as_secs_f64()))
    } else {
        Ok(())
    }
}

// ---------------------------------------------------------------- 1

fn c1_metric_formulas() -> Outcome {
    let a = tally_metrics(IdentificationTally {
        tp: 178,
        fp: 372,
        detectable: 443,
    });
    let b = tally_metrics(IdentificationTally {
        tp: 125,
        fp: 390,
        detectable: 443,
    });
    let pct = |x: f64| x * 100.0;
    for (label, got, want) in [
        ("A precision", pct(a.precision), 32.4),
        ("A true-hit rate", pct(a.true_hit_rate), 40.2),
        ("A F1", pct(a.f1), 35.9),
        ("B precision", pct(b.precision), 24.3),
        ("B true-hit rate", pct(b.true_hit_rate), 28.2),
        ("B F1", pct(b.f1), 26.1),
    ] {
        ensure!(
            within(got, want, 0.05),
            "{label} {got:.4} vs {want} (±0.05)"
        );
    }
    // Relative deltas are taken between the one-decimal percentages.
    let r1 = |x: f64| (pct(x) * 10.0).round() / 10.0;
    let d_tp = relative_delta_percent(178.0, 125.0);
    let d_p = relative_delta_percent(r1(a.precision), r1(b.precision));
    let d_f1 = relative_delta_percent(r1(a.f1), r1(b.f1));
    for (label, got, want) in [
        ("TP", d_tp, 42.4),
        ("precision", d_p, 33.3),
        ("F1", d_f1, 37.5),
    ] {
        ensure!(
            within(got, want, 0.1),
            "delta {label} {got:.4} vs {want} (±0.1)"
        );
    }
    let exact_f1 = relative_delta_percent(a.f1, b.f1);
    Ok(format!(
        "A {:.3}/{:.3}/{:.3}, B {:.3}/{:.3}/{:.3}, deltas {d_tp:.2}/{d_p:.2}/{d_f1:.2} (unrounded F1 delta {exact_f1:.2})",
        pct(a.precision),
        pct(a.true_hit_rate),
        pct(a.f1),
        pct(b.precision),
        pct(b.true_hit_rate),
        pct(b.f1)
    ))
}

// ---------------------------------------------------------------- 2

fn bond_code(o: BondOrder) -> u8 {
    match o {
        BondOrder::Single => 1,
        BondOrder::Double => 2,
        BondOrder::Triple => 3,
        BondOrder::Aromatic => 4,
    }
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

type Form = (Vec<(String, bool)>, Vec<(usize, usize, u8)>);

/// Canonical form of every edge-induced subgraph: lexicographically smallest
/// (atom labels, sorted edge list) over all orderings of the incident atoms.
fn subgraph_forms(g: &MolGraph, perms: &[Vec<Vec<usize>>]) -> HashMap<Form, usize> {
    let m = g.bonds.len();
    let mut out = HashMap::new();
    for mask in 0u32..(1 << m) {
        let edges: Vec<_> = (0..m)
            .filter(|i| mask >> i & 1 == 1)
            .map(|i| g.bonds[i])
            .collect();
        let mut atoms: Vec<usize> = edges.iter().flat_map(|b| [b.a, b.b]).collect();
        atoms.sort_unstable();
        atoms.dedup();
        let mut best: Option<Form> = None;
        for perm in &perms[atoms.len()] {
            // perm[pos] = index into `atoms` placed at position pos
            let mut pos_of = HashMap::new();
            for (pos, &ai) in perm.iter().enumerate() {
                pos_of.insert(atoms[ai], pos);
            }
            let labels: Vec<(String, bool)> = perm
                .iter()
                .map(|&ai| {
                    let a = &g.atoms[atoms[ai]];
                    (a.element.to_string(), a.aromatic)
                })
                .collect();
            let mut es: Vec<(usize, usize, u8)> = edges
                .iter()
                .map(|b| {
                    let (x, y) = (pos_of[&b.a], pos_of[&b.b]);
                    (x.min(y), x.max(y), bond_code(b.order))
                })
                .collect();
            es.sort_unstable();
            let form = (labels, es);
            if best.as_ref().is_none_or(|b| form < *b) {
                best = Some(form);
            }
        }
        out.insert(best.expect("at least one permutation"), edges.len());
    }
    out
}

fn c2_mces_oracle() -> Outcome {
    let start = Instant::now();
    let mut smiles: Vec<String> = [
        "C",
        "CC",
        "CCC",
        "CCO",
        "CC=O",
        "C=C",
        "C#C",
        "CC#N",
        "CCCC",
        "CC(C)C",
        "CCCO",
        "OCCO",
        "CC(=O)O",
        "CC(N)=O",
        "NCC(=O)O",
        "C1CC1",
        "C1CCC1",
        "C1CCCC1",
        "C1CCCCC1",
        "C1=CCCCC1",
        "c1ccccc1",
        "c1ccncc1",
        "c1ccoc1",
        "CC(C)(C)C",
        "CCCCCC",
        "CCCCC=O",
        "OC1CCCC1",
        "CN(C)C",
        "C=CC=C",
        "CC1CC1",
        "O=C=O",
        "CS",
        "ClCCl",
        "FC(F)F",
        "C1CC2CC12",
        "CC(=O)N",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    while smiles.len() < 48 {
        let s = random_smiles(&mut rng, 6);
        if !smiles.contains(&s) {
            smiles.push(s);
        }
    }
    let graphs: Vec<MolGraph> = smiles
        .iter()
        .map(|s| parse_smiles(s).map_err(|e| format!("{s}: {e}")))
        .collect::<Result<_, _>>()?;
    for (s, g) in smiles.iter().zip(&graphs) {
        ensure!(g.n_atoms() <= 6, "{s} has {} heavy atoms", g.n_atoms());
    }
    let perms: Vec<Vec<Vec<usize>>> = (0..=6).map(permutations).collect();
    let forms: Vec<HashMap<Form, usize>> =
        graphs.iter().map(|g| subgraph_forms(g, &perms)).collect();
    let cfg = McesConfig {
        threshold: 64,
        ..McesConfig::default()
    };

    let mut pairs = 0usize;
    for i in 0..graphs.len() {
        let own = mces_distance(&graphs[i], &graphs[i], &cfg).map_err(|e| e.to_string())?;
        ensure!(
            own.distance == 0 && own.exact,
            "self distance of {} is {:?}",
            smiles[i],
            own
        );
        for j in i + 1..graphs.len() {
            let common = forms[i]
                .iter()
                .filter(|(f, _)| forms[j].contains_key(*f))
                .map(|(_, &n)| n)
                .max()
                .unwrap_or(0);
            let oracle = graphs[i].n_bonds() + graphs[j].n_bonds() - 2 * common;
            let got = mces_distance(&graphs[i], &graphs[j], &cfg).map_err(|e| e.to_string())?;
            ensure!(
                got.exact && got.distance == oracle,
                "{} vs {}: branch and bound {:?}, oracle {oracle}",
                smiles[i],
                smiles[j],
                got
            );
            let lb = mces_lower_bound(&graphs[i], &graphs[j]);
            ensure!(
                lb <= oracle,
                "{} vs {}: lower bound {lb} > {oracle}",
                smiles[i],
                smiles[j]
            );
            pairs += 1;
        }
    }
    ensure!(pairs >= 200, "only {pairs} pairs");
    budget(start, 60)?;
    Ok(format!(
        "{pairs} pairs over {} molecules agree",
        graphs.len()
    ))
}

// ---------------------------------------------------------------- 3

const FRAG_TOL: f64 = 0.01;

fn random_peaks(rng: &mut ChaCha8Rng, n: usize, jitter: &Normal<f64>) -> Vec<Peak> {
    (0..n)
        .map(|_| {
            let mz = 50.0 + 0.5 * rng.random_range(0..200) as f64 + jitter.sample(rng);
            Peak::new(mz, rng.random_range(0.01..100.0))
        })
        .collect()
}

fn random_pair(rng: &mut ChaCha8Rng, small: bool) -> (Spectrum, Spectrum) {
    let jitter = Normal::new(0.0, 0.004).unwrap();
    let size = |rng: &mut ChaCha8Rng| {
        if small {
            rng.random_range(1..=8)
        } else {
            rng.random_range(1..=40)
        }
    };
    let na = size(rng);
    let pa = random_peaks(rng, na, &jitter);
    let prec_a = 300.0 + rng.random_range(0.0..100.0);
    let (prec_b, pb) = if rng.random_bool(0.6) {
        let shift = 0.5 * rng.random_range(-20..=20) as f64 + jitter.sample(rng);
        let mut pb = Vec::new();
        for p in &pa {
            if rng.random_bool(0.7) {
                let off = if rng.random_bool(0.5) { 0.0 } else { shift };
                pb.push(Peak::new(
                    (p.mz + off + jitter.sample(rng)).max(1.0),
                    rng.random_range(0.01..100.0),
                ));
            }
        }
        let extra = rng.random_range(0..=3);
        pb.extend(random_peaks(rng, extra, &jitter));
        if small {
            pb.truncate(8);
        }
        if pb.is_empty() {
            pb = random_peaks(rng, 1, &jitter);
        }
        (prec_a + shift, pb)
    } else {
        let nb = size(rng);
        (
            300.0 + rng.random_range(0.0..100.0),
            random_peaks(rng, nb, &jitter),
        )
    };
    (
        Spectrum::new("a", prec_a, Polarity::Positive, pa).unwrap(),
        Spectrum::new("b", prec_b, Polarity::Positive, pb).unwrap(),
    )
}

/// Maximum-weight matching by DP over subsets of `b`'s peaks.
fn exhaustive_cosine(a: &Spectrum, b: &Spectrum) -> f64 {
    let shift = b.precursor_mz - a.precursor_mz;
    let nb = b.peaks.len();
    let mut dp = vec![f64::NEG_INFINITY; 1 << nb];
    dp[0] = 0.0;
    for pa in &a.peaks {
        let mut next = dp.clone();
        for (mask, &cur) in dp.iter().enumerate() {
            if cur == f64::NEG_INFINITY {
                continue;
            }
            for (j, pb) in b.peaks.iter().enumerate() {
                if mask >> j & 1 == 1 {
                    continue;
                }
                let ok =
                    (pa.mz - pb.mz).abs() <= FRAG_TOL || (pa.mz - pb.mz + shift).abs() <= FRAG_TOL;
                if ok {
                    let m = mask | 1 << j;
                    next[m] = next[m].max(cur + pa.intensity * pb.intensity);
                }
            }
        }
        dp = next;
    }
    let best = dp.iter().cloned().fold(0.0, f64::max);
    let na: f64 = a
        .peaks
        .iter()
        .map(|p| p.intensity * p.intensity)
        .sum::<f64>()
        .sqrt();
    let nbn: f64 = b
        .peaks
        .iter()
        .map(|p| p.intensity * p.intensity)
        .sum::<f64>()
        .sqrt();
    best / (na * nbn)
}

fn c3_modified_cosine() -> Outcome {
    let start = Instant::now();
    let cfg = CosineConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut small_pairs, mut nonzero) = (0usize, 0usize);
    for i in 0..10_000 {
        let (a, b) = random_pair(&mut rng, i % 2 == 0);
        let ab = modified_cosine(&a, &b, &cfg).map_err(|e| e.to_string())?;
        let ba = modified_cosine(&b, &a, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            ab.score == ba.score,
            "pair {i}: asymmetric {} vs {}",
            ab.score,
            ba.score
        );
        ensure!(
            (0.0..=1.0).contains(&ab.score),
            "pair {i}: score {} out of range",
            ab.score
        );
        let c = 10f64.powf(rng.random_range(-3.0..3.0));
        let mut scaled = a.clone();
        scaled.peaks.iter_mut().for_each(|p| p.intensity *= c);
        let sc = modified_cosine(&scaled, &b, &cfg).map_err(|e| e.to_string())?;
        ensure!(
            within(sc.score, ab.score, 1e-9),
            "pair {i}: scale {c} moved score {} -> {}",
            ab.score,
            sc.score
        );
        if ab.score > 0.0 {
            nonzero += 1;
        }
        if a.peaks.len() <= 8 && b.peaks.len() <= 8 {
            small_pairs += 1;
            let ex = exhaustive_cosine(&a, &b);
            ensure!(
                ab.score <= ex + 1e-12,
                "pair {i}: greedy {} > exhaustive {ex}",
                ab.score
            );
        }
    }
    budget(start, 30)?;
    Ok(format!(
        "10000 pairs ({nonzero} with overlap), {small_pairs} checked against exhaustive matching"
    ))
}

// ---------------------------------------------------------------- 4

fn c4_roc() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0f64;
    for set in 0..1000 {
        let n = rng.random_range(2..300);
        let levels = [2u32, 3, 5, 10, 1_000_000][set % 5];
        let mut scores: Vec<LabeledScore> = (0..n)
            .map(|_| {
                LabeledScore::new(
                    rng.random_range(0..levels) as f64 / levels as f64,
                    rng.random_bool(0.4),
                )
            })
            .collect();
        scores[0].is_true_positive = true;
        scores[1].is_true_positive = false;
        let auc = roc_auc(&scores).map_err(|e| e.to_string())?.auc;
        let (mut u2, mut np, mut nn) = (0u64, 0u64, 0u64);
        for p in scores.iter().filter(|s| s.is_true_positive) {
            np += 1;
            for q in scores.iter().filter(|s| !s.is_true_positive) {
                u2 += if p.score > q.score {
                    2
                } else if p.score == q.score {
                    1
                } else {
                    0
                };
            }
        }
        nn += scores.len() as u64 - np;
        let mw = u2 as f64 / 2.0 / (np * nn) as f64;
        worst = worst.max((auc - mw).abs());
        ensure!(
            within(auc, mw, 1e-12),
            "set {set}: auc {auc} vs Mann-Whitney {mw}"
        );
    }
    for set in 0..100 {
        let n = rng.random_range(2..200);
        let scores: Vec<LabeledScore> = (0..n)
            .map(|i| {
                let pos = i % 2 == 0;
                let s = if pos {
                    rng.random_range(0.6..=1.0)
                } else {
                    rng.random_range(0.0..0.5)
                };
                LabeledScore::new(s, pos)
            })
            .collect();
        let auc = roc_auc(&scores).map_err(|e| e.to_string())?.auc;
        ensure!(auc == 1.0, "separated set {set}: auc {auc}");
    }
    Ok(format!(
        "max |AUC - U/(n+ n-)| = {worst:.1e}; 100 separated sets give 1.0"
    ))
}

// ---------------------------------------------------------------- 5

fn search_all(index: &SearchIndex, queries: &[Spectrum]) -> Result<Vec<RetrievalResult>, String> {
    index
        .batch_search(queries, None)
        .into_iter()
        .collect::<Result<_, _>>()
        .map_err(|e| e.to_string())
}

fn c5_end_to_end() -> Outcome {
    let spec = SyntheticFixtureSpec {
        n_analytes: 1000,
        spectra_per_analyte: 3,
        mz_jitter: 0.002,
        intensity_jitter: 0.1,
        dropout: 0.1,
        seed: 0,
        ..SyntheticFixtureSpec::default()
    };
    let fx = generate_fixture(&spec).map_err(|e| e.to_string())?;
    let index =
        SearchIndex::build(&fx.library, IndexConfig::default(), None).map_err(|e| e.to_string())?;
    let results = search_all(&index, &fx.queries)?;
    let ps = topk_accuracy_per_spectrum(&results, &fx.truth, 1).map_err(|e| e.to_string())?;
    let pa = topk_accuracy_per_analyte(&results, &fx.truth, 1).map_err(|e| e.to_string())?;
    ensure!(ps >= 0.95, "per-spectrum top-1 {ps}");
    ensure!(pa >= 0.95, "per-analyte top-1 {pa}");

    let held = generate_fixture(&SyntheticFixtureSpec {
        withheld_fraction: 0.2,
        ..spec
    })
    .map_err(|e| e.to_string())?;
    let bench = BenchmarkSpec {
        name: "withheld".into(),
        library_path: "unused".into(),
        query_path: "unused".into(),
        truth_path: None,
        sample_metadata_path: None,
        isomer_groups_path: None,
        ground_truth_path: None,
        reference_embeddings_path: None,
        query_embeddings_path: None,
        partitions: vec![],
        scorers: vec![NamedScorer {
            name: "modified_cosine".into(),
            config: IndexConfig::default(),
        }],
        metrics: vec![Metric::Topk, Metric::Ceiling],
        ks: vec![1, 5, 10],
        exclude: vec![],
        mces: McesConfig::default(),
    };
    let inputs = BenchmarkInputs {
        library: held.library.clone(),
        queries: held.queries.clone(),
        truth: Some(held.truth.clone()),
        ..BenchmarkInputs::default()
    };
    let report = evaluate_benchmark(&bench, &inputs).map_err(|e| e.to_string())?;
    let get = |m: &str| {
        report
            .find("modified_cosine", "all", m)
            .map(|r| r.value)
            .ok_or(format!("missing {m}"))
    };
    for level in ["spectrum", "analyte"] {
        let ceiling = get(&format!("ceiling_per_{level}"))?;
        ensure!(
            within(ceiling, 0.8, 1e-12),
            "reported {level} ceiling {ceiling}"
        );
        for k in [1, 5, 10] {
            let acc = get(&format!("top{k}_per_{level}"))?;
            ensure!(
                acc <= ceiling,
                "top{k} per {level} {acc} exceeds ceiling {ceiling}"
            );
        }
    }
    let direct = library_ceiling(&held.truth, &held.library, CeilingLevel::Spectrum);
    ensure!(within(direct, 0.8, 1e-12), "library_ceiling {direct}");
    Ok(format!(
        "top-1 {ps:.4} per spectrum, {pa:.4} per analyte; withheld run top-1 {:.4} <= ceiling 0.8",
        get("top1_per_spectrum")?
    ))
}

// ---------------------------------------------------------------- 6

/// F1 as the exact fraction `2tp / (tp + fp + detectable)`.
fn f1_fraction(tp: u64, fp: u64, det: u64) -> (u64, u64) {
    if tp == 0 || det == 0 {
        (0, 1)
    } else {
        (2 * tp, tp + fp + det)
    }
}

fn c6_thresholds() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for set in 0..1000 {
        let n = rng.random_range(1..200);
        let grid = [4u32, 20, 100, 1_000_000][set % 4];
        let scored: Vec<LabeledScore> = (0..n)
            .map(|_| {
                LabeledScore::new(
                    rng.random_range(0..=grid) as f64 / grid as f64,
                    rng.random_bool(0.5),
                )
            })
            .collect();
        let positives = scored.iter().filter(|s| s.is_true_positive).count();
        let detectable = positives + rng.random_range(0..20);
        let got = optimal_threshold(&scored, detectable).map_err(|e| e.to_string())?;

        let mut distinct: Vec<f64> = scored.iter().map(|s| s.score).collect();
        distinct.sort_by(|a, b| b.total_cmp(a));
        distinct.dedup();
        let mut best: Option<(f64, u64, u64, (u64, u64))> = None;
        for &t in &distinct {
            let tp = scored
                .iter()
                .filter(|s| s.score >= t && s.is_true_positive)
                .count() as u64;
            let fp = scored
                .iter()
                .filter(|s| s.score >= t && !s.is_true_positive)
                .count() as u64;
            let f = f1_fraction(tp, fp, detectable as u64);
            // strictly better only, so ties keep the higher threshold seen first
            if best.is_none_or(|b| f.0 as u128 * b.3 .1 as u128 > b.3 .0 as u128 * f.1 as u128) {
                best = Some((t, tp, fp, f));
            }
        }
        let (t, tp, fp, f) = best.expect("non-empty");
        ensure!(
            got.threshold == t && got.tally.tp as u64 == tp && got.tally.fp as u64 == fp,
            "set {set}: got threshold {} ({}/{}), scan {t} ({tp}/{fp})",
            got.threshold,
            got.tally.tp,
            got.tally.fp
        );
        ensure!(
            within(got.metrics.f1, f.0 as f64 / f.1 as f64, 1e-15),
            "set {set}: F1 {}",
            got.metrics.f1
        );
    }

    let fx =
        generate_dilution_fixture(&DilutionFixtureSpec::default()).map_err(|e| e.to_string())?;
    let index =
        SearchIndex::build(&fx.library, IndexConfig::default(), None).map_err(|e| e.to_string())?;
    let results = search_all(&index, &fx.queries)?;
    let rep = dilution_analysis(
        &results,
        &fx.queries,
        &fx.sample_metadata,
        "dilution",
        &fx.ground_truth,
        &fx.library,
        None,
    )
    .map_err(|e| e.to_string())?;
    ensure!(
        rep.levels.len() == 7,
        "{} dilution levels",
        rep.levels.len()
    );
    let tps: Vec<usize> = rep.levels.iter().map(|l| l.true_hits).collect();
    let order: Vec<&str> = rep.levels.iter().map(|l| l.dilution.as_str()).collect();
    ensure!(
        order == ["10", "20", "30", "40", "80", "120", "160"],
        "level order {order:?}"
    );
    ensure!(
        tps.windows(2).all(|w| w[0] >= w[1]) && tps[0] > tps[6],
        "true hits not declining: {tps:?}"
    );
    let unique: Vec<usize> = rep.levels.iter().map(|l| l.unique).collect();
    ensure!(unique.iter().all(|&u| u == 0), "unique counts {unique:?}");
    Ok(format!(
        "1000 tallies match the scan; true hits by level {tps:?}, unique {unique:?}"
    ))
}

// ---------------------------------------------------------------- 7

/// Stirling series with upward recurrence; independent of the library's
/// Lanczos approximation.
fn ln_gamma_oracle(mut z: f64) -> f64 {
    let mut shift = 0.0;
    while z < 20.0 {
        shift -= z.ln();
        z += 1.0;
    }
    let z2 = z * z;
    let series = 1.0 / (12.0 * z) - 1.0 / (360.0 * z * z2) + 1.0 / (1260.0 * z * z2 * z2)
        - 1.0 / (1680.0 * z * z2 * z2 * z2)
        + 1.0 / (1188.0 * z * z2 * z2 * z2 * z2);
    shift + (z - 0.5) * z.ln() - z + 0.5 * (2.0 * std::f64::consts::PI).ln() + series
}

/// Upper tail `P(T >= t)` by Simpson quadrature of the density after the
/// substitution `x = sqrt(v) tan(theta)`.
fn t_upper_oracle(t: f64, v: f64) -> f64 {
    let c = (ln_gamma_oracle((v + 1.0) / 2.0) - ln_gamma_oracle(v / 2.0)).exp()
        / std::f64::consts::PI.sqrt();
    let theta_max = (t.abs() / v.sqrt()).atan();
    let n = 20_000;
    let h = theta_max / n as f64;
    let f = |th: f64| th.cos().powf(v - 1.0);
    let mut acc = f(0.0) + f(theta_max);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let central = c * acc * h / 3.0;
    if t >= 0.0 {
        0.5 - central
    } else {
        0.5 + central
    }
}

fn c7_welch() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0f64;
    for pair in 0..100 {
        let sample = |rng: &mut ChaCha8Rng| -> Vec<f64> {
            let n = rng.random_range(3..=30);
            let d = Normal::new(rng.random_range(-2.0..2.0), rng.random_range(0.1..3.0)).unwrap();
            (0..n).map(|_| d.sample(rng)).collect()
        };
        let (a, b) = (sample(&mut rng), sample(&mut rng));
        let stats = |x: &[f64]| {
            let n = x.len() as f64;
            let m = x.iter().sum::<f64>() / n;
            (
                m,
                x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0) / n,
                n,
            )
        };
        let ((ma, sa, na), (mb, sb, nb)) = (stats(&a), stats(&b));
        let t = (ma - mb) / (sa + sb).sqrt();
        let dof = (sa + sb).powi(2) / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
        let want = t_upper_oracle(t, dof);
        let got =
            welch_t_test_one_tailed(&a, &b, Alternative::AGreater).map_err(|e| e.to_string())?;
        ensure!(
            within(got.t, t, 1e-9 * t.abs().max(1.0)),
            "pair {pair}: t {} vs {t}",
            got.t
        );
        ensure!(
            within(got.dof, dof, 1e-9 * dof),
            "pair {pair}: dof {} vs {dof}",
            got.dof
        );
        ensure!(
            within(got.p, want, 1e-6),
            "pair {pair}: p {} vs oracle {want} (t {t}, dof {dof})",
            got.p
        );
        let other =
            welch_t_test_one_tailed(&a, &b, Alternative::BGreater).map_err(|e| e.to_string())?;
        ensure!(
            within(other.p, 1.0 - want, 1e-6),
            "pair {pair}: b-greater p {}",
            other.p
        );
        worst = worst.max((got.p - want).abs());
    }
    for case in 0..20 {
        let n = rng.random_range(2..40);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
        let mut b = a.clone();
        if case % 2 == 1 {
            b.shuffle(&mut rng);
        }
        for alt in [Alternative::AGreater, Alternative::BGreater] {
            let r = welch_t_test_one_tailed(&a, &b, alt).map_err(|e| e.to_string())?;
            ensure!(within(r.p, 0.5, 1e-12), "symmetric case {case}: p {}", r.p);
        }
    }
    Ok(format!(
        "100 pairs, max |p - oracle| = {worst:.1e}; symmetric inputs give 0.5"
    ))
}

// ---------------------------------------------------------------- 8

fn separable_samples(rng: &mut ChaCha8Rng) -> Vec<SampleEmbedding> {
    let noise = Normal::new(0.0, 0.1).unwrap();
    (0..100)
        .map(|i| {
            let class = i % 2;
            let mut v: Vec<f64> = (0..8).map(|_| noise.sample(rng)).collect();
            v[class] += 1.0;
            SampleEmbedding {
                sample_id: format!("s{i:03}"),
                vector: EmbeddingVector(v),
                n_spectra: 10,
                label: Some(if class == 0 { "a" } else { "b" }.to_string()),
            }
        })
        .collect()
}

fn c8_biointerp() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let samples = separable_samples(&mut rng);
    let protocol = EvalProtocol::default();
    ensure!(
        protocol.n_seeds == 5,
        "default protocol uses {} seeds",
        protocol.n_seeds
    );
    let model = ClassifierModel::Knn { k: 3 };
    let rep = classify_evaluate(&samples, &protocol, model).map_err(|e| e.to_string())?;
    ensure!(
        rep.per_seed_f1.len() == 5,
        "{} seeds evaluated",
        rep.per_seed_f1.len()
    );
    ensure!(
        rep.per_seed_f1.iter().all(|&f| f == 1.0),
        "separable per-seed F1 {:?}",
        rep.per_seed_f1
    );
    let centroid = classify_evaluate(&samples, &protocol, ClassifierModel::NearestCentroid)
        .map_err(|e| e.to_string())?;
    ensure!(
        centroid.per_seed_f1.iter().all(|&f| f == 1.0),
        "centroid F1 {:?}",
        centroid.per_seed_f1
    );

    let mut labels: Vec<Option<String>> = samples.iter().map(|s| s.label.clone()).collect();
    labels.shuffle(&mut rng);
    let shuffled: Vec<SampleEmbedding> = samples
        .iter()
        .zip(labels)
        .map(|(s, label)| SampleEmbedding { label, ..s.clone() })
        .collect();
    let null = classify_evaluate(&shuffled, &protocol, model).map_err(|e| e.to_string())?;
    ensure!(
        within(null.macro_f1_mean, 0.5, 0.1),
        "shuffled macro F1 {}",
        null.macro_f1_mean
    );

    let names: Vec<String> = samples.iter().map(|s| s.label.clone().unwrap()).collect();
    for seed in 0..5 {
        ensure!(
            stratified_split(&names, 0.7, seed, true) == stratified_split(&names, 0.7, seed, true),
            "seed {seed}: splits differ"
        );
    }
    let again = classify_evaluate(&samples, &protocol, model).map_err(|e| e.to_string())?;
    let bytes = |r: &specbench::biointerp::ClassifyReport| serde_json::to_vec(r).unwrap();
    ensure!(bytes(&rep) == bytes(&again), "repeated evaluation differs");
    Ok(format!(
        "separable F1 1.0 on 5 seeds; shuffled mean {:.3} (per seed {:?})",
        null.macro_f1_mean,
        null.per_seed_f1
            .iter()
            .map(|f| format!("{f:.2}"))
            .collect::<Vec<_>>()
    ))
}

// ---------------------------------------------------------------- 9

fn c9_throughput() -> Outcome {
    let fx = generate_fixture(&SyntheticFixtureSpec {
        n_analytes: 25_000,
        spectra_per_analyte: 4,
        seed: 9,
        ..SyntheticFixtureSpec::default()
    })
    .map_err(|e| e.to_string())?;
    ensure!(
        fx.library.n_spectra() == 100_000,
        "library has {} spectra",
        fx.library.n_spectra()
    );
    let queries = &fx.queries[..10_000];
    let index =
        SearchIndex::build(&fx.library, IndexConfig::default(), None).map_err(|e| e.to_string())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(8)
        .build()
        .map_err(|e| e.to_string())?;
    let start = Instant::now();
    let results = pool.install(|| search_all(&index, queries))?;
    let elapsed = start.elapsed();
    ensure!(
        elapsed <= Duration::from_secs(60),
        "batch search took {:.1}s",
        elapsed.as_secs_f64()
    );
    for i in (0..queries.len()).step_by(100) {
        let serial = index.search(&queries[i], None).map_err(|e| e.to_string())?;
        ensure!(
            serial == results[i],
            "query {i}: parallel result differs from serial"
        );
    }
    let cores = std::thread::available_parallelism().map_or(1, |n| n.get());
    Ok(format!(
        "10000 x 100000 in {:.2}s on an 8-thread pool ({cores} hardware threads available); 100 serial checks equal",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 10

const MGF_SEED: &str = "# comment\nBEGIN IONS\nTITLE=q1\nPEPMASS=301.1234 1200\nCHARGE=1+\nRTINSECONDS=12.5\n\
SCANS=7\nSAMPLE=file_a\n50.1 10\n75.25 100\n120.5 3.5e1\nEND IONS\n\nBEGIN IONS\nTITLE=q2\nPEPMASS=150\n\
ANALYTE=QNAYBMKLOCPYGJ\n60.0\t5\n61.0 0\nEND IONS\n";

const MANIFEST_SEED: &str = concat!(
    r#"{"type":"analyte","key2d":"QNAYBMKLOCPYGJ","smiles":"CC(N)C(=O)O","registry_id":5950,"name":"alanine"}"#,
    "\n",
    r#"{"type":"analyte","key2d":"DHMQDGOQFOQNFH","inchikey_full":"DHMQDGOQFOQNFH-UHFFFAOYSA-N","smiles":"NCC(=O)O","registry_id":750,"name":"glycine"}"#,
    "\n",
    r#"{"type":"spectrum","id":"ala1","precursor_mz":90.055,"polarity":"positive","peaks":[[44.05,100.0],[72.04,20.0]],"analyte_key":"QNAYBMKLOCPYGJ"}"#,
    "\n",
    r#"{"type":"spectrum","id":"gly1","precursor_mz":76.039,"polarity":"negative","peaks":[[30.03,100.0],[48.0,10.0]],"analyte_key":"DHMQDGOQFOQNFH-UHFFFAOYSA-N"}"#,
    "\n",
);

const SMILES_SEEDS: &[&str] = &[
    "CC(=O)Oc1ccccc1C(=O)O",
    "C1CC2CCC1C2",
    "[NH4+].[Cl-]",
    "C[C@H](N)C(=O)O",
    "c1ccc2ccccc2c1",
    "O=C1NC(=O)c2ccccc12",
    "C%10CCCCC%10",
    "[13CH3]C#N",
    "F/C=C/F",
    "CS(=O)(=O)[O-]",
    "Brc1ccc(I)cc1",
    "[Fe+2]",
];

const TOKENS: &[&[u8]] = &[
    b"\n",
    b"=",
    b"(",
    b")",
    b"[",
    b"]",
    b"%",
    b"#",
    b".",
    b"-",
    b"+",
    b"e",
    b"E",
    b"1",
    b"9",
    b"0",
    b" ",
    b"\t",
    b"\"",
    b"{",
    b"}",
    b",",
    b":",
    b"\xff",
    b"\x00",
    b"NaN",
    b"inf",
    b"-1",
    b"1e400",
    b"BEGIN IONS\n",
    b"END IONS\n",
    b"PEPMASS=",
    b"TITLE=",
    b"@@",
    b"c1",
    b"[nH]",
    b"null",
    b"[]",
    b"9999999999999999999999",
];

fn mutate(rng: &mut ChaCha8Rng, seed: &[u8], donors: &[&[u8]]) -> Vec<u8> {
    let mut v = seed.to_vec();
    for _ in 0..rng.random_range(1..=6) {
        let len = v.len();
        match rng.random_range(0..7) {
            0 if len > 0 => {
                let i = rng.random_range(0..len);
                v[i] ^= 1 << rng.random_range(0..8);
            }
            1 => {
                let i = rng.random_range(0..=len);
                let t = TOKENS[rng.random_range(0..TOKENS.len())];
                v.splice(i..i, t.iter().copied());
            }
            2 if len > 0 => {
                let i = rng.random_range(0..len);
                let j = (i + rng.random_range(1..=16)).min(len);
                v.drain(i..j);
            }
            3 if len > 0 => {
                let i = rng.random_range(0..len);
                let j = (i + rng.random_range(1..=32)).min(len);
                let chunk = v[i..j].to_vec();
                let k = rng.random_range(0..=len);
                v.splice(k..k, chunk);
            }
            4 => v.truncate(rng.random_range(0..=len)),
            5 => {
                let d = donors[rng.random_range(0..donors.len())];
                if !d.is_empty() {
                    let i = rng.random_range(0..d.len());
                    let j = rng.random_range(i..=d.len());
                    let k = rng.random_range(0..=len);
                    v.splice(k..k, d[i..j].iter().copied());
                }
            }
            _ if len > 0 => {
                let i = rng.random_range(0..len);
                v[i] = rng.random();
            }
            _ => {}
        }
    }
    v
}

fn c10_fuzz() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let allowed: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::from([
        (
            "mgf",
            BTreeSet::from([
                "mgf_parse",
                "invalid_spectrum",
                "duplicate_spectrum",
                "invalid_inchikey",
            ]),
        ),
        (
            "manifest",
            BTreeSet::from([
                "manifest_parse",
                "invalid_spectrum",
                "duplicate_spectrum",
                "invalid_inchikey",
                "invalid_analyte",
                "analyte_conflict",
                "integrity",
            ]),
        ),
        ("smiles", BTreeSet::from(["smiles_parse"])),
    ]);
    let smiles_bytes: Vec<&[u8]> = SMILES_SEEDS.iter().map(|s| s.as_bytes()).collect();
    let donors: Vec<&[u8]> = [MGF_SEED.as_bytes(), MANIFEST_SEED.as_bytes()]
        .into_iter()
        .chain(smiles_bytes.iter().copied())
        .collect();
    let mut seen: BTreeMap<(&str, String), usize> = BTreeMap::new();
    let mut accepted: HashMap<&str, usize> = HashMap::new();
    let mut crashes = Vec::new();
    let hook = panic::take_hook();
    panic::set_hook(Box::new(|_| {}));
    for i in 0..100_000u32 {
        let (parser, input) = match i % 3 {
            0 => ("mgf", mutate(&mut rng, MGF_SEED.as_bytes(), &donors)),
            1 => (
                "manifest",
                mutate(&mut rng, MANIFEST_SEED.as_bytes(), &donors),
            ),
            _ => {
                let seed = smiles_bytes[rng.random_range(0..smiles_bytes.len())];
                ("smiles", mutate(&mut rng, seed, &donors))
            }
        };
        let run = panic::catch_unwind(AssertUnwindSafe(|| -> Vec<Result<(), specbench::Error>> {
            match parser {
                "mgf" => vec![parse_mgf(&input).map(drop)],
                "manifest" => vec![
                    parse_library_manifest(&input).map(drop),
                    parse_manifest_records(&input).map(drop),
                ],
                _ => vec![parse_smiles(&String::from_utf8_lossy(&input)).map(drop)],
            }
        }));
        match run {
            Err(_) => crashes.push((parser, String::from_utf8_lossy(&input).into_owned())),
            Ok(outcomes) => {
                for o in outcomes {
                    match o {
                        Ok(()) => *accepted.entry(parser).or_default() += 1,
                        Err(e) => *seen.entry((parser, e.kind().to_string())).or_default() += 1,
                    }
                }
            }
        }
    }
    panic::set_hook(hook);
    ensure!(
        crashes.is_empty(),
        "{} panics, first on {} input {:?}",
        crashes.len(),
        crashes[0].0,
        crashes[0].1
    );
    for ((parser, kind), n) in &seen {
        ensure!(
            allowed[parser].contains(kind.as_str()),
            "{parser} produced {n} errors of kind {kind}"
        );
    }
    let kinds: HashSet<&str> = seen.keys().map(|(_, k)| k.as_str()).collect();
    let mut kinds: Vec<&str> = kinds.into_iter().collect();
    kinds.sort_unstable();
    Ok(format!(
        "100000 inputs, 0 panics; accepted mgf {} / manifest {} / smiles {}; error kinds {kinds:?}",
        accepted.get("mgf").unwrap_or(&0),
        accepted.get("manifest").unwrap_or(&0),
        accepted.get("smiles").unwrap_or(&0)
    ))
}

// ---------------------------------------------------------------- runner

fn main() {
    let filter: Option<String> = std::env::args().skip(1).find(|a| !a.starts_with('-'));
    let criteria: [Criterion; 10] = [
        (1, "metric formulas", c1_metric_formulas),
        (2, "mces oracle", c2_mces_oracle),
        (3, "modified cosine properties", c3_modified_cosine),
        (4, "roc auc", c4_roc),
        (5, "end-to-end retrieval", c5_end_to_end),
        (6, "threshold optimization", c6_thresholds),
        (7, "welch test", c7_welch),
        (8, "biointerp", c8_biointerp),
        (9, "batch throughput", c9_throughput),
        (10, "parser fuzzing", c10_fuzz),
    ];
    let mut failed = 0;
    for (n, name, f) in criteria {
        if let Some(pat) = &filter {
            if *pat != n.to_string() && !name.contains(pat.as_str()) {
                continue;
            }
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(f).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("criterion {n:>2} {name}: PASS [{secs:.2}s] {detail}"),
            Err(why) => {
                failed += 1;
                println!("criterion {n:>2} {name}: FAIL [{secs:.2}s] {why}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
