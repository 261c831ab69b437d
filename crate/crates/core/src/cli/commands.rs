use std::collections::{BTreeMap, BTreeSet};
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;

use specbench::bench::{
    self, compare_precision, dilution_analysis, evaluate_benchmark, generate_dilution_fixture,
    generate_fixture, labeled_top1, write_benchmark_outputs, write_dilution_outputs,
    BenchmarkInputs, BenchmarkSpec, DilutionFixtureSpec, DilutionReport, Metric, NamedScorer,
    PartitionSpec, SampleFilter, SyntheticFixtureSpec,
};
use specbench::biointerp::{
    aggregate_sample, classify_evaluate, pca_project, Aggregation, ClassifierModel, EvalProtocol,
    SampleEmbedding,
};
use specbench::chem::{mces_smiles, McesConfig};
use specbench::io::{self, tables, EmbeddingMap};
use specbench::metrics::{roc_auc, LabeledScore, WelchResult};
use specbench::plot::{line_chart, scatter, Series};
use specbench::preprocess::{binned_precursor_vector, curate, DedupConfig};
use specbench::retrieval::{
    parse_results_csv, results_to_csv, results_to_json, EmbeddingSource, Reduction, ScorerConfig,
};
use specbench::similarity::{CosineConfig, Tolerance};
use specbench::{Error, IndexConfig, RetrievalResult, SearchIndex, Spectrum};

use super::{Command, Format, Settings};

pub enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Data(e)
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::Data(e.into())
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Failure::Data(e.into())
    }
}

type CmdResult = Result<(), Failure>;

pub fn dispatch(cmd: Command, s: &Settings) -> CmdResult {
    match cmd {
        Command::BuildIndex(a) => cmd_build_index(a, s),
        Command::Search(a) => cmd_search(a, s),
        Command::Benchmark(a) => cmd_benchmark(a, s),
        Command::Mces(a) => cmd_mces(a, s),
        Command::Roc(a) => cmd_roc(a, s),
        Command::DilutionReport(a) => cmd_dilution_report(a, s),
        Command::Biointerp(a) => cmd_biointerp(a, s),
        Command::Fixture(a) => cmd_fixture(a, s),
    }
}

fn stdout(text: &str) -> CmdResult {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .and_then(|_| out.flush())
        .map_err(|e| {
            Failure::Data(Error::Io {
                path: PathBuf::from("<stdout>"),
                source: e,
            })
        })
}

fn json_line<T: Serialize>(value: &T) -> Result<String, Failure> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn csv_rows(header: &[&str], rows: &[Vec<String>]) -> Result<String, Failure> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| Failure::Data(Error::InvalidInput(e.to_string())))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn write_out(s: &Settings, name: &str, body: impl AsRef<[u8]>) -> Result<PathBuf, Failure> {
    let path = s.out_dir.join(name);
    io::write_file(&path, body)?;
    log::info!("wrote {}", path.display());
    Ok(path)
}

fn parse_filter(raw: &str) -> Result<SampleFilter, Failure> {
    let (field, value) = raw
        .split_once('=')
        .ok_or_else(|| Failure::Usage(format!("filter {raw:?} must look like FIELD=VALUE")))?;
    Ok(SampleFilter {
        field: field.trim().to_string(),
        value: value.trim().to_string(),
    })
}

// ---------------------------------------------------------------- build-index

#[derive(Args, Debug)]
pub struct BuildIndexArgs {
    /// Raw JSONL manifest of analyte and spectrum records
    #[arg(long)]
    pub manifest: PathBuf,
    /// Decimals of m/z kept when detecting duplicate spectra
    #[arg(long, default_value_t = 4)]
    pub mz_decimals: i32,
    /// Decimals of relative intensity kept when detecting duplicates
    #[arg(long, default_value_t = 3)]
    pub intensity_decimals: i32,
}

fn cmd_build_index(a: BuildIndexArgs, s: &Settings) -> CmdResult {
    let (analytes, spectra) = io::parse_manifest_records(&io::read_bytes(&a.manifest)?)?;
    let cfg = DedupConfig {
        mz_decimals: a.mz_decimals,
        intensity_decimals: a.intensity_decimals,
    };
    let (lib, report) = curate(analytes, spectra, &cfg)?;
    write_out(s, "library.jsonl", io::write_library_manifest(&lib))?;
    write_out(s, "curation.json", json_line(&report)?)?;
    let text = match s.format {
        Format::Json => json_line(&report)?,
        Format::Csv => csv_rows(
            &[
                "input_analytes",
                "input_spectra",
                "stereoisomers_merged",
                "duplicates_removed",
                "output_analytes",
                "output_spectra",
            ],
            &[[
                report.input_analytes,
                report.input_spectra,
                report.stereoisomers_merged,
                report.duplicates_removed,
                report.output_analytes,
                report.output_spectra,
            ]
            .iter()
            .map(ToString::to_string)
            .collect()],
        )?,
    };
    stdout(&text)
}

// --------------------------------------------------------------------- search

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScorerKind {
    /// Shift-aware cosine over raw peaks
    ModifiedCosine,
    /// Cosine between precomputed embedding vectors
    Embedding,
    /// Cosine between binned fragment vectors
    Binned,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionArg {
    Max,
    Mean,
}

#[derive(Args, Debug)]
pub struct SearchArgs {
    /// Curated library manifest (JSONL)
    #[arg(long)]
    pub library: PathBuf,
    /// Query spectra (MGF)
    #[arg(long)]
    pub queries: PathBuf,
    /// Precursor tolerance in ppm; `inf` disables the prefilter [default: 10]
    #[arg(long)]
    pub ppm: Option<f64>,
    /// Hits reported per query [default: 10]
    #[arg(long)]
    pub k: Option<usize>,
    /// Minimum matched peaks for a raw-peak hit [default: 1]
    #[arg(long)]
    pub min_matched: Option<usize>,
    /// Fragment tolerance in Th [default: 0.01]
    #[arg(long, conflicts_with = "fragment_ppm")]
    pub fragment_tol: Option<f64>,
    /// Fragment tolerance in ppm instead of Th
    #[arg(long)]
    pub fragment_ppm: Option<f64>,
    #[arg(long, value_enum, default_value_t = ScorerKind::ModifiedCosine)]
    pub scorer: ScorerKind,
    /// Reference embeddings (EMBV1 or CSV), for `--scorer embedding`
    #[arg(long)]
    pub reference_embeddings: Option<PathBuf>,
    /// Query embeddings (EMBV1 or CSV), for `--scorer embedding`
    #[arg(long)]
    pub query_embeddings: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    pub bin_width: f64,
    #[arg(long, default_value_t = 1000.0)]
    pub max_mz: f64,
    #[arg(long, value_enum, default_value_t = ReductionArg::Max)]
    pub reduction: ReductionArg,
}

fn index_config(a: &SearchArgs, s: &Settings) -> IndexConfig {
    let d = IndexConfig::default();
    let tolerance = match (a.fragment_ppm, a.fragment_tol.or(s.search.fragment_tol)) {
        (Some(ppm), _) => Tolerance::Ppm(ppm),
        (None, Some(t)) => Tolerance::Absolute(t),
        (None, None) => Tolerance::default(),
    };
    let scorer = match a.scorer {
        ScorerKind::ModifiedCosine => ScorerConfig::ModifiedCosine(CosineConfig {
            tolerance,
            ..CosineConfig::default()
        }),
        ScorerKind::Embedding => ScorerConfig::EmbeddingCosine(EmbeddingSource::Precomputed),
        ScorerKind::Binned => ScorerConfig::EmbeddingCosine(EmbeddingSource::BinnedFragments {
            bin_width: a.bin_width,
            max_mz: a.max_mz,
        }),
    };
    IndexConfig {
        ppm_tol: a.ppm.or(s.search.ppm).unwrap_or(d.ppm_tol),
        top_k: a.k.or(s.search.k).unwrap_or(d.top_k),
        min_matched: a
            .min_matched
            .or(s.search.min_matched)
            .unwrap_or(d.min_matched),
        scorer,
        reduction: match a.reduction {
            ReductionArg::Max => Reduction::Max,
            ReductionArg::Mean => Reduction::Mean,
        },
    }
}

fn cmd_search(a: SearchArgs, s: &Settings) -> CmdResult {
    let cfg = index_config(&a, s);
    cfg.validate()?;
    let needs_embeddings = a.scorer == ScorerKind::Embedding;
    if needs_embeddings && (a.reference_embeddings.is_none() || a.query_embeddings.is_none()) {
        return Err(Failure::Usage(
            "--scorer embedding needs --reference-embeddings and --query-embeddings".into(),
        ));
    }
    let lib = io::read_library(&a.library)?;
    let queries = io::read_mgf(&a.queries)?;
    let load = |p: &Option<PathBuf>| -> Result<Option<EmbeddingMap>, Error> {
        match p {
            Some(p) if needs_embeddings => io::load_embeddings(p).map(Some),
            _ => Ok(None),
        }
    };
    let (refs, qemb) = (load(&a.reference_embeddings)?, load(&a.query_embeddings)?);
    let index = SearchIndex::build(&lib, cfg, refs.as_ref())?;
    let mut results = Vec::with_capacity(queries.len());
    let mut failed = 0usize;
    for (q, r) in queries
        .iter()
        .zip(index.batch_search(&queries, qemb.as_ref()))
    {
        match r {
            Ok(r) => results.push(r),
            Err(e) => {
                failed += 1;
                log::warn!("query {} skipped: {e}", q.id);
            }
        }
    }
    if failed > 0 && results.is_empty() {
        return Err(Failure::Data(Error::InvalidInput(format!(
            "all {failed} queries failed"
        ))));
    }
    let text = match s.format {
        Format::Csv => results_to_csv(&results),
        Format::Json => results_to_json(&results),
    };
    stdout(&text)
}

// ------------------------------------------------------------------ benchmark

#[derive(Args, Debug)]
pub struct BenchmarkArgs {
    /// Benchmark spec (JSON)
    #[arg(long)]
    pub spec: PathBuf,
    /// Drop samples whose metadata FIELD equals VALUE (repeatable)
    #[arg(long, value_name = "FIELD=VALUE")]
    pub exclude: Vec<String>,
}

fn load_spec(path: &Path, exclude: &[String]) -> Result<BenchmarkSpec, Failure> {
    let mut spec = BenchmarkSpec::load(path)?;
    for f in exclude {
        spec.exclude.push(parse_filter(f)?);
    }
    Ok(spec)
}

fn cmd_benchmark(a: BenchmarkArgs, s: &Settings) -> CmdResult {
    let spec = load_spec(&a.spec, &a.exclude)?;
    let inputs = BenchmarkInputs::load(&spec)?;
    let report = evaluate_benchmark(&spec, &inputs)?;
    for f in &report.failures {
        log::warn!("{} / {}: {} ({})", f.scorer, f.partition, f.message, f.kind);
    }
    for p in write_benchmark_outputs(&s.out_dir, &report)? {
        log::info!("wrote {}", p.display());
    }
    let text = match s.format {
        Format::Csv => report.records_csv()?,
        Format::Json => report.to_json()?,
    };
    stdout(&text)
}

// ----------------------------------------------------------------------- mces

#[derive(Args, Debug)]
pub struct McesArgs {
    /// First molecule (SMILES)
    #[arg(long, requires = "b", conflicts_with = "pairs")]
    pub a: Option<String>,
    /// Second molecule (SMILES)
    #[arg(long, requires = "a")]
    pub b: Option<String>,
    /// Headered two-column CSV of SMILES pairs
    #[arg(long)]
    pub pairs: Option<PathBuf>,
    /// Distances above this are reported as a lower bound
    #[arg(long, default_value_t = 15)]
    pub threshold: usize,
    #[arg(long, default_value_t = 64)]
    pub max_atoms: usize,
    /// Require the common subgraph to be connected
    #[arg(long)]
    pub connected: bool,
}

fn cmd_mces(a: McesArgs, s: &Settings) -> CmdResult {
    let cfg = McesConfig {
        threshold: a.threshold,
        max_atoms: a.max_atoms,
        connected_only: a.connected,
    };
    let status = |exact: bool| if exact { "exact" } else { "bound" };
    if let (Some(x), Some(y)) = (&a.a, &a.b) {
        let r = mces_smiles(x, y, &cfg)?;
        let text = match s.format {
            Format::Csv => format!("{},{}\n", r.distance, status(r.exact)),
            Format::Json => json_line(&r)?,
        };
        return stdout(&text);
    }
    let Some(path) = &a.pairs else {
        return Err(Failure::Usage("give --a and --b, or --pairs".into()));
    };
    let bytes = io::read_bytes(path)?;
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut pairs = Vec::new();
    for row in reader.records() {
        let row = row?;
        if row.len() < 2 {
            return Err(Failure::Data(Error::InvalidInput(
                "pair rows need two columns".into(),
            )));
        }
        pairs.push((row[0].to_string(), row[1].to_string()));
    }
    use rayon::prelude::*;
    let results = pairs
        .par_iter()
        .enumerate()
        .map(|(i, (x, y))| {
            mces_smiles(x, y, &cfg).map_err(|e| Error::InvalidInput(format!("pair {i}: {e}")))
        })
        .collect::<Result<Vec<_>, Error>>()?;
    let mean = if results.is_empty() {
        0.0
    } else {
        results.iter().map(|r| r.distance as f64).sum::<f64>() / results.len() as f64
    };
    let text = match s.format {
        Format::Csv => {
            let mut rows: Vec<Vec<String>> = results
                .iter()
                .enumerate()
                .map(|(i, r)| {
                    vec![
                        i.to_string(),
                        r.distance.to_string(),
                        status(r.exact).to_string(),
                    ]
                })
                .collect();
            rows.push(vec!["mean".into(), mean.to_string(), String::new()]);
            csv_rows(&["pair", "distance", "status"], &rows)?
        }
        Format::Json => json_line(&serde_json::json!({ "pairs": results, "mean": mean }))?,
    };
    stdout(&text)
}

// ------------------------------------------------------------------------ roc

#[derive(Args, Debug)]
pub struct RocArgs {
    /// Headered CSV of `score,label` with label 1/0 or true/false
    #[arg(long, conflicts_with_all = ["results", "truth"])]
    pub scores: Option<PathBuf>,
    /// Search results CSV, scored by top-1 hit
    #[arg(long, requires = "truth")]
    pub results: Option<PathBuf>,
    /// `query_id,key2d` truth CSV for `--results`
    #[arg(long, requires = "results")]
    pub truth: Option<PathBuf>,
}

fn parse_label(raw: &str) -> Option<bool> {
    match raw.to_ascii_lowercase().as_str() {
        "1" | "true" | "t" | "yes" => Some(true),
        "0" | "false" | "f" | "no" => Some(false),
        _ => None,
    }
}

fn cmd_roc(a: RocArgs, s: &Settings) -> CmdResult {
    let scored: Vec<LabeledScore> = if let Some(path) = &a.scores {
        let bytes = io::read_bytes(path)?;
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(bytes.as_slice());
        let mut out = Vec::new();
        for (i, row) in reader.records().enumerate() {
            let row = row?;
            let bad = || {
                Failure::Data(Error::InvalidInput(format!(
                    "scores row {}: expected score,label",
                    i + 1
                )))
            };
            let score: f64 = row.get(0).and_then(|v| v.parse().ok()).ok_or_else(bad)?;
            let label = row.get(1).and_then(parse_label).ok_or_else(bad)?;
            out.push(LabeledScore::new(score, label));
        }
        out
    } else if let (Some(r), Some(t)) = (&a.results, &a.truth) {
        let results = parse_results_csv(&io::read_bytes(r)?)?;
        let truth = tables::read_pair_csv(t)?;
        labeled_top1(&results, &truth)?
    } else {
        return Err(Failure::Usage(
            "give --scores, or --results with --truth".into(),
        ));
    };
    let roc = roc_auc(&scored)?;
    let n_pos = scored.iter().filter(|x| x.is_true_positive).count();
    let n_neg = scored.len() - n_pos;

    let mut rows = vec![vec!["0".to_string(), "0".to_string(), String::new()]];
    for (p, t) in roc.points.iter().skip(1).zip(&roc.thresholds) {
        rows.push(vec![p.0.to_string(), p.1.to_string(), t.to_string()]);
    }
    write_out(s, "roc.csv", csv_rows(&["fpr", "tpr", "threshold"], &rows)?)?;
    let svg = line_chart(
        "ROC",
        "false positive rate",
        "true positive rate",
        &[Series {
            name: format!("AUC {:.3}", roc.auc),
            points: roc.points.clone(),
        }],
    );
    if let Err(e) = io::write_file(s.out_dir.join("plots").join("roc.svg"), svg) {
        log::warn!("plot not written: {e}");
    }
    let text = match s.format {
        Format::Csv => csv_rows(
            &["auc", "n_positive", "n_negative"],
            &[vec![
                roc.auc.to_string(),
                n_pos.to_string(),
                n_neg.to_string(),
            ]],
        )?,
        Format::Json => json_line(
            &serde_json::json!({ "auc": roc.auc, "n_positive": n_pos, "n_negative": n_neg }),
        )?,
    };
    stdout(&text)
}

// ------------------------------------------------------------ dilution-report

#[derive(Args, Debug)]
pub struct DilutionArgs {
    /// Benchmark spec naming library, queries, sample metadata, ground
    /// truth and scorers
    #[arg(long)]
    pub spec: PathBuf,
    /// Sample metadata field holding the dilution
    #[arg(long, default_value = "dilution")]
    pub field: String,
    /// Reference dilution for consistency [default: lowest dilution]
    #[arg(long)]
    pub anchor: Option<String>,
    /// Drop samples whose metadata FIELD equals VALUE (repeatable)
    #[arg(long, value_name = "FIELD=VALUE")]
    pub exclude: Vec<String>,
}

type WelchRow = (String, String, String, Result<WelchResult, String>);

fn cmd_dilution_report(a: DilutionArgs, s: &Settings) -> CmdResult {
    let spec = load_spec(&a.spec, &a.exclude)?;
    let inputs = BenchmarkInputs::load(&spec)?;
    let gt = inputs
        .ground_truth
        .as_ref()
        .ok_or_else(|| Failure::Usage("spec needs ground_truth_path".into()))?;
    if inputs.sample_metadata.is_empty() {
        return Err(Failure::Usage("spec needs sample_metadata_path".into()));
    }
    let keep: Vec<Spectrum> = inputs
        .queries
        .iter()
        .filter(|q| {
            let meta = q
                .sample_id
                .as_ref()
                .and_then(|id| inputs.sample_metadata.get(id));
            !spec
                .exclude
                .iter()
                .any(|f| meta.and_then(|m| m.get(&f.field)) == Some(&f.value))
        })
        .cloned()
        .collect();

    let mut reports: Vec<(String, DilutionReport)> = Vec::new();
    for NamedScorer { name, config } in &spec.scorers {
        let index = SearchIndex::build(
            &inputs.library,
            *config,
            inputs.reference_embeddings.as_ref(),
        )?;
        let results: Vec<RetrievalResult> = index
            .batch_search(&keep, inputs.query_embeddings.as_ref())
            .into_iter()
            .zip(&keep)
            .map(|(r, q)| {
                r.unwrap_or_else(|e| {
                    log::warn!("scorer {name}: query {} failed: {e}", q.id);
                    RetrievalResult {
                        query_id: q.id.clone(),
                        hits: Vec::new(),
                        candidate_count: 0,
                    }
                })
            })
            .collect();
        let rep = dilution_analysis(
            &results,
            &keep,
            &inputs.sample_metadata,
            &a.field,
            gt,
            &inputs.library,
            a.anchor.as_deref(),
        )?;
        reports.push((name.clone(), rep));
    }

    let mut welch: Vec<WelchRow> = Vec::new();
    for (i, (na, ra)) in reports.iter().enumerate() {
        for (j, (nb, rb)) in reports.iter().enumerate() {
            if i == j {
                continue;
            }
            for (d, r) in compare_precision(ra, rb)? {
                welch.push((na.clone(), nb.clone(), d, r.map_err(|e| e.to_string())));
            }
        }
    }
    write_dilution_outputs(&s.out_dir, &reports, &welch)?;
    let text = match s.format {
        Format::Csv => bench::dilution_csv(&reports)?,
        Format::Json => json_line(
            &reports
                .iter()
                .map(|(n, r)| serde_json::json!({ "scorer": n, "report": r }))
                .collect::<Vec<_>>(),
        )?,
    };
    stdout(&text)
}

// ------------------------------------------------------------------ biointerp

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationArg {
    Mean,
    Median,
    WeightedMean,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClassifierArg {
    Knn,
    Centroid,
}

#[derive(Args, Debug)]
pub struct BiointerpArgs {
    /// Spectra (MGF) whose SAMPLE headers assign them to samples
    #[arg(long)]
    pub spectra: PathBuf,
    /// Per-spectrum embeddings (EMBV1 or CSV)
    #[arg(long, required_unless_present = "precursor_baseline")]
    pub embeddings: Option<PathBuf>,
    /// Use the binned precursor-mass profile instead of embeddings
    #[arg(long, conflicts_with = "embeddings")]
    pub precursor_baseline: bool,
    /// Sample metadata CSV
    #[arg(long)]
    pub metadata: PathBuf,
    /// Metadata field holding the class label
    #[arg(long)]
    pub label_field: String,
    #[arg(long, value_enum, default_value_t = AggregationArg::Mean)]
    pub aggregation: AggregationArg,
    #[arg(long, value_enum, default_value_t = ClassifierArg::Knn)]
    pub classifier: ClassifierArg,
    /// Neighbours for the kNN classifier
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 0.7)]
    pub train_fraction: f64,
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    /// Plain random split instead of a stratified one
    #[arg(long)]
    pub no_stratify: bool,
    #[arg(long, default_value_t = 2)]
    pub pca_dims: usize,
}

fn cmd_biointerp(a: BiointerpArgs, s: &Settings) -> CmdResult {
    let spectra = io::read_mgf(&a.spectra)?;
    let metadata = tables::read_sample_metadata(&a.metadata)?;
    let mut by_sample: BTreeMap<String, Vec<&Spectrum>> = BTreeMap::new();
    for sp in &spectra {
        match &sp.sample_id {
            Some(id) => by_sample.entry(id.clone()).or_default().push(sp),
            None => log::warn!("spectrum {} has no sample and is ignored", sp.id),
        }
    }
    if by_sample.is_empty() {
        return Err(Failure::Data(Error::InvalidInput(
            "no spectrum names a sample".into(),
        )));
    }
    let strategy = match a.aggregation {
        AggregationArg::Mean => Aggregation::Mean,
        AggregationArg::Median => Aggregation::Median,
        AggregationArg::WeightedMean => Aggregation::WeightedMean,
    };
    let embeddings = match &a.embeddings {
        Some(p) => Some(io::load_embeddings(p)?),
        None => None,
    };
    let mut samples = Vec::with_capacity(by_sample.len());
    for (id, members) in &by_sample {
        let vector = match &embeddings {
            None => {
                binned_precursor_vector(&members.iter().map(|m| (*m).clone()).collect::<Vec<_>>())
            }
            Some(map) => {
                let mut rows = Vec::new();
                for m in members {
                    match map.get(&m.id) {
                        Some(v) => rows.push((v.clone(), m.tic())),
                        None => log::warn!("spectrum {} has no embedding", m.id),
                    }
                }
                if rows.is_empty() {
                    log::warn!("sample {id} has no embedded spectra and is skipped");
                    continue;
                }
                aggregate_sample(&rows, strategy)?
            }
        };
        samples.push(SampleEmbedding {
            sample_id: id.clone(),
            vector,
            n_spectra: members.len(),
            label: metadata
                .get(id)
                .and_then(|m| m.get(&a.label_field))
                .cloned(),
        });
    }

    let sample_map: EmbeddingMap = samples
        .iter()
        .map(|x| (x.sample_id.clone(), x.vector.clone()))
        .collect();
    write_out(
        s,
        "sample_embeddings.csv",
        io::embeddings::write_embedding_csv(&sample_map)?,
    )?;

    let dims = a.pca_dims.min(samples.len()).max(1);
    let projected = pca_project(&samples, dims)?;
    let mut header = vec!["sample_id".to_string(), "label".to_string()];
    header.extend((1..=dims).map(|i| format!("pc{i}")));
    let label_of: BTreeMap<&str, &str> = samples
        .iter()
        .map(|x| (x.sample_id.as_str(), x.label.as_deref().unwrap_or("NA")))
        .collect();
    let rows: Vec<Vec<String>> = projected
        .iter()
        .map(|(id, coords)| {
            let mut r = vec![id.clone(), label_of[id.as_str()].to_string()];
            r.extend(coords.iter().map(ToString::to_string));
            r
        })
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    write_out(s, "pca.csv", csv_rows(&header_refs, &rows)?)?;
    let points: Vec<(String, f64, f64)> = projected
        .iter()
        .map(|(id, c)| {
            (
                label_of[id.as_str()].to_string(),
                c.first().copied().unwrap_or(0.0),
                c.get(1).copied().unwrap_or(0.0),
            )
        })
        .collect();
    if let Err(e) = io::write_file(
        s.out_dir.join("plots").join("pca.svg"),
        scatter("PCA", "PC1", "PC2", &points),
    ) {
        log::warn!("plot not written: {e}");
    }

    let labeled: Vec<SampleEmbedding> = samples.into_iter().filter(|x| x.label.is_some()).collect();
    let protocol = EvalProtocol {
        train_fraction: a.train_fraction,
        n_seeds: a.seeds,
        stratified: !a.no_stratify,
    };
    let model = match a.classifier {
        ClassifierArg::Knn => ClassifierModel::Knn { k: a.k },
        ClassifierArg::Centroid => ClassifierModel::NearestCentroid,
    };
    let report = classify_evaluate(&labeled, &protocol, model)?;
    write_out(s, "classification.json", json_line(&report)?)?;
    let text = match s.format {
        Format::Csv => csv_rows(
            &["n_samples", "n_classes", "macro_f1_mean", "macro_f1_std"],
            &[vec![
                labeled.len().to_string(),
                report.classes.len().to_string(),
                report.macro_f1_mean.to_string(),
                report.macro_f1_std.to_string(),
            ]],
        )?,
        Format::Json => json_line(&report)?,
    };
    stdout(&text)
}

// -------------------------------------------------------------------- fixture

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum FixtureKind {
    /// Library plus noisy replicate queries
    Retrieval,
    /// Dilution series with contaminants and a ground-truth set
    Dilution,
}

#[derive(Args, Debug)]
pub struct FixtureArgs {
    #[arg(long, value_enum, default_value_t = FixtureKind::Retrieval)]
    pub kind: FixtureKind,
    /// Fixture parameters (JSON); omitted keys take defaults
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Retrieval fixtures only
    #[arg(long)]
    pub n_analytes: Option<usize>,
    /// Retrieval fixtures only: queries are exact library copies
    #[arg(long)]
    pub noiseless: bool,
}

fn scorer(name: &str, config: IndexConfig) -> NamedScorer {
    NamedScorer {
        name: name.into(),
        config,
    }
}

fn bench_spec(name: &str) -> BenchmarkSpec {
    BenchmarkSpec {
        name: name.into(),
        library_path: "library.jsonl".into(),
        query_path: "queries.mgf".into(),
        truth_path: None,
        sample_metadata_path: None,
        isomer_groups_path: None,
        ground_truth_path: None,
        reference_embeddings_path: None,
        query_embeddings_path: None,
        partitions: Vec::new(),
        scorers: vec![
            scorer("modified_cosine", IndexConfig::default()),
            scorer(
                "binned_cosine",
                IndexConfig {
                    scorer: ScorerConfig::EmbeddingCosine(EmbeddingSource::BinnedFragments {
                        bin_width: 1.0,
                        max_mz: 1000.0,
                    }),
                    ..IndexConfig::default()
                },
            ),
        ],
        metrics: Vec::new(),
        ks: vec![1, 5, 10],
        exclude: Vec::new(),
        mces: McesConfig::default(),
    }
}

fn cmd_fixture(a: FixtureArgs, s: &Settings) -> CmdResult {
    let raw = match &a.spec {
        Some(p) => Some(io::read_bytes(p)?),
        None => None,
    };
    let summary = match a.kind {
        FixtureKind::Retrieval => {
            let mut spec: SyntheticFixtureSpec = match &raw {
                Some(b) => serde_json::from_slice(b)?,
                // Withheld analytes give ROC its negatives.
                None => SyntheticFixtureSpec {
                    withheld_fraction: 0.1,
                    isomer_groups: 5,
                    n_files: 4,
                    ..SyntheticFixtureSpec::default()
                },
            };
            if a.noiseless {
                spec = spec.noiseless();
            }
            if let Some(seed) = a.seed {
                spec.seed = seed;
            }
            if let Some(n) = a.n_analytes {
                spec.n_analytes = n;
                if raw.is_none() {
                    spec.isomer_groups = spec.isomer_groups.min(n / (2 * spec.isomer_group_size));
                }
            }
            let fx = generate_fixture(&spec)?;
            for w in &fx.warnings {
                log::warn!("{w}");
            }
            write_out(s, "library.jsonl", io::write_library_manifest(&fx.library))?;
            write_out(s, "queries.mgf", io::write_mgf(&fx.queries))?;
            let truth_rows: Vec<Vec<String>> = fx
                .truth
                .iter()
                .map(|(q, k)| vec![q.clone(), k.clone()])
                .collect();
            write_out(
                s,
                "truth.csv",
                csv_rows(&["query_id", "key2d"], &truth_rows)?,
            )?;
            let withheld: String = fx.withheld.iter().map(|k| format!("{k}\n")).collect();
            write_out(s, "withheld.txt", withheld)?;

            let mut b = bench_spec("synthetic_retrieval");
            b.truth_path = Some("truth.csv".into());
            b.metrics = vec![Metric::Topk, Metric::Ceiling, Metric::Roc, Metric::Mces];
            b.partitions = vec![PartitionSpec {
                field: "file".into(),
                values: None,
            }];
            if !fx.isomer_groups.is_empty() {
                write_out(s, "isomer_groups.json", json_line(&fx.isomer_groups)?)?;
                b.isomer_groups_path = Some("isomer_groups.json".into());
                b.metrics.push(Metric::IsomerGroups);
            }
            write_out(s, "benchmark.json", json_line(&b)?)?;
            serde_json::json!({
                "kind": "retrieval",
                "analytes": fx.library.n_analytes(),
                "reference_spectra": fx.library.n_spectra(),
                "queries": fx.queries.len(),
                "withheld": fx.withheld.len(),
                "isomer_groups": fx.isomer_groups.len(),
                "warnings": fx.warnings.len(),
            })
        }
        FixtureKind::Dilution => {
            if a.n_analytes.is_some() || a.noiseless {
                return Err(Failure::Usage(
                    "--n-analytes and --noiseless apply to retrieval fixtures".into(),
                ));
            }
            let mut spec: DilutionFixtureSpec = match &raw {
                Some(b) => serde_json::from_slice(b)?,
                None => DilutionFixtureSpec::default(),
            };
            if let Some(seed) = a.seed {
                spec.seed = seed;
            }
            let fx = generate_dilution_fixture(&spec)?;
            write_out(s, "library.jsonl", io::write_library_manifest(&fx.library))?;
            write_out(s, "queries.mgf", io::write_mgf(&fx.queries))?;
            let fields: BTreeSet<&String> =
                fx.sample_metadata.values().flat_map(|m| m.keys()).collect();
            let mut header = vec!["sample_id"];
            header.extend(fields.iter().map(|f| f.as_str()));
            let rows: Vec<Vec<String>> = fx
                .sample_metadata
                .iter()
                .map(|(id, m)| {
                    let mut r = vec![id.clone()];
                    r.extend(
                        fields
                            .iter()
                            .map(|f| m.get(*f).cloned().unwrap_or_default()),
                    );
                    r
                })
                .collect();
            write_out(s, "sample_metadata.csv", csv_rows(&header, &rows)?)?;
            let gt: String = fx.ground_truth.iter().map(|k| format!("{k}\n")).collect();
            write_out(s, "ground_truth.txt", gt)?;

            let mut b = bench_spec("synthetic_dilution");
            b.sample_metadata_path = Some("sample_metadata.csv".into());
            b.ground_truth_path = Some("ground_truth.txt".into());
            b.metrics = vec![Metric::Identification];
            b.partitions = vec![
                PartitionSpec {
                    field: "dilution".into(),
                    values: None,
                },
                PartitionSpec {
                    field: "file".into(),
                    values: None,
                },
            ];
            write_out(s, "benchmark.json", json_line(&b)?)?;
            serde_json::json!({
                "kind": "dilution",
                "analytes": fx.library.n_analytes(),
                "reference_spectra": fx.library.n_spectra(),
                "queries": fx.queries.len(),
                "samples": fx.sample_metadata.len(),
                "ground_truth": fx.ground_truth.len(),
            })
        }
    };
    let text = match s.format {
        Format::Json => json_line(&summary)?,
        Format::Csv => {
            let obj = summary.as_object().expect("summary is an object");
            let header: Vec<&str> = obj.keys().map(String::as_str).collect();
            let row: Vec<String> = obj
                .values()
                .map(|v| v.as_str().map_or_else(|| v.to_string(), str::to_string))
                .collect();
            csv_rows(&header, &[row])?
        }
    };
    stdout(&text)
}
