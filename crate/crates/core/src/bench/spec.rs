use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::chem::McesConfig;
use crate::error::{Error, Result};
use crate::io::{self, tables, EmbeddingMap};
use crate::metrics::{IsomerGroup, Truth};
use crate::retrieval::IndexConfig;
use crate::spectrum::{ReferenceLibrary, Spectrum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Top-K accuracy per spectrum and per analyte for every `ks` entry.
    Topk,
    Ceiling,
    Roc,
    /// Spurious-hit protocol against the ground-truth set.
    Identification,
    IsomerGroups,
    Mces,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedScorer {
    pub name: String,
    pub config: IndexConfig,
}

/// Split queries by a sample metadata field. The pseudo-field `file`
/// partitions by sample id. With `values` given, anything else falls into
/// `other`; samples lacking the field go to `NA`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionSpec {
    pub field: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<String>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFilter {
    pub field: String,
    pub value: String,
}

fn default_metrics() -> Vec<Metric> {
    vec![Metric::Topk, Metric::Ceiling]
}

fn default_ks() -> Vec<usize> {
    vec![1, 5, 10]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkSpec {
    pub name: String,
    pub library_path: PathBuf,
    pub query_path: PathBuf,
    /// `query_id,key2d` CSV; without it, `ANALYTE` headers of the queries
    /// serve as truth.
    #[serde(default)]
    pub truth_path: Option<PathBuf>,
    #[serde(default)]
    pub sample_metadata_path: Option<PathBuf>,
    #[serde(default)]
    pub isomer_groups_path: Option<PathBuf>,
    /// Key list defining true identifications for the spurious-hit protocol.
    #[serde(default)]
    pub ground_truth_path: Option<PathBuf>,
    #[serde(default)]
    pub reference_embeddings_path: Option<PathBuf>,
    #[serde(default)]
    pub query_embeddings_path: Option<PathBuf>,
    #[serde(default)]
    pub partitions: Vec<PartitionSpec>,
    pub scorers: Vec<NamedScorer>,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default = "default_ks")]
    pub ks: Vec<usize>,
    /// Samples whose metadata matches any filter are dropped up front.
    #[serde(default)]
    pub exclude: Vec<SampleFilter>,
    #[serde(default)]
    pub mces: McesConfig,
}

impl BenchmarkSpec {
    /// Parses a spec file; relative paths resolve against its directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut spec: BenchmarkSpec = serde_json::from_slice(&io::read_bytes(path)?)?;
        let base = path.parent().unwrap_or(Path::new("."));
        spec.resolve_paths(base);
        spec.validate()?;
        Ok(spec)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.library_path);
        fix(&mut self.query_path);
        for p in [
            &mut self.truth_path,
            &mut self.sample_metadata_path,
            &mut self.isomer_groups_path,
            &mut self.ground_truth_path,
            &mut self.reference_embeddings_path,
            &mut self.query_embeddings_path,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.scorers.is_empty() {
            return Err(Error::invalid("benchmark needs at least one scorer"));
        }
        let mut names = BTreeSet::new();
        for s in &self.scorers {
            if !names.insert(&s.name) {
                return Err(Error::invalid(format!("duplicate scorer name {}", s.name)));
            }
            s.config.validate()?;
        }
        if self.ks.contains(&0) {
            return Err(Error::invalid("k must be at least 1"));
        }
        Ok(())
    }
}

/// Everything a benchmark reads, already parsed.
#[derive(Debug, Clone, Default)]
pub struct BenchmarkInputs {
    pub library: ReferenceLibrary,
    pub queries: Vec<Spectrum>,
    pub truth: Option<Truth>,
    pub sample_metadata: BTreeMap<String, BTreeMap<String, String>>,
    pub isomer_groups: Vec<IsomerGroup>,
    pub ground_truth: Option<BTreeSet<String>>,
    pub reference_embeddings: Option<EmbeddingMap>,
    pub query_embeddings: Option<EmbeddingMap>,
    /// SHA-256 over the raw bytes of every input file, in spec order.
    pub input_digest: String,
}

/// Truth from the queries' own analyte annotations, if any carry one.
pub fn truth_from_queries(queries: &[Spectrum]) -> Option<Truth> {
    let truth: Truth = queries
        .iter()
        .filter_map(|q| q.analyte_key.as_ref().map(|k| (q.id.clone(), k.clone())))
        .collect();
    (!truth.is_empty()).then_some(truth)
}

impl BenchmarkInputs {
    pub fn load(spec: &BenchmarkSpec) -> Result<Self> {
        let mut hasher = Sha256::new();
        let mut read = |p: &Path| -> Result<Vec<u8>> {
            let bytes = io::read_bytes(p)?;
            hasher.update((bytes.len() as u64).to_le_bytes());
            hasher.update(&bytes);
            Ok(bytes)
        };
        let library = io::parse_library_manifest(&read(&spec.library_path)?)?;
        let queries = io::parse_mgf(&read(&spec.query_path)?)?;
        let truth = match &spec.truth_path {
            Some(p) => Some(tables::parse_pair_csv(&read(p)?)?),
            None => truth_from_queries(&queries),
        };
        let sample_metadata = match &spec.sample_metadata_path {
            Some(p) => tables::parse_sample_metadata(&read(p)?)?,
            None => BTreeMap::new(),
        };
        let isomer_groups: Vec<IsomerGroup> = match &spec.isomer_groups_path {
            Some(p) => serde_json::from_slice(&read(p)?)?,
            None => Vec::new(),
        };
        for g in &isomer_groups {
            g.validate()?;
        }
        let ground_truth = match &spec.ground_truth_path {
            Some(p) => Some(tables::parse_key_list(&read(p)?)?),
            None => None,
        };
        let reference_embeddings = match &spec.reference_embeddings_path {
            Some(p) => Some(io::parse_embeddings(&read(p)?)?),
            None => None,
        };
        let query_embeddings = match &spec.query_embeddings_path {
            Some(p) => Some(io::parse_embeddings(&read(p)?)?),
            None => None,
        };
        let input_digest = hex(&hasher.finalize());
        Ok(BenchmarkInputs {
            library,
            queries,
            truth,
            sample_metadata,
            isomer_groups,
            ground_truth,
            reference_embeddings,
            query_embeddings,
            input_digest,
        })
    }
}

pub(crate) fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of the spec and the input digest. Paths enter by file name only, so
/// the hash does not depend on where the inputs live.
pub fn config_hash(spec: &BenchmarkSpec, input_digest: &str) -> String {
    let mut spec = spec.clone();
    let strip = |p: &mut PathBuf| *p = p.file_name().map(PathBuf::from).unwrap_or_default();
    strip(&mut spec.library_path);
    strip(&mut spec.query_path);
    for p in [
        &mut spec.truth_path,
        &mut spec.sample_metadata_path,
        &mut spec.isomer_groups_path,
        &mut spec.ground_truth_path,
        &mut spec.reference_embeddings_path,
        &mut spec.query_embeddings_path,
    ]
    .into_iter()
    .flatten()
    {
        strip(p);
    }
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&spec).expect("spec serializes"));
    h.update(input_digest.as_bytes());
    hex(&h.finalize())
}
