use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every failure the engine can report. Variants are grouped by the stage
/// that produces them so callers (CLI, FFI) can map them onto exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("mgf line {line}: {message}")]
    Mgf { line: usize, message: String },

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("spectra reference unknown analytes: {}", .spectrum_ids.join(", "))]
    Integrity { spectrum_ids: Vec<String> },

    #[error("analyte {key2d} has conflicting structures: {existing:?} vs {incoming:?}")]
    AnalyteConflict {
        key2d: String,
        existing: String,
        incoming: String,
    },

    #[error("duplicate spectrum id {0}")]
    DuplicateSpectrum(String),

    #[error("embedding format: {0}")]
    EmbeddingFormat(String),

    #[error("embedding {id}: expected dimension {expected}, found {found}")]
    DimensionMismatch {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("duplicate embedding id {0}")]
    DuplicateEmbedding(String),

    #[error("embedding {0} contains a non-finite value")]
    NonFinite(String),

    #[error("degenerate spectrum {0}: no positive intensity")]
    DegenerateSpectrum(String),

    #[error("invalid spectrum {id}: {message}")]
    InvalidSpectrum { id: String, message: String },

    #[error("malformed InChIKey {0:?}")]
    InvalidInchiKey(String),

    #[error("invalid analyte record {key2d:?}: {message}")]
    InvalidAnalyte { key2d: String, message: String },

    #[error("smiles position {position}: {message}")]
    Smiles { position: usize, message: String },

    #[error("graph has {atoms} heavy atoms, limit is {limit}")]
    Capacity { atoms: usize, limit: usize },

    #[error("missing embeddings for reference spectra: {}", .0.join(", "))]
    MissingEmbeddings(Vec<String>),

    #[error("no ground truth for query {0}")]
    MissingTruth(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Short machine-readable tag, used in CLI diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Mgf { .. } => "mgf_parse",
            Error::Manifest { .. } => "manifest_parse",
            Error::Integrity { .. } => "integrity",
            Error::AnalyteConflict { .. } => "analyte_conflict",
            Error::DuplicateSpectrum(_) => "duplicate_spectrum",
            Error::EmbeddingFormat(_) => "embedding_format",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::DuplicateEmbedding(_) => "duplicate_embedding",
            Error::NonFinite(_) => "non_finite",
            Error::DegenerateSpectrum(_) => "degenerate_spectrum",
            Error::InvalidSpectrum { .. } => "invalid_spectrum",
            Error::InvalidInchiKey(_) => "invalid_inchikey",
            Error::InvalidAnalyte { .. } => "invalid_analyte",
            Error::Smiles { .. } => "smiles_parse",
            Error::Capacity { .. } => "capacity",
            Error::MissingEmbeddings(_) => "missing_embeddings",
            Error::MissingTruth(_) => "missing_truth",
            Error::InvalidInput(_) => "invalid_input",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}
