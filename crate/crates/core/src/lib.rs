//! Spectral library retrieval engine and identification benchmark harness.
//!
//! The crate covers the whole evaluation path: parsing spectra and reference
//! libraries, curation, shift-aware modified cosine and embedding scoring,
//! ppm-windowed Top-K retrieval, structural (MCES) distances between
//! molecules, the retrieval/identification metrics, sample-level embedding
//! analysis and a benchmark runner tying them together.

pub mod bench;
pub mod biointerp;
pub mod chem;
pub mod error;
pub mod io;
pub mod metrics;
pub mod plot;
pub mod preprocess;
pub mod retrieval;
pub mod similarity;
pub mod spectrum;

pub use error::{Error, Result};
pub use retrieval::{IndexConfig, RetrievalHit, RetrievalResult, SearchIndex};
pub use spectrum::{AnalyteRecord, EmbeddingVector, Peak, Polarity, ReferenceLibrary, Spectrum};
