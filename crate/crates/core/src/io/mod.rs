//! On-disk formats: MGF spectra, the JSONL library manifest, embedding
//! files and small CSV side tables.

pub mod embeddings;
pub mod manifest;
pub mod mgf;
pub mod tables;

use std::path::Path;

use crate::error::{Error, Result};
use crate::spectrum::{ReferenceLibrary, Spectrum};

pub use embeddings::{load_embeddings, parse_embeddings, EmbeddingMap};
pub use manifest::{parse_library_manifest, parse_manifest_records, write_library_manifest};
pub use mgf::{parse_mgf, write_mgf};

pub fn read_bytes(path: impl AsRef<Path>) -> Result<Vec<u8>> {
    let path = path.as_ref();
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

pub fn read_mgf(path: impl AsRef<Path>) -> Result<Vec<Spectrum>> {
    parse_mgf(&read_bytes(path)?)
}

pub fn read_library(path: impl AsRef<Path>) -> Result<ReferenceLibrary> {
    parse_library_manifest(&read_bytes(path)?)
}

pub fn write_file(path: impl AsRef<Path>, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
