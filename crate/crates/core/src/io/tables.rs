//! Two-column CSV side tables (query truth, sample labels, sample metadata)
//! and plain key lists.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};

/// Reads a headered CSV into an ordered `first column -> second column` map.
/// Duplicate keys are rejected.
pub fn parse_pair_csv(bytes: &[u8]) -> Result<BTreeMap<String, String>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        if row.len() < 2 {
            return Err(Error::invalid(format!(
                "row {:?} needs two columns",
                row.position().map(|p| p.line())
            )));
        }
        let key = row[0].to_string();
        if out.insert(key.clone(), row[1].to_string()).is_some() {
            return Err(Error::invalid(format!("duplicate key {key}")));
        }
    }
    Ok(out)
}

pub fn read_pair_csv(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>> {
    parse_pair_csv(&super::read_bytes(path)?)
}

/// Sample metadata: `sample_id,<field1>,<field2>...` with a header naming
/// the fields. Returns `sample -> field -> value`.
pub fn parse_sample_metadata(bytes: &[u8]) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(bytes);
    let headers = reader.headers()?.clone();
    let mut out = BTreeMap::new();
    for row in reader.records() {
        let row = row?;
        let fields = headers
            .iter()
            .zip(row.iter())
            .skip(1)
            .map(|(h, v)| (h.to_string(), v.to_string()))
            .collect();
        let sample = row.get(0).unwrap_or_default().to_string();
        if out.insert(sample.clone(), fields).is_some() {
            return Err(Error::invalid(format!("duplicate sample {sample}")));
        }
    }
    Ok(out)
}

pub fn read_sample_metadata(
    path: impl AsRef<Path>,
) -> Result<BTreeMap<String, BTreeMap<String, String>>> {
    parse_sample_metadata(&super::read_bytes(path)?)
}

/// One key per line; blank lines and `#` comments skipped.
pub fn parse_key_list(bytes: &[u8]) -> Result<BTreeSet<String>> {
    let text = std::str::from_utf8(bytes).map_err(|_| Error::invalid("key list is not UTF-8"))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect())
}

pub fn read_key_list(path: impl AsRef<Path>) -> Result<BTreeSet<String>> {
    parse_key_list(&super::read_bytes(path)?)
}
