//! Embedding exchange formats.
//!
//! `EMBV1` binary layout (all integers little-endian):
//!
//! ```text
//! "EMBV1\0" | dim: u32 | { id_len: u16 | id: [u8; id_len] | values: [f32; dim] }*
//! ```
//!
//! CSV layout: a header row `id,dim=<d>` followed by rows `id,v1,...,vd`.

use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::spectrum::EmbeddingVector;

pub const EMBV1_MAGIC: &[u8; 6] = b"EMBV1\0";

pub type EmbeddingMap = BTreeMap<String, EmbeddingVector>;

/// Loads an embedding file, choosing the format from its leading bytes.
pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingMap> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_embeddings(&bytes)
}

pub fn parse_embeddings(bytes: &[u8]) -> Result<EmbeddingMap> {
    if bytes.starts_with(EMBV1_MAGIC) {
        parse_embv1(bytes)
    } else {
        parse_embedding_csv(bytes)
    }
}

fn insert(map: &mut EmbeddingMap, dim: usize, id: String, values: Vec<f64>) -> Result<()> {
    if values.len() != dim {
        return Err(Error::DimensionMismatch {
            id,
            expected: dim,
            found: values.len(),
        });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(id));
    }
    if map.contains_key(&id) {
        return Err(Error::DuplicateEmbedding(id));
    }
    map.insert(id, EmbeddingVector(values));
    Ok(())
}

pub fn parse_embv1(bytes: &[u8]) -> Result<EmbeddingMap> {
    let fmt = |m: &str| Error::EmbeddingFormat(m.to_string());
    let rest = bytes
        .strip_prefix(EMBV1_MAGIC.as_slice())
        .ok_or_else(|| fmt("missing EMBV1 magic"))?;
    let (dim_bytes, mut rest) = rest
        .split_at_checked(4)
        .ok_or_else(|| fmt("truncated header"))?;
    let dim = u32::from_le_bytes(dim_bytes.try_into().expect("4 bytes")) as usize;
    if dim == 0 {
        return Err(fmt("dimension must be positive"));
    }
    let record_payload = dim
        .checked_mul(4)
        .ok_or_else(|| fmt("dimension too large"))?;

    let mut map = EmbeddingMap::new();
    while !rest.is_empty() {
        let (len_bytes, tail) = rest
            .split_at_checked(2)
            .ok_or_else(|| fmt("truncated record header"))?;
        let id_len = u16::from_le_bytes(len_bytes.try_into().expect("2 bytes")) as usize;
        let (id_bytes, tail) = tail
            .split_at_checked(id_len)
            .ok_or_else(|| fmt("truncated record id"))?;
        let id = std::str::from_utf8(id_bytes)
            .map_err(|_| fmt("record id is not UTF-8"))?
            .to_string();
        let (value_bytes, tail) = tail.split_at_checked(record_payload).ok_or_else(|| {
            Error::EmbeddingFormat(format!("record {id} is shorter than dimension {dim}"))
        })?;
        let values = value_bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect();
        insert(&mut map, dim, id, values)?;
        rest = tail;
    }
    Ok(map)
}

pub fn parse_embedding_csv(bytes: &[u8]) -> Result<EmbeddingMap> {
    let text = std::str::from_utf8(bytes)
        .map_err(|_| Error::EmbeddingFormat("CSV is not UTF-8".into()))?;
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines
        .next()
        .ok_or_else(|| Error::EmbeddingFormat("missing header row".into()))?;
    let dim: usize = header
        .trim()
        .strip_prefix("id,dim=")
        .and_then(|d| d.trim().parse().ok())
        .filter(|&d| d > 0)
        .ok_or_else(|| {
            Error::EmbeddingFormat(format!("header must be id,dim=<d>, got {header:?}"))
        })?;

    let mut map = EmbeddingMap::new();
    for line in lines {
        let mut fields = line.trim().split(',');
        let id = fields.next().unwrap_or_default().trim().to_string();
        if id.is_empty() {
            return Err(Error::EmbeddingFormat("row with empty id".into()));
        }
        let values = fields
            .map(|f| {
                f.trim().parse::<f64>().map_err(|_| {
                    Error::EmbeddingFormat(format!("row {id}: non-numeric value {f:?}"))
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        insert(&mut map, dim, id, values)?;
    }
    Ok(map)
}

fn common_dim(map: &EmbeddingMap) -> Result<usize> {
    let mut dims = map.values().map(EmbeddingVector::dim);
    let dim = dims.next().unwrap_or(0);
    if let Some((id, v)) = map.iter().find(|(_, v)| v.dim() != dim) {
        return Err(Error::DimensionMismatch {
            id: id.clone(),
            expected: dim,
            found: v.dim(),
        });
    }
    Ok(dim)
}

pub fn write_embv1(map: &EmbeddingMap) -> Result<Vec<u8>> {
    let dim = common_dim(map)?;
    let mut out = Vec::with_capacity(10 + map.len() * (dim * 4 + 18));
    out.extend_from_slice(EMBV1_MAGIC);
    out.extend_from_slice(&(dim as u32).to_le_bytes());
    for (id, v) in map {
        let len = u16::try_from(id.len())
            .map_err(|_| Error::EmbeddingFormat(format!("id {id} longer than 65535 bytes")))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(id.as_bytes());
        for &x in v.values() {
            out.extend_from_slice(&(x as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn write_embedding_csv(map: &EmbeddingMap) -> Result<String> {
    let dim = common_dim(map)?;
    let mut out = format!("id,dim={dim}\n");
    for (id, v) in map {
        out.push_str(id);
        for x in v.values() {
            out.push(',');
            out.push_str(&(*x as f32).to_string());
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn embv1(dim: u32, records: &[(&str, &[f32])]) -> Vec<u8> {
        let mut b = EMBV1_MAGIC.to_vec();
        b.extend_from_slice(&dim.to_le_bytes());
        for (id, vals) in records {
            b.extend_from_slice(&(id.len() as u16).to_le_bytes());
            b.extend_from_slice(id.as_bytes());
            for v in *vals {
                b.extend_from_slice(&v.to_le_bytes());
            }
        }
        b
    }

    #[test]
    fn embv1_two_records() {
        let bytes = embv1(
            4,
            &[
                ("s1", &[1.0, 2.0, 3.0, 4.0]),
                ("s2", &[0.5, 0.0, 0.0, -1.0]),
            ],
        );
        let map = parse_embeddings(&bytes).unwrap();
        assert_eq!(map.len(), 2);
        assert!(map.values().all(|v| v.dim() == 4));
        assert_eq!(map["s2"].values(), &[0.5, 0.0, 0.0, -1.0]);
        assert_eq!(parse_embv1(&write_embv1(&map).unwrap()).unwrap(), map);
    }

    #[test]
    fn embv1_rejects_truncation_and_nan() {
        let mut bytes = embv1(4, &[("s1", &[1.0, 2.0, 3.0, 4.0])]);
        bytes.pop();
        assert!(matches!(
            parse_embv1(&bytes),
            Err(Error::EmbeddingFormat(_))
        ));
        let bytes = embv1(2, &[("s1", &[1.0, f32::NAN])]);
        assert!(matches!(parse_embv1(&bytes), Err(Error::NonFinite(_))));
        let bytes = embv1(1, &[("s1", &[1.0]), ("s1", &[2.0])]);
        assert!(matches!(
            parse_embv1(&bytes),
            Err(Error::DuplicateEmbedding(_))
        ));
    }

    #[test]
    fn csv_dimension_mismatch() {
        let text = "id,dim=4\ns1,1,2,3,4\ns2,1,2,3,4,5\n";
        assert!(matches!(
            parse_embeddings(text.as_bytes()),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 5,
                ..
            })
        ));
    }

    #[test]
    fn csv_duplicate_id() {
        let text = "id,dim=2\ns1,0.1,0.2\ns1,0.3,0.4\n";
        assert!(matches!(
            parse_embeddings(text.as_bytes()),
            Err(Error::DuplicateEmbedding(id)) if id == "s1"
        ));
    }

    #[test]
    fn csv_round_trip() {
        let text = "id,dim=2\na,0.25,-1\nb,3,4\n";
        let map = parse_embedding_csv(text.as_bytes()).unwrap();
        assert_eq!(write_embedding_csv(&map).unwrap(), text);
        assert!(parse_embedding_csv(b"id,dim=2\na,1,inf\n").is_err());
        assert!(parse_embedding_csv(b"").is_err());
    }
}
