//! Knowledge-base files: a binary embedding matrix plus a JSONL metadata
//! sidecar whose line `i` describes row `i`.
//!
//! Embedding file layout (little-endian):
//!
//! | offset | size        | field                     |
//! |--------|-------------|---------------------------|
//! | 0      | 4           | magic `VRAG`              |
//! | 4      | 2           | version (`1`)             |
//! | 6      | 4           | dim (`u32`)               |
//! | 10     | 8           | count (`u64`)             |
//! | 18     | 4·dim·count | `f32` rows, row-major     |

use std::collections::HashSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalize, EmbeddingVector, KnowledgeEntry, Label};
use crate::taxonomy::Taxonomy;

pub const MAGIC: [u8; 4] = *b"VRAG";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 18;

pub const EMBEDDINGS_FILE: &str = "embeddings.vrag";
pub const METADATA_FILE: &str = "metadata.jsonl";

/// Decoded embedding file.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, data: Vec<f32>) -> Result<Self> {
        if dim == 0 || !data.len().is_multiple_of(dim) {
            return Err(Error::InvalidParams(format!(
                "{} values do not form rows of dim {dim}",
                data.len()
            )));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows<'a>(dim: usize, rows: impl IntoIterator<Item = &'a [f32]>) -> Result<Self> {
        let mut data = Vec::new();
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn count(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADER_LEN + 4 * self.data.len());
        out.extend_from_slice(&MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.count() as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER_LEN {
            return Err(Error::Format(format!(
                "embedding file truncated: {} bytes, header needs {HEADER_LEN}",
                bytes.len()
            )));
        }
        if bytes[0..4] != MAGIC {
            return Err(Error::Format("bad magic, expected `VRAG`".into()));
        }
        let version = u16::from_le_bytes([bytes[4], bytes[5]]);
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let dim = u32::from_le_bytes(bytes[6..10].try_into().expect("4 bytes")) as usize;
        let count = u64::from_le_bytes(bytes[10..18].try_into().expect("8 bytes"));
        if dim == 0 {
            return Err(Error::Format("dim is zero".into()));
        }
        let expected = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(dim))
            .and_then(|v| v.checked_mul(4))
            .and_then(|v| v.checked_add(HEADER_LEN))
            .ok_or_else(|| Error::Format(format!("count {count} x dim {dim} overflows")))?;
        if bytes.len() != expected {
            return Err(Error::Format(format!(
                "length {} does not match header (expected {expected})",
                bytes.len()
            )));
        }
        let data: Vec<f32> = bytes[HEADER_LEN..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteValue {
                row: pos / dim,
                col: pos % dim,
            });
        }
        Ok(Self { dim, data })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::decode(&fs::read(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.encode())?;
        Ok(())
    }
}

/// One metadata line. Label fields and description are optional so that
/// unlabeled query sets share the format.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetadataRecord {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
}

pub fn read_metadata(path: &Path) -> Result<Vec<MetadataRecord>> {
    parse_metadata(&fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => Error::Format("metadata is not valid UTF-8".into()),
        _ => Error::Io(e),
    })?)
}

pub fn parse_metadata(text: &str) -> Result<Vec<MetadataRecord>> {
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            serde_json::from_str(line)
                .map_err(|e| Error::Format(format!("metadata line {}: {e}", i + 1)))
        })
        .collect()
}

pub fn write_metadata(path: &Path, records: &[MetadataRecord]) -> Result<()> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).map_err(|e| Error::Format(e.to_string()))?;
        out.push(b'\n');
    }
    fs::File::create(path)?.write_all(&out)?;
    Ok(())
}

/// Locations of an embedding file and its metadata sidecar.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorePaths {
    pub embeddings: PathBuf,
    pub metadata: PathBuf,
}

impl StorePaths {
    pub fn new(embeddings: impl Into<PathBuf>, metadata: impl Into<PathBuf>) -> Self {
        Self {
            embeddings: embeddings.into(),
            metadata: metadata.into(),
        }
    }

    /// Conventional file names inside a store directory.
    pub fn in_dir(dir: &Path) -> Self {
        Self::new(dir.join(EMBEDDINGS_FILE), dir.join(METADATA_FILE))
    }
}

fn read_pair(paths: &StorePaths) -> Result<(EmbeddingMatrix, Vec<MetadataRecord>)> {
    let matrix = EmbeddingMatrix::read(&paths.embeddings)?;
    let records = read_metadata(&paths.metadata)?;
    if matrix.count() != records.len() {
        return Err(Error::CountMismatch {
            embeddings: matrix.count(),
            metadata: records.len(),
        });
    }
    Ok((matrix, records))
}

fn required<'a>(field: &'a Option<String>, name: &str, id: &str) -> Result<&'a str> {
    match field.as_deref() {
        Some(s) if !s.trim().is_empty() => Ok(s),
        _ => Err(Error::Format(format!("record `{id}` has no {name}"))),
    }
}

fn to_entries(
    matrix: &EmbeddingMatrix,
    records: Vec<MetadataRecord>,
    taxonomy: Option<&Taxonomy>,
    normalized: bool,
) -> Result<Vec<KnowledgeEntry>> {
    let mut seen = HashSet::new();
    records
        .into_iter()
        .zip(matrix.rows())
        .map(|(r, row)| {
            let species = required(&r.species, "species", &r.id)?.to_string();
            let category = required(&r.category, "category", &r.id)?.to_string();
            let description = required(&r.description, "description", &r.id)?.to_string();
            if let Some(t) = taxonomy {
                t.validate(&species, &category)?;
            }
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateId(r.id));
            }
            let mut embedding = EmbeddingVector::new(row.to_vec())?;
            if normalized {
                embedding = normalize(&embedding)?;
            }
            Ok(KnowledgeEntry {
                id: r.id,
                species,
                category,
                description,
                embedding,
            })
        })
        .collect()
}

/// Validate a raw embedding/metadata pair against `taxonomy` and produce
/// unit-norm entries in file order.
pub fn ingest(paths: &StorePaths, taxonomy: &Taxonomy) -> Result<Vec<KnowledgeEntry>> {
    let (matrix, records) = read_pair(paths)?;
    to_entries(&matrix, records, Some(taxonomy), true)
}

/// Write entries exactly as held in memory.
pub fn persist(entries: &[KnowledgeEntry], paths: &StorePaths) -> Result<()> {
    let dim = entries.first().ok_or(Error::EmptyStore)?.embedding.dim();
    let matrix = EmbeddingMatrix::from_rows(dim, entries.iter().map(|e| e.embedding.as_slice()))?;
    let records: Vec<_> = entries
        .iter()
        .map(|e| MetadataRecord {
            id: e.id.clone(),
            species: Some(e.species.clone()),
            category: Some(e.category.clone()),
            description: Some(e.description.clone()),
        })
        .collect();
    matrix.write(&paths.embeddings)?;
    write_metadata(&paths.metadata, &records)
}

/// Inverse of [`persist`]: embeddings come back bit-identical, without
/// renormalization.
pub fn load(paths: &StorePaths) -> Result<Vec<KnowledgeEntry>> {
    let (matrix, records) = read_pair(paths)?;
    to_entries(&matrix, records, None, false)
}

/// A query embedding with its optional ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryRecord {
    pub id: String,
    pub label: Option<Label>,
    pub embedding: EmbeddingVector,
}

/// Load a query set. Labels are optional; descriptions are ignored.
pub fn load_queries(paths: &StorePaths, taxonomy: &Taxonomy) -> Result<Vec<QueryRecord>> {
    let (matrix, records) = read_pair(paths)?;
    let mut seen = HashSet::new();
    records
        .into_iter()
        .zip(matrix.rows())
        .map(|(r, row)| {
            let label = taxonomy.resolve_label(r.species.as_deref(), r.category.as_deref())?;
            if !seen.insert(r.id.clone()) {
                return Err(Error::DuplicateId(r.id));
            }
            Ok(QueryRecord {
                id: r.id,
                label,
                embedding: EmbeddingVector::new(row.to_vec())?,
            })
        })
        .collect()
}

/// Write a query set; labels are included when present.
pub fn persist_queries(queries: &[QueryRecord], paths: &StorePaths) -> Result<()> {
    let dim = queries.first().ok_or(Error::EmptyQuerySet)?.embedding.dim();
    let matrix = EmbeddingMatrix::from_rows(dim, queries.iter().map(|q| q.embedding.as_slice()))?;
    let records: Vec<_> = queries
        .iter()
        .map(|q| MetadataRecord {
            id: q.id.clone(),
            species: q.label.as_ref().map(|l| l.species.clone()),
            category: q.label.as_ref().map(|l| l.category.clone()),
            description: None,
        })
        .collect();
    matrix.write(&paths.embeddings)?;
    write_metadata(&paths.metadata, &records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matrix(rows: &[&[f32]]) -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(rows[0].len(), rows.iter().copied()).unwrap()
    }

    #[test]
    fn header_layout_is_bit_exact() {
        let bytes = matrix(&[&[1.0, -2.0], &[0.5, 0.25]]).encode();
        assert_eq!(bytes.len(), HEADER_LEN + 4 * 2 * 2);
        assert_eq!(&bytes[0..4], b"VRAG");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(&bytes[6..10], &[2, 0, 0, 0]);
        assert_eq!(&bytes[10..18], &[2, 0, 0, 0, 0, 0, 0, 0]);
        assert_eq!(&bytes[18..22], &1.0f32.to_le_bytes());
        assert_eq!(&bytes[22..26], &(-2.0f32).to_le_bytes());
    }

    #[test]
    fn decode_errors() {
        let good = matrix(&[&[1.0, 2.0]]).encode();

        assert!(matches!(
            EmbeddingMatrix::decode(&good[..10]),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            EmbeddingMatrix::decode(&good[..good.len() - 1]),
            Err(Error::Format(_))
        ));

        let mut bad_magic = good.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            EmbeddingMatrix::decode(&bad_magic),
            Err(Error::Format(_))
        ));

        let mut bad_version = good.clone();
        bad_version[4] = 2;
        assert!(matches!(
            EmbeddingMatrix::decode(&bad_version),
            Err(Error::Format(_))
        ));

        let mut nan = good.clone();
        nan[22..26].copy_from_slice(&f32::NAN.to_le_bytes());
        assert!(matches!(
            EmbeddingMatrix::decode(&nan),
            Err(Error::NonFiniteValue { row: 0, col: 1 })
        ));

        let mut huge = good.clone();
        huge[10..18].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(matches!(
            EmbeddingMatrix::decode(&huge),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn metadata_parsing() {
        let recs = parse_metadata(
            "{\"id\":\"a\",\"species\":\"Opah\",\"category\":\"Opah\",\"description\":\"round\"}\n{\"id\":\"q\"}\n",
        )
        .unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(recs[1].species, None);
        assert!(matches!(
            parse_metadata("{\"id\":\"a\",\"colour\":\"red\"}"),
            Err(Error::Format(_))
        ));
        assert!(matches!(parse_metadata("not json"), Err(Error::Format(_))));
        assert!(matches!(
            parse_metadata("{\"id\":\"a\"}\n\n{\"id\":\"b\"}"),
            Err(Error::Format(_))
        ));
    }
}
