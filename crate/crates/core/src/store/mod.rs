//! k-nearest-neighbour retrieval over knowledge entries.
//!
//! [`StoreIndex::build`] normalizes every embedding and freezes the entry
//! set; the resulting index is immutable and can be shared across threads.
//! Two engines sit behind the same query interface: an exact linear scan,
//! which is the ground truth, and an HNSW graph for large stores.

mod exact;
mod hnsw;

use std::cmp::Ordering;
use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalize_slice, EmbeddingVector, KnowledgeEntry, RetrievalHit};

pub use hnsw::{HnswGraph, HnswStats};

/// Number of hits fed to the prompt when nothing else is configured.
pub const DEFAULT_K: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HnswParams {
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        Self {
            m: 16,
            ef_construction: 200,
            ef_search: 64,
            seed: 42,
        }
    }
}

impl HnswParams {
    pub fn validate(&self) -> Result<()> {
        if self.m < 2 {
            return Err(Error::InvalidParams(format!(
                "m must be >= 2, got {}",
                self.m
            )));
        }
        if self.ef_construction < self.m {
            return Err(Error::InvalidParams(format!(
                "ef_construction ({}) must be >= m ({})",
                self.ef_construction, self.m
            )));
        }
        if self.ef_search == 0 {
            return Err(Error::InvalidParams("ef_search must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EngineKind {
    Exact,
    Hnsw(HnswParams),
}

#[derive(Debug)]
enum Engine {
    Exact,
    Hnsw(HnswGraph),
}

/// A frozen, queryable set of knowledge entries.
#[derive(Debug)]
pub struct StoreIndex {
    entries: Vec<KnowledgeEntry>,
    by_id: HashMap<String, usize>,
    dim: usize,
    /// Row-major unit-norm embeddings, one row per entry.
    vectors: Vec<f32>,
    kind: EngineKind,
    engine: Engine,
}

impl StoreIndex {
    pub fn build(entries: Vec<KnowledgeEntry>, kind: EngineKind) -> Result<Self> {
        let dim = entries.first().ok_or(Error::EmptyStore)?.embedding.dim();
        if let EngineKind::Hnsw(params) = &kind {
            params.validate()?;
        }

        let mut ids = HashSet::with_capacity(entries.len());
        let mut vectors = Vec::with_capacity(dim * entries.len());
        let mut normalized = Vec::with_capacity(entries.len());
        for mut entry in entries {
            if entry.embedding.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: entry.embedding.dim(),
                });
            }
            if !ids.insert(entry.id.clone()) {
                return Err(Error::DuplicateId(entry.id));
            }
            let unit = normalize_slice(entry.embedding.as_slice())?;
            vectors.extend_from_slice(&unit);
            entry.embedding = EmbeddingVector::new(unit)?;
            normalized.push(entry);
        }
        let by_id = normalized
            .iter()
            .enumerate()
            .map(|(i, e)| (e.id.clone(), i))
            .collect();

        let engine = match kind {
            EngineKind::Exact => Engine::Exact,
            EngineKind::Hnsw(params) => Engine::Hnsw(HnswGraph::build(&vectors, dim, params)),
        };
        log::debug!(
            "built {:?} index over {} entries (dim {dim})",
            kind,
            normalized.len()
        );
        Ok(Self {
            entries: normalized,
            by_id,
            dim,
            vectors,
            kind,
            engine,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn engine(&self) -> EngineKind {
        self.kind
    }

    pub fn entries(&self) -> &[KnowledgeEntry] {
        &self.entries
    }

    pub fn entry(&self, id: &str) -> Option<&KnowledgeEntry> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    pub fn hnsw_stats(&self) -> Option<HnswStats> {
        match &self.engine {
            Engine::Hnsw(g) => Some(g.stats()),
            Engine::Exact => None,
        }
    }

    /// Top-`k` entries by cosine similarity to `q`, best first, ties broken
    /// by ascending entry id. At most `len()` hits are returned.
    pub fn query(&self, q: &EmbeddingVector, k: usize) -> Result<Vec<RetrievalHit>> {
        let unit = self.prepare_query(q, k)?;
        let scored = match &self.engine {
            Engine::Exact => {
                exact::search(&self.vectors, self.dim, &unit, k, |i| &self.entries[i].id)
            }
            Engine::Hnsw(g) => g.search(&self.vectors, &unit, k),
        };
        Ok(self.to_hits(scored, k))
    }

    /// Exact top-`k` regardless of the configured engine.
    pub fn query_exact(&self, q: &EmbeddingVector, k: usize) -> Result<Vec<RetrievalHit>> {
        let unit = self.prepare_query(q, k)?;
        let scored = exact::search(&self.vectors, self.dim, &unit, k, |i| &self.entries[i].id);
        Ok(self.to_hits(scored, k))
    }

    fn prepare_query(&self, q: &EmbeddingVector, k: usize) -> Result<Vec<f32>> {
        if k == 0 {
            return Err(Error::InvalidParams("k must be >= 1".into()));
        }
        if self.entries.is_empty() {
            return Err(Error::EmptyStore);
        }
        if q.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: q.dim(),
            });
        }
        normalize_slice(q.as_slice())
    }

    fn to_hits(&self, mut scored: Vec<(usize, f64)>, k: usize) -> Vec<RetrievalHit> {
        scored.sort_by(|a, b| self.rank_order(a, b));
        scored.truncate(k);
        scored
            .into_iter()
            .enumerate()
            .map(|(r, (i, sim))| RetrievalHit {
                entry_id: self.entries[i].id.clone(),
                similarity: sim.clamp(-1.0, 1.0),
                rank: r + 1,
            })
            .collect()
    }

    fn rank_order(&self, a: &(usize, f64), b: &(usize, f64)) -> Ordering {
        rank_order(a.1, &self.entries[a.0].id, b.1, &self.entries[b.0].id)
    }
}

/// Result ordering: similarity descending, then entry id ascending.
pub(crate) fn rank_order(sim_a: f64, id_a: &str, sim_b: f64, id_b: &str) -> Ordering {
    sim_b.total_cmp(&sim_a).then_with(|| id_a.cmp(id_b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(id: &str, v: &[f32]) -> KnowledgeEntry {
        KnowledgeEntry {
            id: id.into(),
            species: "Tuna".into(),
            category: "Tuna".into(),
            description: "d".into(),
            embedding: EmbeddingVector::new(v.to_vec()).unwrap(),
        }
    }

    fn three() -> Vec<KnowledgeEntry> {
        vec![
            entry("e1", &[1.0, 0.0]),
            entry("e2", &[0.0, 1.0]),
            entry("e3", &[0.6, 0.8]),
        ]
    }

    fn q(v: &[f32]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn build_counts_and_errors() {
        let idx = StoreIndex::build(three(), EngineKind::Exact).unwrap();
        assert_eq!(idx.len(), 3);
        assert_eq!(idx.dim(), 2);

        let mixed = vec![entry("a", &[1.0, 0.0]), entry("b", &[1.0, 0.0, 0.0])];
        assert!(matches!(
            StoreIndex::build(mixed, EngineKind::Exact),
            Err(Error::DimensionMismatch {
                expected: 2,
                found: 3
            })
        ));
        let dup = vec![entry("a", &[1.0, 0.0]), entry("a", &[0.0, 1.0])];
        assert!(matches!(
            StoreIndex::build(dup, EngineKind::Exact),
            Err(Error::DuplicateId(_))
        ));
        assert!(matches!(
            StoreIndex::build(vec![], EngineKind::Exact),
            Err(Error::EmptyStore)
        ));
        let zero = vec![entry("z", &[0.0, 0.0])];
        assert!(matches!(
            StoreIndex::build(zero, EngineKind::Exact),
            Err(Error::ZeroVector)
        ));
    }

    #[test]
    fn hand_evaluated_query() {
        for kind in [EngineKind::Exact, EngineKind::Hnsw(HnswParams::default())] {
            let idx = StoreIndex::build(three(), kind).unwrap();
            let hits = idx.query(&q(&[0.8, 0.6]), 3).unwrap();
            let got: Vec<_> = hits.iter().map(|h| (h.entry_id.as_str(), h.rank)).collect();
            assert_eq!(got, [("e3", 1), ("e1", 2), ("e2", 3)]);
            for (h, want) in hits.iter().zip([0.96, 0.80, 0.60]) {
                assert!((h.similarity - want).abs() < 1e-6, "{h:?}");
            }
        }
    }

    #[test]
    fn self_retrieval_and_clamping() {
        let idx = StoreIndex::build(three(), EngineKind::Exact).unwrap();
        let hit = &idx.query(&q(&[0.6, 0.8]), 1).unwrap()[0];
        assert_eq!(hit.entry_id, "e3");
        assert!((hit.similarity - 1.0).abs() < 1e-6);
        assert_eq!(idx.query(&q(&[1.0, 1.0]), 100).unwrap().len(), 3);
    }

    #[test]
    fn ties_break_by_id() {
        let entries = vec![
            entry("b", &[1.0, 0.0]),
            entry("c", &[2.0, 0.0]),
            entry("a", &[3.0, 0.0]),
        ];
        let idx = StoreIndex::build(entries, EngineKind::Exact).unwrap();
        let ids: Vec<_> = idx
            .query(&q(&[1.0, 0.0]), 3)
            .unwrap()
            .into_iter()
            .map(|h| h.entry_id)
            .collect();
        assert_eq!(ids, ["a", "b", "c"]);
    }

    #[test]
    fn query_errors() {
        let idx = StoreIndex::build(three(), EngineKind::Exact).unwrap();
        assert!(matches!(
            idx.query(&q(&[1.0, 0.0, 0.0]), 1),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(matches!(
            idx.query(&q(&[0.0, 0.0]), 1),
            Err(Error::ZeroVector)
        ));
        assert!(matches!(
            idx.query(&q(&[1.0, 0.0]), 0),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn hnsw_params_validation() {
        let bad = [
            HnswParams {
                m: 1,
                ..Default::default()
            },
            HnswParams {
                ef_construction: 8,
                ..Default::default()
            },
            HnswParams {
                ef_search: 0,
                ..Default::default()
            },
        ];
        for p in bad {
            assert!(StoreIndex::build(three(), EngineKind::Hnsw(p)).is_err());
        }
    }

    #[test]
    fn index_is_shareable() {
        fn assert_sync<T: Send + Sync>() {}
        assert_sync::<StoreIndex>();
    }
}
