//! Seeded fixtures shared by the retrieval benchmarks.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use vrag_core::synthetic::{gaussian_mixture, standard_normal_vectors};
use vrag_core::{EmbeddingVector, EngineKind, KnowledgeEntry, StoreIndex};

pub struct Fixture {
    pub entries: Vec<KnowledgeEntry>,
    pub queries: Vec<EmbeddingVector>,
}

/// `n` store vectors and `n_queries` queries from a 100-centroid Gaussian
/// mixture in `dim` dimensions.
pub fn mixture(n: usize, n_queries: usize, dim: usize, seed: u64) -> Fixture {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centroids = standard_normal_vectors(&mut rng, 100, dim);
    let entries = gaussian_mixture(&mut rng, &centroids, n, 1.0)
        .into_iter()
        .enumerate()
        .map(|(i, v)| KnowledgeEntry {
            id: format!("v{i:06}"),
            species: "Opah".into(),
            category: "Opah".into(),
            description: String::new(),
            embedding: EmbeddingVector::new(v).expect("finite"),
        })
        .collect();
    let queries = gaussian_mixture(&mut rng, &centroids, n_queries, 1.0)
        .into_iter()
        .map(|v| EmbeddingVector::new(v).expect("finite"))
        .collect();
    Fixture { entries, queries }
}

pub fn build(fixture: &Fixture, kind: EngineKind) -> StoreIndex {
    StoreIndex::build(fixture.entries.clone(), kind).expect("fixture builds")
}
