//! Seeded synthetic data: separable per-category clusters for end-to-end
//! pipeline runs, and Gaussian mixtures for index benchmarks.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::Deserialize;

use crate::kb::QueryRecord;
use crate::model::{EmbeddingVector, KnowledgeEntry, Label};
use crate::taxonomy::Taxonomy;

#[derive(Deserialize)]
struct DescriptionFile {
    species: BTreeMap<String, String>,
}

/// Built-in species descriptions shipped with the crate.
pub fn builtin_descriptions() -> &'static BTreeMap<String, String> {
    static CELL: OnceLock<BTreeMap<String, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let file: DescriptionFile = serde_json::from_str(include_str!("../data/descriptions.json"))
            .expect("bundled descriptions parse");
        file.species
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClusterSpec {
    pub dim: usize,
    pub per_class: usize,
    pub queries_per_class: usize,
    pub sigma: f64,
    pub seed: u64,
}

impl Default for ClusterSpec {
    fn default() -> Self {
        Self {
            dim: 64,
            per_class: 50,
            queries_per_class: 50,
            sigma: 0.05,
            seed: 42,
        }
    }
}

fn slug(s: &str) -> String {
    s.to_lowercase().replace(' ', "-")
}

/// One cluster per taxonomy category, centred on orthogonal basis vectors
/// with isotropic noise `sigma`. Species cycle through each category's
/// list. Returns the store entries and a labeled query set drawn from the
/// same clusters.
pub fn category_clusters(
    taxonomy: &Taxonomy,
    spec: &ClusterSpec,
) -> (Vec<KnowledgeEntry>, Vec<QueryRecord>) {
    assert!(
        spec.dim >= taxonomy.category_count(),
        "need dim >= number of categories for orthogonal centroids"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.sigma).expect("sigma is finite and non-negative");
    let descriptions = builtin_descriptions();

    let mut entries = Vec::new();
    let mut queries = Vec::new();
    for (c, category) in taxonomy.categories().enumerate() {
        let species = taxonomy.species_of(category).unwrap_or_default();
        let sample = |rng: &mut ChaCha8Rng| -> EmbeddingVector {
            let v: Vec<f32> = (0..spec.dim)
                .map(|d| {
                    let centre = if d == c { 1.0 } else { 0.0 };
                    (centre + noise.sample(rng)) as f32
                })
                .collect();
            EmbeddingVector::new(v).expect("finite")
        };
        for i in 0..spec.per_class {
            let sp = &species[i % species.len()];
            entries.push(KnowledgeEntry {
                id: format!("kb-{}-{i:03}", slug(category)),
                species: sp.clone(),
                category: category.to_string(),
                description: descriptions
                    .get(sp)
                    .cloned()
                    .unwrap_or_else(|| format!("Reference exemplar of {sp} ({category}).")),
                embedding: sample(&mut rng),
            });
        }
        for i in 0..spec.queries_per_class {
            let sp = &species[i % species.len()];
            queries.push(QueryRecord {
                id: format!("q-{}-{i:03}", slug(category)),
                label: Some(Label {
                    category: category.to_string(),
                    species: sp.clone(),
                }),
                embedding: sample(&mut rng),
            });
        }
    }
    (entries, queries)
}

/// `n` draws from a mixture of `clusters` Gaussians in `dim` dimensions.
/// Centroids are standard normal; members add `spread`-scaled noise.
pub fn gaussian_mixture(
    rng: &mut impl Rng,
    centroids: &[Vec<f32>],
    n: usize,
    spread: f32,
) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| {
            let c = &centroids[rng.random_range(0..centroids.len())];
            c.iter()
                .map(|x| x + spread * rng.sample::<f32, _>(StandardNormal))
                .collect()
        })
        .collect()
}

pub fn standard_normal_vectors(rng: &mut impl Rng, n: usize, dim: usize) -> Vec<Vec<f32>> {
    (0..n)
        .map(|_| {
            (0..dim)
                .map(|_| rng.sample::<f32, _>(StandardNormal))
                .collect()
        })
        .collect()
}
