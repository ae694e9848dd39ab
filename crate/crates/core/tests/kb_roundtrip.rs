use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use vrag_core::kb::{self, EmbeddingMatrix, MetadataRecord, StorePaths, HEADER_LEN};
use vrag_core::{EmbeddingVector, KnowledgeEntry, Taxonomy};

fn fixtures() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

fn random_entries(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<KnowledgeEntry> {
    let taxonomy = Taxonomy::default();
    let species: Vec<(String, String)> = taxonomy
        .all_species()
        .map(|(s, c)| (s.to_string(), c.to_string()))
        .collect();
    (0..n)
        .map(|i| {
            let (sp, cat) = &species[rng.random_range(0..species.len())];
            // Arbitrary bit patterns, restricted to finite values.
            let embedding: Vec<f32> = (0..dim)
                .map(|_| loop {
                    let x = f32::from_bits(rng.random());
                    if x.is_finite() {
                        break x;
                    }
                })
                .collect();
            KnowledgeEntry {
                id: format!("e{i:04}"),
                species: sp.clone(),
                category: cat.clone(),
                description: format!("Entry {i}: Pez espada, 旗鱼, Ōnaga \"quoted\" \\ tab\t end"),
                embedding: EmbeddingVector::new(embedding).unwrap(),
            }
        })
        .collect()
}

#[test]
fn persist_load_is_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let entries = random_entries(&mut rng, 100, 24);
    let dir = tempfile::tempdir().unwrap();
    let paths = StorePaths::in_dir(dir.path());
    kb::persist(&entries, &paths).unwrap();
    let back = kb::load(&paths).unwrap();
    assert_eq!(back.len(), entries.len());
    for (a, b) in entries.iter().zip(&back) {
        let bits = |e: &KnowledgeEntry| {
            e.embedding
                .as_slice()
                .iter()
                .map(|x| x.to_bits())
                .collect::<Vec<_>>()
        };
        assert_eq!(bits(a), bits(b));
        assert_eq!(
            (&a.id, &a.species, &a.category, &a.description),
            (&b.id, &b.species, &b.category, &b.description)
        );
    }
    let bytes = fs::read(&paths.embeddings).unwrap();
    assert_eq!(bytes.len(), HEADER_LEN + 4 * 24 * 100);
    kb::persist(&back, &paths).unwrap();
    assert_eq!(fs::read(&paths.embeddings).unwrap(), bytes);
}

#[test]
fn metadata_preserves_non_ascii() {
    let records = vec![MetadataRecord {
        id: "ñ-1".into(),
        species: Some("Swordfish".into()),
        category: Some("Billfish".into()),
        description: Some("Espadon (Xiphias gladius) – 剑鱼, größer als 3 m".into()),
    }];
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("m.jsonl");
    kb::write_metadata(&p, &records).unwrap();
    assert_eq!(kb::read_metadata(&p).unwrap(), records);
}

#[test]
fn truncated_file_is_format_error() {
    let m = EmbeddingMatrix::new(3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
    let bytes = m.encode();
    for cut in [0, 5, HEADER_LEN - 1, HEADER_LEN, bytes.len() - 1] {
        let err = EmbeddingMatrix::decode(&bytes[..cut]).unwrap_err();
        assert_eq!(err.kind(), "FormatError", "cut at {cut}");
    }
    assert_eq!(EmbeddingMatrix::decode(&bytes).unwrap(), m);
}

#[test]
fn ingest_normalizes_and_preserves_order() {
    let entries = kb::ingest(
        &StorePaths::in_dir(&fixtures().join("valid")),
        &Taxonomy::default(),
    )
    .unwrap();
    assert_eq!(
        entries.iter().map(|e| e.id.as_str()).collect::<Vec<_>>(),
        ["a", "b"]
    );
    for e in &entries {
        assert!((e.embedding.norm() - 1.0).abs() < 1e-6);
    }
}

#[test]
fn malformed_fixtures_map_to_declared_errors() {
    let root = fixtures().join("malformed");
    let cases: BTreeMap<String, String> =
        serde_json::from_str(&fs::read_to_string(root.join("cases.json")).unwrap()).unwrap();
    let on_disk = fs::read_dir(&root)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().is_dir())
        .count();
    assert_eq!(on_disk, cases.len(), "every fixture directory is listed");
    let taxonomy = Taxonomy::default();
    for (name, kind) in &cases {
        let err = kb::ingest(&StorePaths::in_dir(&root.join(name)), &taxonomy).expect_err(name);
        assert_eq!(err.kind(), kind, "{name}: {err}");
    }
}

#[test]
fn missing_file_is_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = kb::ingest(&StorePaths::in_dir(dir.path()), &Taxonomy::default()).unwrap_err();
    assert_eq!(err.kind(), "IoError");
}
