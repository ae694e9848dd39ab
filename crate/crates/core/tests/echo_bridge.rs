use std::time::Instant;

use vrag_core::eval::{hit_labels, prediction_metrics, topk_retrieval_accuracy, Granularity};
use vrag_core::llm::{MockBackend, MockBehavior};
use vrag_core::pipeline::{Pipeline, PipelineConfig, QueryInput};
use vrag_core::synthetic::{category_clusters, ClusterSpec};
use vrag_core::{EngineKind, HnswParams, StoreIndex, Taxonomy};

fn bridge(kind: EngineKind) -> (f64, f64) {
    let taxonomy = Taxonomy::default();
    let (entries, queries) = category_clusters(&taxonomy, &ClusterSpec::default());
    assert_eq!(entries.len(), 6 * 50);
    let index = StoreIndex::build(entries, kind).unwrap();
    let pipeline = Pipeline::new(
        &index,
        MockBackend::new(MockBehavior::EchoFirstContextSpecies),
        &taxonomy,
        PipelineConfig::default(),
    )
    .unwrap();
    let inputs: Vec<QueryInput> = queries
        .iter()
        .map(|q| QueryInput {
            embedding: &q.embedding,
            image_ref: None,
        })
        .collect();
    let predictions = pipeline.classify_batch(&inputs).unwrap();

    let truths: Vec<_> = queries.iter().map(|q| q.label.clone().unwrap()).collect();
    let hits: Vec<_> = predictions
        .iter()
        .map(|p| hit_labels(&index, &p.hits).unwrap())
        .collect();
    let retrieval = topk_retrieval_accuracy(&hits, &truths, 1, Granularity::Category).unwrap();
    let preds: Vec<_> = predictions.iter().map(|p| p.category.clone()).collect();
    let cats: Vec<_> = truths.iter().map(|l| l.category.clone()).collect();
    let final_top1 = prediction_metrics(&preds, &cats, &taxonomy)
        .unwrap()
        .final_top1;
    (final_top1, retrieval)
}

#[test]
fn echo_mock_final_equals_retrieval_top1() {
    let start = Instant::now();
    for kind in [EngineKind::Exact, EngineKind::Hnsw(HnswParams::default())] {
        let (final_top1, retrieval) = bridge(kind);
        assert_eq!(final_top1, retrieval);
        assert!(final_top1 >= 0.99, "{final_top1}");
    }
    assert!(start.elapsed().as_secs() < 60);
}
