//! Query embedding in, taxonomy label out.
//!
//! For retrieval-augmented runs the store supplies the top-`k` entries,
//! whose descriptions become prompt context; the backend's free-text answer
//! is then parsed into a category and species.

pub mod answer;
pub mod prompt;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::llm::{LlmBackend, LlmRequest, DEFAULT_MAX_TOKENS};
use crate::model::{EmbeddingVector, RetrievalHit};
use crate::store::{StoreIndex, DEFAULT_K};
use crate::taxonomy::Taxonomy;

pub use answer::{parse_answer, AnswerParser, ParsedAnswer};
pub use prompt::{assemble_prompt, PromptBundle, PromptMode, PromptTemplate, DEFAULT_QUESTION};

pub const DEFAULT_IN_FLIGHT: usize = 4;

/// A retrieved entry as shown to the model.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContextItem {
    pub species: String,
    pub category: String,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub mode: PromptMode,
    pub k: usize,
    pub question: String,
    pub template: PromptTemplate,
    pub max_tokens: u32,
    pub in_flight: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            mode: PromptMode::Rag,
            k: DEFAULT_K,
            question: DEFAULT_QUESTION.to_string(),
            template: PromptTemplate::default(),
            max_tokens: DEFAULT_MAX_TOKENS,
            in_flight: DEFAULT_IN_FLIGHT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub mode: PromptMode,
    pub raw_text: String,
    /// `None` means unresolved.
    pub category: Option<String>,
    pub species: Option<String>,
    /// Empty unless the mode is `Rag`.
    pub hits: Vec<RetrievalHit>,
    #[serde(skip)]
    pub prompt: String,
}

/// One item of a batch run.
#[derive(Debug, Clone)]
pub struct QueryInput<'a> {
    pub embedding: &'a EmbeddingVector,
    pub image_ref: Option<String>,
}

pub struct Pipeline<'a, B> {
    index: &'a StoreIndex,
    backend: B,
    taxonomy: &'a Taxonomy,
    parser: AnswerParser,
    config: PipelineConfig,
}

impl<'a, B: LlmBackend> Pipeline<'a, B> {
    pub fn new(
        index: &'a StoreIndex,
        backend: B,
        taxonomy: &'a Taxonomy,
        config: PipelineConfig,
    ) -> Result<Self> {
        if config.k == 0 {
            return Err(Error::InvalidParams("k must be >= 1".into()));
        }
        if config.in_flight == 0 {
            return Err(Error::InvalidParams("in-flight limit must be >= 1".into()));
        }
        Ok(Self {
            index,
            backend,
            taxonomy,
            parser: AnswerParser::new(taxonomy),
            config,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn backend(&self) -> &B {
        &self.backend
    }

    pub fn classify(&self, query: &EmbeddingVector, image_ref: Option<&str>) -> Result<Prediction> {
        let cfg = &self.config;
        let (hits, context) = if cfg.mode == PromptMode::Rag {
            let hits = self.index.query(query, cfg.k)?;
            let context = hits
                .iter()
                .map(|h| {
                    let e = self
                        .index
                        .entry(&h.entry_id)
                        .expect("hit ids come from the index");
                    ContextItem {
                        species: e.species.clone(),
                        category: e.category.clone(),
                        description: e.description.clone(),
                    }
                })
                .collect();
            (hits, context)
        } else {
            (Vec::new(), Vec::new())
        };

        let mut bundle = assemble_prompt(
            cfg.mode,
            &cfg.question,
            self.taxonomy,
            &context,
            &cfg.template,
        )?;
        bundle.image_ref = image_ref.map(str::to_string);
        let request = LlmRequest {
            prompt: bundle.text.clone(),
            image_ref: bundle.image_ref.clone(),
            max_tokens: cfg.max_tokens,
        };
        let response = self.backend.generate(&request)?;
        let parsed = self.parser.parse(&response.text);
        Ok(Prediction {
            mode: cfg.mode,
            raw_text: response.text,
            category: parsed.category,
            species: parsed.species,
            hits,
            prompt: bundle.text,
        })
    }

    /// Classify every input with at most `in_flight` concurrent backend
    /// calls. Output order matches input order; the first error in input
    /// order is returned.
    pub fn classify_batch(&self, inputs: &[QueryInput<'_>]) -> Result<Vec<Prediction>>
    where
        B: Sync,
    {
        let slots: Vec<Mutex<Option<Result<Prediction>>>> =
            inputs.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.in_flight.min(inputs.len()).max(1);
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some(input) = inputs.get(i) else { break };
                    let out = self.classify(input.embedding, input.image_ref.as_deref());
                    *slots[i].lock().expect("slot lock") = Some(out);
                });
            }
        });
        slots
            .into_iter()
            .map(|m| {
                m.into_inner()
                    .expect("slot lock")
                    .expect("every slot filled")
            })
            .collect()
    }
}

/// Single-shot classification without building a [`Pipeline`] by hand.
pub fn classify<B: LlmBackend>(
    index: &StoreIndex,
    backend: B,
    taxonomy: &Taxonomy,
    query: &EmbeddingVector,
    image_ref: Option<&str>,
    mode: PromptMode,
    k: usize,
) -> Result<Prediction> {
    let config = PipelineConfig {
        mode,
        k,
        ..PipelineConfig::default()
    };
    Pipeline::new(index, backend, taxonomy, config)?.classify(query, image_ref)
}

#[cfg(test)]
mod tests {
    use std::sync::atomic::AtomicUsize;
    use std::time::Duration;

    use super::*;
    use crate::llm::{LlmResponse, MockBackend, MockBehavior};
    use crate::model::KnowledgeEntry;
    use crate::store::EngineKind;
    use crate::synthetic::builtin_descriptions;

    fn store() -> StoreIndex {
        let mk = |id: &str, species: &str, category: &str, v: [f32; 2]| KnowledgeEntry {
            id: id.into(),
            species: species.into(),
            category: category.into(),
            description: builtin_descriptions()[species].clone(),
            embedding: EmbeddingVector::new(v.to_vec()).unwrap(),
        };
        StoreIndex::build(
            vec![
                mk("e1", "Albacore", "Tuna", [1.0, 0.0]),
                mk("e2", "Blue shark", "Shark", [0.0, 1.0]),
                mk("e3", "Opah", "Opah", [0.6, 0.8]),
            ],
            EngineKind::Exact,
        )
        .unwrap()
    }

    fn q(v: [f32; 2]) -> EmbeddingVector {
        EmbeddingVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn rag_echo_follows_top_hit() {
        let (idx, tax) = (store(), Taxonomy::default());
        let mock = MockBackend::new(MockBehavior::EchoFirstContextSpecies);
        for (v, cat) in [
            ([0.8, 0.6], "Opah"),
            ([1.0, 0.1], "Tuna"),
            ([0.1, 1.0], "Shark"),
        ] {
            let p = classify(&idx, &mock, &tax, &q(v), None, PromptMode::Rag, 3).unwrap();
            let top = idx.entry(&p.hits[0].entry_id).unwrap();
            assert_eq!(p.category.as_deref(), Some(cat));
            assert_eq!(p.category.as_deref(), Some(top.category.as_str()));
            assert_eq!(p.hits.len(), 3);
        }
    }

    #[test]
    fn raw_mode_fixed_text() {
        let (idx, tax) = (store(), Taxonomy::default());
        let mock = MockBackend::new(MockBehavior::FixedText("shark".into()));
        let p = classify(&idx, &mock, &tax, &q([1.0, 0.0]), None, PromptMode::Raw, 3).unwrap();
        assert_eq!(
            (p.category.as_deref(), p.species.as_deref()),
            (Some("Shark"), None)
        );
        assert!(p.hits.is_empty());
        assert_eq!(p.prompt, DEFAULT_QUESTION);
    }

    #[test]
    fn store_errors_propagate() {
        let (idx, tax) = (store(), Taxonomy::default());
        let mock = MockBackend::new(MockBehavior::EchoFirstContextSpecies);
        let bad = EmbeddingVector::new(vec![1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            classify(&idx, &mock, &tax, &bad, None, PromptMode::Rag, 3),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    /// Records the peak number of concurrent calls.
    struct Gauge {
        current: AtomicUsize,
        peak: AtomicUsize,
    }

    impl LlmBackend for Gauge {
        fn generate(&self, _: &LlmRequest) -> Result<LlmResponse> {
            let now = self.current.fetch_add(1, Ordering::SeqCst) + 1;
            self.peak.fetch_max(now, Ordering::SeqCst);
            std::thread::sleep(Duration::from_millis(5));
            self.current.fetch_sub(1, Ordering::SeqCst);
            Ok(LlmResponse {
                text: "tuna".into(),
            })
        }
    }

    #[test]
    fn batch_respects_in_flight_and_order() {
        let (idx, tax) = (store(), Taxonomy::default());
        let gauge = Gauge {
            current: AtomicUsize::new(0),
            peak: AtomicUsize::new(0),
        };
        let config = PipelineConfig {
            in_flight: 3,
            ..Default::default()
        };
        let pipeline = Pipeline::new(&idx, &gauge, &tax, config).unwrap();
        let vecs: Vec<_> = (0..24).map(|i| q([1.0, i as f32 / 10.0])).collect();
        let inputs: Vec<_> = vecs
            .iter()
            .map(|e| QueryInput {
                embedding: e,
                image_ref: None,
            })
            .collect();
        let preds = pipeline.classify_batch(&inputs).unwrap();
        assert_eq!(preds.len(), 24);
        assert!(gauge.peak.load(Ordering::SeqCst) <= 3);

        let echo = MockBackend::new(MockBehavior::EchoFirstContextSpecies);
        let p2 = Pipeline::new(&idx, echo, &tax, PipelineConfig::default()).unwrap();
        let batch = p2.classify_batch(&inputs).unwrap();
        for (input, got) in inputs.iter().zip(&batch) {
            assert_eq!(got, &p2.classify(input.embedding, None).unwrap());
        }
    }
}
