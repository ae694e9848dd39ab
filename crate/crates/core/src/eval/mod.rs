//! Retrieval and classification metrics.
//!
//! Top-k retrieval accuracy counts a query as correct when any of its first
//! `k` hits carries the true label at the requested granularity. Prediction
//! metrics build a truth x predicted confusion matrix over the taxonomy's
//! categories with an extra `Unresolved` column; an unresolved answer is
//! always wrong and never a false positive for a real class.

mod report;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Label, RetrievalHit};
use crate::store::StoreIndex;
use crate::taxonomy::Taxonomy;

pub use report::{report_emit, EvalReport, RunMetadata, CSV_FILE, REPORT_FILE, SCHEMA_VERSION};

pub const UNRESOLVED: &str = "Unresolved";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Granularity {
    Category,
    Species,
}

impl Granularity {
    fn pick(self, label: &Label) -> &str {
        match self {
            Granularity::Category => &label.category,
            Granularity::Species => &label.species,
        }
    }
}

/// Labels of each hit, in rank order.
pub fn hit_labels(index: &StoreIndex, hits: &[RetrievalHit]) -> Result<Vec<Label>> {
    hits.iter()
        .map(|h| {
            index
                .entry(&h.entry_id)
                .map(|e| Label {
                    category: e.category.clone(),
                    species: e.species.clone(),
                })
                .ok_or_else(|| {
                    Error::Format(format!("hit references unknown entry `{}`", h.entry_id))
                })
        })
        .collect()
}

fn check_aligned(n_hits: usize, n_truths: usize) -> Result<()> {
    if n_truths == 0 {
        return Err(Error::EmptyQuerySet);
    }
    if n_hits != n_truths {
        return Err(Error::LengthMismatch {
            predictions: n_hits,
            truths: n_truths,
        });
    }
    Ok(())
}

/// Fraction of queries whose first `min(k, hits)` hits contain the truth.
pub fn topk_retrieval_accuracy(
    hits_per_query: &[Vec<Label>],
    truths: &[Label],
    k: usize,
    granularity: Granularity,
) -> Result<f64> {
    check_aligned(hits_per_query.len(), truths.len())?;
    if k == 0 {
        return Err(Error::InvalidParams("k must be >= 1".into()));
    }
    let correct = hits_per_query
        .iter()
        .zip(truths)
        .filter(|(hits, truth)| {
            let want = granularity.pick(truth);
            hits.iter().take(k).any(|h| granularity.pick(h) == want)
        })
        .count();
    Ok(correct as f64 / truths.len() as f64)
}

/// Accuracy for every `k` in `1..=max_k`.
pub fn topk_curve(
    hits_per_query: &[Vec<Label>],
    truths: &[Label],
    max_k: usize,
    granularity: Granularity,
) -> Result<BTreeMap<usize, f64>> {
    (1..=max_k)
        .map(|k| topk_retrieval_accuracy(hits_per_query, truths, k, granularity).map(|a| (k, a)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    /// `None` when the class was never predicted.
    pub precision: Option<f64>,
    /// `None` when the class never occurs in the truths.
    pub recall: Option<f64>,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    /// Row labels (truth).
    pub classes: Vec<String>,
    /// Column labels (prediction): the classes followed by `Unresolved`.
    pub columns: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionMetrics {
    pub final_top1: f64,
    pub per_class: Vec<ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub n_samples: usize,
}

impl PredictionMetrics {
    /// Pooled true positives over pooled support.
    pub fn micro_recall(&self) -> f64 {
        let tp: usize = (0..self.confusion.classes.len())
            .map(|i| self.confusion.counts[i][i])
            .sum();
        tp as f64 / self.n_samples as f64
    }
}

/// Category-level metrics for single-answer predictions. `None` predictions
/// are unresolved.
pub fn prediction_metrics(
    predictions: &[Option<String>],
    truths: &[String],
    taxonomy: &Taxonomy,
) -> Result<PredictionMetrics> {
    check_aligned(predictions.len(), truths.len())?;
    let classes: Vec<String> = taxonomy.categories().map(str::to_string).collect();
    let n = classes.len();
    let mut counts = vec![vec![0usize; n + 1]; n];
    for (pred, truth) in predictions.iter().zip(truths) {
        let row = taxonomy
            .category_index(truth)
            .ok_or_else(|| Error::TaxonomyViolation(format!("unknown truth category `{truth}`")))?;
        let col = match pred {
            None => n,
            Some(p) => taxonomy.category_index(p).ok_or_else(|| {
                Error::TaxonomyViolation(format!("unknown predicted category `{p}`"))
            })?,
        };
        counts[row][col] += 1;
    }

    let per_class = classes
        .iter()
        .enumerate()
        .map(|(i, class)| {
            let tp = counts[i][i];
            let support: usize = counts[i].iter().sum();
            let predicted: usize = counts.iter().map(|r| r[i]).sum();
            ClassMetrics {
                class: class.clone(),
                precision: (predicted > 0).then(|| tp as f64 / predicted as f64),
                recall: (support > 0).then(|| tp as f64 / support as f64),
                support,
            }
        })
        .collect();
    let correct: usize = (0..n).map(|i| counts[i][i]).sum();

    let mut columns = classes.clone();
    columns.push(UNRESOLVED.to_string());
    Ok(PredictionMetrics {
        final_top1: correct as f64 / truths.len() as f64,
        per_class,
        confusion: ConfusionMatrix {
            classes,
            columns,
            counts,
        },
        n_samples: truths.len(),
    })
}
