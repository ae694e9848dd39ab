use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{self, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use vrag_core::eval::{
    hit_labels, prediction_metrics, report_emit, topk_curve, EvalReport, Granularity, RunMetadata,
    CSV_FILE, REPORT_FILE,
};
use vrag_core::kb::{self, EmbeddingMatrix, QueryRecord, StorePaths};
use vrag_core::llm::{self, MockBehavior, ServerOptions};
use vrag_core::pca::{pca_fit, scatter_emit, ScatterPoint, Split, COORDS_FILE, SVG_FILE};
use vrag_core::pipeline::prompt::PromptMode;
use vrag_core::pipeline::{Pipeline, Prediction, QueryInput};
use vrag_core::synthetic::{category_clusters, ClusterSpec};
use vrag_core::{EmbeddingVector, Label, RetrievalHit, StoreIndex};

use crate::config::{config_error, RunConfig};

macro_rules! out {
    ($($arg:tt)*) => {
        writeln!(io::stdout().lock(), $($arg)*)?
    };
}

pub const PREDICTIONS_FILE: &str = "predictions.jsonl";
pub const RUN_METADATA_FILE: &str = "run_metadata.json";
pub const INDEX_FILE: &str = "index.json";
pub const HITS_FILE: &str = "hits.jsonl";
pub const PCA_FILE: &str = "pca.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HitRecord {
    pub entry_id: String,
    pub similarity: f64,
}

/// One line of `predictions.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PredictionRecord {
    pub id: String,
    pub mode: PromptMode,
    pub raw_text: String,
    pub category: Option<String>,
    pub species: Option<String>,
    pub hits: Vec<HitRecord>,
}

impl PredictionRecord {
    fn new(id: String, p: Prediction) -> Self {
        Self {
            id,
            mode: p.mode,
            raw_text: p.raw_text,
            category: p.category,
            species: p.species,
            hits: p
                .hits
                .into_iter()
                .map(|h| HitRecord {
                    entry_id: h.entry_id,
                    similarity: h.similarity,
                })
                .collect(),
        }
    }

    fn retrieval_hits(&self) -> Vec<RetrievalHit> {
        self.hits
            .iter()
            .enumerate()
            .map(|(i, h)| RetrievalHit {
                entry_id: h.entry_id.clone(),
                similarity: h.similarity,
                rank: i + 1,
            })
            .collect()
    }
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut out = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn read_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let text = fs::read_to_string(path)
        .map_err(vrag_core::Error::Io)
        .with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, line)| {
            serde_json::from_str(line).map_err(|e| {
                vrag_core::Error::Format(format!("{} line {}: {e}", path.display(), i + 1)).into()
            })
        })
        .collect()
}

fn write_run_metadata(
    dir: &Path,
    subcommand: &str,
    cfg: &RunConfig,
    details: serde_json::Value,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = json!({
        "subcommand": subcommand,
        "tool_version": env!("CARGO_PKG_VERSION"),
        "config": cfg,
        "seeds": { "index": cfg.seed },
        "details": details,
    });
    let mut text = serde_json::to_string_pretty(&meta)?;
    text.push('\n');
    fs::write(dir.join(RUN_METADATA_FILE), text)?;
    Ok(())
}

fn load_index(cfg: &RunConfig) -> Result<StoreIndex> {
    let dir = cfg.require_store()?;
    let entries = kb::load(&StorePaths::in_dir(dir))
        .with_context(|| format!("loading store {}", dir.display()))?;
    log::info!("loaded {} entries from {}", entries.len(), dir.display());
    Ok(StoreIndex::build(entries, cfg.engine_kind())?)
}

fn load_queries(cfg: &RunConfig) -> Result<Vec<QueryRecord>> {
    let taxonomy = cfg.taxonomy()?;
    let dir = cfg.require_queries()?;
    kb::load_queries(&StorePaths::in_dir(dir), &taxonomy)
        .with_context(|| format!("loading query set {}", dir.display()))
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = ClusterSpec::default().dim)]
    pub dim: usize,
    #[arg(long, default_value_t = ClusterSpec::default().per_class)]
    pub per_class: usize,
    #[arg(long, default_value_t = ClusterSpec::default().queries_per_class)]
    pub queries_per_class: usize,
    /// Cluster noise standard deviation around orthogonal centroids.
    #[arg(long, default_value_t = ClusterSpec::default().sigma)]
    pub sigma: f64,
}

/// Writes `raw/` (store input), `queries/` and `taxonomy.json` under the
/// output directory.
pub fn synth(cfg: &RunConfig, args: &SynthArgs) -> Result<()> {
    let out = cfg.require_out()?;
    let taxonomy = cfg.taxonomy()?;
    if args.dim < taxonomy.category_count() || args.per_class == 0 || args.queries_per_class == 0 {
        return Err(vrag_core::Error::InvalidParams(format!(
            "need dim >= {} and non-zero class sizes",
            taxonomy.category_count()
        ))
        .into());
    }
    let spec = ClusterSpec {
        dim: args.dim,
        per_class: args.per_class,
        queries_per_class: args.queries_per_class,
        sigma: args.sigma,
        seed: cfg.seed,
    };
    let (entries, queries) = category_clusters(&taxonomy, &spec);
    for sub in ["raw", "queries"] {
        fs::create_dir_all(out.join(sub))?;
    }
    kb::persist(&entries, &StorePaths::in_dir(&out.join("raw")))?;
    kb::persist_queries(&queries, &StorePaths::in_dir(&out.join("queries")))?;
    fs::write(out.join("taxonomy.json"), taxonomy.to_json())?;
    write_run_metadata(
        out,
        "synth",
        cfg,
        json!({ "spec": { "dim": spec.dim, "per_class": spec.per_class,
            "queries_per_class": spec.queries_per_class, "sigma": spec.sigma },
            "entries": entries.len(), "queries": queries.len() }),
    )?;
    out!(
        "wrote {} store entries and {} queries to {}",
        entries.len(),
        queries.len(),
        out.display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Raw embedding file to ingest.
    #[arg(long)]
    pub embeddings: PathBuf,
    /// Metadata JSONL aligned with the embedding rows.
    #[arg(long)]
    pub metadata: PathBuf,
}

pub fn ingest(cfg: &RunConfig, args: &IngestArgs) -> Result<()> {
    let dest = cfg.require_store()?;
    let taxonomy = cfg.taxonomy()?;
    let entries = kb::ingest(
        &StorePaths::new(&args.embeddings, &args.metadata),
        &taxonomy,
    )?;
    let index = StoreIndex::build(entries.clone(), vrag_core::EngineKind::Exact)?;
    fs::create_dir_all(dest)?;
    kb::persist(&entries, &StorePaths::in_dir(dest))?;
    write_run_metadata(
        dest,
        "ingest",
        cfg,
        json!({ "source": { "embeddings": args.embeddings, "metadata": args.metadata },
            "entries": index.len(), "dim": index.dim() }),
    )?;
    out!(
        "ingested {} entries (dim {}) into {}",
        index.len(),
        index.dim(),
        dest.display()
    );
    Ok(())
}

pub fn index(cfg: &RunConfig) -> Result<()> {
    let index = load_index(cfg)?;
    let summary = json!({
        "engine": cfg.engine_kind(),
        "entries": index.len(),
        "dim": index.dim(),
        "hnsw": index.hnsw_stats(),
    });
    let text = serde_json::to_string_pretty(&summary)? + "\n";
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out)?;
        fs::write(out.join(INDEX_FILE), &text)?;
        write_run_metadata(out, "index", cfg, json!({ "outputs": [INDEX_FILE] }))?;
    }
    io::stdout().lock().write_all(text.as_bytes())?;
    Ok(())
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    /// Comma-separated query vector.
    #[arg(
        long,
        conflicts_with = "embeddings",
        value_delimiter = ',',
        allow_hyphen_values = true
    )]
    pub vector: Option<Vec<f32>>,
    /// Embedding file holding the query.
    #[arg(long, requires = "row")]
    pub embeddings: Option<PathBuf>,
    /// Row of `--embeddings` to use.
    #[arg(long)]
    pub row: Option<usize>,
}

pub fn query(cfg: &RunConfig, args: &QueryArgs) -> Result<()> {
    let q = match (&args.vector, &args.embeddings, args.row) {
        (Some(v), _, _) => v.clone(),
        (None, Some(path), Some(row)) => {
            let m = EmbeddingMatrix::read(path)
                .with_context(|| format!("reading {}", path.display()))?;
            if row >= m.count() {
                return Err(vrag_core::Error::InvalidParams(format!(
                    "row {row} out of range ({} rows)",
                    m.count()
                ))
                .into());
            }
            m.row(row).to_vec()
        }
        _ => return Err(config_error("pass --vector or --embeddings with --row")),
    };
    let index = load_index(cfg)?;
    let hits = index.query(&EmbeddingVector::new(q)?, cfg.k)?;
    let rows: Vec<serde_json::Value> = hits
        .iter()
        .map(|h| {
            let e = index
                .entry(&h.entry_id)
                .expect("hit ids come from the index");
            json!({ "rank": h.rank, "entry_id": h.entry_id, "similarity": h.similarity,
                "species": e.species, "category": e.category })
        })
        .collect();
    let mut stdout = io::stdout().lock();
    for r in &rows {
        writeln!(stdout, "{r}")?;
    }
    if let Some(out) = &cfg.out {
        fs::create_dir_all(out)?;
        write_jsonl(&out.join(HITS_FILE), &rows)?;
        write_run_metadata(out, "query", cfg, json!({ "outputs": [HITS_FILE] }))?;
    }
    Ok(())
}

pub fn classify(cfg: &RunConfig) -> Result<()> {
    let out = cfg.require_out()?;
    let taxonomy = cfg.taxonomy()?;
    let index = load_index(cfg)?;
    let queries = load_queries(cfg)?;
    let pipeline_cfg = cfg.pipeline_config()?;
    let template_version = pipeline_cfg.template.version().to_string();
    let backend = cfg.backend()?;
    let pipeline = Pipeline::new(&index, backend, &taxonomy, pipeline_cfg)?;

    let inputs: Vec<QueryInput> = queries
        .iter()
        .map(|q| QueryInput {
            embedding: &q.embedding,
            image_ref: Some(q.id.clone()),
        })
        .collect();
    let predictions = pipeline.classify_batch(&inputs)?;
    let records: Vec<PredictionRecord> = queries
        .iter()
        .zip(predictions)
        .map(|(q, p)| PredictionRecord::new(q.id.clone(), p))
        .collect();
    let unresolved = records.iter().filter(|r| r.category.is_none()).count();

    fs::create_dir_all(out)?;
    write_jsonl(&out.join(PREDICTIONS_FILE), &records)?;
    write_run_metadata(
        out,
        "classify",
        cfg,
        json!({ "template_version": template_version, "queries": records.len(),
            "unresolved": unresolved, "outputs": [PREDICTIONS_FILE] }),
    )?;
    out!(
        "classified {} queries ({} unresolved) -> {}",
        records.len(),
        unresolved,
        out.join(PREDICTIONS_FILE).display()
    );
    Ok(())
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Predictions JSONL from `classify`.
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Score the retrieval step (top-1..k) instead of final answers. Uses
    /// the hits recorded in `--predictions` when given, otherwise queries
    /// the store.
    #[arg(long)]
    pub retrieval: bool,
}

fn truths_by_id(queries: &[QueryRecord]) -> Result<HashMap<&str, &Label>> {
    queries
        .iter()
        .map(|q| {
            q.label.as_ref().map(|l| (q.id.as_str(), l)).ok_or_else(|| {
                vrag_core::Error::Format(format!("query `{}` has no label", q.id)).into()
            })
        })
        .collect()
}

fn aligned_truths(
    records: &[PredictionRecord],
    truths: &HashMap<&str, &Label>,
) -> Result<Vec<Label>> {
    if records.len() != truths.len() {
        return Err(vrag_core::Error::LengthMismatch {
            predictions: records.len(),
            truths: truths.len(),
        }
        .into());
    }
    records
        .iter()
        .map(|r| {
            truths
                .get(r.id.as_str())
                .map(|l| (*l).clone())
                .ok_or_else(|| {
                    vrag_core::Error::Format(format!("prediction `{}` matches no query", r.id))
                        .into()
                })
        })
        .collect()
}

fn run_metadata(cfg: &RunConfig, mode: Option<PromptMode>) -> RunMetadata {
    RunMetadata {
        mode: mode.map(|m| m.as_str().to_string()),
        k: Some(cfg.k),
        engine: Some(cfg.engine_name().to_string()),
        seeds: BTreeMap::from([("index".to_string(), cfg.seed)]),
    }
}

fn fill_topk(
    report: &mut EvalReport,
    index: &StoreIndex,
    hits: &[Vec<RetrievalHit>],
    truths: &[Label],
    k: usize,
) -> Result<()> {
    let labels = hits
        .iter()
        .map(|h| hit_labels(index, h))
        .collect::<vrag_core::Result<Vec<_>>>()?;
    report.topk_category = topk_curve(&labels, truths, k, Granularity::Category)?;
    report.topk_species = topk_curve(&labels, truths, k, Granularity::Species)?;
    Ok(())
}

pub fn evaluate(cfg: &RunConfig, args: &EvaluateArgs) -> Result<()> {
    let out = cfg.require_out()?;
    let taxonomy = cfg.taxonomy()?;
    let queries = load_queries(cfg)?;
    let truths = truths_by_id(&queries)?;
    let records = args
        .predictions
        .as_deref()
        .map(read_predictions)
        .transpose()?;
    let mode = records.as_ref().and_then(|r| r.first().map(|p| p.mode));
    if let Some(rs) = &records {
        if rs.iter().any(|r| Some(r.mode) != mode) {
            return Err(vrag_core::Error::Format("predictions mix several modes".into()).into());
        }
    }

    let report = if args.retrieval {
        let index = load_index(cfg)?;
        let (hits, labels) = match &records {
            Some(rs) => (
                rs.iter()
                    .map(PredictionRecord::retrieval_hits)
                    .collect::<Vec<_>>(),
                aligned_truths(rs, &truths)?,
            ),
            None => {
                let hits = queries
                    .iter()
                    .map(|q| index.query(&q.embedding, cfg.k))
                    .collect::<vrag_core::Result<Vec<_>>>()?;
                let labels = queries
                    .iter()
                    .map(|q| q.label.clone().expect("checked above"))
                    .collect();
                (hits, labels)
            }
        };
        let mut report = EvalReport::new(labels.len(), run_metadata(cfg, mode));
        fill_topk(&mut report, &index, &hits, &labels, cfg.k)?;
        report
    } else {
        let rs = records
            .ok_or_else(|| config_error("pass --predictions, or --retrieval to score retrieval"))?;
        let labels = aligned_truths(&rs, &truths)?;
        let preds: Vec<Option<String>> = rs.iter().map(|r| r.category.clone()).collect();
        let cats: Vec<String> = labels.iter().map(|l| l.category.clone()).collect();
        let metrics = prediction_metrics(&preds, &cats, &taxonomy)?;
        let mut report =
            EvalReport::new(labels.len(), run_metadata(cfg, mode)).with_predictions(metrics);
        if cfg.store.is_some() && rs.iter().all(|r| !r.hits.is_empty()) {
            let index = load_index(cfg)?;
            let hits: Vec<_> = rs.iter().map(PredictionRecord::retrieval_hits).collect();
            fill_topk(&mut report, &index, &hits, &labels, cfg.k)?;
        }
        report
    };

    report_emit(&report, out)?;
    write_run_metadata(
        out,
        "evaluate",
        cfg,
        json!({ "retrieval": args.retrieval, "predictions": args.predictions,
            "outputs": [REPORT_FILE, CSV_FILE] }),
    )?;
    if let Some(f) = report.final_top1 {
        out!("final top-1: {f:.4}");
    }
    for (k, acc) in &report.topk_category {
        out!(
            "retrieval top-{k}: category {acc:.4}, species {:.4}",
            report.topk_species[k]
        );
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FitOn {
    Union,
    Store,
}

#[derive(Debug, Args)]
pub struct VisualizeArgs {
    /// Data the projection is fitted on; both sets are always plotted.
    #[arg(long, value_enum, default_value = "union")]
    pub fit: FitOn,
}

pub fn visualize(cfg: &RunConfig, args: &VisualizeArgs) -> Result<()> {
    let out = cfg.require_out()?;
    let taxonomy = cfg.taxonomy()?;
    let dir = cfg.require_store()?;
    let store = kb::load(&StorePaths::in_dir(dir))
        .with_context(|| format!("loading store {}", dir.display()))?;
    let queries = match &cfg.queries {
        Some(_) => load_queries(cfg)?,
        None => Vec::new(),
    };
    let store_vecs: Vec<&[f32]> = store.iter().map(|e| e.embedding.as_slice()).collect();
    let query_vecs: Vec<&[f32]> = queries.iter().map(|q| q.embedding.as_slice()).collect();
    let fit_data: Vec<&[f32]> = match args.fit {
        FitOn::Store => store_vecs.clone(),
        FitOn::Union => store_vecs.iter().chain(&query_vecs).copied().collect(),
    };
    let model = pca_fit(&fit_data, 2)?;

    let mut points = Vec::with_capacity(store.len() + queries.len());
    for (e, c) in store.iter().zip(model.transform(&store_vecs)?) {
        points.push(ScatterPoint {
            id: e.id.clone(),
            x: c[0],
            y: c[1],
            category: e.category.clone(),
            split: Split::Store,
        });
    }
    for (q, c) in queries.iter().zip(model.transform(&query_vecs)?) {
        points.push(ScatterPoint {
            id: q.id.clone(),
            x: c[0],
            y: c[1],
            category: q
                .label
                .as_ref()
                .map_or_else(|| "unlabeled".to_string(), |l| l.category.clone()),
            split: Split::Test,
        });
    }
    let categories: Vec<String> = taxonomy.categories().map(str::to_string).collect();
    scatter_emit(&points, &categories, out)?;
    let pca = json!({ "fit": format!("{:?}", args.fit).to_lowercase(),
        "explained_variance": model.explained_variance, "mean": model.mean, "components": model.components });
    fs::write(
        out.join(PCA_FILE),
        serde_json::to_string_pretty(&pca)? + "\n",
    )?;
    write_run_metadata(
        out,
        "visualize",
        cfg,
        json!({ "points": points.len(), "outputs": [COORDS_FILE, SVG_FILE, PCA_FILE] }),
    )?;
    out!(
        "projected {} points -> {}",
        points.len(),
        out.join(SVG_FILE).display()
    );
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// `echo` or `fixed:<text>`.
    #[arg(long, default_value = "echo")]
    pub behavior: String,
    /// Answer this many requests with 503 first.
    #[arg(long, default_value_t = 0)]
    pub fail_first: usize,
    /// Delay every answer by this many milliseconds.
    #[arg(long, default_value_t = 0)]
    pub delay_ms: u64,
}

pub fn mock_serve(args: &ServeArgs) -> Result<()> {
    let behavior = MockBehavior::parse(&args.behavior)?;
    let options = ServerOptions {
        fail_first: args.fail_first,
        delay: (args.delay_ms > 0).then(|| Duration::from_millis(args.delay_ms)),
    };
    llm::serve(args.addr, behavior, options, |addr| {
        println!("listening on http://{addr}");
        let _ = io::stdout().flush();
    })?;
    Ok(())
}
