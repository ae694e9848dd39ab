//! Run configuration: an optional TOML file overlaid by command-line flags.
//!
//! ```toml
//! [store]
//! dir = "store"
//! queries = "queries"
//! taxonomy = "taxonomy.json"
//!
//! [index]
//! engine = "hnsw"
//! m = 16
//! ef_construction = 200
//! ef_search = 64
//! seed = 42
//!
//! [pipeline]
//! mode = "rag"
//! k = 3
//!
//! [llm]
//! endpoint = "http://127.0.0.1:8080"
//! timeout_ms = 60000
//! retries = 2
//!
//! [output]
//! dir = "out"
//! ```
//!
//! Relative paths in the file resolve against the file's directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use vrag_core::llm::{
    ClientConfig, HttpClient, LlmBackend, MockBackend, MockBehavior, DEFAULT_MAX_TOKENS,
    ENDPOINT_ENV,
};
use vrag_core::pipeline::prompt::{PromptMode, PromptTemplate, DEFAULT_QUESTION};
use vrag_core::pipeline::{PipelineConfig, DEFAULT_IN_FLIGHT};
use vrag_core::store::DEFAULT_K;
use vrag_core::{EngineKind, HnswParams, Taxonomy};

/// Missing or contradictory settings.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Hnsw,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct StoreSection {
    dir: Option<PathBuf>,
    queries: Option<PathBuf>,
    taxonomy: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct IndexSection {
    engine: Option<Engine>,
    m: Option<usize>,
    ef_construction: Option<usize>,
    ef_search: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct PipelineSection {
    mode: Option<String>,
    k: Option<usize>,
    template: Option<PathBuf>,
    question: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LlmSection {
    endpoint: Option<String>,
    mock: Option<String>,
    timeout_ms: Option<u64>,
    retries: Option<u32>,
    backoff_ms: Option<u64>,
    max_tokens: Option<u32>,
    in_flight: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct OutputSection {
    dir: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ConfigFile {
    store: StoreSection,
    index: IndexSection,
    pipeline: PipelineSection,
    llm: LlmSection,
    output: OutputSection,
}

/// Flags shared by every subcommand; each mirrors one config key.
#[derive(Debug, Default, Clone, Args)]
pub struct Overrides {
    /// TOML config file; flags take precedence over its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Store directory (`embeddings.vrag` + `metadata.jsonl`). [store] dir
    #[arg(long, global = true)]
    pub store: Option<PathBuf>,
    /// Query set directory, same layout as a store. [store] queries
    #[arg(long, global = true)]
    pub queries: Option<PathBuf>,
    /// Taxonomy JSON; the built-in six categories when omitted. [store] taxonomy
    #[arg(long, global = true)]
    pub taxonomy: Option<PathBuf>,
    /// [index] engine
    #[arg(long, global = true, value_enum)]
    pub engine: Option<Engine>,
    /// [index] m
    #[arg(long, global = true)]
    pub m: Option<usize>,
    /// [index] ef_construction
    #[arg(long, global = true)]
    pub ef_construction: Option<usize>,
    /// [index] ef_search
    #[arg(long, global = true)]
    pub ef_search: Option<usize>,
    /// Seed for index construction and synthetic data. [index] seed
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// raw, category-list or rag. [pipeline] mode
    #[arg(long, global = true)]
    pub mode: Option<String>,
    /// Retrieved descriptions per prompt / top-k depth. [pipeline] k
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Prompt template file. [pipeline] template
    #[arg(long, global = true)]
    pub template: Option<PathBuf>,
    /// [pipeline] question
    #[arg(long, global = true)]
    pub question: Option<String>,
    /// Model server base URL; falls back to $VRAG_LLM_ENDPOINT. [llm] endpoint
    #[arg(long = "llm-endpoint", global = true)]
    pub endpoint: Option<String>,
    /// In-process mock instead of a server: `echo` or `fixed:<text>`. [llm] mock
    #[arg(long, global = true)]
    pub mock: Option<String>,
    /// [llm] timeout_ms
    #[arg(long, global = true)]
    pub timeout_ms: Option<u64>,
    /// [llm] retries
    #[arg(long, global = true)]
    pub retries: Option<u32>,
    /// [llm] backoff_ms
    #[arg(long, global = true)]
    pub backoff_ms: Option<u64>,
    /// [llm] max_tokens
    #[arg(long, global = true)]
    pub max_tokens: Option<u32>,
    /// Concurrent model calls. [llm] in_flight
    #[arg(long, global = true)]
    pub in_flight: Option<usize>,
    /// Output directory. [output] dir
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

/// Fully resolved settings; serialized into every run-metadata file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub store: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub taxonomy: Option<PathBuf>,
    pub engine: Engine,
    pub hnsw: HnswParams,
    pub seed: u64,
    pub mode: PromptMode,
    pub k: usize,
    pub template: Option<PathBuf>,
    pub question: String,
    pub endpoint: Option<String>,
    pub mock: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
    pub max_tokens: u32,
    pub in_flight: usize,
    pub out: Option<PathBuf>,
}

fn rebase(base: &Path, p: Option<PathBuf>) -> Option<PathBuf> {
    p.map(|p| if p.is_relative() { base.join(p) } else { p })
}

fn read_file(path: &Path) -> Result<ConfigFile> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    let mut file: ConfigFile = toml::from_str(&text)
        .map_err(|e| config_error(format!("config {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or(Path::new("")).to_path_buf();
    file.store.dir = rebase(&base, file.store.dir.take());
    file.store.queries = rebase(&base, file.store.queries.take());
    file.store.taxonomy = rebase(&base, file.store.taxonomy.take());
    file.pipeline.template = rebase(&base, file.pipeline.template.take());
    file.output.dir = rebase(&base, file.output.dir.take());
    Ok(file)
}

impl RunConfig {
    pub fn resolve(flags: &Overrides) -> Result<Self> {
        let file = match &flags.config {
            Some(p) => read_file(p)?,
            None => ConfigFile::default(),
        };
        let f = flags.clone();
        let seed = f.seed.or(file.index.seed).unwrap_or(42);
        let defaults = HnswParams::default();
        let mode = match f.mode.or(file.pipeline.mode) {
            Some(s) => s.parse()?,
            None => PromptMode::Rag,
        };
        let endpoint = f
            .endpoint
            .or_else(|| std::env::var(ENDPOINT_ENV).ok().filter(|s| !s.is_empty()))
            .or(file.llm.endpoint);
        Ok(Self {
            store: f.store.or(file.store.dir),
            queries: f.queries.or(file.store.queries),
            taxonomy: f.taxonomy.or(file.store.taxonomy),
            engine: f.engine.or(file.index.engine).unwrap_or(Engine::Exact),
            hnsw: HnswParams {
                m: f.m.or(file.index.m).unwrap_or(defaults.m),
                ef_construction: f
                    .ef_construction
                    .or(file.index.ef_construction)
                    .unwrap_or(defaults.ef_construction),
                ef_search: f
                    .ef_search
                    .or(file.index.ef_search)
                    .unwrap_or(defaults.ef_search),
                seed,
            },
            seed,
            mode,
            k: f.k.or(file.pipeline.k).unwrap_or(DEFAULT_K),
            template: f.template.or(file.pipeline.template),
            question: f
                .question
                .or(file.pipeline.question)
                .unwrap_or_else(|| DEFAULT_QUESTION.to_string()),
            endpoint,
            mock: f.mock.or(file.llm.mock),
            timeout_ms: f.timeout_ms.or(file.llm.timeout_ms).unwrap_or(60_000),
            retries: f.retries.or(file.llm.retries).unwrap_or(2),
            backoff_ms: f.backoff_ms.or(file.llm.backoff_ms).unwrap_or(200),
            max_tokens: f
                .max_tokens
                .or(file.llm.max_tokens)
                .unwrap_or(DEFAULT_MAX_TOKENS),
            in_flight: f
                .in_flight
                .or(file.llm.in_flight)
                .unwrap_or(DEFAULT_IN_FLIGHT),
            out: f.out.or(file.output.dir),
        })
    }

    pub fn engine_kind(&self) -> EngineKind {
        match self.engine {
            Engine::Exact => EngineKind::Exact,
            Engine::Hnsw => EngineKind::Hnsw(self.hnsw),
        }
    }

    pub fn engine_name(&self) -> &'static str {
        match self.engine {
            Engine::Exact => "exact",
            Engine::Hnsw => "hnsw",
        }
    }

    pub fn taxonomy(&self) -> Result<Taxonomy> {
        Ok(match &self.taxonomy {
            Some(p) => Taxonomy::load(p)?,
            None => Taxonomy::default(),
        })
    }

    pub fn template(&self) -> Result<PromptTemplate> {
        Ok(match &self.template {
            Some(p) => PromptTemplate::load(p)?,
            None => PromptTemplate::default(),
        })
    }

    pub fn pipeline_config(&self) -> Result<PipelineConfig> {
        Ok(PipelineConfig {
            mode: self.mode,
            k: self.k,
            question: self.question.clone(),
            template: self.template()?,
            max_tokens: self.max_tokens,
            in_flight: self.in_flight,
        })
    }

    pub fn backend(&self) -> Result<Box<dyn LlmBackend>> {
        match (&self.mock, &self.endpoint) {
            (Some(spec), _) => Ok(Box::new(MockBackend::new(MockBehavior::parse(spec)?))),
            (None, Some(url)) => Ok(Box::new(HttpClient::new(ClientConfig {
                endpoint: url.clone(),
                timeout: Duration::from_millis(self.timeout_ms),
                retries: self.retries,
                backoff: Duration::from_millis(self.backoff_ms),
                bearer_token: None,
            })?)),
            (None, None) => Err(config_error(format!(
                "no model backend: pass --llm-endpoint, set {ENDPOINT_ENV}, or use --mock"
            ))),
        }
    }

    pub fn require_store(&self) -> Result<&Path> {
        self.store
            .as_deref()
            .ok_or_else(|| config_error("no store directory: pass --store or set [store] dir"))
    }

    pub fn require_queries(&self) -> Result<&Path> {
        self.queries
            .as_deref()
            .ok_or_else(|| config_error("no query set: pass --queries or set [store] queries"))
    }

    pub fn require_out(&self) -> Result<&Path> {
        self.out
            .as_deref()
            .ok_or_else(|| config_error("no output directory: pass --out or set [output] dir"))
    }
}
