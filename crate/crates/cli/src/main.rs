mod commands;
mod config;
mod exit;

use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::{EvaluateArgs, IngestArgs, QueryArgs, ServeArgs, SynthArgs, VisualizeArgs};
use config::{Overrides, RunConfig};

/// Retrieval-augmented visual classification.
#[derive(Debug, Parser)]
#[command(name = "vrag", version)]
struct Cli {
    #[command(flatten)]
    overrides: Overrides,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Validate raw embeddings + metadata and persist a normalized store.
    Ingest(IngestArgs),
    /// Build the configured index over a store and report its statistics.
    Index,
    /// Print the top-k hits for one embedding.
    Query(QueryArgs),
    /// Classify every query in a query set and write predictions JSONL.
    Classify,
    /// Score predictions, or the retrieval step, and write a report.
    Evaluate(EvaluateArgs),
    /// Project store and query embeddings to 2D and draw a scatter plot.
    Visualize(VisualizeArgs),
    /// Run the protocol mock model server.
    MockServe(ServeArgs),
    /// Generate a seeded synthetic cluster dataset.
    Synth(SynthArgs),
}

fn run(cli: Cli) -> Result<()> {
    if let Command::MockServe(args) = &cli.command {
        return commands::mock_serve(args);
    }
    let cfg = RunConfig::resolve(&cli.overrides)?;
    match &cli.command {
        Command::Ingest(args) => commands::ingest(&cfg, args),
        Command::Index => commands::index(&cfg),
        Command::Query(args) => commands::query(&cfg, args),
        Command::Classify => commands::classify(&cfg),
        Command::Evaluate(args) => commands::evaluate(&cfg, args),
        Command::Visualize(args) => commands::visualize(&cfg, args),
        Command::Synth(args) => commands::synth(&cfg, args),
        Command::MockServe(_) => unreachable!("handled above"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(exit::OK as u8),
        Err(err) if is_broken_pipe(&err) => ExitCode::from(exit::OK as u8),
        Err(err) => {
            let (code, kind) = exit::classify(&err);
            let line = serde_json::json!({ "error": kind, "message": format!("{err:#}") });
            eprintln!("{line}");
            ExitCode::from(code as u8)
        }
    }
}

fn is_broken_pipe(err: &anyhow::Error) -> bool {
    err.chain()
        .filter_map(|e| e.downcast_ref::<std::io::Error>())
        .any(|e| e.kind() == std::io::ErrorKind::BrokenPipe)
}
