//! Standalone mock model server speaking `POST /v1/generate`.

use std::net::SocketAddr;
use std::process::ExitCode;
use std::time::Duration;

use clap::Parser;
use vrag_core::llm::{serve, MockBehavior, ServerOptions};

#[derive(Debug, Parser)]
#[command(name = "vrag-mock-server", version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// `echo` or `fixed:<text>`.
    #[arg(long, default_value = "echo")]
    behavior: String,
    #[arg(long, default_value_t = 0)]
    fail_first: usize,
    #[arg(long, default_value_t = 0)]
    delay_ms: u64,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args = Args::parse();
    let result = MockBehavior::parse(&args.behavior).and_then(|behavior| {
        let options = ServerOptions {
            fail_first: args.fail_first,
            delay: (args.delay_ms > 0).then(|| Duration::from_millis(args.delay_ms)),
        };
        serve(args.addr, behavior, options, |addr| {
            println!("listening on http://{addr}")
        })
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({ "error": e.kind(), "message": e.to_string() })
            );
            ExitCode::FAILURE
        }
    }
}
