use std::net::{SocketAddr, TcpListener};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::Duration;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use tokio::sync::oneshot;

use super::{LlmRequest, LlmResponse, MockBehavior, GENERATE_PATH};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ServerOptions {
    /// Answer this many requests with 503 before behaving normally.
    pub fail_first: usize,
    /// Sleep before every answer.
    pub delay: Option<Duration>,
}

struct Shared {
    behavior: MockBehavior,
    options: ServerOptions,
    requests: AtomicUsize,
}

async fn generate(
    State(shared): State<Arc<Shared>>,
    Json(request): Json<LlmRequest>,
) -> std::result::Result<Json<LlmResponse>, (StatusCode, String)> {
    let n = shared.requests.fetch_add(1, Ordering::SeqCst);
    if let Some(d) = shared.options.delay {
        tokio::time::sleep(d).await;
    }
    if n < shared.options.fail_first {
        return Err((StatusCode::SERVICE_UNAVAILABLE, "warming up".into()));
    }
    request
        .validate()
        .map_err(|e| (StatusCode::BAD_REQUEST, e.to_string()))?;
    shared
        .behavior
        .respond(&request.prompt)
        .map(|text| Json(LlmResponse { text }))
        .map_err(|e| (StatusCode::UNPROCESSABLE_ENTITY, e.to_string()))
}

fn router(shared: Arc<Shared>) -> Router {
    Router::new()
        .route(GENERATE_PATH, post(generate))
        .with_state(shared)
}

fn runtime() -> Result<tokio::runtime::Runtime> {
    tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .enable_all()
        .build()
        .map_err(Error::Io)
}

/// Mock model server running on a background thread. Dropping the handle
/// shuts it down.
pub struct MockServer {
    addr: SocketAddr,
    shared: Arc<Shared>,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn spawn(addr: SocketAddr, behavior: MockBehavior, options: ServerOptions) -> Result<Self> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let shared = Arc::new(Shared {
            behavior,
            options,
            requests: AtomicUsize::new(0),
        });
        let (tx, rx) = oneshot::channel::<()>();
        let rt = runtime()?;
        let app = router(shared.clone());
        let thread = thread::spawn(move || {
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::from_std(listener).expect("listener");
                let _ = axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await;
            });
        });
        Ok(Self {
            addr,
            shared,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    pub fn requests_served(&self) -> usize {
        self.shared.requests.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

/// Run a mock server on the current thread until the process exits.
/// `on_bound` receives the bound address before serving starts.
pub fn serve(
    addr: SocketAddr,
    behavior: MockBehavior,
    options: ServerOptions,
    on_bound: impl FnOnce(SocketAddr),
) -> Result<()> {
    let listener = TcpListener::bind(addr)?;
    listener.set_nonblocking(true)?;
    on_bound(listener.local_addr()?);
    let shared = Arc::new(Shared {
        behavior,
        options,
        requests: AtomicUsize::new(0),
    });
    runtime()?.block_on(async move {
        let listener = tokio::net::TcpListener::from_std(listener)?;
        axum::serve(listener, router(shared)).await
    })?;
    Ok(())
}
