use std::sync::atomic::{AtomicU64, Ordering};
use std::thread;
use std::time::Duration;

use reqwest::blocking::Client;
use reqwest::StatusCode;
use serde::{Deserialize, Serialize};

use super::{LlmBackend, LlmRequest, LlmResponse, GENERATE_PATH};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClientConfig {
    /// Base URL such as `http://127.0.0.1:8080`; the generate path is
    /// appended unless already present.
    pub endpoint: String,
    pub timeout: Duration,
    pub retries: u32,
    /// First backoff delay; doubles after each failed attempt.
    pub backoff: Duration,
    pub bearer_token: Option<String>,
}

impl ClientConfig {
    pub fn new(endpoint: impl Into<String>) -> Self {
        Self {
            endpoint: endpoint.into(),
            timeout: Duration::from_secs(60),
            retries: 2,
            backoff: Duration::from_millis(200),
            bearer_token: None,
        }
    }

    fn url(&self) -> String {
        let base = self.endpoint.trim_end_matches('/');
        if base.ends_with(GENERATE_PATH) {
            base.to_string()
        } else {
            format!("{base}{GENERATE_PATH}")
        }
    }
}

enum Attempt {
    Done(LlmResponse),
    Retry(Error),
    Fail(Error),
}

/// Blocking HTTP client with timeout and exponential-backoff retries on
/// connection failures, timeouts, 429 and 5xx responses.
#[derive(Debug)]
pub struct HttpClient {
    config: ClientConfig,
    url: String,
    client: Client,
    retries: AtomicU64,
}

impl HttpClient {
    pub fn new(config: ClientConfig) -> Result<Self> {
        let client = Client::builder()
            .timeout(config.timeout)
            .build()
            .map_err(|e| Error::Transport(e.to_string()))?;
        Ok(Self {
            url: config.url(),
            config,
            client,
            retries: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    /// Total retries issued over the client's lifetime.
    pub fn retry_count(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    fn attempt(&self, request: &LlmRequest) -> Attempt {
        let mut builder = self.client.post(&self.url).json(request);
        if let Some(token) = &self.config.bearer_token {
            builder = builder.bearer_auth(token);
        }
        let response = match builder.send() {
            Ok(r) => r,
            Err(e) if e.is_timeout() => return Attempt::Retry(Error::Timeout),
            Err(e) => return Attempt::Retry(Error::Transport(e.to_string())),
        };
        let status = response.status();
        let body = match response.text() {
            Ok(b) => b,
            Err(e) if e.is_timeout() => return Attempt::Retry(Error::Timeout),
            Err(e) => return Attempt::Retry(Error::Transport(e.to_string())),
        };
        if status.is_server_error() || status == StatusCode::TOO_MANY_REQUESTS {
            return Attempt::Retry(Error::Transport(format!("server answered {status}")));
        }
        if !status.is_success() {
            return Attempt::Fail(Error::Protocol(format!("server answered {status}: {body}")));
        }
        match serde_json::from_str::<LlmResponse>(&body) {
            Ok(r) => Attempt::Done(r),
            Err(e) => Attempt::Fail(Error::Protocol(format!("malformed response body: {e}"))),
        }
    }
}

impl LlmBackend for HttpClient {
    fn generate(&self, request: &LlmRequest) -> Result<LlmResponse> {
        request.validate()?;
        let mut delay = self.config.backoff;
        let mut attempt = 0;
        loop {
            match self.attempt(request) {
                Attempt::Done(r) => return Ok(r),
                Attempt::Fail(e) => return Err(e),
                Attempt::Retry(e) if attempt >= self.config.retries => return Err(e),
                Attempt::Retry(e) => {
                    log::warn!(
                        "generate attempt {} failed: {e}; retrying in {delay:?}",
                        attempt + 1
                    );
                    self.retries.fetch_add(1, Ordering::Relaxed);
                    thread::sleep(delay);
                    delay *= 2;
                    attempt += 1;
                }
            }
        }
    }
}
