//! Boundary to the multimodal language model.
//!
//! The wire protocol is one JSON endpoint, `POST /v1/generate`, taking
//! `{"prompt", "image_ref", "max_tokens"}` and answering `{"text"}`.
//! [`HttpClient`] speaks it to a real server; [`MockBackend`] and
//! [`MockServer`] answer deterministically for tests and demos.

mod http;
mod mock;
mod server;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use http::{ClientConfig, HttpClient};
pub use mock::{prompt_hash, MockBackend, MockBehavior};
pub use server::{serve, MockServer, ServerOptions};

pub const GENERATE_PATH: &str = "/v1/generate";

/// Environment variable consulted for the model server URL.
pub const ENDPOINT_ENV: &str = "VRAG_LLM_ENDPOINT";

pub const DEFAULT_MAX_TOKENS: u32 = 128;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LlmRequest {
    pub prompt: String,
    pub image_ref: Option<String>,
    pub max_tokens: u32,
}

impl LlmRequest {
    pub fn new(prompt: impl Into<String>, image_ref: Option<String>) -> Self {
        Self {
            prompt: prompt.into(),
            image_ref,
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.prompt.trim().is_empty() {
            return Err(Error::InvalidRequest("prompt is empty".into()));
        }
        if self.max_tokens == 0 {
            return Err(Error::InvalidRequest("max_tokens must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LlmResponse {
    pub text: String,
}

/// Anything that can turn a request into generated text.
pub trait LlmBackend: Send + Sync {
    fn generate(&self, request: &LlmRequest) -> Result<LlmResponse>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for &T {
    fn generate(&self, request: &LlmRequest) -> Result<LlmResponse> {
        (**self).generate(request)
    }
}

impl<T: LlmBackend + ?Sized> LlmBackend for Box<T> {
    fn generate(&self, request: &LlmRequest) -> Result<LlmResponse> {
        (**self).generate(request)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_wire_shape() {
        let req = LlmRequest::new("What is the species of the fish?", None);
        assert_eq!(
            serde_json::to_string(&req).unwrap(),
            r#"{"prompt":"What is the species of the fish?","image_ref":null,"max_tokens":128}"#
        );
        let back: LlmRequest = serde_json::from_str(&serde_json::to_string(&req).unwrap()).unwrap();
        assert_eq!(back, req);
    }

    #[test]
    fn empty_prompt_is_rejected_locally() {
        assert!(matches!(
            LlmRequest::new("  ", None).validate(),
            Err(Error::InvalidRequest(_))
        ));
        let mock = MockBackend::new(MockBehavior::FixedText("tuna".into()));
        assert!(matches!(
            mock.generate(&LlmRequest::new("", None)),
            Err(Error::InvalidRequest(_))
        ));
    }
}
