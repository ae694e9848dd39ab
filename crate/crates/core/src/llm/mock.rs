use std::collections::BTreeMap;

use sha2::{Digest, Sha256};

use super::{LlmBackend, LlmRequest, LlmResponse};
use crate::error::{Error, Result};
use crate::pipeline::prompt::first_context_species;

/// Deterministic stand-in behaviours. Identical prompts always produce
/// identical text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MockBehavior {
    /// Name the species of the first retrieved context block.
    EchoFirstContextSpecies,
    FixedText(String),
    /// Keyed by [`prompt_hash`].
    Scripted(BTreeMap<String, String>),
}

impl MockBehavior {
    pub fn respond(&self, prompt: &str) -> Result<String> {
        match self {
            MockBehavior::EchoFirstContextSpecies => Ok(match first_context_species(prompt) {
                Some(species) => format!("The fish in the image is a {species}."),
                None => "I cannot tell which species this is.".to_string(),
            }),
            MockBehavior::FixedText(text) => Ok(text.clone()),
            MockBehavior::Scripted(table) => table
                .get(&prompt_hash(prompt))
                .cloned()
                .ok_or_else(|| Error::Protocol("no scripted response for prompt".into())),
        }
    }

    /// Parse `echo`, `fixed:<text>`.
    pub fn parse(spec: &str) -> Result<Self> {
        match spec {
            "echo" => Ok(Self::EchoFirstContextSpecies),
            _ => match spec.strip_prefix("fixed:") {
                Some(text) => Ok(Self::FixedText(text.to_string())),
                None => Err(Error::InvalidParams(format!(
                    "unknown mock behaviour `{spec}` (expected `echo` or `fixed:<text>`)"
                ))),
            },
        }
    }
}

/// Hex SHA-256 of the prompt text.
pub fn prompt_hash(prompt: &str) -> String {
    hex::encode(Sha256::digest(prompt.as_bytes()))
}

/// In-process backend driven by a [`MockBehavior`].
#[derive(Debug, Clone)]
pub struct MockBackend {
    behavior: MockBehavior,
}

impl MockBackend {
    pub fn new(behavior: MockBehavior) -> Self {
        Self { behavior }
    }
}

impl LlmBackend for MockBackend {
    fn generate(&self, request: &LlmRequest) -> Result<LlmResponse> {
        request.validate()?;
        Ok(LlmResponse {
            text: self.behavior.respond(&request.prompt)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::prompt::{assemble_prompt, PromptMode, PromptTemplate, DEFAULT_QUESTION};
    use crate::pipeline::ContextItem;
    use crate::taxonomy::Taxonomy;

    #[test]
    fn fixed_text() {
        let mock = MockBackend::new(MockBehavior::FixedText("tuna".into()));
        let out = mock.generate(&LlmRequest::new("anything", None)).unwrap();
        assert_eq!(out.text, "tuna");
    }

    #[test]
    fn echo_names_first_context_species() {
        let ctx = vec![
            ContextItem {
                species: "Opah".into(),
                category: "Opah".into(),
                description: "Deep, disc-shaped round body with crimson fins.".into(),
            },
            ContextItem {
                species: "Albacore".into(),
                category: "Tuna".into(),
                description: "Long pectoral fins.".into(),
            },
        ];
        let bundle = assemble_prompt(
            PromptMode::Rag,
            DEFAULT_QUESTION,
            &Taxonomy::default(),
            &ctx,
            &PromptTemplate::default(),
        )
        .unwrap();
        let mock = MockBackend::new(MockBehavior::EchoFirstContextSpecies);
        let text = mock
            .generate(&LlmRequest::new(bundle.text, None))
            .unwrap()
            .text;
        assert!(text.contains("Opah"), "{text}");
        assert!(!text.contains("Albacore"));
    }

    #[test]
    fn scripted_and_deterministic() {
        let table = BTreeMap::from([(prompt_hash("hello"), "Shark".to_string())]);
        let mock = MockBackend::new(MockBehavior::Scripted(table));
        let req = LlmRequest::new("hello", None);
        assert_eq!(mock.generate(&req).unwrap(), mock.generate(&req).unwrap());
        assert!(matches!(
            mock.generate(&LlmRequest::new("other", None)),
            Err(Error::Protocol(_))
        ));
    }

    #[test]
    fn parse_specs() {
        assert_eq!(
            MockBehavior::parse("echo").unwrap(),
            MockBehavior::EchoFirstContextSpecies
        );
        assert_eq!(
            MockBehavior::parse("fixed:shark").unwrap(),
            MockBehavior::FixedText("shark".into())
        );
        assert!(MockBehavior::parse("oracle").is_err());
    }
}
