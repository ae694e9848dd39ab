//! Prompt assembly for the three experiment modes.
//!
//! A template holds the placeholders `{context}`, `{categories}` and
//! `{question}`. Context renders as one numbered line per retrieved entry,
//! in rank order; categories render as a single comma-separated line. Empty
//! sections render as nothing, so a raw-mode prompt is just the question.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ContextItem;
use crate::error::{Error, Result};
use crate::taxonomy::Taxonomy;

pub const DEFAULT_QUESTION: &str = "What is the species of the fish?";

const DEFAULT_TEMPLATE: &str = include_str!("../../templates/prompt_v1.txt");
const DEFAULT_TEMPLATE_VERSION: &str = "prompt_v1";
const PLACEHOLDERS: [&str; 3] = ["context", "categories", "question"];

const CONTEXT_HEADER: &str = "Reference descriptions retrieved for this image, most similar first:";
const CATEGORIES_LEAD: &str = "Answer with exactly one of these categories:";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PromptMode {
    /// Question only.
    Raw,
    /// Question plus the closed list of categories.
    CategoryList,
    /// Question plus retrieved descriptions.
    Rag,
}

impl PromptMode {
    pub fn as_str(self) -> &'static str {
        match self {
            PromptMode::Raw => "raw",
            PromptMode::CategoryList => "category-list",
            PromptMode::Rag => "rag",
        }
    }
}

impl std::str::FromStr for PromptMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(Self::Raw),
            "category-list" | "categories" => Ok(Self::CategoryList),
            "rag" => Ok(Self::Rag),
            _ => Err(Error::InvalidParams(format!(
                "unknown mode `{s}` (expected raw, category-list or rag)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PromptTemplate {
    text: String,
    version: String,
}

impl Default for PromptTemplate {
    fn default() -> Self {
        Self {
            text: DEFAULT_TEMPLATE.to_string(),
            version: DEFAULT_TEMPLATE_VERSION.to_string(),
        }
    }
}

impl PromptTemplate {
    pub fn new(text: impl Into<String>, version: impl Into<String>) -> Result<Self> {
        let text = text.into();
        let mut rest = text.as_str();
        let mut has_question = false;
        while let Some(open) = rest.find('{') {
            let after = &rest[open + 1..];
            let close = after
                .find('}')
                .ok_or_else(|| Error::Format("template: unclosed `{`".into()))?;
            let name = &after[..close];
            if !PLACEHOLDERS.contains(&name) {
                return Err(Error::Format(format!(
                    "template: unknown placeholder `{{{name}}}`"
                )));
            }
            has_question |= name == "question";
            rest = &after[close + 1..];
        }
        if !has_question {
            return Err(Error::Format("template: missing `{question}`".into()));
        }
        Ok(Self {
            text,
            version: version.into(),
        })
    }

    /// Load a template file; its version is the file stem.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let version = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "custom".into());
        Self::new(text, version)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    fn render(&self, context: &str, categories: &str, question: &str) -> String {
        self.text
            .replace("{context}", context)
            .replace("{categories}", categories)
            .replace("{question}", question)
            .trim_end()
            .to_string()
    }
}

/// Everything sent to the model for one query.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PromptBundle {
    pub mode: PromptMode,
    pub question: String,
    /// Descriptions in retrieval rank order; empty unless `Rag`.
    pub context: Vec<String>,
    /// Present only in `CategoryList` mode.
    pub category_list: Option<Vec<String>>,
    pub image_ref: Option<String>,
    pub text: String,
}

fn one_line(s: &str) -> String {
    s.split(['\n', '\r'])
        .filter(|p| !p.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn assemble_prompt(
    mode: PromptMode,
    question: &str,
    taxonomy: &Taxonomy,
    context: &[ContextItem],
    template: &PromptTemplate,
) -> Result<PromptBundle> {
    let question = one_line(question);
    if question.trim().is_empty() {
        return Err(Error::InvalidRequest("question is empty".into()));
    }
    let (context, category_list) = match mode {
        PromptMode::Raw => (&[][..], None),
        PromptMode::CategoryList => (
            &[][..],
            Some(
                taxonomy
                    .categories()
                    .map(str::to_string)
                    .collect::<Vec<_>>(),
            ),
        ),
        PromptMode::Rag if context.is_empty() => return Err(Error::MissingContext),
        PromptMode::Rag => (context, None),
    };

    let mut context_text = String::new();
    if !context.is_empty() {
        context_text.push_str(CONTEXT_HEADER);
        context_text.push('\n');
        for (i, item) in context.iter().enumerate() {
            let _ = writeln!(
                context_text,
                "[{}] {} ({}): {}",
                i + 1,
                item.species,
                item.category,
                one_line(&item.description)
            );
        }
        context_text.push('\n');
    }
    let categories_text = category_list
        .as_ref()
        .map(|c| format!("{CATEGORIES_LEAD} {}.\n\n", c.join(", ")))
        .unwrap_or_default();

    Ok(PromptBundle {
        mode,
        text: template.render(&context_text, &categories_text, &question),
        question,
        context: context.iter().map(|c| c.description.clone()).collect(),
        category_list,
        image_ref: None,
    })
}

/// Species named on the first context line of a rendered prompt.
pub fn first_context_species(prompt: &str) -> Option<&str> {
    prompt
        .lines()
        .find_map(|l| l.strip_prefix("[1] "))
        .and_then(|rest| rest.split_once(" ("))
        .map(|(species, _)| species)
}

/// Number of numbered context lines in a rendered prompt.
pub fn count_context_blocks(prompt: &str) -> usize {
    prompt
        .lines()
        .filter(|l| {
            l.strip_prefix('[')
                .and_then(|r| r.split_once("] "))
                .is_some_and(|(n, _)| !n.is_empty() && n.bytes().all(|b| b.is_ascii_digit()))
        })
        .count()
}
