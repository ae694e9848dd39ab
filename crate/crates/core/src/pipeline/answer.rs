//! Reduce free-text model answers to taxonomy labels.
//!
//! Text and lexicon terms are lower-cased and split on anything that is not
//! alphanumeric, so "Mahi-Mahi" and "mahi mahi" match alike. The scan looks
//! for species terms first; the leftmost match wins and, at one position,
//! the longest term. Only when no species term occurs are category terms
//! scanned, with the catch-all category tried last.

use serde::{Deserialize, Serialize};

use crate::taxonomy::Taxonomy;

/// Extra surface forms mapped to species.
const SPECIES_SYNONYMS: &[(&str, &str)] = &[
    ("yellowfin", "Yellowfin tuna"),
    ("skipjack", "Skipjack tuna"),
    ("bigeye", "Bigeye tuna"),
    ("albacore tuna", "Albacore"),
    ("broadbill", "Swordfish"),
    ("mako", "Shortfin mako shark"),
    ("mako shark", "Shortfin mako shark"),
    ("thresher", "Thresher shark"),
    ("whitetip shark", "Oceanic whitetip shark"),
];

/// Extra surface forms mapped to categories.
const CATEGORY_SYNONYMS: &[(&str, &str)] = &[
    ("mahimahi", "Mahi mahi"),
    ("dolphinfish", "Mahi mahi"),
    ("dolphin fish", "Mahi mahi"),
    ("dorado", "Mahi mahi"),
    ("marlin", "Billfish"),
    ("spearfish", "Billfish"),
    ("moonfish", "Opah"),
    ("sharks", "Shark"),
    ("tunas", "Tuna"),
];

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedAnswer {
    /// `None` means unresolved.
    pub category: Option<String>,
    pub species: Option<String>,
}

#[derive(Debug, Clone)]
struct Term {
    tokens: Vec<String>,
    target: String,
}

/// Precompiled lexicon for one taxonomy.
#[derive(Debug, Clone)]
pub struct AnswerParser {
    species: Vec<Term>,
    categories: Vec<Term>,
    catch_all: Vec<Term>,
    species_category: Vec<(String, String)>,
}

fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
        .collect()
}

fn term(surface: &str, target: &str) -> Term {
    Term {
        tokens: tokenize(surface),
        target: target.to_string(),
    }
}

/// Leftmost, then longest, term occurring in `tokens`.
fn scan<'a>(tokens: &[String], terms: &'a [Term]) -> Option<&'a str> {
    (0..tokens.len()).find_map(|start| {
        terms
            .iter()
            .filter(|t| !t.tokens.is_empty() && tokens[start..].starts_with(&t.tokens))
            .max_by_key(|t| t.tokens.len())
            .map(|t| t.target.as_str())
    })
}

impl AnswerParser {
    pub fn new(taxonomy: &Taxonomy) -> Self {
        let mut species: Vec<Term> = taxonomy.all_species().map(|(s, _)| term(s, s)).collect();
        species.extend(
            SPECIES_SYNONYMS
                .iter()
                .filter(|(_, s)| taxonomy.category_of_species(s).is_some())
                .map(|(syn, s)| term(syn, s)),
        );
        let catch_all = taxonomy.catch_all();
        let mut categories: Vec<Term> = taxonomy
            .categories()
            .filter(|c| *c != catch_all)
            .map(|c| term(c, c))
            .collect();
        categories.extend(
            CATEGORY_SYNONYMS
                .iter()
                .filter(|(_, c)| taxonomy.has_category(c) && *c != catch_all)
                .map(|(syn, c)| term(syn, c)),
        );
        let species_category = taxonomy
            .all_species()
            .map(|(s, c)| (s.to_string(), c.to_string()))
            .collect();
        Self {
            species,
            categories,
            catch_all: vec![term(catch_all, catch_all)],
            species_category,
        }
    }

    pub fn parse(&self, text: &str) -> ParsedAnswer {
        let tokens = tokenize(text);
        if let Some(species) = scan(&tokens, &self.species) {
            let category = self
                .species_category
                .iter()
                .find(|(s, _)| s == species)
                .map(|(_, c)| c.clone());
            return ParsedAnswer {
                category,
                species: Some(species.to_string()),
            };
        }
        let category = scan(&tokens, &self.categories).or_else(|| scan(&tokens, &self.catch_all));
        ParsedAnswer {
            category: category.map(str::to_string),
            species: None,
        }
    }
}

/// One-shot convenience over [`AnswerParser`].
pub fn parse_answer(text: &str, taxonomy: &Taxonomy) -> ParsedAnswer {
    AnswerParser::new(taxonomy).parse(text)
}
