//! Two-level label hierarchy: category -> species.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::Label;

const CATCH_ALL_KEY: &str = "catch_all";

#[derive(Debug, Clone, PartialEq)]
pub struct Taxonomy {
    categories: Vec<(String, Vec<String>)>,
    catch_all: String,
    category_of: HashMap<String, usize>,
}

impl Default for Taxonomy {
    /// The six on-deck fisheries categories. Species lists other than Tuna's
    /// are illustrative.
    fn default() -> Self {
        let groups: [(&str, &[&str]); 6] = [
            (
                "Billfish",
                &[
                    "Swordfish",
                    "Striped marlin",
                    "Blue marlin",
                    "Black marlin",
                    "Shortbill spearfish",
                    "Sailfish",
                ],
            ),
            ("Mahi mahi", &["Common dolphinfish", "Pompano dolphinfish"]),
            ("Opah", &["Opah"]),
            (
                "Shark",
                &[
                    "Blue shark",
                    "Shortfin mako shark",
                    "Silky shark",
                    "Oceanic whitetip shark",
                    "Thresher shark",
                ],
            ),
            (
                "Tuna",
                &[
                    "Albacore",
                    "Yellowfin tuna",
                    "Skipjack tuna",
                    "Bigeye tuna",
                    "Tuna",
                ],
            ),
            (
                "Other",
                &[
                    "Wahoo",
                    "Escolar",
                    "Oilfish",
                    "Pelagic stingray",
                    "Sickle pomfret",
                ],
            ),
        ];
        Self::new(
            groups
                .iter()
                .map(|(c, s)| (c.to_string(), s.iter().map(|x| x.to_string()).collect()))
                .collect(),
            "Other".to_string(),
        )
        .expect("built-in taxonomy is valid")
    }
}

impl Taxonomy {
    pub fn new(categories: Vec<(String, Vec<String>)>, catch_all: String) -> Result<Self> {
        if categories.is_empty() {
            return Err(Error::TaxonomyViolation(
                "taxonomy has no categories".into(),
            ));
        }
        let mut category_of = HashMap::new();
        let mut seen_categories = HashMap::new();
        for (idx, (category, species)) in categories.iter().enumerate() {
            if category.trim().is_empty() || category == CATCH_ALL_KEY {
                return Err(Error::TaxonomyViolation(format!(
                    "invalid category name `{category}`"
                )));
            }
            if seen_categories.insert(category.clone(), idx).is_some() {
                return Err(Error::TaxonomyViolation(format!(
                    "category `{category}` listed twice"
                )));
            }
            for s in species {
                if s.trim().is_empty() {
                    return Err(Error::TaxonomyViolation(format!(
                        "empty species name in `{category}`"
                    )));
                }
                if let Some(prev) = category_of.insert(s.clone(), idx) {
                    return Err(Error::TaxonomyViolation(format!(
                        "species `{s}` belongs to both `{}` and `{category}`",
                        categories[prev].0
                    )));
                }
            }
        }
        if !seen_categories.contains_key(&catch_all) {
            return Err(Error::TaxonomyViolation(format!(
                "catch-all `{catch_all}` is not a category"
            )));
        }
        Ok(Self {
            categories,
            catch_all,
            category_of,
        })
    }

    /// Parse `{"<category>": ["<species>", ...], ..., "catch_all": "<category>"}`.
    /// Category order follows the file.
    pub fn from_json(text: &str) -> Result<Self> {
        let map: Map<String, Value> =
            serde_json::from_str(text).map_err(|e| Error::Format(format!("taxonomy: {e}")))?;
        let mut catch_all = None;
        let mut categories = Vec::new();
        for (key, value) in map {
            if key == CATCH_ALL_KEY {
                let name = value
                    .as_str()
                    .ok_or_else(|| Error::Format("taxonomy: catch_all must be a string".into()))?;
                catch_all = Some(name.to_string());
                continue;
            }
            let list = value
                .as_array()
                .ok_or_else(|| Error::Format(format!("taxonomy: `{key}` must map to a list")))?;
            let species = list
                .iter()
                .map(|v| {
                    v.as_str().map(str::to_string).ok_or_else(|| {
                        Error::Format(format!("taxonomy: non-string species in `{key}`"))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            categories.push((key, species));
        }
        let catch_all =
            catch_all.ok_or_else(|| Error::Format("taxonomy: missing `catch_all` key".into()))?;
        Self::new(categories, catch_all)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        let mut map = Map::new();
        for (category, species) in &self.categories {
            map.insert(category.clone(), Value::from(species.clone()));
        }
        map.insert(CATCH_ALL_KEY.into(), Value::from(self.catch_all.clone()));
        serde_json::to_string_pretty(&Value::Object(map)).expect("serializable")
    }

    pub fn categories(&self) -> impl Iterator<Item = &str> {
        self.categories.iter().map(|(c, _)| c.as_str())
    }

    pub fn category_count(&self) -> usize {
        self.categories.len()
    }

    pub fn catch_all(&self) -> &str {
        &self.catch_all
    }

    pub fn species_of(&self, category: &str) -> Option<&[String]> {
        self.categories
            .iter()
            .find(|(c, _)| c == category)
            .map(|(_, s)| s.as_slice())
    }

    pub fn all_species(&self) -> impl Iterator<Item = (&str, &str)> {
        self.categories
            .iter()
            .flat_map(|(c, s)| s.iter().map(move |sp| (sp.as_str(), c.as_str())))
    }

    pub fn category_of_species(&self, species: &str) -> Option<&str> {
        self.category_of
            .get(species)
            .map(|&i| self.categories[i].0.as_str())
    }

    pub fn has_category(&self, category: &str) -> bool {
        self.categories.iter().any(|(c, _)| c == category)
    }

    pub fn category_index(&self, category: &str) -> Option<usize> {
        self.categories.iter().position(|(c, _)| c == category)
    }

    /// Check that a (species, category) pair is consistent.
    pub fn validate(&self, species: &str, category: &str) -> Result<()> {
        if !self.has_category(category) {
            return Err(Error::TaxonomyViolation(format!(
                "unknown category `{category}`"
            )));
        }
        match self.category_of_species(species) {
            Some(c) if c == category => Ok(()),
            Some(c) => Err(Error::TaxonomyViolation(format!(
                "species `{species}` belongs to `{c}`, not `{category}`"
            ))),
            None => Err(Error::TaxonomyViolation(format!(
                "unknown species `{species}`"
            ))),
        }
    }

    /// Resolve optional label fields of an unlabeled or partially labeled
    /// record. A species alone determines its category.
    pub fn resolve_label(
        &self,
        species: Option<&str>,
        category: Option<&str>,
    ) -> Result<Option<Label>> {
        match (species, category) {
            (None, None) => Ok(None),
            (Some(s), Some(c)) => {
                self.validate(s, c)?;
                Ok(Some(Label {
                    category: c.into(),
                    species: s.into(),
                }))
            }
            (Some(s), None) => {
                let c = self
                    .category_of_species(s)
                    .ok_or_else(|| Error::TaxonomyViolation(format!("unknown species `{s}`")))?;
                Ok(Some(Label {
                    category: c.into(),
                    species: s.into(),
                }))
            }
            (None, Some(c)) => Err(Error::TaxonomyViolation(format!(
                "record with category `{c}` has no species"
            ))),
        }
    }
}
