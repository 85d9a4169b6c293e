use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::{CauseCategory, IngestError, Result};

/// The taxonomy file shipped with the toolkit.
pub const DEFAULT_TAXONOMY: &str = include_str!("../../data/cause_taxonomy.toml");

/// Raw event-type label to cause category lookup, loaded from a TOML file of
/// the form `version = "..."` plus a `[labels]` table.
#[derive(Debug, Clone, PartialEq)]
pub struct CauseTaxonomy {
    version: String,
    labels: BTreeMap<String, CauseCategory>,
}

#[derive(Deserialize)]
struct TaxonomyFile {
    version: String,
    labels: BTreeMap<String, String>,
}

/// Lower-cases and collapses internal whitespace.
pub fn normalize_label(label: &str) -> String {
    label
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

impl CauseTaxonomy {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: TaxonomyFile =
            toml::from_str(text).map_err(|e| IngestError::Taxonomy(e.to_string()))?;
        let mut labels = BTreeMap::new();
        for (raw, cat) in file.labels {
            let category: CauseCategory = cat.parse().map_err(IngestError::Taxonomy)?;
            let key = normalize_label(&raw);
            if key.is_empty() {
                return Err(IngestError::Taxonomy("empty label".into()));
            }
            if let Some(prev) = labels.insert(key.clone(), category) {
                if prev != category {
                    return Err(IngestError::Taxonomy(format!(
                        "label `{key}` maps to both {prev} and {category}"
                    )));
                }
            }
        }
        Ok(CauseTaxonomy {
            version: file.version,
            labels,
        })
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn shipped() -> Self {
        Self::from_toml_str(DEFAULT_TAXONOMY).expect("shipped taxonomy is valid")
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = (&str, CauseCategory)> {
        self.labels.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn get(&self, raw_label: &str) -> Option<CauseCategory> {
        self.labels.get(&normalize_label(raw_label)).copied()
    }
}

pub fn map_cause(raw_label: &str, taxonomy: &CauseTaxonomy) -> Result<CauseCategory> {
    taxonomy
        .get(raw_label)
        .ok_or_else(|| IngestError::UnmappedLabel(raw_label.trim().to_string()))
}
