//! Dataset schemas: column kinds, label and sensitive-attribute mappings.

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub name: String,
    pub columns: Vec<ColumnSpec>,
    pub label: BinaryColumn,
    pub sensitive: BinaryColumn,
    #[serde(default)]
    pub sensitive_feature: SensitiveFeature,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    Continuous,
    Categorical {
        /// Fixed vocabulary; learned from the training split when absent.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        categories: Option<Vec<String>>,
    },
    Ignore,
}

/// Maps a raw column onto {0, 1}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinaryColumn {
    pub column: String,
    #[serde(flatten)]
    pub rule: BinaryRule,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum BinaryRule {
    /// Numeric threshold: 1 iff the value lies strictly on `positive_when`'s side.
    Threshold {
        threshold: f64,
        #[serde(default)]
        positive_when: Side,
    },
    /// Categorical: 1 for `positive` values; 0 for `negative` values, or
    /// for every other value when `negative` is absent.
    Values {
        positive: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        negative: Option<Vec<String>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    #[default]
    Above,
    Below,
}

/// How the sensitive attribute appears in the feature matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SensitiveFeature {
    /// Native encoding from `columns`.
    #[default]
    Keep,
    /// Replaced by a privileged/unprivileged indicator pair.
    Binary,
    /// Removed from the features.
    Drop,
}

impl BinaryRule {
    /// `Ok(None)` for values outside a closed vocabulary.
    pub fn map(&self, raw: &str) -> Option<u8> {
        match self {
            BinaryRule::Threshold {
                threshold,
                positive_when,
            } => {
                let v: f64 = raw.parse().ok()?;
                let above = v > *threshold;
                Some(u8::from(match positive_when {
                    Side::Above => above,
                    Side::Below => v < *threshold,
                }))
            }
            BinaryRule::Values { positive, negative } => {
                if positive.iter().any(|p| p == raw) {
                    Some(1)
                } else {
                    match negative {
                        Some(neg) if neg.iter().any(|p| p == raw) => Some(0),
                        Some(_) => None,
                        None => Some(0),
                    }
                }
            }
        }
    }
}

const ADULT: &str = include_str!("../../assets/schemas/adult.json");
const GERMAN: &str = include_str!("../../assets/schemas/german.json");
const HEALTH: &str = include_str!("../../assets/schemas/health.json");

impl Schema {
    pub fn from_json(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Schema(format!("{}: {e}", path.display())))
    }

    /// Ready-made schemas: `adult`, `german`, `health`.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "adult" => ADULT,
            "german" => GERMAN,
            "health" => HEALTH,
            _ => return None,
        };
        Some(Self::from_json(text).expect("shipped schemas are valid"))
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for c in &self.columns {
            if !seen.insert(c.name.as_str()) {
                return Err(Error::Schema(format!("column `{}` listed twice", c.name)));
            }
            if c.name == self.label.column {
                return Err(Error::Schema(format!("label column `{}` cannot be a feature", c.name)));
            }
        }
        if self.label.column == self.sensitive.column {
            return Err(Error::Schema("label and sensitive attribute share a column".into()));
        }
        if self.sensitive_feature == SensitiveFeature::Keep && !seen.contains(self.sensitive.column.as_str()) {
            return Err(Error::Schema(format!(
                "sensitive_feature = keep but `{}` is not among the columns",
                self.sensitive.column
            )));
        }
        for rule in [&self.label.rule, &self.sensitive.rule] {
            if let BinaryRule::Values { positive, .. } = rule {
                if positive.is_empty() {
                    return Err(Error::Schema("empty positive value list".into()));
                }
            }
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<&ColumnSpec> {
        self.columns.iter().find(|c| c.name == name)
    }
}
