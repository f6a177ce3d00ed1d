//! Records and record-level validation.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::schema::DatasetDescriptor;

/// A word-level prediction unit: a label attached to a surface-form entity.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabelEntityPair {
    pub label: String,
    pub entity: String,
}

impl LabelEntityPair {
    pub fn new(label: impl Into<String>, entity: impl Into<String>) -> Self {
        Self {
            label: label.into(),
            entity: entity.into(),
        }
    }
}

impl fmt::Display for LabelEntityPair {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.label, self.entity)
    }
}

/// One example of a mixed dataset. Pairs keep source order and may repeat.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MreRecord {
    pub id: String,
    pub text: String,
    pub text_label: String,
    #[serde(default)]
    pub pairs: Vec<LabelEntityPair>,
}

impl MreRecord {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        text_label: impl Into<String>,
        pairs: Vec<LabelEntityPair>,
    ) -> Self {
        Self {
            id: id.into(),
            text: text.into(),
            text_label: text_label.into(),
            pairs,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    /// `text`, `text_label`, or `pairs[i].label` / `pairs[i].entity`.
    pub field: String,
    pub rule: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.rule)
    }
}

/// Checks a record against a descriptor. An empty result means valid.
pub fn validate_record(record: &MreRecord, desc: &DatasetDescriptor) -> Vec<Violation> {
    let mut out = Vec::new();
    let schema = &desc.schema;

    if record.text.trim().is_empty() {
        out.push(Violation {
            field: "text".into(),
            rule: "must be non-empty".into(),
        });
    }

    if record.text_label.trim().is_empty() {
        out.push(Violation {
            field: "text_label".into(),
            rule: "must be non-empty".into(),
        });
    } else if !schema.open_domain && !schema.has_text_label(&record.text_label) {
        out.push(Violation {
            field: "text_label".into(),
            rule: format!(
                "`{}` is not a text-level label of {} (expected one of: {})",
                record.text_label,
                desc,
                schema.text_labels.join(", ")
            ),
        });
    }

    for (i, pair) in record.pairs.iter().enumerate() {
        if pair.entity.trim().is_empty() {
            out.push(Violation {
                field: format!("pairs[{i}].entity"),
                rule: "must be non-empty after trimming".into(),
            });
        }
        if pair.label.trim().is_empty() {
            out.push(Violation {
                field: format!("pairs[{i}].label"),
                rule: "must be non-empty".into(),
            });
        } else if !schema.open_domain && !schema.has_word_label(&pair.label) {
            out.push(Violation {
                field: format!("pairs[{i}].label"),
                rule: format!("`{}` is not a word-level label of {}", pair.label, desc),
            });
        }
    }

    out
}
