//! Input/target construction for the ablation formats.
//!
//! Inputs are built by bare concatenation: the record text, then (for the
//! `WITH_*` formats) a single newline and the appended level information.
//! No instruction or prompt words are ever added.
//!
//! # Pair grammar
//!
//! ```text
//! pairs  := "NONE" | pair ("; " pair)*
//! pair   := label ": " entity
//! ```
//!
//! Inside labels and entities a literal `\` is written `\\` and a literal `;`
//! is written `\;`. Labels may not contain `:`. Surrounding whitespace of
//! labels and entities is not significant and is dropped on output.
//!
//! # Training files
//!
//! One JSON object per line with fields `input`, `target`, `tag`,
//! `record_id`, written to `<family>_<lang>_<tag>.<role>` (see
//! [`training_file_name`]) with a sibling `<name>.manifest.json`.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Role, Split};
use crate::record::{validate_record, LabelEntityPair, MreRecord};
use crate::schema::DatasetDescriptor;

/// Separator placed between the text and appended level information, and
/// between the text label and pairs of a joint target.
pub const LEVEL_SEPARATOR: &str = "\n";
/// Serialized form of an empty pair list.
pub const EMPTY_PAIRS: &str = "NONE";
pub const PAIR_SEPARATOR: &str = "; ";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FormatError {
    #[error("pair {index}: label `{label}` cannot be serialized: {reason}")]
    BadLabel {
        index: usize,
        label: String,
        reason: &'static str,
    },
    #[error("pair {index}: entity is empty")]
    EmptyEntity { index: usize },
    #[error("record `{id}` is invalid: {violations}")]
    InvalidRecord { id: String, violations: String },
    #[error("record `{id}`: {source}")]
    InRecord {
        id: String,
        #[source]
        source: Box<FormatError>,
    },
    #[error("unknown format tag `{0}`")]
    UnknownTag(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FormatTag {
    TradWord,
    TradText,
    JointMre,
    WithTliToWli,
    WoTliToWli,
    WithWliToTli,
    WoWliToTli,
}

/// Which side(s) of a record a format asks the model to produce.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetSide {
    Word,
    Text,
    Both,
}

impl FormatTag {
    pub const ALL: [FormatTag; 7] = [
        FormatTag::TradWord,
        FormatTag::TradText,
        FormatTag::JointMre,
        FormatTag::WithTliToWli,
        FormatTag::WoTliToWli,
        FormatTag::WithWliToTli,
        FormatTag::WoWliToTli,
    ];

    /// The four rows of an ablation table, in display order.
    pub const ABLATION_ROWS: [FormatTag; 4] = [
        FormatTag::WoTliToWli,
        FormatTag::WithTliToWli,
        FormatTag::WoWliToTli,
        FormatTag::WithWliToTli,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FormatTag::TradWord => "TRAD_WORD",
            FormatTag::TradText => "TRAD_TEXT",
            FormatTag::JointMre => "JOINT_MRE",
            FormatTag::WithTliToWli => "WITH_TLI_TO_WLI",
            FormatTag::WoTliToWli => "WO_TLI_TO_WLI",
            FormatTag::WithWliToTli => "WITH_WLI_TO_TLI",
            FormatTag::WoWliToTli => "WO_WLI_TO_TLI",
        }
    }

    pub fn slug(self) -> String {
        self.name().to_ascii_lowercase()
    }

    /// Row caption used in ablation tables.
    pub fn row_caption(self) -> &'static str {
        match self {
            FormatTag::TradWord | FormatTag::WoTliToWli => "w/o TLI",
            FormatTag::WithTliToWli => "with TLI",
            FormatTag::TradText | FormatTag::WoWliToTli => "w/o WLI",
            FormatTag::WithWliToTli => "with WLI",
            FormatTag::JointMre => "joint",
        }
    }

    pub fn target_side(self) -> TargetSide {
        match self {
            FormatTag::TradWord | FormatTag::WoTliToWli | FormatTag::WithTliToWli => TargetSide::Word,
            FormatTag::TradText | FormatTag::WoWliToTli | FormatTag::WithWliToTli => TargetSide::Text,
            FormatTag::JointMre => TargetSide::Both,
        }
    }

    /// The traditional format a `WO_*` alias produces identical strings to.
    pub fn canonical(self) -> FormatTag {
        match self {
            FormatTag::WoTliToWli => FormatTag::TradWord,
            FormatTag::WoWliToTli => FormatTag::TradText,
            other => other,
        }
    }
}

impl fmt::Display for FormatTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FormatTag {
    type Err = FormatError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FormatTag::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| FormatError::UnknownTag(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FormattedExample {
    pub input: String,
    pub target: String,
    pub tag: FormatTag,
    pub record_id: String,
}

pub(crate) fn escape_field(s: &str, out: &mut String) {
    for c in s.chars() {
        if c == '\\' || c == ';' {
            out.push('\\');
        }
        out.push(c);
    }
}

/// Renders pairs in the canonical grammar; `NONE` for an empty list.
pub fn serialize_pairs(pairs: &[LabelEntityPair]) -> Result<String, FormatError> {
    if pairs.is_empty() {
        return Ok(EMPTY_PAIRS.to_string());
    }
    let mut out = String::new();
    for (index, pair) in pairs.iter().enumerate() {
        let label = pair.label.trim();
        let entity = pair.entity.trim();
        if label.is_empty() {
            return Err(FormatError::BadLabel {
                index,
                label: pair.label.clone(),
                reason: "empty",
            });
        }
        if label.contains(':') {
            return Err(FormatError::BadLabel {
                index,
                label: pair.label.clone(),
                reason: "contains `:`",
            });
        }
        if entity.is_empty() {
            return Err(FormatError::EmptyEntity { index });
        }
        if index > 0 {
            out.push_str(PAIR_SEPARATOR);
        }
        escape_field(label, &mut out);
        out.push_str(": ");
        escape_field(entity, &mut out);
    }
    Ok(out)
}

/// Builds one example. The record is assumed valid for `desc`; use
/// [`build_corpus`] for validated batch construction.
pub fn build(record: &MreRecord, tag: FormatTag) -> Result<FormattedExample, FormatError> {
    let text = record.text.as_str();
    let label = record.text_label.as_str();
    let (input, target) = match tag {
        FormatTag::TradWord | FormatTag::WoTliToWli => (text.to_string(), serialize_pairs(&record.pairs)?),
        FormatTag::TradText | FormatTag::WoWliToTli => (text.to_string(), label.to_string()),
        FormatTag::JointMre => (
            text.to_string(),
            [label, LEVEL_SEPARATOR, &serialize_pairs(&record.pairs)?].concat(),
        ),
        FormatTag::WithTliToWli => ([text, LEVEL_SEPARATOR, label].concat(), serialize_pairs(&record.pairs)?),
        FormatTag::WithWliToTli => (
            [text, LEVEL_SEPARATOR, &serialize_pairs(&record.pairs)?].concat(),
            label.to_string(),
        ),
    };
    Ok(FormattedExample {
        input,
        target,
        tag,
        record_id: record.id.clone(),
    })
}

/// Per-file bookkeeping written next to every training file. The record id
/// order is the alignment contract for generation files.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub dataset: String,
    pub role: Role,
    pub counts: BTreeMap<FormatTag, usize>,
    pub record_ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Corpus {
    pub examples: Vec<FormattedExample>,
    pub manifest: CorpusManifest,
}

/// Validates and builds every record of a split, preserving order.
pub fn build_corpus(split: &Split, tag: FormatTag, desc: &DatasetDescriptor) -> Result<Corpus, FormatError> {
    let mut examples = Vec::with_capacity(split.len());
    for record in split.records() {
        let violations = validate_record(record, desc);
        if !violations.is_empty() {
            return Err(FormatError::InvalidRecord {
                id: record.id.clone(),
                violations: violations
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join("; "),
            });
        }
        let example = build(record, tag).map_err(|e| FormatError::InRecord {
            id: record.id.clone(),
            source: Box::new(e),
        })?;
        examples.push(example);
    }
    let manifest = CorpusManifest {
        dataset: desc.to_string(),
        role: split.role(),
        counts: BTreeMap::from([(tag, examples.len())]),
        record_ids: examples.iter().map(|e| e.record_id.clone()).collect(),
    };
    Ok(Corpus { examples, manifest })
}

/// `<family>_<lang>_<tag>.<role>`, e.g. `scnm_en_with_wli_to_tli.train`.
pub fn training_file_name(desc: &DatasetDescriptor, tag: FormatTag, role: Role) -> String {
    format!("{}_{}.{}", desc.stem(), tag.slug(), role)
}

pub fn examples_to_jsonl(examples: &[FormattedExample]) -> String {
    let mut out = String::new();
    for e in examples {
        out.push_str(&serde_json::to_string(e).expect("examples serialize"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{DatasetFamily, Language};

    fn p(l: &str, e: &str) -> LabelEntityPair {
        LabelEntityPair::new(l, e)
    }

    fn record(pairs: Vec<LabelEntityPair>) -> MreRecord {
        MreRecord::new("r1", "The X1 launched today.", "Technology", pairs)
    }

    #[test]
    fn serialize_examples() {
        assert_eq!(
            serialize_pairs(&[p("people", "Tanaka"), p("places", "Tokyo")]).unwrap(),
            "people: Tanaka; places: Tokyo"
        );
        assert_eq!(serialize_pairs(&[]).unwrap(), "NONE");
        assert_eq!(serialize_pairs(&[p("positive", "fun")]).unwrap(), "positive: fun");
    }

    #[test]
    fn serialize_escapes() {
        assert_eq!(
            serialize_pairs(&[p("products", "A; B"), p("x", r"C:\dir")]).unwrap(),
            r"products: A\; B; x: C:\\dir"
        );
        assert!(matches!(
            serialize_pairs(&[p("a:b", "c")]),
            Err(FormatError::BadLabel { index: 0, .. })
        ));
        assert!(matches!(
            serialize_pairs(&[p("a", "c"), p("b", " ")]),
            Err(FormatError::EmptyEntity { index: 1 })
        ));
    }

    #[test]
    fn with_wli_to_tli() {
        let ex = build(&record(vec![p("products", "X1")]), FormatTag::WithWliToTli).unwrap();
        assert!(ex.input.ends_with("products: X1"));
        assert_eq!(ex.input, "The X1 launched today.\nproducts: X1");
        assert_eq!(ex.target, "Technology");
    }

    #[test]
    fn with_tli_to_wli() {
        let ex = build(&record(vec![p("products", "X1")]), FormatTag::WithTliToWli).unwrap();
        assert!(ex.input.ends_with("Technology"));
        assert_eq!(ex.target, "products: X1");
    }

    #[test]
    fn empty_wli_renders_none() {
        let ex = build(&record(vec![]), FormatTag::WithWliToTli).unwrap();
        assert!(ex.input.ends_with("NONE"));
    }

    #[test]
    fn joint_target_puts_label_first() {
        let ex = build(&record(vec![p("products", "X1")]), FormatTag::JointMre).unwrap();
        assert_eq!(ex.input, "The X1 launched today.");
        assert_eq!(ex.target, "Technology\nproducts: X1");
    }

    #[test]
    fn aliases_match_traditional() {
        let r = record(vec![p("products", "X1")]);
        for tag in FormatTag::ALL {
            let a = build(&r, tag).unwrap();
            let b = build(&r, tag.canonical()).unwrap();
            assert_eq!((a.input, a.target), (b.input, b.target));
        }
    }

    #[test]
    fn corpus_preserves_order_and_counts() {
        let d = DatasetDescriptor::builtin(DatasetFamily::Scnm, Language::En);
        let recs = (0..3)
            .map(|i| MreRecord::new(format!("r{i}"), format!("t{i}"), "Nature", vec![]))
            .collect();
        let split = Split::new(Role::Train, recs).unwrap();
        let corpus = build_corpus(&split, FormatTag::TradText, &d).unwrap();
        assert_eq!(corpus.examples.len(), 3);
        assert_eq!(corpus.manifest.record_ids, vec!["r0", "r1", "r2"]);
        assert_eq!(corpus.manifest.counts[&FormatTag::TradText], split.len());
    }

    #[test]
    fn corpus_rejects_invalid_record_by_id() {
        let d = DatasetDescriptor::builtin(DatasetFamily::Scnm, Language::En);
        let recs = vec![
            MreRecord::new("ok", "t", "Nature", vec![]),
            MreRecord::new("bad", "t", "Sports", vec![]),
        ];
        let split = Split::new(Role::Train, recs).unwrap();
        match build_corpus(&split, FormatTag::TradText, &d) {
            Err(FormatError::InvalidRecord { id, .. }) => assert_eq!(id, "bad"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn file_naming() {
        let d = DatasetDescriptor::builtin(DatasetFamily::ScposNAdj, Language::Ja);
        assert_eq!(
            training_file_name(&d, FormatTag::WithWliToTli, Role::Test),
            "scpos-nadj_ja_with_wli_to_tli.test"
        );
    }

    #[test]
    fn tag_names_parse() {
        for t in FormatTag::ALL {
            assert_eq!(t.name().parse::<FormatTag>().unwrap(), t);
        }
        assert!("FOO".parse::<FormatTag>().is_err());
    }
}
