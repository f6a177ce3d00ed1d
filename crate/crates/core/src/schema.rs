//! Dataset families, languages and their label schemas.
//!
//! The label inventories live in a bundled, line-oriented schema document
//! (`data/schemas.txt`) so that per-language surface forms are data rather
//! than code. A different document with the same layout can be loaded with
//! [`SchemaBook::parse`].

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const BUNDLED_SCHEMAS: &str = include_str!("../data/schemas.txt");

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SchemaError {
    #[error("unknown dataset family `{0}`")]
    UnknownFamily(String),
    #[error("unknown language `{0}` (expected en, zh or ja)")]
    UnknownLanguage(String),
    #[error("schema document line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("schema document has no {level} labels for {family} {language}")]
    Missing {
        family: DatasetFamily,
        language: Language,
        level: &'static str,
    },
    #[error("schema for {family} {language}: {message}")]
    Invalid {
        family: DatasetFamily,
        language: Language,
        message: String,
    },
}

/// The seven mixed-dataset task families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DatasetFamily {
    #[serde(rename = "SCNM")]
    Scnm,
    #[serde(rename = "SCPOS:RW")]
    ScposRw,
    #[serde(rename = "SCPOS:N")]
    ScposN,
    #[serde(rename = "SCPOS:Adj")]
    ScposAdj,
    #[serde(rename = "SCPOS:N&Adj")]
    ScposNAdj,
    #[serde(rename = "TCREE")]
    Tcree,
    #[serde(rename = "TCONER")]
    Tconer,
}

impl DatasetFamily {
    pub const ALL: [DatasetFamily; 7] = [
        DatasetFamily::Scnm,
        DatasetFamily::ScposRw,
        DatasetFamily::ScposN,
        DatasetFamily::ScposAdj,
        DatasetFamily::ScposNAdj,
        DatasetFamily::Tcree,
        DatasetFamily::Tconer,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetFamily::Scnm => "SCNM",
            DatasetFamily::ScposRw => "SCPOS:RW",
            DatasetFamily::ScposN => "SCPOS:N",
            DatasetFamily::ScposAdj => "SCPOS:Adj",
            DatasetFamily::ScposNAdj => "SCPOS:N&Adj",
            DatasetFamily::Tcree => "TCREE",
            DatasetFamily::Tconer => "TCONER",
        }
    }

    /// File-name friendly form, e.g. `scpos-nadj`.
    pub fn slug(self) -> &'static str {
        match self {
            DatasetFamily::Scnm => "scnm",
            DatasetFamily::ScposRw => "scpos-rw",
            DatasetFamily::ScposN => "scpos-n",
            DatasetFamily::ScposAdj => "scpos-adj",
            DatasetFamily::ScposNAdj => "scpos-nadj",
            DatasetFamily::Tcree => "tcree",
            DatasetFamily::Tconer => "tconer",
        }
    }

    /// Only TCONER has an unbounded label inventory.
    pub fn is_open_domain(self) -> bool {
        matches!(self, DatasetFamily::Tconer)
    }
}

impl fmt::Display for DatasetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetFamily {
    type Err = SchemaError;

    /// Accepts both the display name (`SCPOS:N&Adj`) and the slug
    /// (`scpos-nadj`), case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim();
        DatasetFamily::ALL
            .into_iter()
            .find(|f| f.name().eq_ignore_ascii_case(needle) || f.slug().eq_ignore_ascii_case(needle))
            .ok_or_else(|| SchemaError::UnknownFamily(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    En,
    Zh,
    Ja,
}

impl Language {
    pub const ALL: [Language; 3] = [Language::En, Language::Zh, Language::Ja];

    pub fn code(self) -> &'static str {
        match self {
            Language::En => "en",
            Language::Zh => "zh",
            Language::Ja => "ja",
        }
    }

    /// Whether the script has letter case. Label case folding is only
    /// meaningful (and only applied) for these.
    pub fn has_case(self) -> bool {
        matches!(self, Language::En)
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Language {
    type Err = SchemaError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "en" => Ok(Language::En),
            "zh" => Ok(Language::Zh),
            "ja" => Ok(Language::Ja),
            _ => Err(SchemaError::UnknownLanguage(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub text_labels: Vec<String>,
    pub word_labels: Vec<String>,
    /// When set, the label lists are a known subset only and membership is
    /// not enforced.
    pub open_domain: bool,
}

impl LabelSchema {
    pub fn new(text_labels: Vec<String>, word_labels: Vec<String>, open_domain: bool) -> Result<Self, String> {
        check_label_list("text", &text_labels)?;
        check_label_list("word", &word_labels)?;
        Ok(Self {
            text_labels,
            word_labels,
            open_domain,
        })
    }

    pub fn has_text_label(&self, label: &str) -> bool {
        self.text_labels.iter().any(|l| l == label)
    }

    pub fn has_word_label(&self, label: &str) -> bool {
        self.word_labels.iter().any(|l| l == label)
    }

    /// Position of a text label in schema order, used for tie-breaking.
    pub fn text_label_index(&self, label: &str) -> Option<usize> {
        self.text_labels.iter().position(|l| l == label)
    }
}

fn check_label_list(level: &str, labels: &[String]) -> Result<(), String> {
    let mut seen = HashSet::new();
    for label in labels {
        if label.trim().is_empty() {
            return Err(format!("empty {level} label"));
        }
        if !seen.insert(label.as_str()) {
            return Err(format!("duplicate {level} label `{label}`"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetDescriptor {
    pub family: DatasetFamily,
    pub language: Language,
    pub schema: LabelSchema,
}

impl DatasetDescriptor {
    /// Builds a descriptor backed by the bundled schema.
    pub fn builtin(family: DatasetFamily, language: Language) -> Self {
        Self {
            family,
            language,
            schema: builtin_schema(family, language),
        }
    }

    pub fn new(family: DatasetFamily, language: Language, schema: LabelSchema) -> Result<Self, SchemaError> {
        if family.is_open_domain() != schema.open_domain {
            return Err(SchemaError::Invalid {
                family,
                language,
                message: format!("open_domain must be {} for this family", family.is_open_domain()),
            });
        }
        Ok(Self {
            family,
            language,
            schema,
        })
    }

    /// Parses a family and language name pair.
    pub fn from_names(family: &str, language: &str) -> Result<Self, SchemaError> {
        Ok(Self::builtin(family.parse()?, language.parse()?))
    }

    /// All 21 admissible descriptors, family-major.
    pub fn all_builtin() -> Vec<DatasetDescriptor> {
        DatasetFamily::ALL
            .into_iter()
            .flat_map(|f| Language::ALL.into_iter().map(move |l| Self::builtin(f, l)))
            .collect()
    }

    /// `<family-slug>_<lang>`, the stem used for every file derived from
    /// this dataset.
    pub fn stem(&self) -> String {
        format!("{}_{}", self.family.slug(), self.language.code())
    }
}

impl fmt::Display for DatasetDescriptor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.family, self.language)
    }
}

/// A parsed schema document: one [`LabelSchema`] per (family, language).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SchemaBook {
    entries: BTreeMap<(DatasetFamily, Language), LabelSchema>,
}

impl SchemaBook {
    pub fn bundled() -> &'static SchemaBook {
        static BOOK: OnceLock<SchemaBook> = OnceLock::new();
        BOOK.get_or_init(|| SchemaBook::parse(BUNDLED_SCHEMAS).expect("bundled schema document is valid"))
    }

    /// Parses the `<FAMILY> <lang> <text|word> = a | b | ...` layout. Every
    /// admissible (family, language) pair must be present with both levels.
    pub fn parse(document: &str) -> Result<SchemaBook, SchemaError> {
        let mut text: BTreeMap<(DatasetFamily, Language), Vec<String>> = BTreeMap::new();
        let mut word: BTreeMap<(DatasetFamily, Language), Vec<String>> = BTreeMap::new();

        for (idx, raw) in document.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let syntax = |message: &str| SchemaError::Syntax {
                line: line_no,
                message: message.to_string(),
            };
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| syntax("expected `<FAMILY> <lang> <level> = labels`"))?;
            let parts: Vec<&str> = key.split_whitespace().collect();
            let [family, language, level] = parts.as_slice() else {
                return Err(syntax("key must have exactly three fields"));
            };
            let family: DatasetFamily = family.parse()?;
            let language: Language = language.parse()?;
            let labels: Vec<String> = value
                .split('|')
                .map(|l| l.trim().to_string())
                .filter(|l| !l.is_empty())
                .collect();
            let target = match *level {
                "text" => &mut text,
                "word" => &mut word,
                other => return Err(syntax(&format!("unknown level `{other}`"))),
            };
            if target.insert((family, language), labels).is_some() {
                return Err(syntax("duplicate key"));
            }
        }

        let mut entries = BTreeMap::new();
        for family in DatasetFamily::ALL {
            for language in Language::ALL {
                let key = (family, language);
                let t = text.remove(&key).ok_or(SchemaError::Missing {
                    family,
                    language,
                    level: "text",
                })?;
                let w = word.remove(&key).ok_or(SchemaError::Missing {
                    family,
                    language,
                    level: "word",
                })?;
                let schema =
                    LabelSchema::new(t, w, family.is_open_domain()).map_err(|message| SchemaError::Invalid {
                        family,
                        language,
                        message,
                    })?;
                entries.insert(key, schema);
            }
        }
        Ok(SchemaBook { entries })
    }

    pub fn get(&self, family: DatasetFamily, language: Language) -> &LabelSchema {
        // parse() guarantees completeness over the admissible pairs
        &self.entries[&(family, language)]
    }
}

/// The bundled label schema for an admissible (family, language) pair.
///
/// Unknown family or language names are rejected earlier, when parsing into
/// [`DatasetFamily`] / [`Language`]; see [`builtin_schema_by_name`].
pub fn builtin_schema(family: DatasetFamily, language: Language) -> LabelSchema {
    SchemaBook::bundled().get(family, language).clone()
}

pub fn builtin_schema_by_name(family: &str, language: &str) -> Result<LabelSchema, SchemaError> {
    Ok(builtin_schema(family.parse()?, language.parse()?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scnm_ja_sizes() {
        let s = builtin_schema(DatasetFamily::Scnm, Language::Ja);
        assert_eq!(s.text_labels.len(), 5);
        assert_eq!(s.word_labels.len(), 8);
        assert!(!s.open_domain);
    }

    #[test]
    fn scpos_adj_en() {
        let s = builtin_schema(DatasetFamily::ScposAdj, Language::En);
        assert_eq!(s.text_labels, vec!["positive", "negative"]);
        assert_eq!(s.word_labels, vec!["positive", "negative"]);
    }

    #[test]
    fn tconer_is_open_domain() {
        for lang in Language::ALL {
            assert!(builtin_schema(DatasetFamily::Tconer, lang).open_domain);
        }
    }

    #[test]
    fn unknown_family_is_rejected() {
        let err = builtin_schema_by_name("SCXX", "en").unwrap_err();
        assert!(err.to_string().contains("unknown dataset family"));
        assert!(builtin_schema_by_name("SCNM", "fr").is_err());
    }

    #[test]
    fn family_names_round_trip() {
        for f in DatasetFamily::ALL {
            assert_eq!(f.name().parse::<DatasetFamily>().unwrap(), f);
            assert_eq!(f.slug().parse::<DatasetFamily>().unwrap(), f);
        }
    }

    #[test]
    fn twenty_one_descriptors() {
        let all = DatasetDescriptor::all_builtin();
        assert_eq!(all.len(), 21);
        for d in &all {
            assert_eq!(d.family == DatasetFamily::Tconer, d.schema.open_domain);
        }
    }

    #[test]
    fn builtin_schema_is_pure() {
        for d in DatasetDescriptor::all_builtin() {
            assert_eq!(builtin_schema(d.family, d.language), d.schema);
        }
    }

    #[test]
    fn parse_rejects_incomplete_documents() {
        let err = SchemaBook::parse("SCNM en text = a | b\n").unwrap_err();
        assert!(matches!(err, SchemaError::Missing { .. }));
        let err = SchemaBook::parse("SCNM en text a\n").unwrap_err();
        assert!(matches!(err, SchemaError::Syntax { line: 1, .. }));
    }

    #[test]
    fn descriptor_rejects_open_domain_mismatch() {
        let schema = builtin_schema(DatasetFamily::Scnm, Language::En);
        assert!(DatasetDescriptor::new(DatasetFamily::Tconer, Language::En, schema).is_err());
    }
}
