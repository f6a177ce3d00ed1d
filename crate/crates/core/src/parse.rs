//! Tolerant parsing of model generations back into structured predictions.
//!
//! Nothing here fails: malformed input is reported through [`ParseStatus`].

use serde::{Deserialize, Serialize};

use crate::format::{serialize_pairs, FormatTag, TargetSide, EMPTY_PAIRS, LEVEL_SEPARATOR};
use crate::record::LabelEntityPair;
use crate::schema::LabelSchema;

/// Ordered from best to worst so that combining parts is `max`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ParseStatus {
    /// The input was exactly in canonical form.
    Clean,
    /// Something usable was extracted after applying recovery rules.
    Recovered,
    /// Nothing usable; the prediction carries no label and no pairs.
    Unparseable,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPairs {
    pub pairs: Vec<LabelEntityPair>,
    pub status: ParseStatus,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedLabel {
    pub label: Option<String>,
    pub status: ParseStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ParsedPrediction {
    pub text_label: Option<String>,
    pub pairs: Vec<LabelEntityPair>,
    pub status: ParseStatus,
}

impl ParsedPrediction {
    fn unparseable() -> Self {
        Self {
            text_label: None,
            pairs: Vec::new(),
            status: ParseStatus::Unparseable,
        }
    }
}

/// Splits on unescaped `;`, resolving `\\` and `\;`. Any other backslash is
/// kept literally.
fn split_segments(s: &str) -> Vec<String> {
    let mut segments = Vec::new();
    let mut current = String::new();
    let mut chars = s.chars().peekable();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.peek() {
                Some(&next @ ('\\' | ';')) => {
                    current.push(next);
                    chars.next();
                }
                _ => current.push('\\'),
            },
            ';' => segments.push(std::mem::take(&mut current)),
            other => current.push(other),
        }
    }
    segments.push(current);
    segments
}

/// The recovery path: trims whitespace, accepts a missing space after the
/// colon, and drops empty or colon-less segments.
fn recover_pairs(s: &str) -> Vec<LabelEntityPair> {
    split_segments(s)
        .into_iter()
        .filter_map(|seg| {
            let (label, entity) = seg.split_once(':')?;
            let (label, entity) = (label.trim(), entity.trim());
            (!label.is_empty() && !entity.is_empty()).then(|| LabelEntityPair::new(label, entity))
        })
        .collect()
}

/// Inverse of [`serialize_pairs`]. Canonical strings come back `Clean`;
/// near misses are `Recovered`; strings with no `label: entity` segment are
/// `Unparseable`.
pub fn parse_pairs(s: &str) -> ParsedPairs {
    if s == EMPTY_PAIRS {
        return ParsedPairs {
            pairs: Vec::new(),
            status: ParseStatus::Clean,
        };
    }
    if s.trim() == EMPTY_PAIRS {
        return ParsedPairs {
            pairs: Vec::new(),
            status: ParseStatus::Recovered,
        };
    }
    let pairs = recover_pairs(s);
    if pairs.is_empty() {
        return ParsedPairs {
            pairs,
            status: ParseStatus::Unparseable,
        };
    }
    let status = match serialize_pairs(&pairs) {
        Ok(canonical) if canonical == s => ParseStatus::Clean,
        _ => ParseStatus::Recovered,
    };
    ParsedPairs { pairs, status }
}

/// Minimum length, in characters, of a generation accepted as a label
/// prefix.
pub const MIN_PREFIX_CHARS: usize = 3;

/// Maps a generation onto a schema text label.
///
/// Only a byte-exact label is `Clean`. Trimmed exact matches, unique
/// case-insensitive matches and unique prefixes of at least
/// [`MIN_PREFIX_CHARS`] characters are `Recovered`. For open-domain schemas
/// any non-empty trimmed string is accepted as-is.
pub fn parse_text_label(s: &str, schema: &LabelSchema) -> ParsedLabel {
    let recovered = |label: &str| ParsedLabel {
        label: Some(label.to_string()),
        status: ParseStatus::Recovered,
    };
    let trimmed = s.trim();
    if trimmed.is_empty() {
        return ParsedLabel {
            label: None,
            status: ParseStatus::Unparseable,
        };
    }
    if schema.open_domain || schema.has_text_label(s) {
        if s == trimmed {
            return ParsedLabel {
                label: Some(s.to_string()),
                status: ParseStatus::Clean,
            };
        }
        if schema.open_domain {
            return recovered(trimmed);
        }
    }
    if schema.has_text_label(trimmed) {
        return recovered(trimmed);
    }

    let folded = trimmed.to_lowercase();
    let unique = |matches: Vec<&String>| (matches.len() == 1).then(|| matches[0].clone());

    let by_case = schema
        .text_labels
        .iter()
        .filter(|l| l.to_lowercase() == folded)
        .collect();
    if let Some(label) = unique(by_case) {
        return recovered(&label);
    }
    if trimmed.chars().count() >= MIN_PREFIX_CHARS {
        let by_prefix = schema
            .text_labels
            .iter()
            .filter(|l| l.to_lowercase().starts_with(&folded))
            .collect();
        if let Some(label) = unique(by_prefix) {
            return recovered(&label);
        }
    }
    ParsedLabel {
        label: None,
        status: ParseStatus::Unparseable,
    }
}

/// Parses a generation according to the target side of `tag`.
///
/// Joint targets are split at the first newline into label and pairs. If one
/// half is unusable the other is still kept and the result is `Recovered`.
pub fn parse_generation(generation: &str, tag: FormatTag, schema: &LabelSchema) -> ParsedPrediction {
    match tag.target_side() {
        TargetSide::Word => {
            let parsed = parse_pairs(generation);
            ParsedPrediction {
                text_label: None,
                pairs: parsed.pairs,
                status: parsed.status,
            }
        }
        TargetSide::Text => {
            let parsed = parse_text_label(generation, schema);
            ParsedPrediction {
                text_label: parsed.label,
                pairs: Vec::new(),
                status: parsed.status,
            }
        }
        TargetSide::Both => parse_joint(generation, schema),
    }
}

fn parse_joint(generation: &str, schema: &LabelSchema) -> ParsedPrediction {
    let Some((head, tail)) = generation.split_once(LEVEL_SEPARATOR) else {
        // no separator: salvage whichever half the line looks like
        let label = parse_text_label(generation, schema);
        if label.label.is_some() {
            return ParsedPrediction {
                text_label: label.label,
                pairs: Vec::new(),
                status: ParseStatus::Recovered,
            };
        }
        let pairs = parse_pairs(generation);
        if pairs.status == ParseStatus::Unparseable {
            return ParsedPrediction::unparseable();
        }
        return ParsedPrediction {
            text_label: None,
            pairs: pairs.pairs,
            status: ParseStatus::Recovered,
        };
    };

    let label = parse_text_label(head, schema);
    let pairs = parse_pairs(tail);
    match (label.status, pairs.status) {
        (ParseStatus::Unparseable, ParseStatus::Unparseable) => ParsedPrediction::unparseable(),
        (a, b) if a == ParseStatus::Unparseable || b == ParseStatus::Unparseable => ParsedPrediction {
            text_label: label.label,
            pairs: pairs.pairs,
            status: ParseStatus::Recovered,
        },
        (a, b) => ParsedPrediction {
            text_label: label.label,
            pairs: pairs.pairs,
            status: a.max(b),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{builtin_schema, DatasetFamily, Language};

    fn p(l: &str, e: &str) -> LabelEntityPair {
        LabelEntityPair::new(l, e)
    }

    #[test]
    fn clean_pairs() {
        let r = parse_pairs("people: Tanaka; places: Tokyo");
        assert_eq!(r.status, ParseStatus::Clean);
        assert_eq!(r.pairs, vec![p("people", "Tanaka"), p("places", "Tokyo")]);
    }

    #[test]
    fn recovered_pairs() {
        let r = parse_pairs("people:Tanaka ;places: Tokyo ");
        assert_eq!(r.status, ParseStatus::Recovered);
        assert_eq!(r.pairs, vec![p("people", "Tanaka"), p("places", "Tokyo")]);
    }

    #[test]
    fn unparseable_pairs() {
        let r = parse_pairs("lorem ipsum");
        assert_eq!(r.status, ParseStatus::Unparseable);
        assert!(r.pairs.is_empty());
        assert_eq!(parse_pairs("").status, ParseStatus::Unparseable);
        assert_eq!(parse_pairs(";;").status, ParseStatus::Unparseable);
    }

    #[test]
    fn none_sentinel() {
        assert_eq!(parse_pairs("NONE").status, ParseStatus::Clean);
        let r = parse_pairs(" NONE\n");
        assert_eq!(r.status, ParseStatus::Recovered);
        assert!(r.pairs.is_empty());
    }

    #[test]
    fn escapes_resolve() {
        let r = parse_pairs(r"products: A\; B; x: C:\\dir");
        assert_eq!(r.status, ParseStatus::Clean);
        assert_eq!(r.pairs, vec![p("products", "A; B"), p("x", r"C:\dir")]);
        // stray backslash is kept and forces recovery
        let r = parse_pairs(r"x: a\b");
        assert_eq!(r.pairs, vec![p("x", r"a\b")]);
        assert_eq!(r.status, ParseStatus::Recovered);
    }

    #[test]
    fn drops_bad_segments() {
        let r = parse_pairs("people: Tanaka; garbage; : x; y: ");
        assert_eq!(r.pairs, vec![p("people", "Tanaka")]);
        assert_eq!(r.status, ParseStatus::Recovered);
    }

    #[test]
    fn cjk_pairs() {
        let r = parse_pairs("人名: 田中; 地名: 東京");
        assert_eq!(r.status, ParseStatus::Clean);
        assert_eq!(r.pairs, vec![p("人名", "田中"), p("地名", "東京")]);
    }

    #[test]
    fn text_label_rules() {
        let scnm = builtin_schema(DatasetFamily::Scnm, Language::En);
        let scpos = builtin_schema(DatasetFamily::ScposAdj, Language::En);

        let r = parse_text_label("Technology", &scnm);
        assert_eq!((r.label.as_deref(), r.status), (Some("Technology"), ParseStatus::Clean));

        let r = parse_text_label(" negative\n", &scpos);
        assert_eq!(
            (r.label.as_deref(), r.status),
            (Some("negative"), ParseStatus::Recovered)
        );

        let r = parse_text_label("Tech", &scnm);
        assert_eq!(
            (r.label.as_deref(), r.status),
            (Some("Technology"), ParseStatus::Recovered)
        );

        let r = parse_text_label("NATURE", &scnm);
        assert_eq!(r.label.as_deref(), Some("Nature"));

        // too short for the prefix rule
        assert_eq!(parse_text_label("Te", &scnm).status, ParseStatus::Unparseable);
        // ambiguous prefix
        let tcree = builtin_schema(DatasetFamily::Tcree, Language::En);
        assert_eq!(parse_text_label("spo", &tcree).label.as_deref(), Some("sports"));
        assert_eq!(parse_text_label("Sports", &scnm).status, ParseStatus::Unparseable);
    }

    #[test]
    fn open_domain_accepts_verbatim() {
        let s = builtin_schema(DatasetFamily::Tconer, Language::En);
        let r = parse_text_label("Astronomy", &s);
        assert_eq!((r.label.as_deref(), r.status), (Some("Astronomy"), ParseStatus::Clean));
        let r = parse_text_label(" Astronomy ", &s);
        assert_eq!(
            (r.label.as_deref(), r.status),
            (Some("Astronomy"), ParseStatus::Recovered)
        );
        assert_eq!(parse_text_label("  ", &s).status, ParseStatus::Unparseable);
    }

    #[test]
    fn generation_routing() {
        let s = builtin_schema(DatasetFamily::Scnm, Language::En);
        let g = parse_generation("Technology\nproducts: X1", FormatTag::JointMre, &s);
        assert_eq!(g.status, ParseStatus::Clean);
        assert_eq!(g.text_label.as_deref(), Some("Technology"));
        assert_eq!(g.pairs, vec![p("products", "X1")]);

        let g = parse_generation("Technology\nblah", FormatTag::JointMre, &s);
        assert_eq!(g.status, ParseStatus::Recovered);
        assert!(g.pairs.is_empty());

        let g = parse_generation("Technology", FormatTag::JointMre, &s);
        assert_eq!(
            (g.text_label.as_deref(), g.status),
            (Some("Technology"), ParseStatus::Recovered)
        );

        let g = parse_generation("???\n???", FormatTag::JointMre, &s);
        assert_eq!(g, ParsedPrediction::unparseable());

        let g = parse_generation("products: X1", FormatTag::WithTliToWli, &s);
        assert!(g.text_label.is_none());
        assert_eq!(g.pairs.len(), 1);

        let g = parse_generation("Nature", FormatTag::WithWliToTli, &s);
        assert_eq!(g.text_label.as_deref(), Some("Nature"));
    }
}
