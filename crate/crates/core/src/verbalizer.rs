//! Knowledgeable verbalizers: per-label word lists whose mask-position
//! probabilities are summed into label scores.
//!
//! # Word list file format
//!
//! Used both for external ("origin") verbalizers and for exports:
//!
//! ```text
//! [Technology]
//! software
//! robot	0.5
//!
//! [Nature]
//! forest
//! ```
//!
//! A `[label]` line opens a block; every following non-blank line is one
//! word, optionally followed by a tab and a non-negative weight (default 1).
//! Blocks may appear in any order; the verbalizer always uses schema order.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{shuffle, stream_rng, streams, Role, Split};
use crate::schema::{DatasetDescriptor, LabelSchema};

pub const TEXT_SLOT: &str = "{text}";
pub const MASK_SLOT: &str = "{mask}";
/// Words per label unless configured otherwise.
pub const DEFAULT_WORDS_PER_LABEL: usize = 100;

#[derive(Debug, Error)]
pub enum VerbalizerError {
    #[error("KV requires fixed label schema; {0} is open-domain")]
    OpenDomain(String),
    #[error("verbalizer must be built from a train split, got {0}")]
    WrongRole(Role),
    #[error("label `{0}` has no word-level entities to build from")]
    NoWli(String),
    #[error("words per label must be positive")]
    ZeroK,
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("word list line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("word list line {line}: label `{label}` is not in the schema")]
    UnknownLabel { line: usize, label: String },
    #[error("word list has no block for schema label `{0}`")]
    MissingLabel(String),
    #[error("word list block for `{0}` is empty")]
    EmptyLabel(String),
    #[error("invalid verbalizer: {0}")]
    Invalid(String),
    #[error("template must contain exactly one {slot} placeholder, found {found}")]
    Template { slot: &'static str, found: usize },
    #[error("prompt must contain exactly one {MASK_SLOT} slot, found {0}")]
    MaskSlots(usize),
    #[error("probability provider failed on prompt `{prompt_id}`: {source}")]
    Provider {
        prompt_id: String,
        #[source]
        source: ProviderError,
    },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("{0}")]
pub struct ProviderError(pub String);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedWord {
    pub word: String,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelWords {
    pub label: String,
    pub words: Vec<WeightedWord>,
}

/// Ranked word lists, one per text label, in schema order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verbalizer {
    labels: Vec<LabelWords>,
    k: usize,
}

impl Verbalizer {
    pub fn new(labels: Vec<LabelWords>, k: usize) -> Result<Self, VerbalizerError> {
        if k == 0 {
            return Err(VerbalizerError::ZeroK);
        }
        let mut seen_labels = HashSet::new();
        for lw in &labels {
            if !seen_labels.insert(lw.label.as_str()) {
                return Err(VerbalizerError::Invalid(format!("label `{}` listed twice", lw.label)));
            }
            if lw.words.len() > k {
                return Err(VerbalizerError::Invalid(format!(
                    "label `{}` has {} words, more than k = {k}",
                    lw.label,
                    lw.words.len()
                )));
            }
            let mut seen = HashSet::new();
            for w in &lw.words {
                if !seen.insert(w.word.as_str()) {
                    return Err(VerbalizerError::Invalid(format!(
                        "word `{}` repeated under `{}`",
                        w.word, lw.label
                    )));
                }
                if !(w.weight.is_finite() && w.weight >= 0.0) {
                    return Err(VerbalizerError::Invalid(format!(
                        "word `{}` has weight {}",
                        w.word, w.weight
                    )));
                }
            }
        }
        Ok(Self { labels, k })
    }

    /// Unit-weight verbalizer from plain word lists.
    pub fn from_words<L, W>(lists: L, k: usize) -> Result<Self, VerbalizerError>
    where
        L: IntoIterator<Item = (String, W)>,
        W: IntoIterator<Item = String>,
    {
        let labels = lists
            .into_iter()
            .map(|(label, words)| LabelWords {
                label,
                words: words
                    .into_iter()
                    .map(|word| WeightedWord { word, weight: 1.0 })
                    .collect(),
            })
            .collect();
        Self::new(labels, k)
    }

    pub fn labels(&self) -> &[LabelWords] {
        &self.labels
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn words_for(&self, label: &str) -> Option<&[WeightedWord]> {
        self.labels
            .iter()
            .find(|l| l.label == label)
            .map(|l| l.words.as_slice())
    }

    pub fn total_words(&self) -> usize {
        self.labels.iter().map(|l| l.words.len()).sum()
    }

    /// Every word across labels once, in first-occurrence order.
    pub fn query_words(&self) -> Vec<String> {
        let mut seen = HashSet::new();
        self.labels
            .iter()
            .flat_map(|l| l.words.iter())
            .filter(|w| seen.insert(w.word.as_str()))
            .map(|w| w.word.clone())
            .collect()
    }

    /// Renders the word list file format.
    pub fn to_kv_string(&self) -> String {
        let mut out = String::new();
        for (i, lw) in self.labels.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            out.push('[');
            out.push_str(&lw.label);
            out.push_str("]\n");
            for w in &lw.words {
                out.push_str(&w.word);
                if w.weight != 1.0 {
                    out.push('\t');
                    out.push_str(&w.weight.to_string());
                }
                out.push('\n');
            }
        }
        out
    }

    /// A baseline with the same per-label list sizes whose words are randomly
    /// reassigned across labels. Words landing twice under one label are
    /// kept once.
    pub fn shuffled(&self, seed: u64) -> Verbalizer {
        let mut pool: Vec<WeightedWord> = self.labels.iter().flat_map(|l| l.words.clone()).collect();
        let mut rng = stream_rng(seed, streams::KV_SHUFFLE);
        shuffle(&mut rng, &mut pool);
        let mut pool = pool.into_iter();
        let labels = self
            .labels
            .iter()
            .map(|l| {
                let mut seen = HashSet::new();
                let words = pool
                    .by_ref()
                    .take(l.words.len())
                    .filter(|w| seen.insert(w.word.clone()))
                    .collect();
                LabelWords {
                    label: l.label.clone(),
                    words,
                }
            })
            .collect();
        Verbalizer { labels, k: self.k }
    }
}

/// Top-`k` most frequent entity strings per text label, counted over the
/// pairs of records carrying that label. Ties go to the lexicographically
/// smaller word. All weights are 1.
pub fn build_from_wli(train: &Split, desc: &DatasetDescriptor, k: usize) -> Result<Verbalizer, VerbalizerError> {
    if desc.schema.open_domain {
        return Err(VerbalizerError::OpenDomain(desc.to_string()));
    }
    if train.role() != Role::Train {
        return Err(VerbalizerError::WrongRole(train.role()));
    }
    if k == 0 {
        return Err(VerbalizerError::ZeroK);
    }

    let mut counts: HashMap<&str, HashMap<&str, usize>> = HashMap::new();
    for record in train.records() {
        let table = counts.entry(record.text_label.as_str()).or_default();
        for pair in &record.pairs {
            let entity = pair.entity.trim();
            if !entity.is_empty() {
                *table.entry(entity).or_default() += 1;
            }
        }
    }

    let mut labels = Vec::with_capacity(desc.schema.text_labels.len());
    for label in &desc.schema.text_labels {
        let table = counts.get(label.as_str()).filter(|t| !t.is_empty());
        let Some(table) = table else {
            return Err(VerbalizerError::NoWli(label.clone()));
        };
        let mut ranked: Vec<(&str, usize)> = table.iter().map(|(w, c)| (*w, *c)).collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(k);
        labels.push(LabelWords {
            label: label.clone(),
            words: ranked
                .into_iter()
                .map(|(w, _)| WeightedWord {
                    word: w.to_string(),
                    weight: 1.0,
                })
                .collect(),
        });
    }
    Verbalizer::new(labels, k)
}

pub fn load_external_kv(path: &Path, schema: &LabelSchema, k: usize) -> Result<Verbalizer, VerbalizerError> {
    let content = fs::read_to_string(path).map_err(|source| VerbalizerError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_kv(&content, schema, k)
}

/// Parses the word list format against a schema, keeping file order within
/// each block and truncating to `k` words.
pub fn parse_kv(content: &str, schema: &LabelSchema, k: usize) -> Result<Verbalizer, VerbalizerError> {
    if schema.open_domain {
        return Err(VerbalizerError::OpenDomain("open-domain schema".into()));
    }
    if k == 0 {
        return Err(VerbalizerError::ZeroK);
    }
    let mut blocks: HashMap<String, Vec<WeightedWord>> = HashMap::new();
    let mut current: Option<String> = None;

    for (idx, raw) in content.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(label) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            let label = label.trim().to_string();
            if !schema.has_text_label(&label) {
                return Err(VerbalizerError::UnknownLabel { line: line_no, label });
            }
            if blocks.contains_key(&label) {
                return Err(VerbalizerError::Syntax {
                    line: line_no,
                    message: format!("second block for `{label}`"),
                });
            }
            blocks.insert(label.clone(), Vec::new());
            current = Some(label);
            continue;
        }
        let Some(label) = &current else {
            return Err(VerbalizerError::Syntax {
                line: line_no,
                message: "word before the first [label] header".into(),
            });
        };
        let (word, weight) = match line.rsplit_once('\t') {
            Some((w, weight)) => {
                let weight: f64 = weight.trim().parse().map_err(|_| VerbalizerError::Syntax {
                    line: line_no,
                    message: format!("bad weight `{weight}`"),
                })?;
                if !(weight.is_finite() && weight >= 0.0) {
                    return Err(VerbalizerError::Syntax {
                        line: line_no,
                        message: format!("weight must be non-negative, got {weight}"),
                    });
                }
                (w.trim(), weight)
            }
            None => (line, 1.0),
        };
        let words = blocks.get_mut(label).expect("block opened above");
        if words.len() < k && !words.iter().any(|w| w.word == word) {
            words.push(WeightedWord {
                word: word.to_string(),
                weight,
            });
        }
    }

    let mut labels = Vec::with_capacity(schema.text_labels.len());
    for label in &schema.text_labels {
        let words = blocks
            .remove(label)
            .ok_or_else(|| VerbalizerError::MissingLabel(label.clone()))?;
        if words.is_empty() {
            return Err(VerbalizerError::EmptyLabel(label.clone()));
        }
        labels.push(LabelWords {
            label: label.clone(),
            words,
        });
    }
    Verbalizer::new(labels, k)
}

/// A prompt with exactly one mask slot, kept as the text on either side of
/// the slot so that input text can never add a second slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskedPrompt {
    before: String,
    after: String,
}

impl MaskedPrompt {
    pub fn new(before: impl Into<String>, after: impl Into<String>) -> Self {
        Self {
            before: before.into(),
            after: after.into(),
        }
    }

    /// Parses a rendered prompt; it must contain exactly one `{mask}`.
    pub fn parse(s: &str) -> Result<Self, VerbalizerError> {
        let slots = s.matches(MASK_SLOT).count();
        if slots != 1 {
            return Err(VerbalizerError::MaskSlots(slots));
        }
        let (before, after) = s.split_once(MASK_SLOT).expect("one slot present");
        Ok(Self::new(before, after))
    }

    pub fn before(&self) -> &str {
        &self.before
    }

    pub fn after(&self) -> &str {
        &self.after
    }
}

impl fmt::Display for MaskedPrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{MASK_SLOT}{}", self.before, self.after)
    }
}

/// Substitutes `text` into a template holding one `{text}` and one `{mask}`.
pub fn apply_template(text: &str, template: &str) -> Result<MaskedPrompt, VerbalizerError> {
    for slot in [TEXT_SLOT, MASK_SLOT] {
        let found = template.matches(slot).count();
        if found != 1 {
            return Err(VerbalizerError::Template { slot, found });
        }
    }
    let (before, after) = template.split_once(MASK_SLOT).expect("checked above");
    Ok(MaskedPrompt::new(
        before.replacen(TEXT_SLOT, text, 1),
        after.replacen(TEXT_SLOT, text, 1),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordMass {
    pub prob: f64,
    /// False when the provider could not actually score the word.
    pub covered: bool,
}

/// Mask-position probabilities for (at least) the queried words.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MaskDistribution {
    masses: HashMap<String, WordMass>,
}

impl MaskDistribution {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, word: impl Into<String>, prob: f64, covered: bool) -> Result<(), ProviderError> {
        let word = word.into();
        if !(0.0..=1.0).contains(&prob) {
            return Err(ProviderError(format!(
                "probability {prob} for `{word}` is outside [0, 1]"
            )));
        }
        self.masses.insert(word, WordMass { prob, covered });
        Ok(())
    }

    pub fn from_probs<'a>(probs: impl IntoIterator<Item = (&'a str, f64)>) -> Result<Self, ProviderError> {
        let mut d = Self::new();
        for (w, p) in probs {
            d.insert(w, p, true)?;
        }
        Ok(d)
    }

    pub fn get(&self, word: &str) -> Option<WordMass> {
        self.masses.get(word).copied()
    }

    /// Probability used for scoring: 0 for absent or uncovered words.
    pub fn effective(&self, word: &str) -> f64 {
        match self.masses.get(word) {
            Some(m) if m.covered => m.prob,
            _ => 0.0,
        }
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    pub fn covers_any<'a>(&self, words: impl IntoIterator<Item = &'a str>) -> bool {
        words.into_iter().any(|w| self.masses.get(w).is_some_and(|m| m.covered))
    }

    /// Every mass multiplied by `c`. The result is an unnormalized score
    /// table and may leave `[0, 1]`.
    pub fn scaled(&self, c: f64) -> Self {
        Self {
            masses: self
                .masses
                .iter()
                .map(|(w, m)| {
                    (
                        w.clone(),
                        WordMass {
                            prob: m.prob * c,
                            covered: m.covered,
                        },
                    )
                })
                .collect(),
        }
    }
}

/// Deterministic source of mask-position word probabilities.
pub trait ProbabilityProvider {
    fn score(&self, prompt: &MaskedPrompt, words: &[String]) -> Result<MaskDistribution, ProviderError>;
}

impl<P: ProbabilityProvider + ?Sized> ProbabilityProvider for &P {
    fn score(&self, prompt: &MaskedPrompt, words: &[String]) -> Result<MaskDistribution, ProviderError> {
        (**self).score(prompt, words)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AggregationStrategy {
    /// Weighted sum of word probabilities.
    #[default]
    Sum,
    /// Weighted sum divided by the label's word count.
    Mean,
}

impl fmt::Display for AggregationStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AggregationStrategy::Sum => "sum",
            AggregationStrategy::Mean => "mean",
        })
    }
}

impl std::str::FromStr for AggregationStrategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "sum" => Ok(Self::Sum),
            "mean" => Ok(Self::Mean),
            other => Err(format!("unknown aggregation `{other}` (expected sum or mean)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabelScore {
    pub label: String,
    pub score: f64,
}

/// Per-label score: `sum(weight(w) * p(w))` over the label's words, with
/// uncovered words counted as 0.
pub fn aggregate(dist: &MaskDistribution, v: &Verbalizer, strategy: AggregationStrategy) -> Vec<LabelScore> {
    v.labels
        .iter()
        .map(|lw| {
            let sum: f64 = lw.words.iter().map(|w| w.weight * dist.effective(&w.word)).sum();
            let score = match strategy {
                AggregationStrategy::Sum => sum,
                AggregationStrategy::Mean if lw.words.is_empty() => 0.0,
                AggregationStrategy::Mean => sum / lw.words.len() as f64,
            };
            LabelScore {
                label: lw.label.clone(),
                score,
            }
        })
        .collect()
}

/// Index of the highest score; the earliest label wins ties.
pub fn argmax(scores: &[LabelScore]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        match best {
            Some(b) if scores[b].score >= s.score => {}
            _ => best = Some(i),
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Prediction {
    pub label: String,
    pub scores: Vec<LabelScore>,
    /// The provider covered none of the verbalizer words, so the label is
    /// the first one by tie-break only.
    pub no_coverage: bool,
}

/// Queries the provider once with every verbalizer word and returns the
/// best-scoring label.
pub fn predict<P: ProbabilityProvider + ?Sized>(
    prompt_id: &str,
    prompt: &MaskedPrompt,
    v: &Verbalizer,
    provider: &P,
    strategy: AggregationStrategy,
) -> Result<Prediction, VerbalizerError> {
    let queries = v.query_words();
    let dist = provider
        .score(prompt, &queries)
        .map_err(|source| VerbalizerError::Provider {
            prompt_id: prompt_id.to_string(),
            source,
        })?;
    Ok(predict_from_distribution(&dist, v, strategy, &queries))
}

/// [`predict`] on a rendered prompt string.
pub fn predict_text<P: ProbabilityProvider + ?Sized>(
    prompt_id: &str,
    prompt: &str,
    v: &Verbalizer,
    provider: &P,
    strategy: AggregationStrategy,
) -> Result<Prediction, VerbalizerError> {
    let prompt = MaskedPrompt::parse(prompt)?;
    predict(prompt_id, &prompt, v, provider, strategy)
}

pub fn predict_from_distribution(
    dist: &MaskDistribution,
    v: &Verbalizer,
    strategy: AggregationStrategy,
    queries: &[String],
) -> Prediction {
    let scores = aggregate(dist, v, strategy);
    let best = argmax(&scores).expect("verbalizer has at least one label");
    Prediction {
        label: scores[best].label.clone(),
        no_coverage: !dist.covers_any(queries.iter().map(String::as_str)),
        scores,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::{LabelEntityPair, MreRecord};
    use crate::schema::{builtin_schema, DatasetFamily, Language};

    fn v(lists: &[(&str, &[&str])]) -> Verbalizer {
        Verbalizer::from_words(
            lists
                .iter()
                .map(|(l, ws)| (l.to_string(), ws.iter().map(|w| w.to_string()).collect::<Vec<_>>())),
            100,
        )
        .unwrap()
    }

    fn scores(s: &[LabelScore]) -> Vec<f64> {
        s.iter().map(|x| x.score).collect()
    }

    struct Fixed(MaskDistribution);
    impl ProbabilityProvider for Fixed {
        fn score(&self, _: &MaskedPrompt, _: &[String]) -> Result<MaskDistribution, ProviderError> {
            Ok(self.0.clone())
        }
    }

    struct Failing;
    impl ProbabilityProvider for Failing {
        fn score(&self, _: &MaskedPrompt, _: &[String]) -> Result<MaskDistribution, ProviderError> {
            Err(ProviderError("backend down".into()))
        }
    }

    #[test]
    fn aggregate_sums() {
        let verb = v(&[("A", &["good", "great"]), ("B", &["bad"])]);
        let d = MaskDistribution::from_probs([("good", 0.3), ("great", 0.2), ("bad", 0.4)]).unwrap();
        let s = scores(&aggregate(&d, &verb, AggregationStrategy::Sum));
        assert!((s[0] - 0.5).abs() < 1e-12 && (s[1] - 0.4).abs() < 1e-12);

        let m = scores(&aggregate(&d, &verb, AggregationStrategy::Mean));
        assert!((m[0] - 0.25).abs() < 1e-12 && (m[1] - 0.4).abs() < 1e-12);
    }

    #[test]
    fn aggregate_zero_and_shared() {
        let verb = v(&[("A", &["x", "shared"]), ("B", &["shared"])]);
        let zero = MaskDistribution::from_probs([("x", 0.0), ("shared", 0.0)]).unwrap();
        assert_eq!(
            scores(&aggregate(&zero, &verb, AggregationStrategy::Sum)),
            vec![0.0, 0.0]
        );
        let d = MaskDistribution::from_probs([("shared", 0.2)]).unwrap();
        assert_eq!(scores(&aggregate(&d, &verb, AggregationStrategy::Sum)), vec![0.2, 0.2]);
    }

    #[test]
    fn uncovered_words_score_zero() {
        let verb = v(&[("A", &["x"]), ("B", &["y"])]);
        let mut d = MaskDistribution::new();
        d.insert("x", 0.9, false).unwrap();
        d.insert("y", 0.1, true).unwrap();
        assert_eq!(scores(&aggregate(&d, &verb, AggregationStrategy::Sum)), vec![0.0, 0.1]);
    }

    #[test]
    fn predict_argmax_and_ties() {
        let verb = v(&[("A", &["good", "great"]), ("B", &["bad"])]);
        let prompt = MaskedPrompt::parse("t {mask}").unwrap();
        let d = MaskDistribution::from_probs([("good", 0.3), ("great", 0.2), ("bad", 0.4)]).unwrap();
        let p = predict("p1", &prompt, &verb, &Fixed(d), AggregationStrategy::Sum).unwrap();
        assert_eq!(p.label, "A");
        assert!(!p.no_coverage);

        let d = MaskDistribution::from_probs([("good", 0.2), ("bad", 0.2)]).unwrap();
        let p = predict("p1", &prompt, &verb, &Fixed(d), AggregationStrategy::Sum).unwrap();
        assert_eq!(p.label, "A");

        let p = predict(
            "p1",
            &prompt,
            &verb,
            &Fixed(MaskDistribution::new()),
            AggregationStrategy::Sum,
        )
        .unwrap();
        assert_eq!(p.label, "A");
        assert!(p.no_coverage);
    }

    #[test]
    fn predict_errors() {
        let verb = v(&[("A", &["good"])]);
        let err = predict_text("p7", "no slot", &verb, &Failing, AggregationStrategy::Sum).unwrap_err();
        assert!(matches!(err, VerbalizerError::MaskSlots(0)));
        let err = predict_text("p7", "{mask} {mask}", &verb, &Failing, AggregationStrategy::Sum).unwrap_err();
        assert!(matches!(err, VerbalizerError::MaskSlots(2)));
        let err = predict_text("p7", "x {mask}", &verb, &Failing, AggregationStrategy::Sum).unwrap_err();
        match err {
            VerbalizerError::Provider { prompt_id, .. } => assert_eq!(prompt_id, "p7"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn templates() {
        let p = apply_template("Rain fell.", "{text} Topic: {mask}").unwrap();
        assert_eq!(p.to_string(), "Rain fell. Topic: {mask}");
        assert_eq!(p.before(), "Rain fell. Topic: ");
        let p = apply_template("a", "{mask} is the topic of: {text}").unwrap();
        assert_eq!((p.before(), p.after()), ("", " is the topic of: a"));
        // text that itself looks like a slot stays inert
        let p = apply_template("{mask}", "{text} {mask}").unwrap();
        assert_eq!(p.before(), "{mask} ");

        assert!(matches!(
            apply_template("x", "{text} {mask} {mask}"),
            Err(VerbalizerError::Template {
                slot: MASK_SLOT,
                found: 2
            })
        ));
        assert!(matches!(
            apply_template("x", "Topic: {mask}"),
            Err(VerbalizerError::Template {
                slot: TEXT_SLOT,
                found: 0
            })
        ));
    }

    fn split_with(label_entities: &[(&str, &[&str])]) -> Split {
        let mut recs = Vec::new();
        for (i, (label, ents)) in label_entities.iter().enumerate() {
            recs.push(MreRecord::new(
                format!("r{i}"),
                "t",
                *label,
                ents.iter().map(|e| LabelEntityPair::new("positive", *e)).collect(),
            ));
        }
        Split::new(Role::Train, recs).unwrap()
    }

    #[test]
    fn wli_frequency_order_and_ties() {
        let d = DatasetDescriptor::builtin(DatasetFamily::ScposAdj, Language::En);
        let train = split_with(&[("positive", &["fun", "fun", "nice"]), ("negative", &["dull", "bad"])]);
        let verb = build_from_wli(&train, &d, 2).unwrap();
        let words: Vec<_> = verb
            .words_for("positive")
            .unwrap()
            .iter()
            .map(|w| w.word.as_str())
            .collect();
        assert_eq!(words, vec!["fun", "nice"]);

        let verb = build_from_wli(&train, &d, 1).unwrap();
        let words: Vec<_> = verb
            .words_for("negative")
            .unwrap()
            .iter()
            .map(|w| w.word.as_str())
            .collect();
        assert_eq!(words, vec!["bad"]);
    }

    #[test]
    fn wli_errors() {
        let d = DatasetDescriptor::builtin(DatasetFamily::ScposAdj, Language::En);
        let train = split_with(&[("positive", &["fun"]), ("negative", &[])]);
        assert!(matches!(build_from_wli(&train, &d, 5), Err(VerbalizerError::NoWli(l)) if l == "negative"));

        let open = DatasetDescriptor::builtin(DatasetFamily::Tconer, Language::En);
        let err = build_from_wli(&train, &open, 5).unwrap_err();
        assert!(err.to_string().contains("KV requires fixed label schema"));
    }

    #[test]
    fn external_kv_parsing() {
        let schema = builtin_schema(DatasetFamily::ScposAdj, Language::En);
        let doc = "[negative]\nbad\nawful\t0.5\n\n[positive]\ngood\ngood\nnice\n";
        let verb = parse_kv(doc, &schema, 100).unwrap();
        assert_eq!(verb.labels()[0].label, "positive");
        assert_eq!(verb.words_for("positive").unwrap().len(), 2);
        assert_eq!(verb.words_for("negative").unwrap()[1].weight, 0.5);

        // export mirrors the input format and re-parses identically
        let again = parse_kv(&verb.to_kv_string(), &schema, 100).unwrap();
        assert_eq!(again, verb);

        assert!(matches!(
            parse_kv("[positive]\ngood\n", &schema, 100),
            Err(VerbalizerError::MissingLabel(l)) if l == "negative"
        ));
        assert!(matches!(
            parse_kv("[positive]\ngood\n[neutral]\nmeh\n", &schema, 100),
            Err(VerbalizerError::UnknownLabel { line: 3, .. })
        ));
        assert!(matches!(
            parse_kv("[positive]\ngood\n[negative]\n", &schema, 100),
            Err(VerbalizerError::EmptyLabel(_))
        ));
        assert!(matches!(
            parse_kv("good\n", &schema, 100),
            Err(VerbalizerError::Syntax { line: 1, .. })
        ));
    }

    #[test]
    fn external_kv_truncates() {
        let schema = builtin_schema(DatasetFamily::ScposAdj, Language::En);
        let mut doc = String::from("[positive]\n");
        for i in 0..120 {
            doc.push_str(&format!("p{i}\n"));
        }
        doc.push_str("[negative]\nn0\n");
        let verb = parse_kv(&doc, &schema, 100).unwrap();
        let pos = verb.words_for("positive").unwrap();
        assert_eq!(pos.len(), 100);
        assert_eq!(pos[99].word, "p99");
    }

    #[test]
    fn shuffled_keeps_sizes() {
        let verb = v(&[("A", &["a1", "a2", "a3"]), ("B", &["b1", "b2"])]);
        let s = verb.shuffled(3);
        assert_eq!(s.total_words(), 5);
        assert_eq!(s, verb.shuffled(3));
        let mut all: Vec<_> = s
            .labels()
            .iter()
            .flat_map(|l| l.words.iter().map(|w| w.word.clone()))
            .collect();
        all.sort();
        assert_eq!(all, vec!["a1", "a2", "a3", "b1", "b2"]);
    }
}
