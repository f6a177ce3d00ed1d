//! A small count-based stand-in for a masked language model.
//!
//! Training counts, for every text, how often each word co-occurs with every
//! other word position in the same text. Scoring a prompt gives each queried
//! word `alpha + sum(count(c, w))` over the prompt's context words `c`,
//! normalized over the query set.
//!
//! # Counts file
//!
//! Plain text, tab-separated, sorted, so that saving the same model always
//! yields the same bytes:
//!
//! ```text
//! mre-counts v1
//! alpha	1
//! segmenter	lexicon
//! lexicon	東京
//! unigram	<word>	<count>
//! pair	<context>	<candidate>	<count>
//! ```
//!
//! Inside fields, `\`, tab, newline and carriage return are written as `\\`,
//! `\t`, `\n` and `\r`.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::schema::Language;
use crate::verbalizer::{MaskDistribution, MaskedPrompt, ProbabilityProvider, ProviderError};

const HEADER: &str = "mre-counts v1";
pub const DEFAULT_ALPHA: f64 = 1.0;

#[derive(Debug, Error)]
pub enum RefMlmError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("smoothing constant must be positive and finite, got {0}")]
    BadAlpha(f64),
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("counts file line {line}: {message}")]
    Syntax { line: usize, message: String },
}

/// Greedy longest-match segmentation against a fixed word list, falling back
/// to single characters. Whitespace separates but is never part of a match.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    entries: BTreeSet<String>,
    max_chars: usize,
}

impl Lexicon {
    pub fn new<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut lex = Lexicon::default();
        for w in words {
            lex.insert(w.as_ref());
        }
        lex
    }

    pub fn insert(&mut self, word: &str) {
        let word = word.trim();
        if word.is_empty() {
            return;
        }
        self.max_chars = self.max_chars.max(word.chars().count());
        self.entries.insert(word.to_string());
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn segment(&self, text: &str) -> Vec<String> {
        let chars: Vec<char> = text.chars().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            if chars[i].is_whitespace() {
                i += 1;
                continue;
            }
            let longest = self.max_chars.min(chars.len() - i);
            let mut taken = 1;
            for len in (2..=longest).rev() {
                let candidate: String = chars[i..i + len].iter().collect();
                if self.entries.contains(&candidate) {
                    taken = len;
                    break;
                }
            }
            out.push(chars[i..i + taken].iter().collect());
            i += taken;
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Segmenter {
    /// Whitespace tokens with ASCII punctuation stripped from both ends.
    Whitespace,
    Lexicon(Lexicon),
}

impl Segmenter {
    /// Whitespace for English, lexicon matching for Chinese and Japanese.
    pub fn for_language<I, S>(language: Language, lexicon_words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        match language {
            Language::En => Segmenter::Whitespace,
            Language::Zh | Language::Ja => Segmenter::Lexicon(Lexicon::new(lexicon_words)),
        }
    }

    pub fn segment(&self, text: &str) -> Vec<String> {
        match self {
            Segmenter::Whitespace => text
                .split_whitespace()
                .map(|t| t.trim_matches(|c: char| c.is_ascii_punctuation()))
                .filter(|t| !t.is_empty())
                .map(str::to_string)
                .collect(),
            Segmenter::Lexicon(lex) => lex.segment(text),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountModel {
    segmenter: Segmenter,
    alpha: f64,
    unigrams: BTreeMap<String, u64>,
    /// context word -> candidate word -> count
    cooc: BTreeMap<String, BTreeMap<String, u64>>,
}

fn bump(map: &mut BTreeMap<String, u64>, key: &str, by: u64) {
    match map.get_mut(key) {
        Some(c) => *c += by,
        None => {
            map.insert(key.to_string(), by);
        }
    }
}

fn check_alpha(alpha: f64) -> Result<(), RefMlmError> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(RefMlmError::BadAlpha(alpha))
    }
}

/// Builds co-occurrence counts over every ordered pair of distinct word
/// positions within each text.
pub fn train_counts<S: AsRef<str>>(corpus: &[S], segmenter: Segmenter, alpha: f64) -> Result<CountModel, RefMlmError> {
    if corpus.is_empty() {
        return Err(RefMlmError::EmptyCorpus);
    }
    check_alpha(alpha)?;
    let mut model = CountModel {
        segmenter,
        alpha,
        unigrams: BTreeMap::new(),
        cooc: BTreeMap::new(),
    };
    for text in corpus {
        let words = model.segmenter.segment(text.as_ref());
        for w in &words {
            bump(&mut model.unigrams, w, 1);
        }
        for (i, context) in words.iter().enumerate() {
            if !model.cooc.contains_key(context) {
                model.cooc.insert(context.clone(), BTreeMap::new());
            }
            let row = model.cooc.get_mut(context).expect("inserted above");
            for (j, candidate) in words.iter().enumerate() {
                if i != j {
                    bump(row, candidate, 1);
                }
            }
        }
    }
    Ok(model)
}

impl CountModel {
    /// A model from explicit tables, mainly for tests and tools.
    pub fn from_counts(
        segmenter: Segmenter,
        alpha: f64,
        unigrams: BTreeMap<String, u64>,
        cooc: BTreeMap<String, BTreeMap<String, u64>>,
    ) -> Result<Self, RefMlmError> {
        check_alpha(alpha)?;
        Ok(Self {
            segmenter,
            alpha,
            unigrams,
            cooc,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn segmenter(&self) -> &Segmenter {
        &self.segmenter
    }

    pub fn in_vocabulary(&self, word: &str) -> bool {
        self.unigrams.contains_key(word)
    }

    pub fn vocabulary(&self) -> impl Iterator<Item = &str> {
        self.unigrams.keys().map(String::as_str)
    }

    pub fn count(&self, context: &str, candidate: &str) -> u64 {
        self.cooc
            .get(context)
            .and_then(|row| row.get(candidate))
            .copied()
            .unwrap_or(0)
    }

    pub fn global_count(&self, word: &str) -> u64 {
        self.unigrams.get(word).copied().unwrap_or(0)
    }

    /// Words of the prompt outside the mask slot.
    pub fn context_words(&self, prompt: &MaskedPrompt) -> Vec<String> {
        let mut words = self.segmenter.segment(prompt.before());
        words.extend(self.segmenter.segment(prompt.after()));
        words
    }

    /// Normalized query-set distribution. Repeated query words are scored
    /// once; out-of-vocabulary words get the smoothing floor and are marked
    /// uncovered.
    pub fn distribution(&self, prompt: &MaskedPrompt, queries: &[String]) -> MaskDistribution {
        let context = self.context_words(prompt);
        let rows: Vec<&BTreeMap<String, u64>> = context.iter().filter_map(|c| self.cooc.get(c)).collect();

        let mut seen = BTreeSet::new();
        let mut raw = Vec::with_capacity(queries.len());
        for q in queries {
            if !seen.insert(q.as_str()) {
                continue;
            }
            let support: u64 = rows.iter().filter_map(|row| row.get(q)).sum();
            raw.push((q.as_str(), self.alpha + support as f64));
        }
        let total: f64 = raw.iter().map(|(_, m)| m).sum();

        let mut dist = MaskDistribution::new();
        for (word, mass) in raw {
            let p = (mass / total).clamp(0.0, 1.0);
            dist.insert(word, p, self.in_vocabulary(word))
                .expect("normalized mass lies in [0, 1]");
        }
        dist
    }

    pub fn to_counts_string(&self) -> String {
        let mut out = String::new();
        out.push_str(HEADER);
        out.push('\n');
        out.push_str(&format!("alpha\t{}\n", self.alpha));
        match &self.segmenter {
            Segmenter::Whitespace => out.push_str("segmenter\twhitespace\n"),
            Segmenter::Lexicon(lex) => {
                out.push_str("segmenter\tlexicon\n");
                for w in &lex.entries {
                    out.push_str("lexicon\t");
                    out.push_str(&escape(w));
                    out.push('\n');
                }
            }
        }
        for (w, c) in &self.unigrams {
            out.push_str(&format!("unigram\t{}\t{c}\n", escape(w)));
        }
        for (ctx, row) in &self.cooc {
            for (cand, c) in row {
                out.push_str(&format!("pair\t{}\t{}\t{c}\n", escape(ctx), escape(cand)));
            }
        }
        out
    }

    pub fn parse_counts(content: &str) -> Result<Self, RefMlmError> {
        let mut lines = content.lines().enumerate();
        match lines.next() {
            Some((_, HEADER)) => {}
            _ => {
                return Err(RefMlmError::Syntax {
                    line: 1,
                    message: format!("expected header `{HEADER}`"),
                })
            }
        }
        let mut alpha = None;
        let mut segmenter_kind = None;
        let mut lexicon = Lexicon::default();
        let mut unigrams = BTreeMap::new();
        let mut cooc: BTreeMap<String, BTreeMap<String, u64>> = BTreeMap::new();

        for (idx, line) in lines {
            let line_no = idx + 1;
            if line.is_empty() {
                continue;
            }
            let syntax = |message: String| RefMlmError::Syntax { line: line_no, message };
            let fields: Vec<&str> = line.split('\t').collect();
            let count = |s: &str| s.parse::<u64>().map_err(|_| syntax(format!("bad count `{s}`")));
            match fields.as_slice() {
                ["alpha", a] => alpha = Some(a.parse::<f64>().map_err(|_| syntax(format!("bad alpha `{a}`")))?),
                ["segmenter", kind @ ("whitespace" | "lexicon")] => segmenter_kind = Some(kind.to_string()),
                ["lexicon", w] => lexicon.insert(&unescape(w)),
                ["unigram", w, c] => {
                    unigrams.insert(unescape(w), count(c)?);
                }
                ["pair", ctx, cand, c] => {
                    cooc.entry(unescape(ctx)).or_default().insert(unescape(cand), count(c)?);
                }
                _ => return Err(syntax(format!("unrecognized line `{line}`"))),
            }
        }

        let alpha = alpha.ok_or_else(|| RefMlmError::Syntax {
            line: 0,
            message: "missing alpha".into(),
        })?;
        let segmenter = match segmenter_kind.as_deref() {
            Some("whitespace") => Segmenter::Whitespace,
            Some(_) => Segmenter::Lexicon(lexicon),
            None => {
                return Err(RefMlmError::Syntax {
                    line: 0,
                    message: "missing segmenter".into(),
                })
            }
        };
        Self::from_counts(segmenter, alpha, unigrams, cooc)
    }

    pub fn save(&self, path: &Path) -> Result<(), RefMlmError> {
        fs::write(path, self.to_counts_string()).map_err(|source| RefMlmError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self, RefMlmError> {
        let content = fs::read_to_string(path).map_err(|source| RefMlmError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse_counts(&content)
    }
}

impl ProbabilityProvider for CountModel {
    fn score(&self, prompt: &MaskedPrompt, words: &[String]) -> Result<MaskDistribution, ProviderError> {
        Ok(self.distribution(prompt, words))
    }
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            other => out.push(other),
        }
    }
    out
}

fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some(other) => out.push(other),
            None => out.push('\\'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(words: &[&str]) -> Vec<String> {
        words.iter().map(|w| w.to_string()).collect()
    }

    fn prob(d: &MaskDistribution, w: &str) -> f64 {
        d.get(w).unwrap().prob
    }

    #[test]
    fn direct_counts() {
        let m = train_counts(&["a b", "a c"], Segmenter::Whitespace, 1.0).unwrap();
        assert_eq!(m.count("a", "b"), 1);
        assert_eq!(m.count("a", "c"), 1);
        assert_eq!(m.count("b", "c"), 0);
        assert_eq!(m.global_count("a"), 2);
    }

    #[test]
    fn single_word_text() {
        let m = train_counts(&["solo"], Segmenter::Whitespace, 1.0).unwrap();
        assert_eq!(m.global_count("solo"), 1);
        assert!(m.cooc.values().all(|row| row.is_empty()));
    }

    #[test]
    fn duplicated_text_doubles() {
        let once = train_counts(&["a b c"], Segmenter::Whitespace, 1.0).unwrap();
        let twice = train_counts(&["a b c", "a b c"], Segmenter::Whitespace, 1.0).unwrap();
        for (c, w) in [("a", "b"), ("b", "c"), ("c", "a")] {
            assert_eq!(twice.count(c, w), 2 * once.count(c, w));
        }
        assert_eq!(twice.global_count("b"), 2);
    }

    #[test]
    fn empty_corpus_and_bad_alpha() {
        let empty: [&str; 0] = [];
        assert!(matches!(
            train_counts(&empty, Segmenter::Whitespace, 1.0),
            Err(RefMlmError::EmptyCorpus)
        ));
        assert!(matches!(
            train_counts(&["a"], Segmenter::Whitespace, 0.0),
            Err(RefMlmError::BadAlpha(_))
        ));
    }

    #[test]
    fn smoothed_scores() {
        let m = train_counts(&["a b", "a b", "a b", "a c"], Segmenter::Whitespace, 1.0).unwrap();
        assert_eq!(m.count("a", "b"), 3);
        let d = m.distribution(&MaskedPrompt::new("a ", ""), &q(&["b", "c"]));
        assert!((prob(&d, "b") - 4.0 / 6.0).abs() < 1e-12);
        assert!((prob(&d, "c") - 2.0 / 6.0).abs() < 1e-12);

        let d = m.distribution(&MaskedPrompt::new("zzz ", ""), &q(&["b", "c"]));
        assert!((prob(&d, "b") - 0.5).abs() < 1e-12);
        assert!((prob(&d, "c") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn oov_queries_are_uncovered() {
        let m = train_counts(&["a b"], Segmenter::Whitespace, 1.0).unwrap();
        let d = m.distribution(&MaskedPrompt::new("a", ""), &q(&["b", "unknown", "b"]));
        assert_eq!(d.len(), 2);
        assert!(d.get("b").unwrap().covered);
        let unk = d.get("unknown").unwrap();
        assert!(!unk.covered);
        assert!((unk.prob - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn whitespace_strips_punctuation() {
        assert_eq!(
            Segmenter::Whitespace.segment("Tanaka, (in) Tokyo."),
            vec!["Tanaka", "in", "Tokyo"]
        );
    }

    #[test]
    fn lexicon_longest_match() {
        let lex = Lexicon::new(["東京", "東京都", "田中"]);
        assert_eq!(lex.segment("田中は東京都に"), vec!["田中", "は", "東京都", "に"]);
        assert_eq!(lex.segment("東 京"), vec!["東", "京"]);
        let seg = Segmenter::for_language(Language::Ja, ["東京"]);
        assert_eq!(seg.segment("東京へ"), vec!["東京", "へ"]);
        assert_eq!(Segmenter::for_language(Language::En, ["x"]), Segmenter::Whitespace);
    }

    #[test]
    fn counts_file_round_trip() {
        let seg = Segmenter::Lexicon(Lexicon::new(["東京", "a\tb"]));
        let m = train_counts(&["東京は晴れ", "東京と大阪"], seg, 0.5).unwrap();
        let text = m.to_counts_string();
        let back = CountModel::parse_counts(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_counts_string(), text);
        assert!(text.contains("lexicon\ta\\tb\n"));
    }

    #[test]
    fn counts_file_errors() {
        assert!(CountModel::parse_counts("nope\n").is_err());
        let err =
            CountModel::parse_counts("mre-counts v1\nalpha\t1\nsegmenter\twhitespace\nunigram\tx\tmany\n").unwrap_err();
        assert!(matches!(err, RefMlmError::Syntax { line: 4, .. }));
    }
}
