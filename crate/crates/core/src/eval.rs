//! Word-level and text-level scoring over repeated test draws.
//!
//! Word level: pair-level exact match after trimming, multiset semantics
//! (a repeated correct pair consumes one gold copy), order-insensitive,
//! micro-averaged over the examples of a draw. Text level: micro-F1, which
//! for single-label data equals accuracy; unparseable predictions count as
//! wrong. Draw scores are averaged arithmetically and their spread is the
//! sample standard deviation.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Split;
use crate::format::{FormatTag, TargetSide};
use crate::parse::{parse_generation, ParseStatus};
use crate::record::LabelEntityPair;
use crate::schema::{DatasetDescriptor, Language};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("gold has {gold} labels but predictions have {pred}")]
    LengthMismatch { gold: usize, pred: usize },
    #[error("no generations for draw {0}")]
    MissingDraw(usize),
    #[error("{generations} generation sets for {draws} draws")]
    ExtraDraws { draws: usize, generations: usize },
    #[error("draw {draw}: {message}")]
    Misaligned { draw: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Self { precision, recall, f1 }
    }

    fn uniform(v: f64) -> Self {
        Self {
            precision: v,
            recall: v,
            f1: v,
        }
    }
}

/// Raw counts behind a pair-level score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct PairCounts {
    pub matched: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl PairCounts {
    /// Both sides empty scores 1; an empty side otherwise has a 0 ratio.
    pub fn prf(&self) -> Prf {
        if self.gold == 0 && self.predicted == 0 {
            return Prf::uniform(1.0);
        }
        let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
        Prf::new(ratio(self.matched, self.predicted), ratio(self.matched, self.gold))
    }

    pub fn add(&mut self, other: PairCounts) {
        self.matched += other.matched;
        self.predicted += other.predicted;
        self.gold += other.gold;
    }
}

/// How labels and entities are compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct MatchPolicy {
    /// Lower-case labels before comparing. Entities are never folded.
    pub fold_label_case: bool,
}

impl MatchPolicy {
    pub fn exact() -> Self {
        Self::default()
    }

    /// Case folding only where the script has case.
    pub fn for_language(language: Language) -> Self {
        Self {
            fold_label_case: language.has_case(),
        }
    }

    fn label(&self, label: &str) -> String {
        let t = label.trim();
        if self.fold_label_case {
            t.to_lowercase()
        } else {
            t.to_string()
        }
    }

    pub fn describe(&self) -> String {
        format!(
            "pair-level exact match after trimming; multiset; order-insensitive; label case folding {}",
            if self.fold_label_case { "on" } else { "off" }
        )
    }
}

pub fn pair_counts(gold: &[LabelEntityPair], pred: &[LabelEntityPair], policy: &MatchPolicy) -> PairCounts {
    let key = |p: &LabelEntityPair| (policy.label(&p.label), p.entity.trim().to_string());
    let mut remaining: HashMap<(String, String), usize> = HashMap::new();
    for g in gold {
        *remaining.entry(key(g)).or_default() += 1;
    }
    let mut matched = 0;
    for p in pred {
        if let Some(n) = remaining.get_mut(&key(p)) {
            if *n > 0 {
                *n -= 1;
                matched += 1;
            }
        }
    }
    PairCounts {
        matched,
        predicted: pred.len(),
        gold: gold.len(),
    }
}

/// Precision, recall and F1 of predicted pairs against gold pairs with
/// exact (trimmed, case-sensitive) matching.
pub fn pair_f1(gold: &[LabelEntityPair], pred: &[LabelEntityPair]) -> Prf {
    pair_counts(gold, pred, &MatchPolicy::exact()).prf()
}

pub fn pair_f1_with(gold: &[LabelEntityPair], pred: &[LabelEntityPair], policy: &MatchPolicy) -> Prf {
    pair_counts(gold, pred, policy).prf()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TextAveraging {
    #[default]
    Micro,
    Macro,
}

impl fmt::Display for TextAveraging {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TextAveraging::Micro => "micro",
            TextAveraging::Macro => "macro",
        })
    }
}

impl std::str::FromStr for TextAveraging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "micro" => Ok(Self::Micro),
            "macro" => Ok(Self::Macro),
            other => Err(format!("unknown averaging `{other}` (expected micro or macro)")),
        }
    }
}

/// Text-level score over aligned gold and predicted labels. `None` marks an
/// unparseable prediction, which is always wrong.
pub fn text_f1(gold: &[String], pred: &[Option<String>]) -> Result<Prf, EvalError> {
    text_f1_with(gold, pred, TextAveraging::Micro, &MatchPolicy::exact())
}

pub fn text_f1_with(
    gold: &[String],
    pred: &[Option<String>],
    averaging: TextAveraging,
    policy: &MatchPolicy,
) -> Result<Prf, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::LengthMismatch {
            gold: gold.len(),
            pred: pred.len(),
        });
    }
    if gold.is_empty() {
        return Ok(Prf::default());
    }
    let gold: Vec<String> = gold.iter().map(|g| policy.label(g)).collect();
    let pred: Vec<Option<String>> = pred.iter().map(|p| p.as_deref().map(|p| policy.label(p))).collect();

    match averaging {
        TextAveraging::Micro => {
            let correct = gold.iter().zip(&pred).filter(|(g, p)| p.as_ref() == Some(*g)).count();
            Ok(Prf::uniform(correct as f64 / gold.len() as f64))
        }
        TextAveraging::Macro => {
            let labels: BTreeSet<&String> = gold.iter().chain(pred.iter().flatten()).collect();
            let mut sum = Prf::default();
            for label in &labels {
                let mut tp = 0usize;
                let mut fp = 0usize;
                let mut fn_ = 0usize;
                for (g, p) in gold.iter().zip(&pred) {
                    let predicted = p.as_ref() == Some(*label);
                    match (g == *label, predicted) {
                        (true, true) => tp += 1,
                        (false, true) => fp += 1,
                        (true, false) => fn_ += 1,
                        (false, false) => {}
                    }
                }
                let ratio = |n: usize, d: usize| if d == 0 { 0.0 } else { n as f64 / d as f64 };
                let s = Prf::new(ratio(tp, tp + fp), ratio(tp, tp + fn_));
                sum.precision += s.precision;
                sum.recall += s.recall;
                sum.f1 += s.f1;
            }
            let n = labels.len() as f64;
            Ok(Prf {
                precision: sum.precision / n,
                recall: sum.recall / n,
                f1: sum.f1 / n,
            })
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ParseCounts {
    pub clean: usize,
    pub recovered: usize,
    pub unparseable: usize,
}

impl ParseCounts {
    pub fn record(&mut self, status: ParseStatus) {
        match status {
            ParseStatus::Clean => self.clean += 1,
            ParseStatus::Recovered => self.recovered += 1,
            ParseStatus::Unparseable => self.unparseable += 1,
        }
    }

    fn add(&mut self, o: ParseCounts) {
        self.clean += o.clean;
        self.recovered += o.recovered;
        self.unparseable += o.unparseable;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrawScores {
    pub size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word: Option<Prf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<Prf>,
    pub parse: ParseCounts,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: Prf,
    /// Sample standard deviation across draws; 0 for a single draw.
    pub std: Prf,
}

impl Summary {
    pub fn of(values: &[Prf]) -> Self {
        let comp = |f: fn(&Prf) -> f64| {
            let xs: Vec<f64> = values.iter().map(f).collect();
            mean_and_sample_std(&xs)
        };
        let (mp, sp) = comp(|p| p.precision);
        let (mr, sr) = comp(|p| p.recall);
        let (mf, sf) = comp(|p| p.f1);
        Summary {
            mean: Prf {
                precision: mp,
                recall: mr,
                f1: mf,
            },
            std: Prf {
                precision: sp,
                recall: sr,
                f1: sf,
            },
        }
    }
}

pub fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tag: Option<FormatTag>,
    pub draws: Vec<DrawScores>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub word: Option<Summary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<Summary>,
    pub parse: ParseCounts,
    pub metadata: BTreeMap<String, String>,
}

impl EvalReport {
    fn assemble(
        dataset: String,
        tag: Option<FormatTag>,
        draws: Vec<DrawScores>,
        metadata: BTreeMap<String, String>,
    ) -> Self {
        let words: Vec<Prf> = draws.iter().filter_map(|d| d.word).collect();
        let texts: Vec<Prf> = draws.iter().filter_map(|d| d.text).collect();
        let mut parse = ParseCounts::default();
        for d in &draws {
            parse.add(d.parse);
        }
        EvalReport {
            dataset,
            tag,
            word: (!words.is_empty()).then(|| Summary::of(&words)),
            text: (!texts.is_empty()).then(|| Summary::of(&texts)),
            draws,
            parse,
            metadata,
        }
    }

    /// The headline number: mean F1 of the side the format targets (text
    /// side for joint and label-prediction runs).
    pub fn headline_f1(&self) -> Option<f64> {
        let word_side = matches!(self.tag.map(FormatTag::target_side), Some(TargetSide::Word));
        if word_side {
            self.word.map(|s| s.mean.f1)
        } else {
            self.text.or(self.word).map(|s| s.mean.f1)
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }
}

/// Settings recorded with every report.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSettings {
    pub policy: MatchPolicy,
    pub averaging: TextAveraging,
    /// Extra key/values echoed into report metadata (seed, strategy, ...).
    pub metadata: BTreeMap<String, String>,
}

impl RunSettings {
    pub fn for_descriptor(desc: &DatasetDescriptor) -> Self {
        Self {
            policy: MatchPolicy::for_language(desc.language),
            averaging: TextAveraging::Micro,
            metadata: BTreeMap::new(),
        }
    }

    fn metadata(&self) -> BTreeMap<String, String> {
        let mut m = self.metadata.clone();
        m.insert("matching_policy".into(), self.policy.describe());
        m.insert("text_averaging".into(), self.averaging.to_string());
        m.insert(
            "draw_policy".into(),
            "independent draws; no replacement within a draw; draws may overlap".into(),
        );
        m.insert("malformed_generations".into(), "scored as zero credit".into());
        m
    }
}

/// Generations for one draw, aligned by position with the draw's records.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DrawGenerations {
    /// When present, must equal the draw's record ids in order.
    pub record_ids: Option<Vec<String>>,
    pub generations: Vec<String>,
}

fn check_alignment(draw: usize, gold: &Split, ids: Option<&[String]>, found: usize) -> Result<(), EvalError> {
    if found != gold.len() {
        return Err(EvalError::Misaligned {
            draw,
            message: format!("{} gold records but {found} predictions", gold.len()),
        });
    }
    if let Some(ids) = ids {
        if let Some(pos) = gold.records().iter().zip(ids).position(|(r, id)| &r.id != id) {
            return Err(EvalError::Misaligned {
                draw,
                message: format!(
                    "position {pos}: expected record `{}`, generation is for `{}`",
                    gold.records()[pos].id,
                    ids[pos]
                ),
            });
        }
    }
    Ok(())
}

/// Parses and scores generations for every draw, then averages.
pub fn evaluate_run(
    gold_draws: &[Split],
    generations: &[DrawGenerations],
    desc: &DatasetDescriptor,
    tag: FormatTag,
    settings: &RunSettings,
) -> Result<EvalReport, EvalError> {
    if generations.len() < gold_draws.len() {
        return Err(EvalError::MissingDraw(generations.len()));
    }
    if generations.len() > gold_draws.len() {
        return Err(EvalError::ExtraDraws {
            draws: gold_draws.len(),
            generations: generations.len(),
        });
    }
    let side = tag.target_side();
    let mut draws = Vec::with_capacity(gold_draws.len());
    for (i, (gold, gens)) in gold_draws.iter().zip(generations).enumerate() {
        check_alignment(i, gold, gens.record_ids.as_deref(), gens.generations.len())?;
        let mut parse = ParseCounts::default();
        let mut pairs = PairCounts::default();
        let mut gold_labels = Vec::with_capacity(gold.len());
        let mut pred_labels = Vec::with_capacity(gold.len());
        for (record, generation) in gold.records().iter().zip(&gens.generations) {
            let parsed = parse_generation(generation, tag, &desc.schema);
            parse.record(parsed.status);
            pairs.add(pair_counts(&record.pairs, &parsed.pairs, &settings.policy));
            gold_labels.push(record.text_label.clone());
            pred_labels.push(parsed.text_label);
        }
        let text = match side {
            TargetSide::Word => None,
            _ => Some(text_f1_with(
                &gold_labels,
                &pred_labels,
                settings.averaging,
                &settings.policy,
            )?),
        };
        let word = match side {
            TargetSide::Text => None,
            _ => Some(pairs.prf()),
        };
        draws.push(DrawScores {
            size: gold.len(),
            word,
            text,
            parse,
        });
    }
    let mut metadata = settings.metadata();
    metadata.insert("tag".into(), tag.to_string());
    Ok(EvalReport::assemble(desc.to_string(), Some(tag), draws, metadata))
}

/// Scores already-decided text labels (e.g. verbalizer predictions) per
/// draw. `predictions[i]` aligns with `gold_draws[i]`.
pub fn evaluate_text_predictions(
    gold_draws: &[Split],
    predictions: &[Vec<Option<String>>],
    desc: &DatasetDescriptor,
    settings: &RunSettings,
) -> Result<EvalReport, EvalError> {
    if predictions.len() < gold_draws.len() {
        return Err(EvalError::MissingDraw(predictions.len()));
    }
    if predictions.len() > gold_draws.len() {
        return Err(EvalError::ExtraDraws {
            draws: gold_draws.len(),
            generations: predictions.len(),
        });
    }
    let mut draws = Vec::with_capacity(gold_draws.len());
    for (i, (gold, preds)) in gold_draws.iter().zip(predictions).enumerate() {
        check_alignment(i, gold, None, preds.len())?;
        let gold_labels: Vec<String> = gold.records().iter().map(|r| r.text_label.clone()).collect();
        let mut parse = ParseCounts::default();
        for p in preds {
            parse.record(if p.is_some() {
                ParseStatus::Clean
            } else {
                ParseStatus::Unparseable
            });
        }
        draws.push(DrawScores {
            size: gold.len(),
            word: None,
            text: Some(text_f1_with(&gold_labels, preds, settings.averaging, &settings.policy)?),
            parse,
        });
    }
    Ok(EvalReport::assemble(desc.to_string(), None, draws, settings.metadata()))
}

/// A small score table rendered as TSV or markdown. Cells are F1 × 100 with
/// two decimals; missing cells print `-`.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTable {
    pub corner: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<Option<f64>>)>,
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| format!("{:.2}", x * 100.0)).unwrap_or_else(|| "-".into())
}

impl ScoreTable {
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.corner);
        for c in &self.columns {
            out.push('\t');
            out.push_str(c);
        }
        out.push('\n');
        for (name, cells) in &self.rows {
            out.push_str(name);
            for v in cells {
                out.push('\t');
                out.push_str(&cell(*v));
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = format!("| {} |", self.corner);
        for c in &self.columns {
            out.push_str(&format!(" {c} |"));
        }
        out.push_str("\n|---|");
        for _ in &self.columns {
            out.push_str("---:|");
        }
        out.push('\n');
        for (name, cells) in &self.rows {
            out.push_str(&format!("| {name} |"));
            for v in cells {
                out.push_str(&format!(" {} |", cell(*v)));
            }
            out.push('\n');
        }
        out
    }
}

/// Lays reports out as an ablation table: rows `w/o TLI`, `with TLI`,
/// `w/o WLI`, `with WLI`; one column per dataset in first-seen order.
/// Traditional tags fill the row of their `WO_*` alias.
pub fn ablation_table(reports: &[EvalReport]) -> ScoreTable {
    let mut columns: Vec<String> = Vec::new();
    for r in reports {
        if !columns.contains(&r.dataset) {
            columns.push(r.dataset.clone());
        }
    }
    let rows = FormatTag::ABLATION_ROWS
        .iter()
        .map(|row_tag| {
            let cells = columns
                .iter()
                .map(|col| {
                    reports
                        .iter()
                        .filter(|r| &r.dataset == col)
                        .find(|r| r.tag.map(|t| alias_row(t) == *row_tag).unwrap_or(false))
                        .and_then(EvalReport::headline_f1)
                })
                .collect();
            (row_tag.row_caption().to_string(), cells)
        })
        .collect();
    ScoreTable {
        corner: "format".into(),
        columns,
        rows,
    }
}

fn alias_row(tag: FormatTag) -> FormatTag {
    match tag {
        FormatTag::TradWord => FormatTag::WoTliToWli,
        FormatTag::TradText => FormatTag::WoWliToTli,
        other => other,
    }
}

/// A verbalizer comparison: one row per named report, text-level mean F1.
pub fn comparison_table(dataset: &str, rows: &[(&str, &EvalReport)]) -> ScoreTable {
    ScoreTable {
        corner: "verbalizer".into(),
        columns: vec![dataset.to_string()],
        rows: rows
            .iter()
            .map(|(name, r)| (name.to_string(), vec![r.text.map(|s| s.mean.f1)]))
            .collect(),
    }
}
