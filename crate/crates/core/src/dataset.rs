//! Loading record files and the seeded sampling used by the experiment
//! protocol.
//!
//! # Record file format
//!
//! UTF-8, one JSON object per line:
//!
//! ```text
//! {"id": "n-17", "text": "...", "text_label": "Technology", "pairs": [{"label": "products", "entity": "X1"}]}
//! ```
//!
//! `pairs` may be omitted (no pairs). Blank lines are skipped; line numbers in
//! diagnostics are 1-based physical lines.
//!
//! The legacy layout ([`RecordFormat::Tsv`]) has four tab-separated columns
//! `id`, `text`, `text_label`, `pairs`, where the last column uses the pair
//! grammar of [`crate::format::serialize_pairs`] (empty or `NONE` for no
//! pairs).
//!
//! # Randomness
//!
//! All sampling uses ChaCha8 seeded through `SeedableRng::seed_from_u64`,
//! with independent streams selected by [`streams`]. Index selection is a
//! forward Fisher-Yates pass whose bounded draws use rejection sampling on
//! `next_u64`, so results do not depend on any library's shuffle algorithm.

use std::collections::HashSet;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::parse::{parse_pairs, ParseStatus};
use crate::record::{validate_record, MreRecord};
use crate::schema::DatasetDescriptor;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: record `{id}` is invalid: {violations}")]
    Invalid {
        line: usize,
        id: String,
        violations: String,
    },
    #[error("line {line}: duplicate record id `{id}`")]
    DuplicateId { line: usize, id: String },
    #[error("duplicate record id `{0}` in split")]
    DuplicateIdInSplit(String),
    #[error("expected a {expected} split, got a {found} split")]
    WrongRole { expected: Role, found: Role },
    #[error("label `{label}` has {available} records, fewer than the {requested} requested")]
    NotEnoughForLabel {
        label: String,
        available: usize,
        requested: usize,
    },
    #[error("sample size {requested} exceeds split size {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("invalid sampling plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Test,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Train => "train",
            Role::Test => "test",
        }
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Role {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Role::Train),
            "test" => Ok(Role::Test),
            other => Err(format!("unknown split role `{other}` (expected train or test)")),
        }
    }
}

/// Records of one split. Ids are unique.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    role: Role,
    records: Vec<MreRecord>,
}

impl Split {
    pub fn new(role: Role, records: Vec<MreRecord>) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if !seen.insert(r.id.as_str()) {
                return Err(DatasetError::DuplicateIdInSplit(r.id.clone()));
            }
        }
        Ok(Self { role, records })
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn records(&self) -> &[MreRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn ids(&self) -> Vec<&str> {
        self.records.iter().map(|r| r.id.as_str()).collect()
    }

    fn require_role(&self, expected: Role) -> Result<(), DatasetError> {
        if self.role != expected {
            return Err(DatasetError::WrongRole {
                expected,
                found: self.role,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RecordFormat {
    #[default]
    Jsonl,
    Tsv,
}

impl std::str::FromStr for RecordFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Self::Jsonl),
            "tsv" => Ok(Self::Tsv),
            other => Err(format!("unknown record format `{other}` (expected jsonl or tsv)")),
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    pub format: RecordFormat,
    /// Keep invalid records and report them as warnings instead of failing.
    pub lenient: bool,
}

#[derive(Debug, Clone)]
pub struct LoadedSplit {
    pub split: Split,
    pub warnings: Vec<String>,
}

/// Reads a record file and validates every record against `desc`.
pub fn load_split(
    path: &Path,
    desc: &DatasetDescriptor,
    role: Role,
    opts: LoadOptions,
) -> Result<LoadedSplit, DatasetError> {
    let bytes = fs::read(path).map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let content = String::from_utf8(bytes).map_err(|e| {
        // report the line holding the first invalid byte
        let valid = &e.as_bytes()[..e.utf8_error().valid_up_to()];
        let line = valid.iter().filter(|b| **b == b'\n').count() + 1;
        DatasetError::Malformed {
            line,
            message: "file is not valid UTF-8".into(),
        }
    })?;
    parse_split(&content, desc, role, opts)
}

/// [`load_split`] on in-memory content.
pub fn parse_split(
    content: &str,
    desc: &DatasetDescriptor,
    role: Role,
    opts: LoadOptions,
) -> Result<LoadedSplit, DatasetError> {
    let mut records = Vec::new();
    let mut warnings = Vec::new();
    let mut seen = HashSet::new();

    for (idx, line) in content.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let record = match opts.format {
            RecordFormat::Jsonl => parse_json_line(line, line_no)?,
            RecordFormat::Tsv => parse_tsv_line(line, line_no)?,
        };
        if !seen.insert(record.id.clone()) {
            return Err(DatasetError::DuplicateId {
                line: line_no,
                id: record.id,
            });
        }
        let violations = validate_record(&record, desc);
        if !violations.is_empty() {
            let joined = violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            if opts.lenient {
                warnings.push(format!("line {line_no}: record `{}`: {joined}", record.id));
            } else {
                return Err(DatasetError::Invalid {
                    line: line_no,
                    id: record.id,
                    violations: joined,
                });
            }
        }
        records.push(record);
    }

    if records.is_empty() {
        warnings.push("file contains no records".into());
    }
    let split = Split::new(role, records)?;
    Ok(LoadedSplit { split, warnings })
}

fn parse_json_line(line: &str, line_no: usize) -> Result<MreRecord, DatasetError> {
    serde_json::from_str(line).map_err(|e| DatasetError::Malformed {
        line: line_no,
        message: e.to_string(),
    })
}

fn parse_tsv_line(line: &str, line_no: usize) -> Result<MreRecord, DatasetError> {
    let cols: Vec<&str> = line.split('\t').collect();
    if cols.len() != 3 && cols.len() != 4 {
        return Err(DatasetError::Malformed {
            line: line_no,
            message: format!("expected 3 or 4 tab-separated columns, found {}", cols.len()),
        });
    }
    let pairs_col = cols.get(3).map(|s| s.trim()).unwrap_or("");
    let pairs = if pairs_col.is_empty() {
        Vec::new()
    } else {
        let parsed = parse_pairs(pairs_col);
        if parsed.status == ParseStatus::Unparseable {
            return Err(DatasetError::Malformed {
                line: line_no,
                message: format!("cannot parse pairs column `{pairs_col}`"),
            });
        }
        parsed.pairs
    };
    Ok(MreRecord::new(cols[0], cols[1], cols[2], pairs))
}

/// Writes records in the JSON-lines record format.
pub fn records_to_jsonl(records: &[MreRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("records serialize"));
        out.push('\n');
    }
    out
}

/// Stream identifiers for [`stream_rng`]. Every consumer of randomness has its
/// own stream so that adding draws never perturbs another consumer.
pub mod streams {
    pub const FEW_SHOT: u64 = 1;
    pub const KV_SHUFFLE: u64 = 2;
    /// Test draw `i` uses stream `TEST_DRAW_BASE + i`.
    pub const TEST_DRAW_BASE: u64 = 1 << 32;
}

/// ChaCha8 seeded from `seed` on the given stream.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform integer in `0..bound` by rejection sampling. `bound` must be > 0.
pub fn uniform_below(rng: &mut impl RngCore, bound: u64) -> u64 {
    assert!(bound > 0, "uniform_below with zero bound");
    let zone = u64::MAX - (u64::MAX % bound + 1) % bound;
    loop {
        let v = rng.next_u64();
        if v <= zone {
            return v % bound;
        }
    }
}

/// Moves a uniformly random `n`-subset of `items` to the front, in random
/// order (forward Fisher-Yates stopped after `n` steps).
pub fn partial_shuffle<T>(rng: &mut impl RngCore, items: &mut [T], n: usize) {
    let len = items.len();
    for pos in 0..n.min(len) {
        let j = pos + uniform_below(rng, (len - pos) as u64) as usize;
        items.swap(pos, j);
    }
}

pub fn shuffle<T>(rng: &mut impl RngCore, items: &mut [T]) {
    let n = items.len();
    partial_shuffle(rng, items, n);
}

/// Sampling parameters of one experiment phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SamplingPlan {
    FewShot {
        seed: u64,
        per_label: usize,
    },
    Repeated {
        seed: u64,
        sample_size: usize,
        repeats: usize,
    },
}

impl SamplingPlan {
    pub fn validate(&self, split_size: usize) -> Result<(), DatasetError> {
        match *self {
            SamplingPlan::FewShot { per_label: 0, .. } => {
                Err(DatasetError::InvalidPlan("per-label count must be positive".into()))
            }
            SamplingPlan::Repeated { repeats: 0, .. } => {
                Err(DatasetError::InvalidPlan("repeat count must be at least 1".into()))
            }
            SamplingPlan::Repeated { sample_size, .. } if sample_size > split_size => {
                Err(DatasetError::SampleTooLarge {
                    requested: sample_size,
                    available: split_size,
                })
            }
            _ => Ok(()),
        }
    }
}

/// Labels to stratify over: the schema's text labels, or for open-domain
/// data the labels present in the split in first-appearance order.
fn stratification_labels(split: &Split, desc: &DatasetDescriptor) -> Vec<String> {
    if !desc.schema.open_domain {
        return desc.schema.text_labels.clone();
    }
    let mut seen = HashSet::new();
    split
        .records
        .iter()
        .filter(|r| seen.insert(r.text_label.as_str()))
        .map(|r| r.text_label.clone())
        .collect()
}

/// Exactly `k` records per text-level label, chosen by a seeded shuffle. The
/// result keeps the split's original record order.
pub fn few_shot_sample(split: &Split, desc: &DatasetDescriptor, k: usize, seed: u64) -> Result<Split, DatasetError> {
    split.require_role(Role::Train)?;
    SamplingPlan::FewShot { seed, per_label: k }.validate(split.len())?;

    let labels = stratification_labels(split, desc);
    let mut rng = stream_rng(seed, streams::FEW_SHOT);
    let mut chosen = Vec::with_capacity(labels.len() * k);
    for label in &labels {
        let mut idx: Vec<usize> = split
            .records
            .iter()
            .enumerate()
            .filter(|(_, r)| &r.text_label == label)
            .map(|(i, _)| i)
            .collect();
        if idx.len() < k {
            return Err(DatasetError::NotEnoughForLabel {
                label: label.clone(),
                available: idx.len(),
                requested: k,
            });
        }
        partial_shuffle(&mut rng, &mut idx, k);
        chosen.extend_from_slice(&idx[..k]);
    }
    chosen.sort_unstable();
    let records = chosen.into_iter().map(|i| split.records[i].clone()).collect();
    Split::new(Role::Train, records)
}

/// `repeats` independent uniform draws of `n` records each. Within a draw
/// there is no replacement; different draws may overlap. Draw `i` depends only
/// on `(seed, i)`.
pub fn repeated_test_sample(split: &Split, n: usize, repeats: usize, seed: u64) -> Result<Vec<Split>, DatasetError> {
    split.require_role(Role::Test)?;
    SamplingPlan::Repeated {
        seed,
        sample_size: n,
        repeats,
    }
    .validate(split.len())?;

    (0..repeats).map(|draw| test_draw(split, n, seed, draw)).collect()
}

/// A single draw of [`repeated_test_sample`].
pub fn test_draw(split: &Split, n: usize, seed: u64, draw: usize) -> Result<Split, DatasetError> {
    if n > split.len() {
        return Err(DatasetError::SampleTooLarge {
            requested: n,
            available: split.len(),
        });
    }
    let mut rng = stream_rng(seed, streams::TEST_DRAW_BASE + draw as u64);
    let mut idx: Vec<usize> = (0..split.len()).collect();
    partial_shuffle(&mut rng, &mut idx, n);
    let records = idx[..n].iter().map(|&i| split.records[i].clone()).collect();
    Split::new(Role::Test, records)
}
