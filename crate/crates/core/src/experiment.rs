//! End-to-end commands: validation, training-file generation, verbalizer
//! construction, scoring, evaluation and the verbalizer comparison run.
//!
//! Everything here is deterministic given the inputs and
//! [`ExperimentConfig::seed`]; all randomness is drawn from the streams in
//! [`crate::dataset::streams`].
//!
//! # Data layout
//!
//! Unless a path is given explicitly, split files are looked up under the
//! data root as `<family-slug>_<lang>.<role>.jsonl`, e.g.
//! `scpos-adj_zh.train.jsonl`.
//!
//! # Generation files
//!
//! One JSON value per line, aligned with the draw manifest: either a string
//! (the raw generation) or an object `{"generation": "...", "record_id":
//! "..."}`. When ids are present they must match the draw order.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{
    few_shot_sample, load_split, records_to_jsonl, repeated_test_sample, LoadOptions, RecordFormat, Role, Split,
};
use crate::error::Error;
use crate::eval::{
    ablation_table, comparison_table, evaluate_run, evaluate_text_predictions, DrawGenerations, EvalReport,
    RunSettings, ScoreTable, TextAveraging,
};
use crate::format::{build_corpus, examples_to_jsonl, training_file_name, FormatTag};
use crate::record::validate_record;
use crate::refmlm::{train_counts, CountModel, Segmenter, DEFAULT_ALPHA};
use crate::schema::{DatasetDescriptor, DatasetFamily, Language};
use crate::verbalizer::{
    apply_template, build_from_wli, load_external_kv, predict, AggregationStrategy, Prediction, ProbabilityProvider,
    Verbalizer, DEFAULT_WORDS_PER_LABEL,
};

pub const DEFAULT_FEW_SHOT_K: usize = 20;
pub const DEFAULT_TEST_N: usize = 1000;
pub const DEFAULT_REPEATS: usize = 3;
pub const DEFAULT_TEMPLATE: &str = "{text} {mask}";

/// Every knob of an experiment. Serialized next to outputs so that a run can
/// be repeated from its artifacts alone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: DatasetFamily,
    pub language: Language,
    pub seed: u64,
    /// Few-shot records per text label.
    pub few_shot_k: usize,
    /// Records per test draw.
    pub test_n: usize,
    /// Number of test draws.
    pub repeats: usize,
    /// Verbalizer words per label.
    pub kv_k: usize,
    pub template: String,
    pub aggregation: AggregationStrategy,
    pub text_averaging: TextAveraging,
    /// Smoothing constant of the reference provider.
    pub alpha: f64,
    pub lenient: bool,
    pub record_format: RecordFormat,
    pub data_root: Option<PathBuf>,
    pub train: Option<PathBuf>,
    pub test: Option<PathBuf>,
    /// Word list for the "origin" verbalizer; the shuffled baseline is used
    /// when absent.
    pub external_kv: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            family: DatasetFamily::Scnm,
            language: Language::En,
            seed: 0,
            few_shot_k: DEFAULT_FEW_SHOT_K,
            test_n: DEFAULT_TEST_N,
            repeats: DEFAULT_REPEATS,
            kv_k: DEFAULT_WORDS_PER_LABEL,
            template: DEFAULT_TEMPLATE.to_string(),
            aggregation: AggregationStrategy::Sum,
            text_averaging: TextAveraging::Micro,
            alpha: DEFAULT_ALPHA,
            lenient: false,
            record_format: RecordFormat::Jsonl,
            data_root: None,
            train: None,
            test: None,
            external_kv: None,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(s: &str) -> Result<Self, Error> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, Error> {
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&s)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn descriptor(&self) -> DatasetDescriptor {
        DatasetDescriptor::builtin(self.family, self.language)
    }

    pub fn validate(&self) -> Result<(), Error> {
        let positive = [
            ("few_shot_k", self.few_shot_k),
            ("test_n", self.test_n),
            ("repeats", self.repeats),
            ("kv_k", self.kv_k),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(Error::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        apply_template("", &self.template)?;
        Ok(())
    }

    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.data_root {
            Some(root) if p.is_relative() => root.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn default_split_path(&self, role: Role) -> PathBuf {
        let name = format!("{}.{}.jsonl", self.descriptor().stem(), role);
        self.resolve(Path::new(&name))
    }

    pub fn split_path(&self, role: Role) -> PathBuf {
        let explicit = match role {
            Role::Train => &self.train,
            Role::Test => &self.test,
        };
        match explicit {
            Some(p) => self.resolve(p),
            None => self.default_split_path(role),
        }
    }

    pub fn external_kv_path(&self) -> Option<PathBuf> {
        self.external_kv.as_deref().map(|p| self.resolve(p))
    }

    fn load_options(&self) -> LoadOptions {
        LoadOptions {
            format: self.record_format,
            lenient: self.lenient,
        }
    }

    pub fn load(&self, role: Role) -> Result<Split, Error> {
        Ok(load_split(&self.split_path(role), &self.descriptor(), role, self.load_options())?.split)
    }

    /// Key/values echoed into every report.
    pub fn metadata(&self) -> BTreeMap<String, String> {
        BTreeMap::from([
            ("dataset".to_string(), self.descriptor().to_string()),
            ("seed".to_string(), self.seed.to_string()),
            ("few_shot_k".to_string(), self.few_shot_k.to_string()),
            ("test_n".to_string(), self.test_n.to_string()),
            ("repeats".to_string(), self.repeats.to_string()),
            ("kv_k".to_string(), self.kv_k.to_string()),
            ("template".to_string(), self.template.clone()),
            ("aggregation".to_string(), self.aggregation.to_string()),
            ("alpha".to_string(), self.alpha.to_string()),
        ])
    }

    fn run_settings(&self) -> RunSettings {
        let mut s = RunSettings::for_descriptor(&self.descriptor());
        s.averaging = self.text_averaging;
        s.metadata = self.metadata();
        s
    }
}

/// Writes `contents`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<(), Error> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn ensure_writable(paths: &[PathBuf], force: bool) -> Result<(), Error> {
    if !force {
        if let Some(p) = paths.iter().find(|p| p.exists()) {
            return Err(Error::Exists(p.clone()));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------- validate

#[derive(Debug, Clone, Default)]
pub struct FileDiagnostics {
    pub path: PathBuf,
    pub records: usize,
    /// `line N: record ...: violation` entries.
    pub violations: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Default)]
pub struct ValidateOutcome {
    pub files: Vec<FileDiagnostics>,
}

impl ValidateOutcome {
    pub fn is_clean(&self) -> bool {
        self.files.iter().all(|f| f.violations.is_empty())
    }

    pub fn exit_code(&self) -> i32 {
        if self.is_clean() {
            0
        } else {
            1
        }
    }
}

/// Validates every record of every file. Record-level violations are
/// collected; malformed lines, duplicate ids and I/O failures abort with an
/// error.
pub fn cmd_validate(
    paths: &[PathBuf],
    desc: &DatasetDescriptor,
    format: RecordFormat,
) -> Result<ValidateOutcome, Error> {
    let mut outcome = ValidateOutcome::default();
    for path in paths {
        // lenient loading collects every violation instead of stopping at
        // the first
        let loaded = load_split(path, desc, Role::Train, LoadOptions { format, lenient: true })?;
        let (violations, warnings) = loaded.warnings.into_iter().partition(|w| w.starts_with("line "));
        outcome.files.push(FileDiagnostics {
            path: path.clone(),
            records: loaded.split.len(),
            violations,
            warnings,
        });
    }
    Ok(outcome)
}

// ----------------------------------------------------------- build-formats

#[derive(Debug, Clone)]
pub struct FormatInput {
    pub descriptor: DatasetDescriptor,
    pub path: PathBuf,
    pub role: Role,
}

#[derive(Debug, Clone)]
pub struct BuildFormatsRequest {
    pub inputs: Vec<FormatInput>,
    pub tags: Vec<FormatTag>,
    pub out_dir: PathBuf,
    pub force: bool,
    pub load: LoadOptions,
    /// For test inputs, also write one file per draw of
    /// `repeated_test_sample(test_n, repeats, seed)`.
    pub test_draws: Option<(usize, usize, u64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BuiltFile {
    pub file: String,
    pub dataset: String,
    pub tag: FormatTag,
    pub role: Role,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub draw: Option<usize>,
    pub count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct BuildSummary {
    pub files: Vec<BuiltFile>,
    pub counts_per_tag: BTreeMap<FormatTag, usize>,
}

/// Name of the per-draw training file, `<name>.draw<i>`.
pub fn draw_file_name(desc: &DatasetDescriptor, tag: FormatTag, draw: usize) -> String {
    format!("{}.draw{draw}", training_file_name(desc, tag, Role::Test))
}

/// Writes one training file (plus `.manifest.json`) per input and tag, and
/// an overall `manifest.json`. Refuses to overwrite unless `force` is set.
pub fn cmd_build_formats(req: &BuildFormatsRequest) -> Result<BuildSummary, Error> {
    // plan everything first so nothing is written when a check fails
    struct Planned {
        name: String,
        desc: DatasetDescriptor,
        tag: FormatTag,
        role: Role,
        draw: Option<usize>,
        split: Split,
    }
    let mut planned = Vec::new();
    for input in &req.inputs {
        let split = load_split(&input.path, &input.descriptor, input.role, req.load)?.split;
        let draws = match (input.role, req.test_draws) {
            (Role::Test, Some((n, repeats, seed))) => Some(repeated_test_sample(&split, n, repeats, seed)?),
            _ => None,
        };
        for &tag in &req.tags {
            planned.push(Planned {
                name: training_file_name(&input.descriptor, tag, input.role),
                desc: input.descriptor.clone(),
                tag,
                role: input.role,
                draw: None,
                split: split.clone(),
            });
            for (i, d) in draws.iter().flatten().enumerate() {
                planned.push(Planned {
                    name: draw_file_name(&input.descriptor, tag, i),
                    desc: input.descriptor.clone(),
                    tag,
                    role: Role::Test,
                    draw: Some(i),
                    split: d.clone(),
                });
            }
        }
    }

    let mut targets: Vec<PathBuf> = vec![req.out_dir.join("manifest.json")];
    for p in &planned {
        targets.push(req.out_dir.join(&p.name));
        targets.push(req.out_dir.join(format!("{}.manifest.json", p.name)));
    }
    ensure_writable(&targets, req.force)?;

    let mut summary = BuildSummary::default();
    for p in planned {
        let corpus = build_corpus(&p.split, p.tag, &p.desc)?;
        write_file(&req.out_dir.join(&p.name), &examples_to_jsonl(&corpus.examples))?;
        let manifest = serde_json::to_string_pretty(&corpus.manifest).expect("manifest serializes") + "\n";
        write_file(&req.out_dir.join(format!("{}.manifest.json", p.name)), &manifest)?;
        *summary.counts_per_tag.entry(p.tag).or_default() += corpus.examples.len();
        summary.files.push(BuiltFile {
            file: p.name,
            dataset: p.desc.to_string(),
            tag: p.tag,
            role: p.role,
            draw: p.draw,
            count: corpus.examples.len(),
        });
    }
    let overall = serde_json::to_string_pretty(&summary).expect("summary serializes") + "\n";
    write_file(&req.out_dir.join("manifest.json"), &overall)?;
    Ok(summary)
}

/// The (descriptor, path) pairs of a data root that exist for `role`, over
/// all 21 descriptors.
pub fn discover_matrix(data_root: &Path, role: Role) -> Vec<FormatInput> {
    DatasetDescriptor::all_builtin()
        .into_iter()
        .filter_map(|descriptor| {
            let path = data_root.join(format!("{}.{}.jsonl", descriptor.stem(), role));
            path.is_file().then_some(FormatInput { descriptor, path, role })
        })
        .collect()
}

// ---------------------------------------------------------------- build-kv

/// WLI verbalizer from the configured train split.
pub fn cmd_build_kv(cfg: &ExperimentConfig) -> Result<Verbalizer, Error> {
    cfg.validate()?;
    let desc = cfg.descriptor();
    if desc.schema.open_domain {
        return Err(Error::ExcludedFromKv(desc.to_string()));
    }
    let train = cfg.load(Role::Train)?;
    Ok(build_from_wli(&train, &desc, cfg.kv_k)?)
}

// ------------------------------------------------------------------- score

/// The reference provider for a dataset: co-occurrence counts over the
/// few-shot training subset, segmented with the dataset's WLI entities as
/// lexicon for Chinese and Japanese.
pub fn reference_provider(cfg: &ExperimentConfig, train: &Split, few_shot: &Split) -> Result<CountModel, Error> {
    let lexicon: BTreeSet<&str> = train
        .records()
        .iter()
        .flat_map(|r| r.pairs.iter().map(|p| p.entity.trim()))
        .collect();
    let segmenter = Segmenter::for_language(cfg.language, lexicon);
    let corpus: Vec<&str> = few_shot.records().iter().map(|r| r.text.as_str()).collect();
    Ok(train_counts(&corpus, segmenter, cfg.alpha)?)
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct ScoredRecord {
    pub record_id: String,
    #[serde(flatten)]
    pub prediction: Prediction,
}

/// Predicts a label for every record of `split`.
pub fn score_split<P: ProbabilityProvider + ?Sized>(
    split: &Split,
    verbalizer: &Verbalizer,
    provider: &P,
    cfg: &ExperimentConfig,
) -> Result<Vec<ScoredRecord>, Error> {
    split
        .records()
        .iter()
        .map(|r| {
            let prompt = apply_template(&r.text, &cfg.template)?;
            let prediction = predict(&r.id, &prompt, verbalizer, provider, cfg.aggregation)?;
            Ok(ScoredRecord {
                record_id: r.id.clone(),
                prediction,
            })
        })
        .collect()
}

pub fn scored_to_jsonl(scored: &[ScoredRecord]) -> String {
    let mut out = String::new();
    for s in scored {
        out.push_str(&serde_json::to_string(s).expect("scores serialize"));
        out.push('\n');
    }
    out
}

// ---------------------------------------------------------------- evaluate

/// Reads a generation file (see the module docs).
pub fn load_generations(path: &Path, draw: usize) -> Result<DrawGenerations, Error> {
    if !path.exists() {
        return Err(Error::MissingGenerations {
            draw,
            path: path.to_path_buf(),
        });
    }
    let content = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_generations(&content, draw)
}

pub fn parse_generations(content: &str, draw: usize) -> Result<DrawGenerations, Error> {
    let mut generations = Vec::new();
    let mut ids = Vec::new();
    let mut any_ids = false;
    for (i, line) in content.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let bad = |m: String| Error::Config(format!("draw {draw} generations line {}: {m}", i + 1));
        let value: serde_json::Value = serde_json::from_str(line).map_err(|e| bad(e.to_string()))?;
        match value {
            serde_json::Value::String(s) => {
                generations.push(s);
                ids.push(None);
            }
            serde_json::Value::Object(map) => {
                let g = map
                    .get("generation")
                    .and_then(|v| v.as_str())
                    .ok_or_else(|| bad("missing string field `generation`".into()))?;
                generations.push(g.to_string());
                let id = map.get("record_id").and_then(|v| v.as_str()).map(str::to_string);
                any_ids |= id.is_some();
                ids.push(id);
            }
            _ => return Err(bad("expected a string or an object".into())),
        }
    }
    let record_ids = if any_ids {
        Some(
            ids.into_iter()
                .enumerate()
                .map(|(i, id)| id.ok_or_else(|| Error::Config(format!("draw {draw}: record_id missing on entry {i}"))))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    Ok(DrawGenerations {
        record_ids,
        generations,
    })
}

/// Regenerates the test draws from the configured split and seed and scores
/// one generation file per draw.
pub fn cmd_evaluate(cfg: &ExperimentConfig, tag: FormatTag, generation_files: &[PathBuf]) -> Result<EvalReport, Error> {
    cfg.validate()?;
    let desc = cfg.descriptor();
    let test = cfg.load(Role::Test)?;
    let draws = repeated_test_sample(&test, cfg.test_n, cfg.repeats, cfg.seed)?;
    if generation_files.len() > draws.len() {
        return Err(Error::Config(format!(
            "{} generation files for {} draws",
            generation_files.len(),
            draws.len()
        )));
    }
    let mut gens = Vec::with_capacity(draws.len());
    for i in 0..draws.len() {
        let path = generation_files.get(i).ok_or_else(|| Error::MissingGenerations {
            draw: i,
            path: PathBuf::from(format!("<generation file {i} not given>")),
        })?;
        gens.push(load_generations(path, i)?);
    }
    Ok(evaluate_run(&draws, &gens, &desc, tag, &cfg.run_settings())?)
}

// ------------------------------------------------------------------ run-kv

#[derive(Debug, Clone)]
pub struct KvRun {
    pub baseline_name: String,
    pub baseline_kv: Verbalizer,
    pub wli_kv: Verbalizer,
    pub baseline: EvalReport,
    pub wli: EvalReport,
}

pub const ORIGIN_KV_ROW: &str = "Origin KV";
pub const SHUFFLED_KV_ROW: &str = "Shuffled KV";
pub const WLI_KV_ROW: &str = "WLI KV";

impl KvRun {
    pub fn table(&self) -> ScoreTable {
        comparison_table(
            &self.wli.dataset,
            &[(self.baseline_name.as_str(), &self.baseline), (WLI_KV_ROW, &self.wli)],
        )
    }

    pub fn reports_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            rows: BTreeMap<&'a str, &'a EvalReport>,
        }
        let out = Out {
            rows: BTreeMap::from([(self.baseline_name.as_str(), &self.baseline), (WLI_KV_ROW, &self.wli)]),
        };
        serde_json::to_string_pretty(&out).expect("reports serialize") + "\n"
    }

    /// Writes `report.json`, `report.tsv`, `report.md`, `wli.kv`,
    /// `baseline.kv` and `config.toml` into `dir`.
    pub fn write(&self, dir: &Path, cfg: &ExperimentConfig, force: bool) -> Result<Vec<PathBuf>, Error> {
        let table = self.table();
        let files = [
            ("report.json", self.reports_json()),
            ("report.tsv", table.to_tsv()),
            ("report.md", table.to_markdown()),
            ("wli.kv", self.wli_kv.to_kv_string()),
            ("baseline.kv", self.baseline_kv.to_kv_string()),
            ("config.toml", cfg.to_toml()),
        ];
        let paths: Vec<PathBuf> = files.iter().map(|(n, _)| dir.join(n)).collect();
        ensure_writable(&paths, force)?;
        for ((_, contents), path) in files.iter().zip(&paths) {
            write_file(path, contents)?;
        }
        Ok(paths)
    }
}

fn predict_draws<P: ProbabilityProvider + ?Sized>(
    draws: &[Split],
    verbalizer: &Verbalizer,
    provider: &P,
    cfg: &ExperimentConfig,
) -> Result<Vec<Vec<Option<String>>>, Error> {
    draws
        .iter()
        .map(|d| {
            Ok(score_split(d, verbalizer, provider, cfg)?
                .into_iter()
                .map(|s| Some(s.prediction.label))
                .collect())
        })
        .collect()
}

/// Compares the WLI verbalizer with a baseline (external word list if
/// configured, otherwise the shuffled WLI verbalizer) on the repeated test
/// draws, using the reference provider.
pub fn cmd_run_kv(cfg: &ExperimentConfig) -> Result<KvRun, Error> {
    let desc = cfg.descriptor();
    if desc.schema.open_domain {
        return Err(Error::ExcludedFromKv(desc.to_string()));
    }
    let train = cfg.load(Role::Train)?;
    let test = cfg.load(Role::Test)?;
    run_kv_on(cfg, &train, &test)
}

/// [`cmd_run_kv`] on in-memory splits.
pub fn run_kv_on(cfg: &ExperimentConfig, train: &Split, test: &Split) -> Result<KvRun, Error> {
    let desc = cfg.descriptor();
    if desc.schema.open_domain {
        return Err(Error::ExcludedFromKv(desc.to_string()));
    }
    cfg.validate()?;
    for r in train.records().iter().chain(test.records()) {
        let v = validate_record(r, &desc);
        if !v.is_empty() && !cfg.lenient {
            return Err(Error::Config(format!(
                "record `{}` is invalid for {desc}: {}",
                r.id, v[0]
            )));
        }
    }

    let few_shot = few_shot_sample(train, &desc, cfg.few_shot_k, cfg.seed)?;
    let wli_kv = build_from_wli(train, &desc, cfg.kv_k)?;
    let (baseline_name, baseline_kv) = match cfg.external_kv_path() {
        Some(path) => (ORIGIN_KV_ROW, load_external_kv(&path, &desc.schema, cfg.kv_k)?),
        None => (SHUFFLED_KV_ROW, wli_kv.shuffled(cfg.seed)),
    };
    let provider = reference_provider(cfg, train, &few_shot)?;
    let draws = repeated_test_sample(test, cfg.test_n, cfg.repeats, cfg.seed)?;

    let settings = cfg.run_settings();
    let report_for = |name: &str, kv: &Verbalizer| -> Result<EvalReport, Error> {
        let preds = predict_draws(&draws, kv, &provider, cfg)?;
        let mut s = settings.clone();
        s.metadata.insert("verbalizer".into(), name.to_string());
        s.metadata
            .insert("verbalizer_words".into(), kv.total_words().to_string());
        s.metadata
            .insert("provider".into(), format!("ref-mlm (alpha {})", cfg.alpha));
        Ok(evaluate_text_predictions(&draws, &preds, &desc, &s)?)
    };
    let baseline = report_for(baseline_name, &baseline_kv)?;
    let wli = report_for(WLI_KV_ROW, &wli_kv)?;
    Ok(KvRun {
        baseline_name: baseline_name.to_string(),
        baseline_kv,
        wli_kv,
        baseline,
        wli,
    })
}

// ------------------------------------------------------------------ report

pub fn load_report(path: &Path) -> Result<EvalReport, Error> {
    let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Config(format!("{}: not a report: {e}", path.display())))
}

/// Ablation table over previously written evaluation reports.
pub fn cmd_report(paths: &[PathBuf]) -> Result<ScoreTable, Error> {
    let reports = paths.iter().map(|p| load_report(p)).collect::<Result<Vec<_>, _>>()?;
    Ok(ablation_table(&reports))
}

/// Writes a split in the record file format.
pub fn write_split(path: &Path, split: &Split) -> Result<(), Error> {
    write_file(path, &records_to_jsonl(split.records()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_protocol() {
        let c = ExperimentConfig::default();
        assert_eq!((c.few_shot_k, c.test_n, c.repeats, c.kv_k), (20, 1000, 3, 100));
        let echoed = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
        assert_eq!(echoed, c);
    }

    #[test]
    fn toml_overrides_and_rejects_unknown_keys() {
        let c = ExperimentConfig::from_toml("family = \"SCPOS:Adj\"\nlanguage = \"zh\"\nseed = 9\n").unwrap();
        assert_eq!(c.family, DatasetFamily::ScposAdj);
        assert_eq!(c.language, Language::Zh);
        assert_eq!(c.few_shot_k, 20);
        assert!(ExperimentConfig::from_toml("colour = 1\n").is_err());
    }

    #[test]
    fn path_resolution() {
        let c = ExperimentConfig {
            data_root: Some(PathBuf::from("/data")),
            family: DatasetFamily::ScposNAdj,
            language: Language::Ja,
            ..Default::default()
        };
        assert_eq!(
            c.split_path(Role::Train),
            PathBuf::from("/data/scpos-nadj_ja.train.jsonl")
        );
        let c = ExperimentConfig {
            test: Some(PathBuf::from("/abs/t.jsonl")),
            ..c
        };
        assert_eq!(c.split_path(Role::Test), PathBuf::from("/abs/t.jsonl"));
    }

    #[test]
    fn config_validation() {
        let bad = ExperimentConfig {
            template: "{text}".into(),
            ..Default::default()
        };
        assert_eq!(bad.validate().unwrap_err().exit_code(), 3);
        let bad = ExperimentConfig {
            repeats: 0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn generation_lines() {
        let g = parse_generations("\"Nature\"\n\"x\\ny\"\n", 0).unwrap();
        assert_eq!(g.generations, vec!["Nature", "x\ny"]);
        assert!(g.record_ids.is_none());
        let g = parse_generations("{\"record_id\":\"a\",\"generation\":\"N\"}\n", 0).unwrap();
        assert_eq!(g.record_ids, Some(vec!["a".to_string()]));
        assert!(parse_generations("[1]\n", 0).is_err());
    }
}
