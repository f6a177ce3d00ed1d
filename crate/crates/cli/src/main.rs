use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mre_core::dataset::{few_shot_sample, test_draw, LoadOptions, RecordFormat, Role};
use mre_core::eval::{ScoreTable, TextAveraging};
use mre_core::experiment::{
    cmd_build_formats, cmd_build_kv, cmd_evaluate, cmd_report, cmd_run_kv, cmd_validate, discover_matrix,
    reference_provider, score_split, scored_to_jsonl, write_file, BuildFormatsRequest, ExperimentConfig, FormatInput,
};
use mre_core::format::FormatTag;
use mre_core::refmlm::CountModel;
use mre_core::verbalizer::{build_from_wli, load_external_kv, AggregationStrategy};
use mre_core::{DatasetDescriptor, DatasetFamily, Error, Language};

#[derive(Parser)]
#[command(name = "mre", version, about = "Joint word/text classification tooling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check record files against a dataset schema.
    Validate(ValidateArgs),
    /// Write training files for one or more input formats.
    BuildFormats(BuildFormatsArgs),
    /// Build the WLI verbalizer from a train split.
    BuildKv(BuildKvArgs),
    /// Predict text labels with a verbalizer and the reference provider.
    Score(ScoreArgs),
    /// Score model generations against the regenerated test draws.
    Evaluate(EvaluateArgs),
    /// Compare the WLI verbalizer against a baseline end to end.
    RunKv(RunKvArgs),
    /// Tabulate evaluation reports.
    Report(ReportArgs),
}

/// Experiment settings. Flags override values from `--config`.
#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// TOML experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding `<family>_<lang>.<role>.jsonl` split files.
    #[arg(long, env = "MRE_DATA_ROOT")]
    data_root: Option<PathBuf>,
    /// Dataset family, e.g. SCNM or SCPOS:Adj.
    #[arg(long)]
    family: Option<DatasetFamily>,
    /// en, zh or ja.
    #[arg(long)]
    language: Option<Language>,
    /// Seed for every sampling step (default 0).
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Few-shot training records per text label (default 20).
    #[arg(long)]
    few_shot_k: Option<usize>,
    /// Records per test draw (default 1000).
    #[arg(long)]
    test_n: Option<usize>,
    /// Number of test draws (default 3).
    #[arg(long)]
    repeats: Option<usize>,
    /// Verbalizer words per label (default 100).
    #[arg(long)]
    kv_k: Option<usize>,
    /// Prompt template with one {text} and one {mask} slot.
    #[arg(long)]
    template: Option<String>,
    /// sum or mean.
    #[arg(long)]
    aggregation: Option<AggregationStrategy>,
    /// Text-level F1 averaging: micro or macro.
    #[arg(long)]
    averaging: Option<TextAveraging>,
    /// Smoothing constant of the reference provider (default 1).
    #[arg(long)]
    alpha: Option<f64>,
    /// Keep schema-violating records instead of failing.
    #[arg(long)]
    lenient: bool,
    /// jsonl or tsv.
    #[arg(long)]
    record_format: Option<RecordFormat>,
    /// Word list for the baseline verbalizer.
    #[arg(long)]
    external_kv: Option<PathBuf>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig, Error> {
        let mut c = match &self.config {
            Some(p) => ExperimentConfig::from_toml_file(p)?,
            None => ExperimentConfig::default(),
        };
        macro_rules! set {
            ($($f:ident => $t:ident),* $(,)?) => {
                $(if let Some(v) = &self.$f { c.$t = v.clone().into(); })*
            };
        }
        set!(
            family => family, language => language, seed => seed,
            few_shot_k => few_shot_k, test_n => test_n, repeats => repeats,
            kv_k => kv_k, template => template, aggregation => aggregation,
            averaging => text_averaging, alpha => alpha, record_format => record_format,
        );
        if self.data_root.is_some() {
            c.data_root = self.data_root.clone();
        }
        if self.train.is_some() {
            c.train = self.train.clone();
        }
        if self.test.is_some() {
            c.test = self.test.clone();
        }
        if self.external_kv.is_some() {
            c.external_kv = self.external_kv.clone();
        }
        c.lenient |= self.lenient;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    family: DatasetFamily,
    #[arg(long)]
    language: Language,
    #[arg(long, default_value = "jsonl")]
    record_format: RecordFormat,
    #[arg(required = true)]
    files: Vec<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum RoleArg {
    Train,
    Test,
}

impl From<RoleArg> for Role {
    fn from(r: RoleArg) -> Self {
        match r {
            RoleArg::Train => Role::Train,
            RoleArg::Test => Role::Test,
        }
    }
}

#[derive(Args)]
struct BuildFormatsArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Comma-separated format tags; all formats when omitted.
    #[arg(long, value_delimiter = ',')]
    tags: Vec<FormatTag>,
    /// Build every dataset found under the data root instead of the
    /// configured one.
    #[arg(long)]
    all: bool,
    /// Only build this role.
    #[arg(long)]
    role: Option<RoleArg>,
    /// Also write one file per configured test draw.
    #[arg(long)]
    draws: bool,
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct BuildKvArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct ScoreArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Verbalizer file; the WLI verbalizer is built when omitted.
    #[arg(long)]
    kv: Option<PathBuf>,
    /// Saved count model; trained from the few-shot subset when omitted.
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Write the trained count model here.
    #[arg(long)]
    save_counts: Option<PathBuf>,
    /// Score only this test draw instead of the whole test split.
    #[arg(long)]
    draw: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    tag: FormatTag,
    /// One generation file per test draw, in draw order.
    #[arg(long = "generations", num_args = 1..)]
    generations: Vec<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Args)]
struct RunKvArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    #[arg(long)]
    out: PathBuf,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum, Default)]
enum TableFormat {
    #[default]
    Md,
    Tsv,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long, value_enum, default_value_t)]
    format: TableFormat,
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

fn guard(path: &Path, force: bool) -> Result<(), Error> {
    if path.exists() && !force {
        return Err(Error::Exists(path.to_path_buf()));
    }
    Ok(())
}

fn print_table(t: &ScoreTable, format: TableFormat) {
    match format {
        TableFormat::Md => print!("{}", t.to_markdown()),
        TableFormat::Tsv => print!("{}", t.to_tsv()),
    }
}

fn validate(a: ValidateArgs) -> Result<i32, Error> {
    let desc = DatasetDescriptor::builtin(a.family, a.language);
    let outcome = cmd_validate(&a.files, &desc, a.record_format)?;
    for f in &outcome.files {
        for v in &f.violations {
            println!("{}: {v}", f.path.display());
        }
        for w in &f.warnings {
            eprintln!("warning: {}: {w}", f.path.display());
        }
        let status = if f.violations.is_empty() { "ok" } else { "invalid" };
        println!(
            "{}: {} records, {} violations, {status}",
            f.path.display(),
            f.records,
            f.violations.len()
        );
    }
    Ok(outcome.exit_code())
}

fn build_formats(a: BuildFormatsArgs) -> Result<i32, Error> {
    let cfg = a.cfg.resolve()?;
    let roles: Vec<Role> = match a.role {
        Some(r) => vec![r.into()],
        None => vec![Role::Train, Role::Test],
    };
    let inputs: Vec<FormatInput> = if a.all {
        let root = cfg
            .data_root
            .clone()
            .ok_or_else(|| Error::Config("--all needs --data-root or MRE_DATA_ROOT".into()))?;
        let found: Vec<FormatInput> = roles.iter().flat_map(|&r| discover_matrix(&root, r)).collect();
        if found.is_empty() {
            return Err(Error::Config(format!("no split files found under {}", root.display())));
        }
        found
    } else {
        roles
            .iter()
            .map(|&role| FormatInput {
                descriptor: cfg.descriptor(),
                path: cfg.split_path(role),
                role,
            })
            .collect()
    };
    let tags = if a.tags.is_empty() {
        FormatTag::ALL.to_vec()
    } else {
        a.tags
    };
    let summary = cmd_build_formats(&BuildFormatsRequest {
        inputs,
        tags,
        out_dir: a.out,
        force: a.force,
        load: LoadOptions {
            format: cfg.record_format,
            lenient: cfg.lenient,
        },
        test_draws: a.draws.then_some((cfg.test_n, cfg.repeats, cfg.seed)),
    })?;
    for f in &summary.files {
        println!("{}\t{}", f.file, f.count);
    }
    Ok(0)
}

fn build_kv(a: BuildKvArgs) -> Result<i32, Error> {
    let cfg = a.cfg.resolve()?;
    guard(&a.out, a.force)?;
    let kv = cmd_build_kv(&cfg)?;
    write_file(&a.out, &kv.to_kv_string())?;
    println!(
        "{}: {} words over {} labels",
        a.out.display(),
        kv.total_words(),
        kv.labels().len()
    );
    Ok(0)
}

fn score(a: ScoreArgs) -> Result<i32, Error> {
    let cfg = a.cfg.resolve()?;
    let desc = cfg.descriptor();
    if desc.schema.open_domain {
        return Err(Error::ExcludedFromKv(desc.to_string()));
    }
    guard(&a.out, a.force)?;
    if let Some(p) = &a.save_counts {
        guard(p, a.force)?;
    }
    let train = cfg.load(Role::Train)?;
    let test = cfg.load(Role::Test)?;
    let kv = match &a.kv {
        Some(p) => load_external_kv(p, &desc.schema, cfg.kv_k)?,
        None => build_from_wli(&train, &desc, cfg.kv_k)?,
    };
    let provider = match &a.counts {
        Some(p) => CountModel::load(p)?,
        None => {
            let few = few_shot_sample(&train, &desc, cfg.few_shot_k, cfg.seed)?;
            reference_provider(&cfg, &train, &few)?
        }
    };
    if let Some(p) = &a.save_counts {
        provider.save(p)?;
    }
    let target = match a.draw {
        Some(i) => {
            if i >= cfg.repeats {
                return Err(Error::Config(format!(
                    "draw {i} out of range for {} repeats",
                    cfg.repeats
                )));
            }
            test_draw(&test, cfg.test_n, cfg.seed, i)?
        }
        None => test,
    };
    let scored = score_split(&target, &kv, &provider, &cfg)?;
    write_file(&a.out, &scored_to_jsonl(&scored))?;
    let uncovered = scored.iter().filter(|s| s.prediction.no_coverage).count();
    println!(
        "{}: {} predictions, {uncovered} without coverage",
        a.out.display(),
        scored.len()
    );
    Ok(0)
}

fn evaluate(a: EvaluateArgs) -> Result<i32, Error> {
    let cfg = a.cfg.resolve()?;
    if let Some(out) = &a.out {
        guard(out, a.force)?;
    }
    let report = cmd_evaluate(&cfg, a.tag, &a.generations)?;
    if let Some(out) = &a.out {
        write_file(out, &report.to_json())?;
    }
    print!(
        "{}",
        mre_core::eval::ablation_table(std::slice::from_ref(&report)).to_markdown()
    );
    Ok(0)
}

fn run_kv(a: RunKvArgs) -> Result<i32, Error> {
    let cfg = a.cfg.resolve()?;
    let run = cmd_run_kv(&cfg)?;
    run.write(&a.out, &cfg, a.force)?;
    print!("{}", run.table().to_markdown());
    Ok(0)
}

fn report(a: ReportArgs) -> Result<i32, Error> {
    let table = cmd_report(&a.reports)?;
    print_table(&table, a.format);
    Ok(0)
}

fn dispatch(cli: Cli) -> Result<i32, Error> {
    match cli.command {
        Command::Validate(a) => validate(a),
        Command::BuildFormats(a) => build_formats(a),
        Command::BuildKv(a) => build_kv(a),
        Command::Score(a) => score(a),
        Command::Evaluate(a) => evaluate(a),
        Command::RunKv(a) => run_kv(a),
        Command::Report(a) => report(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // usage errors are configuration errors
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            let code = e.exit_code();
            eprintln!("error: {e}");
            ExitCode::from(code as u8)
        }
    }
}
