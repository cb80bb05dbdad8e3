//! Command-line front end. Each pipeline stage is a subcommand; stages
//! exchange JSONL files.
//!
//! Exit status is 0 on success, 2 on usage errors and 1 on data errors. A
//! failure prints one line `error[CODE]: message` to stderr.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::antonyms::{self, adversarial_antonym, AntonymError, ClassVocabulary, COCO_CLASSES};
use crate::datagen::{self, ComposedSample, DataError, GenConfig, Generated};
use crate::evalharness::{
    self, collect_triplets, commutativity_check, emit_report, fc_compatibility_rate, Answerer, ConstantYes, EvalError,
    ExternalFile, Oracle, RandomAnswerer, Recombiner, RecombineMode, ReportFormat,
};
use crate::qparser::{parse_composed, parser_metrics, ParseError, ParseResult};
use crate::textgen::{self, TextError};

/// Environment variable naming a default embeddings file.
pub const EMBEDDINGS_ENV: &str = "VQA_LOGIC_EMBEDDINGS";

#[derive(Debug, Parser)]
#[command(name = "vqa-logic", version, about = "Logically composed closed questions: generation, parsing and evaluation")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads for generation and evaluation.
    #[arg(long, global = true, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub jobs: u64,
    /// Log more (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pairs of closed questions combined with the ten compose formulas.
    Compose(ComposeArgs),
    /// Closed questions combined with object, caption and antonym questions.
    Supplement(SupplementArgs),
    /// Random chains of NOT/AND/OR over several closed questions.
    Inductive(InductiveArgs),
    /// Split composed questions into components.
    Parse(ParseArgs),
    /// Score an answerer on a dataset.
    Eval(EvalArgs),
    /// Fréchet-compatibility rate of predicted probability triplets.
    FcCheck(FcCheckArgs),
    /// Nearest absent object class to the present ones.
    Antonym(AntonymArgs),
    /// Counts and answer balance of a dataset.
    Stats(StatsArgs),
    /// Negate a closed question.
    Negate(NegateArgs),
}

#[derive(Debug, Args)]
pub struct VqaInput {
    /// VQA-v2 questions file.
    #[arg(long)]
    pub questions: PathBuf,
    /// VQA-v2 annotations file.
    #[arg(long)]
    pub annotations: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Output JSONL path.
    #[arg(long)]
    pub out: PathBuf,
    /// Per-image cap on pairs (compose) or compositions (inductive).
    #[arg(long, default_value_t = 10, conflicts_with = "no_cap")]
    pub max_pairs: usize,
    /// Disable the per-image cap.
    #[arg(long)]
    pub no_cap: bool,
    /// Keep only samples with at most one connective.
    #[arg(long)]
    pub single_connective_only: bool,
    /// Down-sample to this many samples.
    #[arg(long)]
    pub target_size: Option<usize>,
    /// Category sampling weight as LABEL=WEIGHT; repeatable.
    #[arg(long = "weight", value_parser = parse_weight)]
    pub weights: Vec<(String, f64)>,
}

fn parse_weight(s: &str) -> Result<(String, f64), String> {
    let (label, w) = s.rsplit_once('=').ok_or_else(|| format!("expected LABEL=WEIGHT, got `{s}`"))?;
    let w: f64 = w.trim().parse().map_err(|e| format!("bad weight in `{s}`: {e}"))?;
    if !(w >= 0.0 && w.is_finite()) {
        return Err(format!("weight must be non-negative, got {w}"));
    }
    Ok((label.trim().to_string(), w))
}

#[derive(Debug, Args)]
pub struct ComposeArgs {
    #[command(flatten)]
    pub vqa: VqaInput,
    #[command(flatten)]
    pub gen: GenArgs,
    /// Emit the negation of a question once per pair instead of once.
    #[arg(long)]
    pub no_dedup: bool,
    /// Also emit every two-operand sample with its operands swapped.
    #[arg(long)]
    pub mirror: bool,
}

#[derive(Debug, Args)]
pub struct SupplementArgs {
    #[command(flatten)]
    pub vqa: VqaInput,
    /// COCO instances file.
    #[arg(long)]
    pub instances: PathBuf,
    /// COCO captions file.
    #[arg(long)]
    pub captions: PathBuf,
    /// Word-vector file (text, optionally .gz); antonym templates are
    /// skipped without one. Falls back to $VQA_LOGIC_EMBEDDINGS.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Also emit the plain Q and NOT Q templates.
    #[arg(long)]
    pub include_plain: bool,
    #[command(flatten)]
    pub gen: GenArgs,
}

#[derive(Debug, Args)]
pub struct InductiveArgs {
    #[command(flatten)]
    pub vqa: VqaInput,
    /// Operands per composition.
    #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
    pub operands: u64,
    #[command(flatten)]
    pub gen: GenArgs,
}

#[derive(Debug, Args)]
pub struct ParseArgs {
    /// A composed question to parse; prints the parse as JSON.
    #[arg(required_unless_present = "dataset", conflicts_with = "dataset")]
    pub text: Option<String>,
    /// Dataset JSONL to parse; gold parses come from each sample's record.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Write predicted parses here as JSONL.
    #[arg(long, requires = "dataset")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AnswererKind {
    Oracle,
    Random,
    Yes,
    File,
    Recombine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AtomicKind {
    Oracle,
    Random,
    Yes,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Hard,
    Frechet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Json,
    Md,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Dataset JSONL.
    #[arg(long)]
    pub dataset: PathBuf,
    /// Answerer to score.
    #[arg(long, value_enum, default_value_t = AnswererKind::Oracle)]
    pub answerer: AnswererKind,
    /// Predictions JSONL for `file` answerers, keyed by sample_id (and
    /// `{sample_id}/c{k}` for recombined components).
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    /// Component answerer for `recombine`.
    #[arg(long, value_enum, default_value_t = AtomicKind::Oracle)]
    pub atomic: AtomicKind,
    /// How `recombine` combines component answers.
    #[arg(long, value_enum, default_value_t = ModeArg::Hard)]
    pub mode: ModeArg,
    /// A prediction is yes when p_yes exceeds this.
    #[arg(long, default_value_t = evalharness::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    /// Report format.
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    pub report: FormatArg,
    /// Write the report here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Add the mirrored-pair consistency section.
    #[arg(long)]
    pub commutativity: bool,
    /// Add the Fréchet-compatibility section.
    #[arg(long)]
    pub fc: bool,
}

#[derive(Debug, Args)]
pub struct FcCheckArgs {
    /// JSONL of {formula, p_yes, p_yes_components}.
    #[arg(long)]
    pub triplets: PathBuf,
}

#[derive(Debug, Args)]
pub struct AntonymArgs {
    /// Object class present in the image; repeatable.
    #[arg(long = "present", required = true)]
    pub present: Vec<String>,
    /// Word-vector file. Falls back to $VQA_LOGIC_EMBEDDINGS.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Candidate class; repeatable. Defaults to the 80 COCO classes.
    #[arg(long = "class")]
    pub classes: Vec<String>,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Dataset JSONL.
    #[arg(long)]
    pub dataset: PathBuf,
}

#[derive(Debug, Args)]
pub struct NegateArgs {
    /// Closed question to negate.
    pub text: String,
    /// Print every legal negation instead of a seeded pick.
    #[arg(long)]
    pub all: bool,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(DataError),
    Eval(EvalError),
    Text(TextError),
    Antonym(AntonymError),
    Parse(ParseError),
    Io(std::io::Error),
}

impl CliError {
    fn code(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "E_USAGE",
            CliError::Data(DataError::Io { .. }) | CliError::Io(_) => "E_IO",
            CliError::Data(DataError::Json { .. }) | CliError::Data(DataError::Jsonl { .. }) => "E_FORMAT",
            CliError::Data(DataError::Ingestion(_)) => "E_INGEST",
            CliError::Data(_) => "E_DATA",
            CliError::Eval(EvalError::Rejected { .. }) => "E_REJECTED",
            CliError::Eval(EvalError::Empty) => "E_EMPTY",
            CliError::Eval(_) => "E_EVAL",
            CliError::Text(_) => "E_TEXT",
            CliError::Antonym(_) => "E_ANTONYM",
            CliError::Parse(_) => "E_PARSE",
        }
    }

    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Data(e) => write!(f, "{e}"),
            CliError::Eval(e) => write!(f, "{e}"),
            CliError::Text(e) => write!(f, "{e}"),
            CliError::Antonym(e) => write!(f, "{e}"),
            CliError::Parse(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

macro_rules! from_err {
    ($($t:ty => $v:ident),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::$v(e)
            }
        })*
    };
}

from_err!(DataError => Data, EvalError => Eval, TextError => Text, AntonymError => Antonym, ParseError => Parse, std::io::Error => Io);

/// Runs the CLI with process stdout/stderr.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    // unlocked handles: the logger writes to stderr from worker threads
    run_with_io(argv, &mut std::io::stdout(), &mut std::io::stderr())
}

/// Runs the CLI writing data to `out` and diagnostics to `err`.
pub fn run_with_io<I, S>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{}", e.render());
                return 0;
            }
            let rendered = e.render().to_string();
            let first = rendered.lines().find(|l| !l.trim().is_empty()).unwrap_or("invalid arguments");
            let _ = writeln!(err, "error[E_USAGE]: {}", first.trim_start_matches("error: "));
            return 2;
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.jobs as usize).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error[E_USAGE]: {e}");
            return 2;
        }
    };
    let (result, buf) = pool.install(|| {
        let mut buf = Vec::new();
        (dispatch(&cli, &mut buf), buf)
    });
    if let Err(e) = out.write_all(&buf).and_then(|_| out.flush()) {
        let _ = writeln!(err, "error[E_IO]: {e}");
        return 1;
    }
    match result {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error[{}]: {}", e.code(), e.to_string().replace('\n', " "));
            e.exit_code()
        }
    }
}

fn gen_config(cli: &Cli, gen: &GenArgs) -> GenConfig {
    GenConfig {
        seed: cli.seed,
        max_pairs_per_image: (!gen.no_cap).then_some(gen.max_pairs),
        single_connective_only: gen.single_connective_only,
        target_size: gen.target_size,
        weights: gen.weights.iter().cloned().collect::<BTreeMap<_, _>>(),
        jobs: cli.jobs as usize,
        ..GenConfig::default()
    }
}

fn load_atoms(vqa: &VqaInput) -> Result<Vec<datagen::AtomicQuestion>, CliError> {
    let records = datagen::load_vqa(&vqa.questions, &vqa.annotations)?;
    let (atoms, report) = datagen::filter_closed(&records);
    log::info!(
        "closed-question filter: kept {} of {} ({:.2}%), {} not yes/no, {} not unanimous",
        report.kept,
        report.total,
        100.0 * report.kept_fraction(),
        report.dropped_not_yes_no,
        report.dropped_ambiguous
    );
    Ok(atoms)
}

fn write_generated(g: &Generated, path: &Path) -> Result<(), CliError> {
    let r = &g.report;
    log::info!(
        "{} samples from {} images ({} atoms used, {} rejected, {} entries skipped, {} images without COCO data)",
        r.samples,
        r.images,
        r.atoms_used,
        r.atoms_rejected,
        r.entries_skipped,
        r.images_missing_coco
    );
    if r.atoms_rejected > 0 {
        log::warn!("{} closed questions do not round-trip through negation and parsing; skipped", r.atoms_rejected);
    }
    datagen::write_jsonl(&g.samples, path)?;
    Ok(())
}

fn embeddings_path(arg: &Option<PathBuf>) -> Option<PathBuf> {
    arg.clone().or_else(|| std::env::var_os(EMBEDDINGS_ENV).map(PathBuf::from))
}

fn write_json<T: Serialize>(out: &mut dyn Write, v: &T) -> Result<(), CliError> {
    let s = serde_json::to_string_pretty(v).map_err(|e| CliError::Io(std::io::Error::other(e)))?;
    writeln!(out, "{s}")?;
    Ok(())
}

fn dispatch(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match &cli.command {
        Command::Compose(a) => {
            let atoms = load_atoms(&a.vqa)?;
            let cfg = GenConfig {
                dedup_negations: !a.no_dedup,
                mirror: a.mirror,
                ..gen_config(cli, &a.gen)
            };
            write_generated(&datagen::gen_compose(&atoms, &cfg)?, &a.gen.out)
        }
        Command::Supplement(a) => {
            let atoms = load_atoms(&a.vqa)?;
            let coco = datagen::load_coco(&a.instances, &a.captions)?;
            let vocab = match embeddings_path(&a.embeddings) {
                Some(p) => {
                    let table = antonyms::load_embeddings(&p)?;
                    let vocab = ClassVocabulary::new(&COCO_CLASSES, &table);
                    let unusable: Vec<&str> = vocab.unusable().collect();
                    if !unusable.is_empty() {
                        log::warn!("classes without embeddings: {}", unusable.join(", "));
                    }
                    Some(vocab)
                }
                None => {
                    log::warn!("no embeddings given; antonym templates are skipped");
                    None
                }
            };
            let cfg = GenConfig {
                include_plain: a.include_plain,
                ..gen_config(cli, &a.gen)
            };
            write_generated(&datagen::gen_supplement(&atoms, &coco, vocab.as_ref(), &cfg)?, &a.gen.out)
        }
        Command::Inductive(a) => {
            let atoms = load_atoms(&a.vqa)?;
            let cfg = GenConfig {
                operands: a.operands as usize,
                ..gen_config(cli, &a.gen)
            };
            write_generated(&datagen::gen_inductive(&atoms, &cfg)?, &a.gen.out)
        }
        Command::Parse(a) => parse_cmd(a, out),
        Command::Eval(a) => eval_cmd(cli, a, out),
        Command::FcCheck(a) => {
            let triplets = evalharness::read_triplets(&a.triplets)?;
            write_json(out, &fc_compatibility_rate(&triplets)?)
        }
        Command::Antonym(a) => {
            let path = embeddings_path(&a.embeddings)
                .ok_or_else(|| CliError::Usage(format!("--embeddings or ${EMBEDDINGS_ENV} is required")))?;
            let table = antonyms::load_embeddings(&path)?;
            let vocab = if a.classes.is_empty() {
                ClassVocabulary::new(&COCO_CLASSES, &table)
            } else {
                ClassVocabulary::new(&a.classes, &table)
            };
            writeln!(out, "{}", adversarial_antonym(&a.present, &vocab)?)?;
            Ok(())
        }
        Command::Stats(a) => {
            let samples: Vec<ComposedSample> = datagen::read_jsonl(&a.dataset)?;
            write_json(out, &datagen::dataset_stats(&samples))
        }
        Command::Negate(a) => {
            let text = textgen::normalize_question(&a.text);
            if a.all {
                for e in textgen::negation_candidates(&text)? {
                    writeln!(out, "{}", e.negated_text)?;
                }
            } else {
                writeln!(out, "{}", textgen::negate_question(&text, cli.seed)?.negated_text)?;
            }
            Ok(())
        }
    }
}

fn gold_parse(s: &ComposedSample) -> Result<ParseResult, CliError> {
    let f = s.parsed_formula().map_err(|e| CliError::Data(e.into()))?;
    let texts: Vec<&str> = s.atoms.iter().map(|a| a.text.as_str()).collect();
    Ok(ParseResult::gold(&s.text, &f, &texts)?)
}

fn parse_cmd(a: &ParseArgs, out: &mut dyn Write) -> Result<(), CliError> {
    if let Some(text) = &a.text {
        return write_json(out, &parse_composed(text));
    }
    let path = a.dataset.as_ref().expect("clap enforces text or dataset");
    let samples: Vec<ComposedSample> = datagen::read_jsonl(path)?;
    let pred: Vec<ParseResult> = samples.iter().map(|s| parse_composed(&s.text)).collect();
    let gold = samples.iter().map(gold_parse).collect::<Result<Vec<_>, _>>()?;
    if let Some(p) = &a.out {
        datagen::write_jsonl(&pred, p)?;
    }
    write_json(out, &parser_metrics(&gold, &pred)?)
}

fn eval_cmd(cli: &Cli, a: &EvalArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let samples: Vec<ComposedSample> = datagen::read_jsonl(&a.dataset)?;
    let oracle = Oracle::new(&samples)?;
    let file = match &a.predictions {
        Some(p) => Some(ExternalFile::load(p)?),
        None => None,
    };
    let needs_file = a.answerer == AnswererKind::File || (a.answerer == AnswererKind::Recombine && a.atomic == AtomicKind::File);
    if needs_file && file.is_none() {
        return Err(CliError::Usage("--predictions is required for file answerers".into()));
    }
    let random = RandomAnswerer { seed: cli.seed };
    let atomic: &dyn Answerer = match a.atomic {
        AtomicKind::Oracle => &oracle,
        AtomicKind::Random => &random,
        AtomicKind::Yes => &ConstantYes,
        AtomicKind::File => file.as_ref().map_or(&ConstantYes as &dyn Answerer, |f| f as &dyn Answerer),
    };
    let recombiner = Recombiner {
        atomic,
        mode: match a.mode {
            ModeArg::Hard => RecombineMode::Hard,
            ModeArg::Frechet => RecombineMode::Frechet,
        },
    };
    let answerer: &dyn Answerer = match a.answerer {
        AnswererKind::Oracle => &oracle,
        AnswererKind::Random => &random,
        AnswererKind::Yes => &ConstantYes,
        AnswererKind::File => file.as_ref().expect("checked above"),
        AnswererKind::Recombine => &recombiner,
    };
    let mut report = evalharness::evaluate(&samples, answerer, a.threshold)?;
    if report.unanswered > 0 {
        log::warn!("{} samples were not answered", report.unanswered);
    }
    if a.commutativity {
        report.commutativity = Some(commutativity_check(&samples, answerer, a.threshold));
    }
    if a.fc {
        report.fc = Some(fc_compatibility_rate(&collect_triplets(&samples, answerer))?);
    }
    let format = match a.report {
        FormatArg::Json => ReportFormat::Json,
        FormatArg::Md => ReportFormat::Markdown,
    };
    let doc = emit_report(&report, format);
    match &a.out {
        Some(p) => std::fs::write(p, doc).map_err(|source| {
            CliError::Data(DataError::Io {
                path: p.display().to_string(),
                source,
            })
        }),
        None => {
            out.write_all(doc.as_bytes())?;
            Ok(())
        }
    }
}

/// Convenience for tests: runs argv and returns (exit code, stdout, stderr).
pub fn run_captured<I, S>(argv: I) -> (i32, String, String)
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = run_with_io(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8_lossy(&out).into_owned(),
        String::from_utf8_lossy(&err).into_owned(),
    )
}
