//! Command-line entry point binding all modules into one workflow: build a
//! masked corpus, elicit predictions, score them, and render audit reports.
//!
//! Exit codes: 0 on success, 1 on run-level failure, 2 on usage errors.
//! No verb mutates its input files; outputs are new files unless `--force`
//! is passed. Secrets travel only through environment variables named in
//! backend specs, never through flags.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{
    resolve_embedder, AuditLog, BackendError, BackendSpec, InferenceBackend, PredictRequest,
    PromptTemplate,
};
use crate::baselines::{BaselineError, NamePool};
use crate::categorize::{categorize, histogram, CategorizeError, NameGazetteer};
use crate::harness::{
    self, load_corpus, manifest, EvaluationReport, HarnessError, Registry, RunConfig, TextVariant,
};
use crate::masking::{
    process_record, MaskingError, MaskingOptions, MaskingReport, RawRecord, TextTransformProvider,
};
use crate::metrics::{aggregate, score_example, MetricScores, PerExampleScores};
use crate::model::{DecodingSpec, DocumentKind, MaskedDocument, PredictionSet, DEFAULT_MASK_TOKEN};
use crate::rag::{chunk_articles, ChunkIndex, NewsArticle, RagPipeline, RetrievalResult};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Msg(String),
    #[error("output {0} already exists; pass --force to overwrite")]
    OutputExists(PathBuf),
    #[error("config file: {0}")]
    Config(String),
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Masking(#[from] MaskingError),
    #[error(transparent)]
    Rag(#[from] crate::rag::RagError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Categorize(#[from] CategorizeError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Parser)]
#[command(
    name = "reident",
    version,
    about = "Battle-tests anonymized documents by measuring re-identification risk"
)]
struct Cli {
    /// Cap on worker threads for document-level parallelism.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a masked corpus from raw person-centric texts.
    Mask(MaskArgs),
    /// Score one backend over a masked corpus.
    Evaluate(EvaluateArgs),
    /// Run a grid of configurations and emit a scores matrix.
    Sweep(SweepArgs),
    /// Score the random or majority name-guessing baseline.
    Baseline(BaselineArgs),
    /// Retrieval-augmented re-identification of rulings.
    Rag(RagArgs),
    /// Classify stored predictions into error-analysis categories.
    Categorize(CategorizeArgs),
    /// Render a report JSON to CSV or markdown tables.
    Report(ReportArgs),
}

/// Routes argv to a verb; returns the process exit code.
pub fn dispatch<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 2,
            };
            let _ = e.print();
            return code;
        }
    };
    let run = || match cli.command {
        Command::Mask(args) => cmd_mask(args),
        Command::Evaluate(args) => cmd_evaluate(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Baseline(args) => cmd_baseline(args),
        Command::Rag(args) => cmd_rag(args),
        Command::Categorize(args) => cmd_categorize(args),
        Command::Report(args) => cmd_report(args),
    };
    let result = match cli.jobs {
        Some(jobs) => match rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build()
        {
            Ok(pool) => pool.install(run),
            Err(e) => Err(CliError::Msg(format!("worker pool: {e}"))),
        },
        None => run(),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn ensure_writable(path: &Path, force: bool) -> Result<(), CliError> {
    if path.exists() && !force {
        return Err(CliError::OutputExists(path.to_owned()));
    }
    Ok(())
}

fn write_file(path: &Path, contents: &str, force: bool) -> Result<(), CliError> {
    ensure_writable(path, force)?;
    std::fs::write(path, contents)?;
    Ok(())
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.file_stem().unwrap_or_default().to_os_string();
    name.push(suffix);
    path.with_file_name(name)
}

// ---------------------------------------------------------------------------
// config file
// ---------------------------------------------------------------------------

/// Optional TOML config; any flag may come from here instead. Precedence is
/// flag > config > built-in default.
///
/// Recognized keys: `top_n`, `max_chars`, `sentences`, `template`, `seed`,
/// `alpha`, `gazetteer`, plus `[[backends]]` and `[[templates]]` tables
/// mirroring the backend and template schemas.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    top_n: Option<usize>,
    max_chars: Option<usize>,
    sentences: Option<usize>,
    template: Option<String>,
    seed: Option<u64>,
    alpha: Option<f64>,
    gazetteer: Option<PathBuf>,
    #[serde(default)]
    backends: Vec<BackendSpec>,
    #[serde(default)]
    templates: Vec<PromptTemplate>,
}

impl ConfigFile {
    fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(ConfigFile::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)?;
                toml::from_str(&text).map_err(|e| CliError::Config(e.to_string()))
            }
        }
    }
}

fn build_registry(
    config: &ConfigFile,
    gazetteer_flag: Option<&Path>,
) -> Result<Registry, CliError> {
    let mut registry = Registry::with_defaults();
    for spec in &config.backends {
        registry.add_backend(spec.clone());
    }
    for template in &config.templates {
        registry.add_template(template.clone());
    }
    let gazetteer_path = gazetteer_flag.or(config.gazetteer.as_deref());
    if let Some(path) = gazetteer_path {
        registry.gazetteer = NameGazetteer::from_file(path)??;
    }
    Ok(registry)
}

// ---------------------------------------------------------------------------
// mask
// ---------------------------------------------------------------------------

#[derive(Args)]
struct MaskArgs {
    /// Raw corpus JSONL: {"id","title","text","spans":[..]}.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    /// Masked corpus JSONL to write.
    #[arg(long = "out", value_name = "FILE")]
    output: PathBuf,
    /// Per-record masking report sidecar (default: <out>.report.jsonl).
    #[arg(long, value_name = "FILE")]
    report: Option<PathBuf>,
    /// Keep only texts strictly longer than this many characters.
    #[arg(long, default_value_t = crate::masking::DEFAULT_MIN_CHARS)]
    min_chars: usize,
    #[arg(long, default_value = DEFAULT_MASK_TOKEN)]
    mask_token: String,
    /// A mask must appear within this many leading characters.
    #[arg(long, default_value_t = crate::masking::DEFAULT_EARLY_WINDOW)]
    early_window: usize,
    /// Document kind recorded on every output document.
    #[arg(long, default_value = "wikipedia")]
    kind: String,
    /// Paraphrase provider locator (e.g. mock:identity or an HTTP endpoint).
    #[arg(long, value_name = "LOCATOR")]
    paraphrase: Option<String>,
    #[arg(long)]
    force: bool,
}

/// Sentence-level paraphrasing via any generation backend; the reference
/// decoding is 10 beams at temperature 1.5.
struct BackendParaphraser {
    backend: Arc<dyn InferenceBackend>,
    decoding: DecodingSpec,
}

impl TextTransformProvider for BackendParaphraser {
    fn transform(&self, sentence: &str) -> Result<String, MaskingError> {
        let prompt = format!("Paraphrase the following sentence:\n\n{sentence}");
        let req = PredictRequest {
            document_id: "",
            doc_text: sentence,
            prompt: &prompt,
            mask_token: DEFAULT_MASK_TOKEN,
            target: None,
            top_n: 1,
            decoding: &self.decoding,
            run_seed: 0,
        };
        self.backend
            .complete(&req)
            .map_err(|e| MaskingError::ProviderUnavailable(e.to_string()))
    }
}

fn parse_kind(raw: &str) -> Result<DocumentKind, CliError> {
    match raw {
        "wikipedia" => Ok(DocumentKind::Wikipedia),
        "ruling" => Ok(DocumentKind::Ruling),
        "other" => Ok(DocumentKind::Other),
        other => Err(CliError::Msg(format!("unknown document kind {other:?}"))),
    }
}

#[derive(Serialize)]
struct MaskReportLine<'a> {
    id: &'a str,
    #[serde(flatten)]
    report: &'a MaskingReport,
}

fn cmd_mask(args: MaskArgs) -> Result<(), CliError> {
    let report_path = args
        .report
        .clone()
        .unwrap_or_else(|| sibling(&args.output, ".report.jsonl"));
    ensure_writable(&args.output, args.force)?;
    ensure_writable(&report_path, args.force)?;

    let paraphraser: Option<Box<dyn TextTransformProvider>> = match &args.paraphrase {
        None => None,
        Some(locator) => {
            let spec = BackendSpec::for_locator(locator);
            let backend = crate::backends::resolve_backend(&spec)?;
            Some(Box::new(BackendParaphraser {
                backend,
                decoding: DecodingSpec::beam(10).with_temperature(1.5),
            }))
        }
    };

    let options = MaskingOptions {
        min_chars: args.min_chars,
        mask_token: args.mask_token.clone(),
        early_window: args.early_window,
        kind: parse_kind(&args.kind)?,
    };

    let text = std::fs::read_to_string(&args.input)?;
    let mut records = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: RawRecord =
            serde_json::from_str(line).map_err(|e| HarnessError::ParseError {
                line: idx + 1,
                message: e.to_string(),
            })?;
        records.push((idx + 1, record));
    }

    // per-record masking is independent; run it across the worker pool
    use rayon::prelude::*;
    let outcomes: Vec<_> = records
        .par_iter()
        .map(|(line, record)| {
            process_record(record, &options, paraphraser.as_deref())
                .map_err(|e| CliError::Msg(format!("record {} (line {line}): {e}", record.id)))
        })
        .collect();

    let mut documents = String::new();
    let mut reports = String::new();
    let mut kept = 0usize;
    let mut dropped: BTreeMap<String, usize> = BTreeMap::new();
    for ((_, record), outcome) in records.iter().zip(outcomes) {
        let (doc, report) = outcome?;
        reports.push_str(&serde_json::to_string(&MaskReportLine {
            id: &record.id,
            report: &report,
        })?);
        reports.push('\n');
        match doc {
            Some(doc) => {
                documents.push_str(&serde_json::to_string(&doc)?);
                documents.push('\n');
                kept += 1;
            }
            None => {
                let reason = match report.drop_reason {
                    Some(crate::masking::DropReason::TooShort) => "too_short",
                    Some(crate::masking::DropReason::NoEarlyMask) => "no_early_mask",
                    Some(crate::masking::DropReason::NoMatch) => "no_match",
                    None => "unknown",
                };
                *dropped.entry(reason.to_owned()).or_insert(0) += 1;
            }
        }
    }
    write_file(&args.output, &documents, args.force)?;
    write_file(&report_path, &reports, args.force)?;
    println!("kept {kept} documents, dropped {dropped:?}");
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate / baseline
// ---------------------------------------------------------------------------

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Backend id from the config file, or a bare locator (mock:oracle,
    /// baseline:random, https://..).
    #[arg(long)]
    backend: String,
    #[arg(long)]
    template: Option<String>,
    #[arg(long)]
    top_n: Option<usize>,
    /// Character budget for the input window.
    #[arg(long, value_name = "N", conflicts_with = "sentences")]
    max_chars: Option<usize>,
    /// Sentence budget for the input window (instead of characters).
    #[arg(long, value_name = "N")]
    sentences: Option<usize>,
    #[arg(long, default_value = "original")]
    variant: TextVariant,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 0.5)]
    max_failure_ratio: f64,
    /// Report JSON path (default: <corpus>.report.json).
    #[arg(long = "out", value_name = "FILE")]
    output: Option<PathBuf>,
    /// Also write the one-row scores matrix as CSV.
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Also write the category histogram as CSV.
    #[arg(long, value_name = "FILE")]
    histogram: Option<PathBuf>,
    /// Dump every prediction set as JSONL (input for `categorize`).
    #[arg(long, value_name = "FILE")]
    predictions: Option<PathBuf>,
    /// Request/response audit trail as JSONL.
    #[arg(long, value_name = "FILE")]
    audit: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Gazetteer file for the categorizer (one lowercase token per line).
    #[arg(long, value_name = "FILE")]
    gazetteer: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn default_max_chars_for(corpus: &[MaskedDocument]) -> usize {
    let all_rulings = !corpus.is_empty() && corpus.iter().all(|d| d.kind == DocumentKind::Ruling);
    if all_rulings {
        harness::DEFAULT_RULING_MAX_CHARS
    } else {
        harness::DEFAULT_WIKI_MAX_CHARS
    }
}

struct EvaluationRequest {
    corpus_path: PathBuf,
    backend: String,
    template: Option<String>,
    top_n: Option<usize>,
    max_chars: Option<usize>,
    sentences: Option<usize>,
    variant: TextVariant,
    seed: Option<u64>,
    alpha: Option<f64>,
    max_failure_ratio: f64,
    output: Option<PathBuf>,
    csv: Option<PathBuf>,
    histogram: Option<PathBuf>,
    predictions: Option<PathBuf>,
    audit: Option<PathBuf>,
    force: bool,
}

struct EvaluateOutcome {
    report: EvaluationReport,
    output: PathBuf,
}

fn run_evaluation(
    req: EvaluationRequest,
    registry: &Registry,
    config: &ConfigFile,
) -> Result<EvaluateOutcome, CliError> {
    let corpus_bytes = std::fs::read(&req.corpus_path)?;
    let corpus = load_corpus(&req.corpus_path)?;

    let mut run_config = RunConfig::new(&req.backend);
    run_config.template = req.template.or_else(|| config.template.clone());
    run_config.top_n = req.top_n.or(config.top_n).unwrap_or(5);
    run_config.seed = req.seed.or(config.seed).unwrap_or(0);
    run_config.alpha = req
        .alpha
        .or(config.alpha)
        .unwrap_or(crate::metrics::DEFAULT_ALPHA);
    run_config.max_failure_ratio = req.max_failure_ratio;
    run_config.text_variant = req.variant;
    match (
        req.max_chars.or(config.max_chars),
        req.sentences.or(config.sentences),
    ) {
        (Some(max), None) => {
            run_config.max_input_chars = Some(max);
            run_config.sentence_cap = None;
        }
        (None, Some(cap)) => {
            run_config.max_input_chars = None;
            run_config.sentence_cap = Some(cap);
        }
        (Some(_), Some(_)) => {
            return Err(CliError::Msg(
                "max_chars and sentences are mutually exclusive".into(),
            ))
        }
        (None, None) => {
            run_config.max_input_chars = Some(default_max_chars_for(&corpus));
            run_config.sentence_cap = None;
        }
    }

    let output = req
        .output
        .unwrap_or_else(|| sibling(&req.corpus_path, ".report.json"));
    let manifest_path = sibling(&output, ".manifest.json");
    ensure_writable(&output, req.force)?;
    ensure_writable(&manifest_path, req.force)?;

    let audit = match &req.audit {
        Some(path) => {
            ensure_writable(path, req.force)?;
            Some(AuditLog::create(path)?)
        }
        None => None,
    };

    let detailed = harness::run_detailed(&run_config, &corpus, registry, audit.as_ref())?;
    write_file(&output, &harness::report_json(&detailed.report), req.force)?;
    let run_manifest = manifest(&run_config, &corpus_bytes);
    let mut manifest_json = serde_json::to_string_pretty(&run_manifest)?;
    manifest_json.push('\n');
    write_file(&manifest_path, &manifest_json, req.force)?;

    if let Some(path) = &req.csv {
        write_file(path, &harness::scores_csv(&detailed.report), req.force)?;
    }
    if let Some(path) = &req.histogram {
        write_file(path, &harness::histogram_csv(&detailed.report), req.force)?;
    }
    if let Some(path) = &req.predictions {
        let mut lines = String::new();
        for set in &detailed.predictions {
            lines.push_str(&serde_json::to_string(set)?);
            lines.push('\n');
        }
        write_file(path, &lines, req.force)?;
    }
    Ok(EvaluateOutcome {
        report: detailed.report,
        output,
    })
}

fn print_report_summary(report: &EvaluationReport, output: &Path) {
    match &report.scores {
        Some(s) => println!(
            "pnms={:.4} lnms={:.4} nld={:.4} w_pnms={:.4} scored={} failures={} skipped={} unlabeled={} -> {}",
            s.pnms,
            s.lnms,
            s.nld,
            s.w_pnms,
            report.per_example.len(),
            report.failures,
            report.skipped,
            report.unlabeled,
            output.display(),
        ),
        None => println!(
            "no scored documents (failures={} skipped={} unlabeled={}) -> {}",
            report.failures,
            report.skipped,
            report.unlabeled,
            output.display(),
        ),
    }
}

fn cmd_evaluate(args: EvaluateArgs) -> Result<(), CliError> {
    let config = ConfigFile::load(args.config.as_deref())?;
    let registry = build_registry(&config, args.gazetteer.as_deref())?;
    let outcome = run_evaluation(
        EvaluationRequest {
            corpus_path: args.corpus,
            backend: args.backend,
            template: args.template,
            top_n: args.top_n,
            max_chars: args.max_chars,
            sentences: args.sentences,
            variant: args.variant,
            seed: args.seed,
            alpha: args.alpha,
            max_failure_ratio: args.max_failure_ratio,
            output: args.output,
            csv: args.csv,
            histogram: args.histogram,
            predictions: args.predictions,
            audit: args.audit,
            force: args.force,
        },
        &registry,
        &config,
    )?;
    print_report_summary(&outcome.report, &outcome.output);
    Ok(())
}

#[derive(Args)]
struct BaselineArgs {
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Which baseline: random or majority.
    #[arg(long)]
    mode: String,
    /// Override the bundled first-name pool (one name per line, ordered).
    #[arg(long, value_name = "FILE")]
    first_names: Option<PathBuf>,
    /// Override the bundled last-name pool.
    #[arg(long, value_name = "FILE")]
    last_names: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long, value_name = "N")]
    max_chars: Option<usize>,
    #[arg(long = "out", value_name = "FILE")]
    output: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn cmd_baseline(args: BaselineArgs) -> Result<(), CliError> {
    let locator = match args.mode.as_str() {
        "random" => "baseline:random",
        "majority" => "baseline:majority",
        other => return Err(CliError::Msg(format!("unknown baseline mode {other:?}"))),
    };
    let config = ConfigFile::default();
    let mut registry = Registry::with_defaults();
    match (&args.first_names, &args.last_names) {
        (Some(first), Some(last)) => {
            let pool = NamePool::from_files(first, last)??;
            registry.random_pool = pool.clone();
            registry.majority_pool = pool;
        }
        (None, None) => {}
        _ => {
            return Err(CliError::Msg(
                "--first-names and --last-names must be given together".into(),
            ))
        }
    }
    let outcome = run_evaluation(
        EvaluationRequest {
            corpus_path: args.corpus,
            backend: locator.to_owned(),
            template: None,
            top_n: args.top_n,
            max_chars: args.max_chars,
            sentences: None,
            variant: TextVariant::Original,
            seed: args.seed,
            alpha: None,
            max_failure_ratio: 0.5,
            output: args.output,
            csv: None,
            histogram: None,
            predictions: None,
            audit: None,
            force: args.force,
        },
        &registry,
        &config,
    )?;
    print_report_summary(&outcome.report, &outcome.output);
    Ok(())
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    /// Backends to cross (repeatable).
    #[arg(long, required = true)]
    backend: Vec<String>,
    /// Comma-separated character budgets, e.g. 500,1000,2000,4000.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    max_chars: Vec<usize>,
    /// Comma-separated sentence budgets.
    #[arg(long, value_name = "LIST", value_delimiter = ',')]
    sentences: Vec<usize>,
    /// Comma-separated text variants.
    #[arg(
        long,
        value_name = "LIST",
        value_delimiter = ',',
        default_value = "original"
    )]
    variant: Vec<TextVariant>,
    #[arg(long)]
    template: Option<String>,
    #[arg(long)]
    top_n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Scores matrix CSV (default: stdout).
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    /// Directory for per-run report JSONs.
    #[arg(long, value_name = "DIR")]
    out_dir: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let config = ConfigFile::load(args.config.as_deref())?;
    let registry = build_registry(&config, None)?;
    let corpus = load_corpus(&args.corpus)?;

    let mut truncations: Vec<(Option<usize>, Option<usize>)> = Vec::new();
    for m in &args.max_chars {
        truncations.push((Some(*m), None));
    }
    for s in &args.sentences {
        truncations.push((None, Some(*s)));
    }
    if truncations.is_empty() {
        truncations.push((Some(default_max_chars_for(&corpus)), None));
    }

    let mut configs = Vec::new();
    for backend in &args.backend {
        for variant in &args.variant {
            for (max_chars, cap) in &truncations {
                let mut rc = RunConfig::new(backend);
                rc.template = args.template.clone().or_else(|| config.template.clone());
                rc.top_n = args.top_n.or(config.top_n).unwrap_or(5);
                rc.seed = args.seed.or(config.seed).unwrap_or(0);
                rc.text_variant = *variant;
                rc.max_input_chars = *max_chars;
                rc.sentence_cap = *cap;
                configs.push(rc);
            }
        }
    }

    let results = harness::sweep(&configs, &corpus, &registry);
    if let Some(dir) = &args.out_dir {
        std::fs::create_dir_all(dir)?;
        for (i, result) in results.iter().enumerate() {
            if let Ok(report) = result {
                let path = dir.join(format!("run_{i:03}.json"));
                write_file(&path, &harness::report_json(report), args.force)?;
            }
        }
    }
    let matrix = harness::sweep_csv(&configs, &results);
    match &args.csv {
        Some(path) => write_file(path, &matrix, args.force)?,
        None => print!("{matrix}"),
    }
    let failed = results.iter().filter(|r| r.is_err()).count();
    if failed > 0 {
        for (rc, result) in configs.iter().zip(&results) {
            if let Err(e) = result {
                eprintln!("run {:?} failed: {e}", rc.label());
            }
        }
        return Err(CliError::Msg(format!(
            "{failed} of {} runs failed",
            results.len()
        )));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// rag
// ---------------------------------------------------------------------------

#[derive(Args)]
struct RagArgs {
    /// Rulings as masked-document JSONL.
    #[arg(long, value_name = "FILE")]
    ruling: PathBuf,
    /// News corpus JSONL: {"article_id","text"}.
    #[arg(long, value_name = "FILE")]
    articles: PathBuf,
    /// Retrieved chunks per ruling.
    #[arg(long, default_value_t = crate::rag::DEFAULT_TOP_K)]
    k: usize,
    #[arg(long, default_value_t = crate::rag::DEFAULT_CHUNK_SIZE)]
    chunk_size: usize,
    #[arg(long, default_value_t = 5)]
    top_n: usize,
    /// Generation backend that answers from the assembled context.
    #[arg(long, default_value = "mock:context_chain")]
    backend: String,
    /// Backend that summarizes each ruling.
    #[arg(long, default_value = "mock:lead:2")]
    summarizer: String,
    /// Embedding provider locator.
    #[arg(long, default_value = "mock:hash")]
    embedder: String,
    /// Binary sidecar caching chunk embeddings between runs.
    #[arg(long, value_name = "FILE")]
    cache: Option<PathBuf>,
    /// Retrieval trace JSONL for auditing.
    #[arg(long, value_name = "FILE")]
    trace: Option<PathBuf>,
    #[arg(long = "out", value_name = "FILE")]
    output: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

#[derive(Serialize)]
struct RagReportEntry {
    ruling_id: String,
    summary: String,
    retrieved: Vec<RetrievalResult>,
    predictions: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<PerExampleScores>,
}

#[derive(Serialize)]
struct RagReport {
    rulings: Vec<RagReportEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scores: Option<MetricScores>,
}

fn load_articles(path: &Path) -> Result<Vec<NewsArticle>, CliError> {
    let text = std::fs::read_to_string(path)?;
    let mut articles = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let article: NewsArticle =
            serde_json::from_str(line).map_err(|e| HarnessError::ParseError {
                line: idx + 1,
                message: e.to_string(),
            })?;
        articles.push(article);
    }
    Ok(articles)
}

fn cmd_rag(args: RagArgs) -> Result<(), CliError> {
    let output = args
        .output
        .clone()
        .unwrap_or_else(|| sibling(&args.ruling, ".rag.json"));
    ensure_writable(&output, args.force)?;
    if let Some(trace) = &args.trace {
        ensure_writable(trace, args.force)?;
    }

    let rulings = load_corpus(&args.ruling)?;
    let articles = load_articles(&args.articles)?;
    let chunks = chunk_articles(&articles, args.chunk_size);

    let embedder = resolve_embedder(&args.embedder, None)?;
    let index = match &args.cache {
        Some(path) => ChunkIndex::build_with_cache(chunks, embedder.as_ref(), path)?,
        None => ChunkIndex::build(chunks, embedder.as_ref())?,
    };

    let summarizer_spec = BackendSpec::for_locator(&args.summarizer);
    let summarizer = crate::backends::resolve_backend(&summarizer_spec)?;
    let responder_spec = BackendSpec::for_locator(&args.backend);
    let responder = crate::backends::resolve_backend(&responder_spec)?;
    let mut pipeline = RagPipeline::new(summarizer.as_ref(), responder.as_ref(), embedder.as_ref());
    pipeline.k = args.k;
    pipeline.top_n = args.top_n;

    let mut entries = Vec::new();
    let mut per_example = Vec::new();
    let mut trace_lines = String::new();
    for ruling in &rulings {
        let outcome = pipeline
            .reidentify(ruling, &index)
            .map_err(|e| CliError::Msg(format!("ruling {}: {e}", ruling.id)))?;
        let scores = match &ruling.target {
            Some(target) => {
                let s = score_example(target, &outcome.predictions)
                    .map_err(|e| CliError::Msg(format!("ruling {}: {e}", ruling.id)))?;
                per_example.push(s.clone());
                Some(s)
            }
            None => None,
        };
        let entry = RagReportEntry {
            ruling_id: ruling.id.clone(),
            summary: outcome.summary.clone(),
            retrieved: outcome.retrieved.clone(),
            predictions: outcome.predictions.predictions.clone(),
            scores,
        };
        if args.trace.is_some() {
            trace_lines.push_str(&serde_json::to_string(&entry)?);
            trace_lines.push('\n');
        }
        println!("{}: top candidates {:?}", ruling.id, entry.predictions);
        entries.push(entry);
    }

    let scores = if per_example.is_empty() {
        None
    } else {
        Some(aggregate(&per_example, crate::metrics::DEFAULT_ALPHA)?)
    };
    let report = RagReport {
        rulings: entries,
        scores,
    };
    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_file(&output, &json, args.force)?;
    if let Some(trace) = &args.trace {
        write_file(trace, &trace_lines, args.force)?;
    }
    if let Some(s) = &report.scores {
        println!(
            "pnms={:.4} lnms={:.4} nld={:.4} w_pnms={:.4} -> {}",
            s.pnms,
            s.lnms,
            s.nld,
            s.w_pnms,
            output.display()
        );
    } else {
        println!("-> {}", output.display());
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// categorize
// ---------------------------------------------------------------------------

#[derive(Args)]
struct CategorizeArgs {
    /// Prediction sets as JSONL (written by `evaluate --predictions`).
    #[arg(long, value_name = "FILE")]
    predictions: PathBuf,
    /// The corpus the predictions were made against.
    #[arg(long, value_name = "FILE")]
    corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    gazetteer: Option<PathBuf>,
    /// Histogram CSV (default: stdout).
    #[arg(long = "out", value_name = "FILE")]
    output: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn cmd_categorize(args: CategorizeArgs) -> Result<(), CliError> {
    let gazetteer = match &args.gazetteer {
        Some(path) => NameGazetteer::from_file(path)??,
        None => NameGazetteer::bundled(),
    };
    let corpus = load_corpus(&args.corpus)?;
    let by_id: BTreeMap<&str, &MaskedDocument> =
        corpus.iter().map(|d| (d.id.as_str(), d)).collect();

    let text = std::fs::read_to_string(&args.predictions)?;
    let mut categories = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let set: PredictionSet =
            serde_json::from_str(line).map_err(|e| HarnessError::ParseError {
                line: idx + 1,
                message: e.to_string(),
            })?;
        let doc = by_id.get(set.document_id.as_str()).ok_or_else(|| {
            CliError::Msg(format!(
                "prediction set references unknown document {:?}",
                set.document_id
            ))
        })?;
        for prediction in &set.predictions {
            categories.push(categorize(
                prediction,
                &doc.masked_text,
                &doc.mask_token,
                &gazetteer,
            ));
        }
    }
    let counts = histogram(categories.iter());
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["category", "count"]).expect("csv row");
    for category in crate::categorize::PredictionCategory::ALL {
        let count = counts.get(&category).copied().unwrap_or(0);
        writer
            .write_record([category.as_str(), &count.to_string()])
            .expect("csv row");
    }
    let csv = String::from_utf8(writer.into_inner().expect("csv buffer")).expect("utf-8");
    match &args.output {
        Some(path) => write_file(path, &csv, args.force)?,
        None => print!("{csv}"),
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Args)]
struct ReportArgs {
    /// Report JSON written by `evaluate`.
    #[arg(long = "in", value_name = "FILE")]
    input: PathBuf,
    #[arg(long, value_name = "FILE")]
    csv: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    histogram: Option<PathBuf>,
    #[arg(long, value_name = "FILE")]
    markdown: Option<PathBuf>,
    #[arg(long)]
    force: bool,
}

fn cmd_report(args: ReportArgs) -> Result<(), CliError> {
    let text = std::fs::read_to_string(&args.input)?;
    let report: EvaluationReport = serde_json::from_str(&text)?;
    if let Some(path) = &args.csv {
        write_file(path, &harness::scores_csv(&report), args.force)?;
    }
    if let Some(path) = &args.histogram {
        write_file(path, &harness::histogram_csv(&report), args.force)?;
    }
    match &args.markdown {
        Some(path) => write_file(path, &harness::report_markdown(&report), args.force)?,
        None => {
            if args.csv.is_none() && args.histogram.is_none() {
                let mut stdout = std::io::stdout().lock();
                let _ = stdout.write_all(harness::report_markdown(&report).as_bytes());
            }
        }
    }
    Ok(())
}
