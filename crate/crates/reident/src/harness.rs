//! Orchestrates evaluation runs: loads corpora, fans predictions out across
//! backends and configurations, aggregates metric scores and emits reports.
//!
//! A run is deterministic given its config, corpus and mock backends: the
//! serialized report of two identical runs is byte-identical. Documents are
//! processed in parallel; per-document failures are recorded and the run
//! continues unless more than a configurable share of documents fail.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::backends::{
    predict_text, resolve_backend, AuditLog, AuditRecord, BackendError, BackendSpec,
    InferenceBackend, PromptTemplate, TaskKind,
};
use crate::baselines::{BaselineBackend, NamePool};
use crate::categorize::{categorize, NameGazetteer, PredictionCategory};
use crate::masking::split_sentences;
use crate::metrics::{aggregate, score_example, MetricScores, MetricsError, PerExampleScores};
use crate::model::{MaskedDocument, PredictionSet};

pub const DEFAULT_TEMPLATE_GENERATION: &str = "generation_default";
pub const DEFAULT_TEMPLATE_QA: &str = "qa_default";
pub const DEFAULT_TEMPLATE_FILL_MASK: &str = "fill_mask_default";

/// Default input budget for encyclopedia pages.
pub const DEFAULT_WIKI_MAX_CHARS: usize = 1000;

/// Default input budget for court rulings.
pub const DEFAULT_RULING_MAX_CHARS: usize = 10_000;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("line {line}: parse error: {message}")]
    ParseError { line: usize, message: String },
    #[error("line {line}: invariant violated: {reason}")]
    InvariantViolation { line: usize, reason: String },
    #[error("unknown template {0:?}")]
    UnknownTemplate(String),
    #[error("{failures} of {total} documents failed, above the {limit:.0}% abort threshold")]
    TooManyFailures {
        failures: usize,
        total: usize,
        limit: f64,
    },
    #[error("invalid run config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Which stored text of a document a run evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TextVariant {
    #[default]
    Original,
    Paraphrased,
}

impl std::str::FromStr for TextVariant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "original" => Ok(TextVariant::Original),
            "paraphrased" => Ok(TextVariant::Paraphrased),
            other => Err(format!("unknown text variant {other:?}")),
        }
    }
}

fn default_top_n() -> usize {
    5
}

fn default_alpha() -> f64 {
    crate::metrics::DEFAULT_ALPHA
}

fn default_max_failure_ratio() -> f64 {
    0.5
}

/// One evaluation configuration. Exactly one of `max_input_chars` and
/// `sentence_cap` governs truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub backend: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_input_chars: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sentence_cap: Option<usize>,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default)]
    pub text_variant: TextVariant,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_max_failure_ratio")]
    pub max_failure_ratio: f64,
}

impl RunConfig {
    pub fn new(backend: impl Into<String>) -> Self {
        RunConfig {
            backend: backend.into(),
            template: None,
            max_input_chars: Some(DEFAULT_WIKI_MAX_CHARS),
            sentence_cap: None,
            top_n: default_top_n(),
            text_variant: TextVariant::Original,
            seed: 0,
            alpha: default_alpha(),
            max_failure_ratio: default_max_failure_ratio(),
        }
    }

    pub fn with_max_chars(mut self, max_chars: usize) -> Self {
        self.max_input_chars = Some(max_chars);
        self.sentence_cap = None;
        self
    }

    pub fn with_sentence_cap(mut self, cap: usize) -> Self {
        self.sentence_cap = Some(cap);
        self.max_input_chars = None;
        self
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        match (self.max_input_chars, self.sentence_cap) {
            (Some(_), Some(_)) => Err(HarnessError::InvalidConfig(
                "max_input_chars and sentence_cap are mutually exclusive".into(),
            )),
            (None, None) => Err(HarnessError::InvalidConfig(
                "one of max_input_chars or sentence_cap is required".into(),
            )),
            _ => {
                if self.top_n < 1 {
                    return Err(HarnessError::InvalidConfig("top_n < 1".into()));
                }
                if !(0.0..=1.0).contains(&self.alpha) {
                    return Err(HarnessError::InvalidConfig(format!(
                        "alpha {} outside [0, 1]",
                        self.alpha
                    )));
                }
                Ok(())
            }
        }
    }

    /// Short human-readable label used in sweep tables.
    pub fn label(&self) -> String {
        let truncation = match (self.max_input_chars, self.sentence_cap) {
            (Some(m), _) => format!("{m}ch"),
            (_, Some(s)) => format!("{s}sent"),
            _ => "?".into(),
        };
        let variant = match self.text_variant {
            TextVariant::Original => "original",
            TextVariant::Paraphrased => "paraphrased",
        };
        format!("{} {variant} {truncation} top{}", self.backend, self.top_n)
    }
}

/// A per-document failure kept in the report for auditing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureRecord {
    pub document_id: String,
    pub message: String,
}

/// Everything one run produced.
///
/// `wall_time` is measured but deliberately not serialized: report files of
/// identical runs must be byte-identical.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub config: RunConfig,
    pub scores: Option<MetricScores>,
    pub per_example: Vec<PerExampleScores>,
    pub category_histogram: BTreeMap<String, usize>,
    pub failures: usize,
    pub skipped: usize,
    pub unlabeled: usize,
    pub failure_details: Vec<FailureRecord>,
    #[serde(skip)]
    pub wall_time: Duration,
}

impl EvaluationReport {
    /// scored + failed + skipped + unlabeled documents account for the
    /// whole corpus.
    pub fn accounted_documents(&self) -> usize {
        self.per_example.len() + self.failures + self.skipped + self.unlabeled
    }
}

/// Registered backends, prompt templates, name pools and the gazetteer.
pub struct Registry {
    backends: BTreeMap<String, BackendSpec>,
    templates: BTreeMap<String, PromptTemplate>,
    pub gazetteer: NameGazetteer,
    pub random_pool: NamePool,
    pub majority_pool: NamePool,
}

impl Default for Registry {
    fn default() -> Self {
        Self::with_defaults()
    }
}

impl Registry {
    /// Bundled templates, pools and gazetteer; no remote backends.
    pub fn with_defaults() -> Self {
        let mut templates = BTreeMap::new();
        for t in [
            PromptTemplate::new(
                DEFAULT_TEMPLATE_GENERATION,
                "The following text is about a person, but the person is referred to as \
                 <mask>.\n\n",
                "\n\nWhat is the name of the person referred to as <mask>? Give only the \
                 name, no more than 3 words. If you do not know, give your best guess.",
            ),
            PromptTemplate::new(
                DEFAULT_TEMPLATE_QA,
                "",
                "\n\nWho is the person referred to as <mask>? Answer with the exact name \
                 only, without punctuation. If you do not know, guess.",
            ),
            PromptTemplate::passthrough(DEFAULT_TEMPLATE_FILL_MASK),
        ] {
            templates.insert(t.id.clone(), t);
        }
        Registry {
            backends: BTreeMap::new(),
            templates,
            gazetteer: NameGazetteer::bundled(),
            random_pool: NamePool::bundled_random(),
            majority_pool: NamePool::bundled_majority(),
        }
    }

    pub fn add_backend(&mut self, spec: BackendSpec) {
        self.backends.insert(spec.id.clone(), spec);
    }

    pub fn add_template(&mut self, template: PromptTemplate) {
        self.templates.insert(template.id.clone(), template);
    }

    pub fn template(&self, id: &str) -> Option<&PromptTemplate> {
        self.templates.get(id)
    }

    /// A registered backend id, or an ad-hoc spec for a bare locator.
    pub fn backend_spec(&self, id_or_locator: &str) -> BackendSpec {
        self.backends
            .get(id_or_locator)
            .cloned()
            .unwrap_or_else(|| BackendSpec::for_locator(id_or_locator))
    }

    /// Resolves the transport, including the baseline pseudo-backends.
    pub fn resolve(
        &self,
        spec: &BackendSpec,
    ) -> Result<std::sync::Arc<dyn InferenceBackend>, BackendError> {
        match spec.endpoint.as_str() {
            "baseline:random" => Ok(std::sync::Arc::new(BaselineBackend::random(
                self.random_pool.clone(),
            ))),
            "baseline:majority" => Ok(std::sync::Arc::new(BaselineBackend::majority(
                self.majority_pool.clone(),
            ))),
            _ => resolve_backend(spec),
        }
    }

    fn default_template_for(&self, task: TaskKind) -> &PromptTemplate {
        let id = match task {
            TaskKind::Generation => DEFAULT_TEMPLATE_GENERATION,
            TaskKind::Qa => DEFAULT_TEMPLATE_QA,
            TaskKind::FillMask => DEFAULT_TEMPLATE_FILL_MASK,
        };
        self.templates.get(id).expect("default templates registered")
    }
}

/// Reads a JSONL corpus, validating every document's invariants.
/// The first offending line aborts the load with its line number.
pub fn load_corpus(path: &Path) -> Result<Vec<MaskedDocument>, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut docs = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let doc: MaskedDocument =
            serde_json::from_str(line).map_err(|e| HarnessError::ParseError {
                line: line_no,
                message: e.to_string(),
            })?;
        doc.validate().map_err(|e| HarnessError::InvariantViolation {
            line: line_no,
            reason: e.to_string(),
        })?;
        docs.push(doc);
    }
    Ok(docs)
}

enum DocOutcome {
    Skipped,
    Failed(String),
    Predicted {
        set: PredictionSet,
        categories: Vec<PredictionCategory>,
        scores: Option<PerExampleScores>,
    },
}

fn process_document(
    doc: &MaskedDocument,
    config: &RunConfig,
    spec: &BackendSpec,
    backend: &dyn InferenceBackend,
    template: &PromptTemplate,
    gazetteer: &NameGazetteer,
    audit: Option<&AuditLog>,
) -> DocOutcome {
    let source_text = match config.text_variant {
        TextVariant::Original => doc.masked_text.as_str(),
        TextVariant::Paraphrased => match doc.paraphrased_text.as_deref() {
            Some(text) => text,
            None => return DocOutcome::Failed("document has no paraphrased_text".into()),
        },
    };
    let truncated = match (config.max_input_chars, config.sentence_cap) {
        (Some(max), None) => crate::backends::truncate_input(source_text, max, &doc.mask_token),
        (None, Some(cap)) => {
            let sentences: Vec<&str> = split_sentences(source_text).into_iter().take(cap).collect();
            sentences.join(" ")
        }
        _ => unreachable!("validated before the run"),
    };
    // a window without a mask gives the model nothing to resolve
    if !truncated.contains(&doc.mask_token) {
        return DocOutcome::Skipped;
    }
    let outcome = match predict_text(backend, spec, template, doc, &truncated, config.seed) {
        Ok(o) => o,
        Err(e) => return DocOutcome::Failed(e.to_string()),
    };
    if let Some(log) = audit {
        let record = AuditRecord {
            document_id: doc.id.clone(),
            backend_id: spec.id.clone(),
            prompt: outcome.prompt.clone(),
            raw_response: outcome.raw_response.clone(),
            candidates: outcome.set.predictions.clone(),
        };
        if let Err(e) = log.record(&record) {
            return DocOutcome::Failed(format!("audit log: {e}"));
        }
    }
    let categories: Vec<PredictionCategory> = outcome
        .set
        .predictions
        .iter()
        .map(|p| categorize(p, source_text, &doc.mask_token, gazetteer))
        .collect();
    let scores = match &doc.target {
        None => None,
        Some(target) => match score_example(target, &outcome.set) {
            Ok(s) => Some(s),
            Err(e) => return DocOutcome::Failed(e.to_string()),
        },
    };
    DocOutcome::Predicted {
        set: outcome.set,
        categories,
        scores,
    }
}

/// A report plus the raw prediction sets, for callers that persist them.
pub struct DetailedRun {
    pub report: EvaluationReport,
    pub predictions: Vec<PredictionSet>,
}

/// Runs one configuration over a corpus.
pub fn run_detailed(
    config: &RunConfig,
    corpus: &[MaskedDocument],
    registry: &Registry,
    audit: Option<&AuditLog>,
) -> Result<DetailedRun, HarnessError> {
    config.validate()?;
    let started = Instant::now();
    let mut spec = registry.backend_spec(&config.backend);
    spec.top_n = config.top_n;
    spec.validate().map_err(BackendError::Model)?;
    let backend = registry.resolve(&spec)?;
    let template = match &config.template {
        Some(id) => registry
            .template(id)
            .ok_or_else(|| HarnessError::UnknownTemplate(id.clone()))?,
        None => registry.default_template_for(spec.task),
    };

    let outcomes: Vec<DocOutcome> = corpus
        .par_iter()
        .map(|doc| {
            process_document(
                doc,
                config,
                &spec,
                backend.as_ref(),
                template,
                &registry.gazetteer,
                audit,
            )
        })
        .collect();

    let mut per_example = Vec::new();
    let mut predictions = Vec::new();
    let mut histogram: BTreeMap<String, usize> = PredictionCategory::ALL
        .iter()
        .map(|c| (c.as_str().to_owned(), 0))
        .collect();
    let mut failures = 0usize;
    let mut skipped = 0usize;
    let mut unlabeled = 0usize;
    let mut failure_details = Vec::new();

    for (doc, outcome) in corpus.iter().zip(outcomes) {
        match outcome {
            DocOutcome::Skipped => skipped += 1,
            DocOutcome::Failed(message) => {
                failures += 1;
                failure_details.push(FailureRecord {
                    document_id: doc.id.clone(),
                    message,
                });
            }
            DocOutcome::Predicted {
                set,
                categories,
                scores,
            } => {
                for c in &categories {
                    *histogram.entry(c.as_str().to_owned()).or_insert(0) += 1;
                }
                match scores {
                    Some(s) => per_example.push(s),
                    None => unlabeled += 1,
                }
                predictions.push(set);
            }
        }
    }

    if failures as f64 > config.max_failure_ratio * corpus.len() as f64 {
        return Err(HarnessError::TooManyFailures {
            failures,
            total: corpus.len(),
            limit: config.max_failure_ratio * 100.0,
        });
    }

    let scores = if per_example.is_empty() {
        None
    } else {
        Some(aggregate(&per_example, config.alpha)?)
    };

    let report = EvaluationReport {
        config: config.clone(),
        scores,
        per_example,
        category_histogram: histogram,
        failures,
        skipped,
        unlabeled,
        failure_details,
        wall_time: started.elapsed(),
    };
    debug_assert_eq!(report.accounted_documents(), corpus.len());
    Ok(DetailedRun {
        report,
        predictions,
    })
}

/// Runs one configuration and returns just the report.
pub fn run(
    config: &RunConfig,
    corpus: &[MaskedDocument],
    registry: &Registry,
) -> Result<EvaluationReport, HarnessError> {
    run_detailed(config, corpus, registry, None).map(|d| d.report)
}

/// Runs each configuration in order, recording per-run failures instead of
/// aborting the sweep.
pub fn sweep(
    configs: &[RunConfig],
    corpus: &[MaskedDocument],
    registry: &Registry,
) -> Vec<Result<EvaluationReport, HarnessError>> {
    configs
        .iter()
        .map(|config| run(config, corpus, registry))
        .collect()
}

fn fmt_f64(v: f64) -> String {
    format!("{v:.6}")
}

/// One CSV row per attempted configuration: the scores matrix of a sweep.
pub fn sweep_csv(
    configs: &[RunConfig],
    results: &[Result<EvaluationReport, HarnessError>],
) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer
        .write_record([
            "backend",
            "variant",
            "max_input_chars",
            "sentence_cap",
            "top_n",
            "seed",
            "status",
            "scored",
            "failures",
            "skipped",
            "unlabeled",
            "pnms",
            "lnms",
            "nld",
            "w_pnms",
        ])
        .expect("csv row");
    for (config, result) in configs.iter().zip(results) {
        let variant = match config.text_variant {
            TextVariant::Original => "original",
            TextVariant::Paraphrased => "paraphrased",
        };
        let max_chars = config
            .max_input_chars
            .map(|v| v.to_string())
            .unwrap_or_default();
        let cap = config
            .sentence_cap
            .map(|v| v.to_string())
            .unwrap_or_default();
        let row: Vec<String> = match result {
            Ok(report) => {
                let (pnms, lnms, nld, w) = match &report.scores {
                    Some(s) => (
                        fmt_f64(s.pnms),
                        fmt_f64(s.lnms),
                        fmt_f64(s.nld),
                        fmt_f64(s.w_pnms),
                    ),
                    None => Default::default(),
                };
                vec![
                    config.backend.clone(),
                    variant.into(),
                    max_chars,
                    cap,
                    config.top_n.to_string(),
                    config.seed.to_string(),
                    "ok".into(),
                    report.per_example.len().to_string(),
                    report.failures.to_string(),
                    report.skipped.to_string(),
                    report.unlabeled.to_string(),
                    pnms,
                    lnms,
                    nld,
                    w,
                ]
            }
            Err(e) => vec![
                config.backend.clone(),
                variant.into(),
                max_chars,
                cap,
                config.top_n.to_string(),
                config.seed.to_string(),
                format!("error: {e}"),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ],
        };
        writer.write_record(&row).expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv is utf-8")
}

/// Canonical JSON rendering of a report (stable field order, two-space
/// indent); identical runs serialize identically.
pub fn report_json(report: &EvaluationReport) -> String {
    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    json
}

/// The scores matrix of a single report as CSV.
pub fn scores_csv(report: &EvaluationReport) -> String {
    sweep_csv(std::slice::from_ref(&report.config), &[Ok(report.clone())])
}

/// Category counts as CSV, every category listed (zeros included).
pub fn histogram_csv(report: &EvaluationReport) -> String {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["category", "count"]).expect("csv row");
    for category in PredictionCategory::ALL {
        let count = report
            .category_histogram
            .get(category.as_str())
            .copied()
            .unwrap_or(0);
        writer
            .write_record([category.as_str(), &count.to_string()])
            .expect("csv row");
    }
    String::from_utf8(writer.into_inner().expect("csv buffer")).expect("csv is utf-8")
}

/// Markdown rendering for review without tooling.
pub fn report_markdown(report: &EvaluationReport) -> String {
    let mut out = String::new();
    out.push_str(&format!("# Evaluation report: {}\n\n", report.config.label()));
    match &report.scores {
        Some(s) => {
            out.push_str("| metric | value |\n|---|---|\n");
            out.push_str(&format!("| PNMS | {:.4} |\n", s.pnms));
            out.push_str(&format!("| LNMS | {:.4} |\n", s.lnms));
            out.push_str(&format!("| NLD | {:.4} |\n", s.nld));
            out.push_str(&format!("| W-PNMS | {:.4} |\n", s.w_pnms));
            out.push_str(&format!("| alpha | {:.2} |\n", s.alpha));
            out.push_str(&format!("| examples | {} |\n", s.example_count));
        }
        None => out.push_str("No scored documents (corpus without targets).\n"),
    }
    out.push_str(&format!(
        "\nfailures: {}, skipped: {}, unlabeled: {}\n",
        report.failures, report.skipped, report.unlabeled
    ));
    out.push_str("\n## Prediction categories\n\n| category | count |\n|---|---|\n");
    for category in PredictionCategory::ALL {
        let count = report
            .category_histogram
            .get(category.as_str())
            .copied()
            .unwrap_or(0);
        out.push_str(&format!("| {} | {} |\n", category.as_str(), count));
    }
    out
}

/// Provenance sidecar of a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub toolkit_version: String,
    pub config_hash: String,
    pub corpus_hash: String,
    pub backend_ids: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn manifest(config: &RunConfig, corpus_bytes: &[u8]) -> RunManifest {
    RunManifest {
        toolkit_version: env!("CARGO_PKG_VERSION").to_owned(),
        config_hash: sha256_hex(serde_json::to_string(config).expect("config serializes").as_bytes()),
        corpus_hash: sha256_hex(corpus_bytes),
        backend_ids: vec![config.backend.clone()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{normalize_name, DocumentKind, DEFAULT_MASK_TOKEN};
    use std::io::Write;

    fn doc(id: &str, target: &str) -> MaskedDocument {
        MaskedDocument::new(
            id,
            "<mask> lived long ago. Historians remember <mask> well.",
            DEFAULT_MASK_TOKEN,
            Some(normalize_name(target).unwrap()),
            DocumentKind::Wikipedia,
        )
        .unwrap()
    }

    fn corpus() -> Vec<MaskedDocument> {
        vec![
            doc("d1", "George Orwell"),
            doc("d2", "Ada Lovelace"),
            doc("d3", "Bruno Vogelsang"),
        ]
    }

    #[test]
    fn oracle_mock_scores_perfectly() {
        let registry = Registry::with_defaults();
        let config = RunConfig::new("mock:oracle");
        let report = run(&config, &corpus(), &registry).unwrap();
        let scores = report.scores.as_ref().unwrap();
        assert_eq!(
            (scores.pnms, scores.lnms, scores.nld, scores.w_pnms),
            (1.0, 1.0, 0.0, 1.0)
        );
        assert_eq!(report.failures, 0);
        assert_eq!(report.accounted_documents(), 3);
    }

    #[test]
    fn wrong_mock_scores_zero() {
        let registry = Registry::with_defaults();
        let config = RunConfig::new("mock:wrong");
        let report = run(&config, &corpus(), &registry).unwrap();
        let scores = report.scores.unwrap();
        assert_eq!(scores.pnms, 0.0);
        assert_eq!(scores.lnms, 0.0);
        assert_eq!(scores.w_pnms, 0.0);
        assert!(scores.nld > 0.0);
    }

    #[test]
    fn greedy_config_yields_single_candidates() {
        let registry = Registry::with_defaults();
        let mut spec = crate::backends::BackendSpec::for_locator("mock:oracle");
        spec.id = "greedy_oracle".into();
        spec.decoding = crate::model::DecodingSpec::greedy();
        let mut registry = registry;
        registry.add_backend(spec);
        let config = RunConfig::new("greedy_oracle");
        let detailed = run_detailed(&config, &corpus(), &registry, None).unwrap();
        assert!(detailed
            .predictions
            .iter()
            .all(|set| set.predictions.len() == 1));
        assert_eq!(detailed.report.scores.unwrap().pnms, 1.0);
    }

    #[test]
    fn skip_rule_counts_windows_without_mask() {
        let registry = Registry::with_defaults();
        // mask first appears at char 30; a 10-char window cannot see it
        let late = MaskedDocument::new(
            "late",
            format!("{} <mask> end.", "x".repeat(30)),
            DEFAULT_MASK_TOKEN,
            Some(normalize_name("Ada Lovelace").unwrap()),
            DocumentKind::Wikipedia,
        )
        .unwrap();
        let config = RunConfig::new("mock:oracle").with_max_chars(10);
        let report = run(&config, &[late], &registry).unwrap();
        assert_eq!(report.skipped, 1);
        assert!(report.scores.is_none());
    }

    #[test]
    fn sentence_cap_truncation() {
        let registry = Registry::with_defaults();
        let config = RunConfig::new("mock:oracle").with_sentence_cap(1);
        let report = run(&config, &corpus(), &registry).unwrap();
        assert_eq!(report.per_example.len(), 3);
        // cap of one sentence still contains the mask, so nothing skips
        assert_eq!(report.skipped, 0);
    }

    #[test]
    fn unlabeled_documents_are_counted_not_scored() {
        let registry = Registry::with_defaults();
        let unlabeled = MaskedDocument::new(
            "u1",
            "<mask> appealed the ruling.",
            DEFAULT_MASK_TOKEN,
            None,
            DocumentKind::Ruling,
        )
        .unwrap();
        let config = RunConfig::new("mock:wrong");
        let report = run(&config, &[unlabeled], &registry).unwrap();
        assert_eq!(report.unlabeled, 1);
        assert!(report.scores.is_none());
        let histogram_total: usize = report.category_histogram.values().sum();
        assert_eq!(histogram_total, 1);
    }

    #[test]
    fn paraphrased_variant_missing_text_is_a_failure() {
        let registry = Registry::with_defaults();
        let mut config = RunConfig::new("mock:oracle");
        config.text_variant = TextVariant::Paraphrased;
        config.max_failure_ratio = 1.0;
        let report = run(&config, &corpus(), &registry).unwrap();
        assert_eq!(report.failures, 3);
        assert_eq!(report.failure_details.len(), 3);
    }

    #[test]
    fn failure_threshold_aborts() {
        let registry = Registry::with_defaults();
        let mut config = RunConfig::new("mock:oracle");
        config.text_variant = TextVariant::Paraphrased; // everything fails
        let err = run(&config, &corpus(), &registry).unwrap_err();
        assert!(matches!(err, HarnessError::TooManyFailures { failures: 3, .. }));
    }

    #[test]
    fn config_requires_exactly_one_truncation() {
        let mut config = RunConfig::new("mock:oracle");
        config.sentence_cap = Some(8);
        assert!(config.validate().is_err());
        config.max_input_chars = None;
        config.sentence_cap = None;
        assert!(config.validate().is_err());
    }

    #[test]
    fn run_is_deterministic() {
        let registry = Registry::with_defaults();
        let config = RunConfig::new("baseline:random");
        let corpus = corpus();
        let a = report_json(&run(&config, &corpus, &registry).unwrap());
        let b = report_json(&run(&config, &corpus, &registry).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn aggregate_matches_per_example_mean() {
        let registry = Registry::with_defaults();
        let config = RunConfig::new("baseline:majority");
        let report = run(&config, &corpus(), &registry).unwrap();
        let scores = report.scores.unwrap();
        let mean = report.per_example.iter().filter(|e| e.pnms_hit).count() as f64
            / report.per_example.len() as f64;
        assert!((scores.pnms - mean).abs() < 1e-12);
    }

    #[test]
    fn growing_top_n_never_decreases_pnms() {
        // the ranked mock hides the target at rank 3
        let registry = Registry::with_defaults();
        let corpus = corpus();
        let mut last = 0.0f64;
        for top_n in 1..=5 {
            let mut config = RunConfig::new("mock:ranked:3");
            config.top_n = top_n;
            let report = run(&config, &corpus, &registry).unwrap();
            let pnms = report.scores.unwrap().pnms;
            assert!(pnms >= last, "top_n {top_n}: {pnms} < {last}");
            last = pnms;
        }
        assert_eq!(last, 1.0, "rank 3 is visible at top_n 5");
    }

    #[test]
    fn majority_baseline_matches_enumerated_expectation() {
        // targets sampled half from the majority pool, half disjoint; the
        // baseline is deterministic so the expectation is an exact count
        let registry = Registry::with_defaults();
        let pool = registry.majority_pool.clone();
        let corpus = crate::synthetic::overlap_corpus(120, 17, &pool);
        let candidates = crate::baselines::majority_names(&pool, 5).unwrap();

        let expected = corpus
            .iter()
            .filter(|doc| {
                let target = doc.target.as_ref().unwrap();
                candidates
                    .iter()
                    .any(|c| crate::metrics::pnms_match(target, c))
            })
            .count() as f64
            / corpus.len() as f64;

        let report = run(&RunConfig::new("baseline:majority"), &corpus, &registry).unwrap();
        let measured = report.scores.unwrap().pnms;
        assert!(
            (measured - expected).abs() < 1e-12,
            "measured {measured} vs enumerated {expected}"
        );
        assert!(expected > 0.0, "fixture must contain pool-derived targets");
    }

    #[test]
    fn load_corpus_validates_lines() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        let mut file = std::fs::File::create(&path).unwrap();
        writeln!(file, r#"{{"id":"a","masked_text":"<mask> x","target":"Jane Doe"}}"#).unwrap();
        writeln!(file, r#"{{"id":"b","masked_text":"no token","target":"Jane Doe"}}"#).unwrap();
        drop(file);
        let err = load_corpus(&path).unwrap_err();
        match err {
            HarnessError::InvariantViolation { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn load_corpus_rejects_leaks_with_line_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(
            &path,
            r#"{"id":"a","masked_text":"<mask> aka Jane Doe","target":"Jane Doe"}"#,
        )
        .unwrap();
        let err = load_corpus(&path).unwrap_err();
        assert!(matches!(err, HarnessError::InvariantViolation { line: 1, .. }));
    }

    #[test]
    fn load_corpus_reports_parse_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        std::fs::write(&path, "{not json}\n").unwrap();
        assert!(matches!(
            load_corpus(&path).unwrap_err(),
            HarnessError::ParseError { line: 1, .. }
        ));
    }

    #[test]
    fn sweep_produces_one_row_per_config() {
        let registry = Registry::with_defaults();
        let corpus = corpus();
        let configs = vec![
            RunConfig::new("mock:oracle").with_max_chars(500),
            RunConfig::new("mock:oracle").with_max_chars(1000),
            RunConfig::new("mock:wrong"),
        ];
        let results = sweep(&configs, &corpus, &registry);
        assert_eq!(results.len(), 3);
        let csv = sweep_csv(&configs, &results);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.contains("mock:wrong"));
    }

    #[test]
    fn histogram_csv_lists_all_categories() {
        let registry = Registry::with_defaults();
        let config = RunConfig::new("mock:oracle");
        let report = run(&config, &corpus(), &registry).unwrap();
        let csv = histogram_csv(&report);
        for category in PredictionCategory::ALL {
            assert!(csv.contains(category.as_str()));
        }
    }
}
