//! Uniform abstraction over candidate-name producers.
//!
//! A backend is anything that can propose names for the person behind a
//! mask token: a remote text-generation, fill-mask or question-answering
//! endpoint, or one of the deterministic mocks used for testing and
//! calibration. This module owns prompt templates, character-based input
//! truncation and the parsing of raw responses into ranked candidates.
//!
//! Endpoint locators decide the transport: `mock:<name>` resolves to an
//! in-process mock, `http://`/`https://` to a remote endpoint speaking a
//! chat-completions-compatible protocol (or `{"text", "top_k"}` for
//! fill-mask). Secrets are only ever read from the environment variable
//! named in the backend spec.

mod http;
pub mod mock;

pub use http::{HttpBackend, HttpEmbedder};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DecodingSpec, MaskedDocument, ModelError, PredictionSet, TargetIdentity};

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("endpoint unavailable: {message}")]
    EndpointUnavailable { message: String, retryable: bool },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("rate limited{}", retry_after_secs.map(|s| format!(" (retry after {s}s)")).unwrap_or_default())]
    RateLimited { retry_after_secs: Option<u64> },
    #[error("embedding dimension changed from {expected} to {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("unknown mock backend {0:?}")]
    UnknownMock(String),
    #[error("unsupported endpoint locator {0:?}")]
    UnsupportedEndpoint(String),
    #[error("auth environment variable {0} is not set")]
    MissingAuth(String),
    #[error("backend {backend} does not support {operation}")]
    UnsupportedOperation { backend: String, operation: String },
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl BackendError {
    pub fn is_retryable(&self) -> bool {
        matches!(
            self,
            BackendError::EndpointUnavailable { retryable: true, .. }
                | BackendError::RateLimited { .. }
        )
    }
}

/// The task a backend performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    Generation,
    FillMask,
    Qa,
}

fn default_placeholder() -> String {
    crate::model::DEFAULT_MASK_TOKEN.to_owned()
}

/// Prompt frame around the document text.
///
/// Occurrences of `mask_placeholder` in the prefix and suffix are rewritten
/// to the document's actual mask token at render time, so one template
/// serves corpora with different tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: String,
    #[serde(default)]
    pub prefix: String,
    #[serde(default)]
    pub suffix: String,
    #[serde(default = "default_placeholder")]
    pub mask_placeholder: String,
}

impl PromptTemplate {
    pub fn new(
        id: impl Into<String>,
        prefix: impl Into<String>,
        suffix: impl Into<String>,
    ) -> Self {
        PromptTemplate {
            id: id.into(),
            prefix: prefix.into(),
            suffix: suffix.into(),
            mask_placeholder: default_placeholder(),
        }
    }

    /// Rendered prompt: prefix + document text + suffix.
    pub fn render(&self, text: &str, mask_token: &str) -> String {
        let prefix = self.prefix.replace(&self.mask_placeholder, mask_token);
        let suffix = self.suffix.replace(&self.mask_placeholder, mask_token);
        format!("{prefix}{text}{suffix}")
    }

    /// Pass-through template (used for fill-mask backends).
    pub fn passthrough(id: impl Into<String>) -> Self {
        PromptTemplate::new(id, "", "")
    }
}

fn default_top_n() -> usize {
    5
}

fn default_max_input_chars() -> usize {
    100_000
}

/// Declaration of one candidate-name producer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendSpec {
    pub id: String,
    pub task: TaskKind,
    pub endpoint: String,
    #[serde(default = "default_max_input_chars")]
    pub max_input_chars: usize,
    #[serde(default)]
    pub decoding: DecodingSpec,
    #[serde(default = "default_top_n")]
    pub top_n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_env: Option<String>,
}

impl BackendSpec {
    /// Ad-hoc spec for a bare locator such as `mock:oracle`.
    pub fn for_locator(locator: &str) -> Self {
        BackendSpec {
            id: locator.to_owned(),
            task: TaskKind::Generation,
            endpoint: locator.to_owned(),
            max_input_chars: default_max_input_chars(),
            decoding: DecodingSpec::default(),
            top_n: default_top_n(),
            auth_env: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.decoding.validate()?;
        if self.top_n < 1 {
            return Err(ModelError::InvalidDecoding("top_n < 1".into()));
        }
        if self.max_input_chars < 1 {
            return Err(ModelError::InvalidDecoding("max_input_chars < 1".into()));
        }
        Ok(())
    }
}

/// Everything a backend may look at when producing candidates.
///
/// Mock backends are allowed to peek at the hidden target to simulate
/// models of known accuracy; remote backends only ever see the prompt.
#[derive(Debug)]
pub struct PredictRequest<'a> {
    pub document_id: &'a str,
    /// Document text after truncation, exactly as embedded in the prompt.
    pub doc_text: &'a str,
    pub prompt: &'a str,
    pub mask_token: &'a str,
    pub target: Option<&'a TargetIdentity>,
    pub top_n: usize,
    pub decoding: &'a DecodingSpec,
    pub run_seed: u64,
}

/// Ranked raw candidates plus the untouched response payload for auditing.
#[derive(Debug, Clone)]
pub struct RawResponse {
    pub candidates: Vec<String>,
    pub raw: String,
}

pub trait InferenceBackend: Send + Sync {
    fn id(&self) -> &str;

    /// Ranked candidate strings, unparsed.
    fn raw_candidates(&self, req: &PredictRequest) -> Result<RawResponse, BackendError>;

    /// Free-text completion (used for summarization).
    fn complete(&self, req: &PredictRequest) -> Result<String, BackendError>;
}

/// Order-preserving text embedding provider.
pub trait Embedder: Send + Sync {
    fn id(&self) -> &str;
    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError>;
}

/// Resolves an endpoint locator to a transport.
pub fn resolve_backend(spec: &BackendSpec) -> Result<Arc<dyn InferenceBackend>, BackendError> {
    if let Some(name) = spec.endpoint.strip_prefix("mock:") {
        return mock::build(name, spec);
    }
    if spec.endpoint.starts_with("http://") || spec.endpoint.starts_with("https://") {
        return Ok(Arc::new(HttpBackend::new(spec)?));
    }
    Err(BackendError::UnsupportedEndpoint(spec.endpoint.clone()))
}

/// Resolves an embedder locator: `mock:hash[:dim]` or an HTTP endpoint.
pub fn resolve_embedder(
    locator: &str,
    auth_env: Option<&str>,
) -> Result<Arc<dyn Embedder>, BackendError> {
    if let Some(rest) = locator.strip_prefix("mock:") {
        return mock::build_embedder(rest);
    }
    if locator.starts_with("http://") || locator.starts_with("https://") {
        return Ok(Arc::new(HttpEmbedder::new(locator, auth_env)?));
    }
    Err(BackendError::UnsupportedEndpoint(locator.to_owned()))
}

/// First `max_chars` characters of the text, never splitting a mask token:
/// when the cut would land strictly inside an occurrence, the cut moves to
/// the occurrence's start.
pub fn truncate_input(text: &str, max_chars: usize, mask_token: &str) -> String {
    let total_chars = text.chars().count();
    if total_chars <= max_chars {
        return text.to_owned();
    }
    let mut cut_chars = max_chars;
    if !mask_token.is_empty() {
        let tok_chars = mask_token.chars().count();
        let mut char_idx = 0usize;
        let mut byte_idx = 0usize;
        while let Some(off) = text[byte_idx..].find(mask_token) {
            let abs = byte_idx + off;
            char_idx += text[byte_idx..abs].chars().count();
            if char_idx >= max_chars {
                break;
            }
            if max_chars < char_idx + tok_chars {
                cut_chars = char_idx;
                break;
            }
            byte_idx = abs + mask_token.len();
            char_idx += tok_chars;
        }
    }
    text.chars().take(cut_chars).collect()
}

/// Normalizes one free-text answer into a name candidate: first non-empty
/// line, surrounding quotes and sentence punctuation stripped, capped at
/// five whitespace tokens. Blank answers stay as empty strings so that the
/// categorizer can count them.
pub fn parse_name_candidate(raw: &str) -> String {
    let first_line = raw.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
    let stripped = first_line
        .trim()
        .trim_matches(|c| "\"'“”‘’`".contains(c))
        .trim_matches(|c: char| ".,;:!?".contains(c))
        .trim();
    let tokens: Vec<&str> = stripped.split_whitespace().take(5).collect();
    tokens.join(" ")
}

/// Result of one prediction call, carrying audit material alongside the set.
#[derive(Debug, Clone)]
pub struct PredictOutcome {
    pub set: PredictionSet,
    pub prompt: String,
    pub raw_response: String,
}

/// Issues one request for a document and parses the response into a ranked
/// [`PredictionSet`]. Greedy decoding requests exactly one candidate.
pub fn predict(
    backend: &dyn InferenceBackend,
    spec: &BackendSpec,
    template: &PromptTemplate,
    doc: &MaskedDocument,
) -> Result<PredictionSet, BackendError> {
    predict_text(backend, spec, template, doc, &doc.masked_text, 0).map(|o| o.set)
}

/// Like [`predict`], but over an explicit text variant of the document and
/// with the run seed forwarded to seedable mocks.
pub fn predict_text(
    backend: &dyn InferenceBackend,
    spec: &BackendSpec,
    template: &PromptTemplate,
    doc: &MaskedDocument,
    text: &str,
    run_seed: u64,
) -> Result<PredictOutcome, BackendError> {
    let truncated = truncate_input(text, spec.max_input_chars, &doc.mask_token);
    let prompt = template.render(&truncated, &doc.mask_token);
    let requested = if spec.decoding.is_greedy() { 1 } else { spec.top_n };
    let req = PredictRequest {
        document_id: &doc.id,
        doc_text: &truncated,
        prompt: &prompt,
        mask_token: &doc.mask_token,
        target: doc.target.as_ref(),
        top_n: requested,
        decoding: &spec.decoding,
        run_seed,
    };
    let response = backend.raw_candidates(&req)?;
    let candidates: Vec<String> = response
        .candidates
        .iter()
        .map(|c| match spec.task {
            TaskKind::Generation | TaskKind::Qa => parse_name_candidate(c),
            TaskKind::FillMask => c.trim().to_owned(),
        })
        .take(requested.min(spec.top_n))
        .collect();
    let set = PredictionSet::new(
        &doc.id,
        candidates,
        spec.top_n,
        &spec.id,
        spec.decoding.clone(),
    )?;
    Ok(PredictOutcome {
        set,
        prompt,
        raw_response: response.raw,
    })
}

/// One line of the request/response audit trail.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditRecord {
    pub document_id: String,
    pub backend_id: String,
    pub prompt: String,
    pub raw_response: String,
    pub candidates: Vec<String>,
}

/// Append-only JSONL audit log, safe to share across worker threads.
pub struct AuditLog {
    writer: Mutex<BufWriter<File>>,
}

impl AuditLog {
    pub fn create(path: &Path) -> std::io::Result<Self> {
        Ok(AuditLog {
            writer: Mutex::new(BufWriter::new(File::create(path)?)),
        })
    }

    pub fn record(&self, record: &AuditRecord) -> std::io::Result<()> {
        let line = serde_json::to_string(record).expect("audit record serializes");
        let mut writer = self.writer.lock().expect("audit log lock");
        writeln!(writer, "{line}")?;
        writer.flush()
    }
}

pub(crate) fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
