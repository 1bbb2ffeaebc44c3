//! Deterministic in-process backends for tests, calibration and demos.
//!
//! Locators (after the `mock:` prefix):
//!
//! - `oracle` (alias `echo_title`) — answers with the document's hidden
//!   target name; the perfect predictor.
//! - `wrong` — answers with a fixed name sharing no token with anything.
//! - `const:<text>` — answers with a fixed candidate.
//! - `step:<chars>` — answers with the target iff at least `<chars>`
//!   characters of the document are visible; accuracy becomes a step
//!   function of input length.
//! - `ranked:<pos>` — returns a ranked list with the target at 1-based
//!   position `<pos>` and wrong names elsewhere; raising `top_n` past
//!   `<pos>` flips the example from miss to hit.
//! - `context_chain` — joins clues across the retrieved documents of a
//!   re-identification prompt (see below).
//! - `identity` — echoes the document text; useful as a no-op paraphraser.
//! - `lead:<n>` — completion-only; returns the first `n` sentences of the
//!   document, a stand-in summarizer.
//! - `no_mask` — completion-only; returns a summary that drops every mask
//!   token, for exercising the mask-retention failure path.
//!
//! All mocks are pure functions of the request and safe under concurrent
//! calls.

use std::sync::Arc;

use regex::Regex;

use super::{BackendError, BackendSpec, Embedder, InferenceBackend, PredictRequest, RawResponse};
use crate::masking::split_sentences;

/// Fixed wrong answer with no token in common with realistic names.
pub const WRONG_NAME: &str = "Zkqv Wxjm";

/// Fallback answer of the context-chain mock when no clue chain completes.
pub const CHAIN_FALLBACK: &str = "Hans Muster";

pub fn build(name: &str, spec: &BackendSpec) -> Result<Arc<dyn InferenceBackend>, BackendError> {
    let (kind, arg) = match name.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (name, None),
    };
    let id = spec.id.clone();
    match kind {
        "oracle" | "echo_title" => Ok(Arc::new(OracleMock { id })),
        "wrong" => Ok(Arc::new(ConstMock {
            id,
            answer: WRONG_NAME.to_owned(),
        })),
        "const" => Ok(Arc::new(ConstMock {
            id,
            answer: arg.unwrap_or(WRONG_NAME).to_owned(),
        })),
        "step" => {
            let threshold = arg
                .and_then(|a| a.parse::<usize>().ok())
                .ok_or_else(|| BackendError::UnknownMock(format!("step:{arg:?}")))?;
            Ok(Arc::new(StepMock { id, threshold }))
        }
        "ranked" => {
            let position = arg
                .and_then(|a| a.parse::<usize>().ok())
                .filter(|p| *p >= 1)
                .ok_or_else(|| BackendError::UnknownMock(format!("ranked:{arg:?}")))?;
            Ok(Arc::new(RankedMock { id, position }))
        }
        "context_chain" => Ok(Arc::new(ContextChainMock::new(id))),
        "identity" => Ok(Arc::new(IdentityMock { id })),
        "lead" => {
            let n = arg.and_then(|a| a.parse::<usize>().ok()).unwrap_or(2);
            Ok(Arc::new(LeadMock { id, sentences: n }))
        }
        "no_mask" => Ok(Arc::new(NoMaskSummaryMock { id })),
        other => Err(BackendError::UnknownMock(other.to_owned())),
    }
}

pub fn build_embedder(name: &str) -> Result<Arc<dyn Embedder>, BackendError> {
    let (kind, arg) = match name.split_once(':') {
        Some((k, a)) => (k, Some(a)),
        None => (name, None),
    };
    match kind {
        "hash" => {
            let dim = arg.and_then(|a| a.parse::<usize>().ok()).unwrap_or(256);
            Ok(Arc::new(HashEmbedderMock::new(dim)))
        }
        other => Err(BackendError::UnknownMock(format!("embedder {other}"))),
    }
}

fn single(answer: String) -> RawResponse {
    RawResponse {
        raw: answer.clone(),
        candidates: vec![answer],
    }
}

struct OracleMock {
    id: String,
}

impl InferenceBackend for OracleMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_candidates(&self, req: &PredictRequest) -> Result<RawResponse, BackendError> {
        let answer = match req.target {
            Some(t) => t.full_name.clone(),
            None => "Unknown Person".to_owned(),
        };
        Ok(single(answer))
    }

    fn complete(&self, req: &PredictRequest) -> Result<String, BackendError> {
        Ok(self.raw_candidates(req)?.raw)
    }
}

struct ConstMock {
    id: String,
    answer: String,
}

impl InferenceBackend for ConstMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_candidates(&self, _req: &PredictRequest) -> Result<RawResponse, BackendError> {
        Ok(single(self.answer.clone()))
    }

    fn complete(&self, _req: &PredictRequest) -> Result<String, BackendError> {
        Ok(self.answer.clone())
    }
}

struct IdentityMock {
    id: String,
}

impl InferenceBackend for IdentityMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_candidates(&self, req: &PredictRequest) -> Result<RawResponse, BackendError> {
        Ok(single(req.doc_text.to_owned()))
    }

    fn complete(&self, req: &PredictRequest) -> Result<String, BackendError> {
        Ok(req.doc_text.to_owned())
    }
}

struct StepMock {
    id: String,
    threshold: usize,
}

impl InferenceBackend for StepMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_candidates(&self, req: &PredictRequest) -> Result<RawResponse, BackendError> {
        let visible = req.doc_text.chars().count();
        let answer = match req.target {
            Some(t) if visible >= self.threshold => t.full_name.clone(),
            _ => WRONG_NAME.to_owned(),
        };
        Ok(single(answer))
    }

    fn complete(&self, req: &PredictRequest) -> Result<String, BackendError> {
        Ok(self.raw_candidates(req)?.raw)
    }
}

struct RankedMock {
    id: String,
    position: usize,
}

impl InferenceBackend for RankedMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_candidates(&self, req: &PredictRequest) -> Result<RawResponse, BackendError> {
        let candidates: Vec<String> = (1..=req.top_n)
            .map(|rank| match (rank == self.position, req.target) {
                (true, Some(t)) => t.full_name.clone(),
                _ => format!("{WRONG_NAME} {rank}"),
            })
            .collect();
        Ok(RawResponse {
            raw: candidates.join("\n"),
            candidates,
        })
    }

    fn complete(&self, req: &PredictRequest) -> Result<String, BackendError> {
        Ok(self.raw_candidates(req)?.raw)
    }
}

struct LeadMock {
    id: String,
    sentences: usize,
}

impl InferenceBackend for LeadMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_candidates(&self, _req: &PredictRequest) -> Result<RawResponse, BackendError> {
        Err(BackendError::UnsupportedOperation {
            backend: self.id.clone(),
            operation: "ranked candidates".into(),
        })
    }

    fn complete(&self, req: &PredictRequest) -> Result<String, BackendError> {
        let lead: Vec<&str> = split_sentences(req.doc_text)
            .into_iter()
            .take(self.sentences)
            .collect();
        Ok(lead.join(" "))
    }
}

struct NoMaskSummaryMock {
    id: String,
}

impl InferenceBackend for NoMaskSummaryMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_candidates(&self, _req: &PredictRequest) -> Result<RawResponse, BackendError> {
        Err(BackendError::UnsupportedOperation {
            backend: self.id.clone(),
            operation: "ranked candidates".into(),
        })
    }

    fn complete(&self, _req: &PredictRequest) -> Result<String, BackendError> {
        Ok("A court case about financial misconduct.".to_owned())
    }
}

/// Joins clues spread across the documents of a re-identification prompt.
///
/// The mock expects the prompt layout produced by the retrieval pipeline: a
/// summary section followed by `Document <i>:` sections. It resolves names
/// in two hops, mirroring how a reader aggregates news coverage:
///
/// 1. a document that contains a case number from the summary AND the
///    phrase `known as "<alias>"` anchors that alias to the case;
/// 2. a document matching `"<alias>" is the alias of <Name>` maps an
///    anchored alias to a person.
///
/// No single document carries both hops, so the mock only answers when the
/// retrieved context genuinely aggregates the clues; otherwise it falls
/// back to [`CHAIN_FALLBACK`].
pub struct ContextChainMock {
    id: String,
    case_re: Regex,
    alias_re: Regex,
    name_re: Regex,
}

impl ContextChainMock {
    fn new(id: String) -> Self {
        ContextChainMock {
            id,
            case_re: Regex::new(r"\b\d[A-Z]_\d+/\d{4}\b").expect("valid pattern"),
            alias_re: Regex::new(r#"known as "([^"]+)""#).expect("valid pattern"),
            name_re: Regex::new(
                r#""([^"]+)" is the alias of (\p{Lu}[\w'-]*(?: \p{Lu}[\w'-]*){0,2})"#,
            )
            .expect("valid pattern"),
        }
    }

    fn chain(&self, prompt: &str) -> Vec<String> {
        let mut sections = prompt.split("\nDocument ");
        let summary = sections.next().unwrap_or("");
        let documents: Vec<&str> = sections.collect();

        let case_ids: Vec<&str> = self.case_re.find_iter(summary).map(|m| m.as_str()).collect();
        if case_ids.is_empty() {
            return Vec::new();
        }

        let mut anchored_aliases: Vec<String> = Vec::new();
        for doc in &documents {
            if case_ids.iter().any(|c| doc.contains(c)) {
                for cap in self.alias_re.captures_iter(doc) {
                    let alias = cap[1].to_owned();
                    if !anchored_aliases.contains(&alias) {
                        anchored_aliases.push(alias);
                    }
                }
            }
        }

        let mut names = Vec::new();
        for doc in &documents {
            for cap in self.name_re.captures_iter(doc) {
                let alias = &cap[1];
                let name = cap[2].to_owned();
                if anchored_aliases.iter().any(|a| a == alias) && !names.contains(&name) {
                    names.push(name);
                }
            }
        }
        names
    }
}

impl InferenceBackend for ContextChainMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_candidates(&self, req: &PredictRequest) -> Result<RawResponse, BackendError> {
        let mut names = self.chain(req.prompt);
        if names.is_empty() {
            names.push(CHAIN_FALLBACK.to_owned());
        }
        names.truncate(req.top_n.max(1));
        Ok(RawResponse {
            raw: names.join("\n"),
            candidates: names,
        })
    }

    fn complete(&self, req: &PredictRequest) -> Result<String, BackendError> {
        Ok(self.raw_candidates(req)?.raw)
    }
}

/// Bag-of-words hashing embedder: tokens are lowercased alphanumeric runs,
/// each hashed into one of `dim` buckets. Identical texts embed identically
/// and token overlap raises cosine similarity, which is all the retrieval
/// tests need.
pub struct HashEmbedderMock {
    id: String,
    dim: usize,
}

impl HashEmbedderMock {
    pub fn new(dim: usize) -> Self {
        HashEmbedderMock {
            id: format!("mock:hash:{dim}"),
            dim,
        }
    }
}

impl Embedder for HashEmbedderMock {
    fn id(&self) -> &str {
        &self.id
    }

    fn embed(&self, texts: &[&str]) -> Result<Vec<Vec<f32>>, BackendError> {
        Ok(texts
            .iter()
            .map(|text| {
                let mut v = vec![0f32; self.dim];
                for token in text
                    .to_lowercase()
                    .split(|c: char| !c.is_alphanumeric())
                    .filter(|t| !t.is_empty())
                {
                    let bucket = (super::fnv1a64(token.as_bytes()) % self.dim as u64) as usize;
                    v[bucket] += 1.0;
                }
                v
            })
            .collect())
    }
}
