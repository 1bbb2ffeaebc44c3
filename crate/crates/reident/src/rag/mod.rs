//! Retrieval-augmented re-identification.
//!
//! A news corpus is split into fixed-size character chunks and embedded
//! into an immutable in-memory index. To attack one ruling, the pipeline
//! summarizes it (retaining the mask token), embeds the summary, retrieves
//! the top-k chunks by exact cosine similarity, and prompts a generation
//! backend to name the masked person from the assembled context.
//!
//! Retrieval is a brute-force scan: the corpora this targets are a few
//! thousand articles, where an O(N) pass is fast and exactly reproducible.
//! Ties are broken by chunk id.

mod cache;

pub use cache::EmbeddingCache;

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;
use thiserror::Error;

use crate::backends::{
    parse_name_candidate, BackendError, Embedder, InferenceBackend, PredictRequest,
};
use crate::model::{DecodingSpec, MaskedDocument, ModelError, PredictionSet};

/// Chunk width in characters.
pub const DEFAULT_CHUNK_SIZE: usize = 1000;

/// Number of chunks placed in the re-identification context.
pub const DEFAULT_TOP_K: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RagStage {
    Summarize,
    Embed,
    Retrieve,
    Respond,
}

impl std::fmt::Display for RagStage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            RagStage::Summarize => "summarize",
            RagStage::Embed => "embed",
            RagStage::Retrieve => "retrieve",
            RagStage::Respond => "respond",
        })
    }
}

#[derive(Debug, Error)]
pub enum RagError {
    #[error("vectors have different dimensions: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,
    #[error("index contains no chunks")]
    EmptyIndex,
    #[error("chunk {0} has no embedding")]
    MissingVector(String),
    #[error("summary lost the mask token even after an explicit retry")]
    MaskLostInSummary,
    #[error("ruling has no usable masked text")]
    EmptyRuling,
    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: RagStage,
        #[source]
        source: Box<BackendError>,
    },
    #[error("embedding cache: {0}")]
    Cache(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn stage_err(stage: RagStage) -> impl FnOnce(BackendError) -> RagError {
    move |source| RagError::Stage {
        stage,
        source: Box::new(source),
    }
}

/// One record of the news-corpus input file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NewsArticle {
    pub article_id: String,
    pub text: String,
}

/// A fixed-size slice of an article, optionally embedded.
#[derive(Debug, Clone, PartialEq)]
pub struct Chunk {
    pub id: String,
    pub article_id: String,
    pub text: String,
    pub vector: Option<Vec<f32>>,
}

/// Splits an article into consecutive non-overlapping chunks of at most
/// `chunk_size` characters; the final chunk may be shorter and the
/// concatenation of all chunks reproduces the input.
pub fn chunk_text(article_id: &str, text: &str, chunk_size: usize) -> Vec<Chunk> {
    assert!(chunk_size >= 1, "chunk_size must be at least 1");
    let mut chunks = Vec::new();
    let mut buf = String::new();
    let mut count = 0usize;
    for c in text.chars() {
        buf.push(c);
        count += 1;
        if count == chunk_size {
            chunks.push(buf);
            buf = String::new();
            count = 0;
        }
    }
    if !buf.is_empty() {
        chunks.push(buf);
    }
    chunks
        .into_iter()
        .enumerate()
        .map(|(i, text)| Chunk {
            id: format!("{article_id}#{i:04}"),
            article_id: article_id.to_owned(),
            text,
            vector: None,
        })
        .collect()
}

/// Chunks a whole corpus in article order.
pub fn chunk_articles(articles: &[NewsArticle], chunk_size: usize) -> Vec<Chunk> {
    articles
        .iter()
        .flat_map(|a| chunk_text(&a.article_id, &a.text, chunk_size))
        .collect()
}

/// Cosine of the angle between two vectors, in [-1, 1].
pub fn cosine_similarity(a: &[f32], b: &[f32]) -> Result<f64, RagError> {
    if a.len() != b.len() {
        return Err(RagError::DimensionMismatch(a.len(), b.len()));
    }
    let mut dot = 0f64;
    let mut na = 0f64;
    let mut nb = 0f64;
    for (&x, &y) in a.iter().zip(b) {
        dot += f64::from(x) * f64::from(y);
        na += f64::from(x) * f64::from(x);
        nb += f64::from(y) * f64::from(y);
    }
    if na == 0.0 || nb == 0.0 {
        return Err(RagError::ZeroVector);
    }
    Ok((dot / (na.sqrt() * nb.sqrt())).clamp(-1.0, 1.0))
}

/// Immutable collection of embedded chunks supporting exact top-k cosine
/// retrieval. All vectors share one dimension.
#[derive(Debug, Clone)]
pub struct ChunkIndex {
    chunks: Vec<Chunk>,
    by_id: BTreeMap<String, usize>,
    dimension: usize,
}

impl ChunkIndex {
    /// Embeds any chunk that lacks a vector, then freezes the index.
    pub fn build(mut chunks: Vec<Chunk>, embedder: &dyn Embedder) -> Result<Self, RagError> {
        let missing: Vec<usize> = (0..chunks.len())
            .filter(|&i| chunks[i].vector.is_none())
            .collect();
        if !missing.is_empty() {
            let texts: Vec<&str> = missing.iter().map(|&i| chunks[i].text.as_str()).collect();
            let vectors = embedder.embed(&texts).map_err(stage_err(RagStage::Embed))?;
            for (&i, v) in missing.iter().zip(vectors) {
                chunks[i].vector = Some(v);
            }
        }
        Self::from_embedded(chunks)
    }

    /// Embeds chunks, consulting (and updating) a binary sidecar cache so
    /// repeated runs skip the embedding cost.
    pub fn build_with_cache(
        chunks: Vec<Chunk>,
        embedder: &dyn Embedder,
        cache_path: &Path,
    ) -> Result<Self, RagError> {
        let mut cache = if cache_path.exists() {
            let loaded = EmbeddingCache::load(cache_path)?;
            if loaded.embedder_id() == embedder.id() {
                loaded
            } else {
                EmbeddingCache::new(embedder.id())
            }
        } else {
            EmbeddingCache::new(embedder.id())
        };

        let mut chunks = chunks;
        let mut misses: Vec<usize> = Vec::new();
        for (i, chunk) in chunks.iter_mut().enumerate() {
            if chunk.vector.is_none() {
                match cache.get(&chunk.text) {
                    Some(v) => chunk.vector = Some(v.to_vec()),
                    None => misses.push(i),
                }
            }
        }
        if !misses.is_empty() {
            let texts: Vec<&str> = misses.iter().map(|&i| chunks[i].text.as_str()).collect();
            let vectors = embedder.embed(&texts).map_err(stage_err(RagStage::Embed))?;
            for (&i, v) in misses.iter().zip(vectors) {
                cache.insert(&chunks[i].text, v.clone());
                chunks[i].vector = Some(v);
            }
            cache.save(cache_path)?;
        }
        Self::from_embedded(chunks)
    }

    /// Freezes chunks that are already embedded.
    pub fn from_embedded(chunks: Vec<Chunk>) -> Result<Self, RagError> {
        let mut dimension = 0usize;
        for chunk in &chunks {
            let v = chunk
                .vector
                .as_ref()
                .ok_or_else(|| RagError::MissingVector(chunk.id.clone()))?;
            if dimension == 0 {
                dimension = v.len();
            } else if v.len() != dimension {
                return Err(RagError::DimensionMismatch(dimension, v.len()));
            }
        }
        let by_id = chunks
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), i))
            .collect();
        Ok(ChunkIndex {
            chunks,
            by_id,
            dimension,
        })
    }

    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn chunks(&self) -> &[Chunk] {
        &self.chunks
    }

    pub fn get(&self, chunk_id: &str) -> Option<&Chunk> {
        self.by_id.get(chunk_id).map(|&i| &self.chunks[i])
    }
}

/// One retrieval hit; results are sorted by similarity descending with
/// ranks contiguous from 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetrievalResult {
    pub chunk_id: String,
    pub similarity: f64,
    pub rank: usize,
}

/// Exact brute-force top-k by cosine similarity; ties broken by the
/// smaller chunk id.
pub fn query(
    index: &ChunkIndex,
    query_vector: &[f32],
    k: usize,
) -> Result<Vec<RetrievalResult>, RagError> {
    if index.is_empty() {
        return Err(RagError::EmptyIndex);
    }
    if query_vector.len() != index.dimension {
        return Err(RagError::DimensionMismatch(
            query_vector.len(),
            index.dimension,
        ));
    }
    let mut scored: Vec<(f64, &str)> = Vec::with_capacity(index.len());
    for chunk in &index.chunks {
        let v = chunk.vector.as_ref().expect("index chunks are embedded");
        scored.push((cosine_similarity(query_vector, v)?, chunk.id.as_str()));
    }
    scored.sort_by(|a, b| {
        b.0.partial_cmp(&a.0)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.1.cmp(b.1))
    });
    Ok(scored
        .into_iter()
        .take(k)
        .enumerate()
        .map(|(i, (similarity, chunk_id))| RetrievalResult {
            chunk_id: chunk_id.to_owned(),
            similarity,
            rank: i + 1,
        })
        .collect())
}

fn summary_prompt(text: &str, mask_token: &str, strict: bool) -> String {
    let mut prompt = format!(
        "Summarize the following decision. Emphasize facts likely to appear in news \
         articles and retain key details, including the masked entities written as \
         {mask_token}.\n\n{text}"
    );
    if strict {
        prompt.push_str(&format!(
            "\n\nThe summary must contain the token {mask_token} at least once."
        ));
    }
    prompt
}

/// Summarizes a ruling while keeping at least one mask token.
///
/// If the first summary drops every mask, the backend is re-prompted once
/// with an explicit retention instruction; a second loss is an error.
pub fn summarize_ruling(
    ruling: &MaskedDocument,
    backend: &dyn InferenceBackend,
) -> Result<String, RagError> {
    if ruling.masked_text.trim().is_empty() {
        return Err(RagError::EmptyRuling);
    }
    let decoding = DecodingSpec::default();
    for strict in [false, true] {
        let prompt = summary_prompt(&ruling.masked_text, &ruling.mask_token, strict);
        let req = PredictRequest {
            document_id: &ruling.id,
            doc_text: &ruling.masked_text,
            prompt: &prompt,
            mask_token: &ruling.mask_token,
            target: ruling.target.as_ref(),
            top_n: 1,
            decoding: &decoding,
            run_seed: 0,
        };
        let summary = backend
            .complete(&req)
            .map_err(stage_err(RagStage::Summarize))?;
        if summary.contains(&ruling.mask_token) {
            return Ok(summary);
        }
    }
    Err(RagError::MaskLostInSummary)
}

/// Builds the final prompt: instruction, ruling summary, then the retrieved
/// documents in rank order. Always mentions the mask token.
pub fn compose_reidentification_prompt(
    summary: &str,
    chunk_texts: &[&str],
    mask_token: &str,
) -> String {
    let mut prompt = format!(
        "Use the information given in the documents to re-identify the person referred \
         to as {mask_token}.\n\nSummary:\n{summary}\n"
    );
    for (i, text) in chunk_texts.iter().enumerate() {
        prompt.push_str(&format!("\nDocument {}:\n{}\n", i + 1, text));
    }
    prompt
}

/// The full pipeline output for one ruling, kept for audit traces.
#[derive(Debug, Clone)]
pub struct RagOutcome {
    pub predictions: PredictionSet,
    pub summary: String,
    pub retrieved: Vec<RetrievalResult>,
    pub prompt: String,
}

/// Collaborators of the retrieval-augmented attack.
pub struct RagPipeline<'a> {
    pub summarizer: &'a dyn InferenceBackend,
    pub responder: &'a dyn InferenceBackend,
    pub embedder: &'a dyn Embedder,
    pub k: usize,
    pub top_n: usize,
}

impl<'a> RagPipeline<'a> {
    pub fn new(
        summarizer: &'a dyn InferenceBackend,
        responder: &'a dyn InferenceBackend,
        embedder: &'a dyn Embedder,
    ) -> Self {
        RagPipeline {
            summarizer,
            responder,
            embedder,
            k: DEFAULT_TOP_K,
            top_n: 5,
        }
    }

    /// summarize → embed → retrieve top-k → prompt → parse candidates.
    pub fn reidentify(
        &self,
        ruling: &MaskedDocument,
        index: &ChunkIndex,
    ) -> Result<RagOutcome, RagError> {
        let summary = summarize_ruling(ruling, self.summarizer)?;
        let query_vector = self
            .embedder
            .embed(&[&summary])
            .map_err(stage_err(RagStage::Embed))?
            .into_iter()
            .next()
            .ok_or_else(|| RagError::Stage {
                stage: RagStage::Embed,
                source: Box::new(BackendError::MalformedResponse(
                    "embedder returned no vector".into(),
                )),
            })?;
        let retrieved = query(index, &query_vector, self.k)?;
        let chunk_texts: Vec<&str> = retrieved
            .iter()
            .filter_map(|r| index.get(&r.chunk_id))
            .map(|c| c.text.as_str())
            .collect();
        let prompt = compose_reidentification_prompt(&summary, &chunk_texts, &ruling.mask_token);
        let decoding = DecodingSpec::default();
        let req = PredictRequest {
            document_id: &ruling.id,
            doc_text: &summary,
            prompt: &prompt,
            mask_token: &ruling.mask_token,
            target: ruling.target.as_ref(),
            top_n: self.top_n,
            decoding: &decoding,
            run_seed: 0,
        };
        let response = self
            .responder
            .raw_candidates(&req)
            .map_err(stage_err(RagStage::Respond))?;
        let candidates: Vec<String> = response
            .candidates
            .iter()
            .map(|c| parse_name_candidate(c))
            .take(self.top_n)
            .collect();
        let predictions = PredictionSet::new(
            &ruling.id,
            candidates,
            self.top_n,
            self.responder.id(),
            decoding,
        )?;
        Ok(RagOutcome {
            predictions,
            summary,
            retrieved,
            prompt,
        })
    }
}


#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn chunk_round_trip(text in ".{0,400}", size in 1usize..64) {
            let chunks = chunk_text("a", &text, size);
            let joined: String = chunks.iter().map(|c| c.text.as_str()).collect();
            prop_assert_eq!(joined, text.clone());
            for c in &chunks {
                prop_assert!(c.text.chars().count() <= size);
            }
            let full = text.chars().count() / size;
            prop_assert!(chunks.len() >= full);
        }

        #[test]
        fn query_matches_full_sort_oracle(
            vectors in proptest::collection::vec(
                proptest::collection::vec(-4.0f32..4.0, 3),
                1..40,
            ),
            qx in -4.0f32..4.0, qy in -4.0f32..4.0, qz in -4.0f32..4.0,
            k in 1usize..10,
        ) {
            let query_vec = [qx.max(0.5), qy, qz]; // avoid the zero vector
            let chunks: Vec<Chunk> = vectors
                .iter()
                .enumerate()
                .map(|(i, v)| {
                    let mut v = v.clone();
                    v[0] = v[0].max(0.25); // avoid zero vectors
                    Chunk {
                        id: format!("c{i:03}"),
                        article_id: "a".into(),
                        text: String::new(),
                        vector: Some(v),
                    }
                })
                .collect();
            let index = ChunkIndex::from_embedded(chunks.clone()).unwrap();
            let got = query(&index, &query_vec, k).unwrap();

            // independent oracle: full sort of every similarity
            let mut oracle: Vec<(f64, String)> = chunks
                .iter()
                .map(|c| {
                    let v = c.vector.as_ref().unwrap();
                    let dot: f64 = v.iter().zip(query_vec.iter()).map(|(a, b)| f64::from(*a) * f64::from(*b)).sum();
                    let na: f64 = v.iter().map(|a| f64::from(*a).powi(2)).sum::<f64>().sqrt();
                    let nq: f64 = query_vec.iter().map(|a| f64::from(*a).powi(2)).sum::<f64>().sqrt();
                    ((dot / (na * nq)).clamp(-1.0, 1.0), c.id.clone())
                })
                .collect();
            oracle.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then_with(|| a.1.cmp(&b.1)));

            prop_assert_eq!(got.len(), k.min(vectors.len()));
            for (r, (sim, id)) in got.iter().zip(oracle.iter()) {
                prop_assert_eq!(&r.chunk_id, id);
                prop_assert!((r.similarity - sim).abs() < 1e-12);
            }
        }
    }
}
