//! Reference predictors for calibrating metric floors.
//!
//! The random baseline pairs first and last names drawn (without
//! replacement) from a fixed 50-name pool using a seeded generator; the
//! majority baseline pairs the most common first and last names in their
//! order of commonness. Both are pure given (pool, seed) and document
//! independent, except that per-document sampling derives its stream from
//! the run seed combined with the document id.

use rand::seq::IndexedRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::backends::{fnv1a64, BackendError, InferenceBackend, PredictRequest, RawResponse};
use crate::model::{DecodingSpec, ModelError, PredictionSet};

/// Fixed pool for the random baseline, frozen in the repository because the
/// original generated list is unpublished.
const RANDOM_FIRST: &str = include_str!("../data/random_first_names.txt");
const RANDOM_LAST: &str = include_str!("../data/random_last_names.txt");

/// Most common English first names (social-security records) and last
/// names (England and Wales), interleaved by rank.
const MAJORITY_FIRST: &str = include_str!("../data/majority_first_names.txt");
const MAJORITY_LAST: &str = include_str!("../data/majority_last_names.txt");

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("pool too small: need {needed} names, have {first} first / {last} last")]
    PoolTooSmall {
        needed: usize,
        first: usize,
        last: usize,
    },
    #[error("pool side is empty")]
    EmptyPool,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Ordered first- and last-name lists; order encodes commonness for the
/// majority baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct NamePool {
    pub first_names: Vec<String>,
    pub last_names: Vec<String>,
}

impl NamePool {
    pub fn new(first_names: Vec<String>, last_names: Vec<String>) -> Result<Self, BaselineError> {
        if first_names.is_empty() || last_names.is_empty() {
            return Err(BaselineError::EmptyPool);
        }
        Ok(NamePool {
            first_names,
            last_names,
        })
    }

    /// Parses two plain-text files, one name per line, ordered.
    pub fn from_files(
        first_path: &std::path::Path,
        last_path: &std::path::Path,
    ) -> std::io::Result<Result<Self, BaselineError>> {
        let first = std::fs::read_to_string(first_path)?;
        let last = std::fs::read_to_string(last_path)?;
        Ok(NamePool::new(parse_lines(&first), parse_lines(&last)))
    }

    /// The frozen 50/50 pool backing the random baseline.
    pub fn bundled_random() -> Self {
        NamePool::new(parse_lines(RANDOM_FIRST), parse_lines(RANDOM_LAST))
            .expect("bundled pool is non-empty")
    }

    /// The commonness-ordered pool backing the majority baseline.
    pub fn bundled_majority() -> Self {
        NamePool::new(parse_lines(MAJORITY_FIRST), parse_lines(MAJORITY_LAST))
            .expect("bundled pool is non-empty")
    }

    fn check(&self, n: usize) -> Result<(), BaselineError> {
        if self.first_names.len() < n || self.last_names.len() < n {
            return Err(BaselineError::PoolTooSmall {
                needed: n,
                first: self.first_names.len(),
                last: self.last_names.len(),
            });
        }
        Ok(())
    }
}

fn parse_lines(text: &str) -> Vec<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(str::to_owned)
        .collect()
}

/// `n` random "First Last" pairings, sampled without replacement on each
/// side. The same seed always yields the same output.
pub fn random_names(pool: &NamePool, seed: u64, n: usize) -> Result<Vec<String>, BaselineError> {
    pool.check(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let firsts: Vec<&String> = pool.first_names.choose_multiple(&mut rng, n).collect();
    let lasts: Vec<&String> = pool.last_names.choose_multiple(&mut rng, n).collect();
    Ok(firsts
        .into_iter()
        .zip(lasts)
        .map(|(f, l)| format!("{f} {l}"))
        .collect())
}

/// The random name guessing baseline as a prediction set.
pub fn random_baseline(
    pool: &NamePool,
    seed: u64,
    n: usize,
) -> Result<PredictionSet, BaselineError> {
    let names = random_names(pool, seed, n)?;
    Ok(PredictionSet::new(
        "",
        names,
        n,
        "baseline:random",
        DecodingSpec::top_k(n.max(1)),
    )?)
}

/// The top-`n` pairings by commonness: candidate `i` pairs the `i`-th first
/// name with the `i`-th last name. Fully deterministic.
pub fn majority_names(pool: &NamePool, n: usize) -> Result<Vec<String>, BaselineError> {
    pool.check(n)?;
    Ok(pool
        .first_names
        .iter()
        .zip(&pool.last_names)
        .take(n)
        .map(|(f, l)| format!("{f} {l}"))
        .collect())
}

/// The majority name guessing baseline as a prediction set.
pub fn majority_baseline(pool: &NamePool, n: usize) -> Result<PredictionSet, BaselineError> {
    let names = majority_names(pool, n)?;
    Ok(PredictionSet::new(
        "",
        names,
        n,
        "baseline:majority",
        DecodingSpec::top_k(n.max(1)),
    )?)
}

/// Derives the per-document sampling stream of the random baseline.
pub fn doc_seed(run_seed: u64, document_id: &str) -> u64 {
    run_seed ^ fnv1a64(document_id.as_bytes())
}

/// Adapter that lets the evaluation harness drive a baseline like any other
/// backend (locators `baseline:random` and `baseline:majority`).
pub struct BaselineBackend {
    id: String,
    pool: NamePool,
    random: bool,
}

impl BaselineBackend {
    pub fn random(pool: NamePool) -> Self {
        BaselineBackend {
            id: "baseline:random".into(),
            pool,
            random: true,
        }
    }

    pub fn majority(pool: NamePool) -> Self {
        BaselineBackend {
            id: "baseline:majority".into(),
            pool,
            random: false,
        }
    }
}

impl InferenceBackend for BaselineBackend {
    fn id(&self) -> &str {
        &self.id
    }

    fn raw_candidates(&self, req: &PredictRequest) -> Result<RawResponse, BackendError> {
        let names = if self.random {
            random_names(&self.pool, doc_seed(req.run_seed, req.document_id), req.top_n)
        } else {
            majority_names(&self.pool, req.top_n)
        }
        .map_err(|e| BackendError::EndpointUnavailable {
            message: e.to_string(),
            retryable: false,
        })?;
        Ok(RawResponse {
            raw: names.join("\n"),
            candidates: names,
        })
    }

    fn complete(&self, req: &PredictRequest) -> Result<String, BackendError> {
        Ok(self.raw_candidates(req)?.candidates.join(", "))
    }
}
