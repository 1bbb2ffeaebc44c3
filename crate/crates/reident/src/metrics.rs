//! The four re-identification metrics, per-example and corpus-aggregated.
//!
//! - PNMS: a prediction counts as a hit when any part of the target name
//!   and the prediction overlap (bidirectional substring containment).
//! - LNMS: the same rule restricted to the last name, i.e. the final
//!   whitespace-separated part.
//! - NLD: the minimum Levenshtein distance of the ranked predictions to the
//!   full target name, normalized by the length of the target name.
//! - W-PNMS: `alpha * PNMS + (1 - alpha) * LNMS` with `alpha = 0.35`,
//!   emphasizing last names.
//!
//! A prediction set is a hit when at least one of its `n` predictions is a
//! hit. All operations are pure functions and safe for data-parallel
//! scoring.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{PredictionSet, TargetIdentity};

/// Weight of PNMS in the W-PNMS blend.
pub const DEFAULT_ALPHA: f64 = 0.35;

/// Prediction tokens shorter than this never count via containment in a
/// target part; this bounds the imprecision partial matching can introduce.
pub const MIN_REVERSE_TOKEN_LEN: usize = 3;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("prediction set for document {0} is empty")]
    EmptyPredictionSet(String),
    #[error("cannot aggregate an empty corpus")]
    EmptyCorpus,
    #[error("alpha {0} outside [0, 1]")]
    InvalidAlpha(f64),
    #[error("invalid rate: {0}")]
    InvalidRate(String),
}

/// Match and distance outcomes for one scored document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerExampleScores {
    pub document_id: String,
    pub pnms_hit: bool,
    pub lnms_hit: bool,
    pub min_nld: f64,
}

/// Aggregated PNMS/LNMS/NLD/W-PNMS over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScores {
    pub pnms: f64,
    pub lnms: f64,
    pub nld: f64,
    pub w_pnms: f64,
    pub alpha: f64,
    pub example_count: usize,
}

impl MetricScores {
    /// Builds scores from raw rates, computing the weighted blend.
    ///
    /// `nld` may exceed 1: a prediction much longer than the target name
    /// needs more edits than the name has characters.
    pub fn from_rates(
        pnms: f64,
        lnms: f64,
        nld: f64,
        alpha: f64,
        example_count: usize,
    ) -> Result<Self, MetricsError> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(MetricsError::InvalidAlpha(alpha));
        }
        for (name, v) in [("pnms", pnms), ("lnms", lnms)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(MetricsError::InvalidRate(format!("{name} = {v}")));
            }
        }
        if !nld.is_finite() || nld < 0.0 {
            return Err(MetricsError::InvalidRate(format!("nld = {nld}")));
        }
        if example_count == 0 {
            return Err(MetricsError::EmptyCorpus);
        }
        Ok(MetricScores {
            pnms,
            lnms,
            nld,
            w_pnms: alpha * pnms + (1.0 - alpha) * lnms,
            alpha,
            example_count,
        })
    }
}

/// Standard edit distance (insert/delete/substitute at unit cost) over
/// unicode scalar values. Symmetric, zero iff the strings are equal.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            curr[j + 1] = sub.min(prev[j + 1] + 1).min(curr[j] + 1);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Partial-name match: true when any part of the target appears in the
/// prediction, or any prediction token (at least [`MIN_REVERSE_TOKEN_LEN`]
/// characters) appears inside a target part. Case-insensitive.
pub fn pnms_match(target: &TargetIdentity, prediction: &str) -> bool {
    if prediction.trim().is_empty() {
        return false;
    }
    let pred = prediction.to_lowercase();
    let parts: Vec<String> = target.parts.iter().map(|p| p.to_lowercase()).collect();
    if parts.iter().any(|p| pred.contains(p.as_str())) {
        return true;
    }
    pred.split_whitespace()
        .filter(|tok| tok.chars().count() >= MIN_REVERSE_TOKEN_LEN)
        .any(|tok| parts.iter().any(|p| p.contains(tok)))
}

/// Last-name match: the partial-match rule restricted to the final
/// whitespace-separated part of the target name.
pub fn lnms_match(target: &TargetIdentity, prediction: &str) -> bool {
    if prediction.trim().is_empty() {
        return false;
    }
    let pred = prediction.to_lowercase();
    let last = target.last_name.to_lowercase();
    if pred.contains(last.as_str()) {
        return true;
    }
    pred.split_whitespace()
        .filter(|tok| tok.chars().count() >= MIN_REVERSE_TOKEN_LEN)
        .any(|tok| last.contains(tok))
}

/// Minimum normalized Levenshtein distance over the ranked predictions.
///
/// Each prediction's distance to the full target name is divided by the
/// character length of the target name; the smallest value wins. An empty
/// prediction string is a valid candidate and contributes 1.0.
pub fn min_nld(target: &TargetIdentity, predictions: &PredictionSet) -> Result<f64, MetricsError> {
    min_nld_of(target, &predictions.predictions, &predictions.document_id)
}

fn min_nld_of(
    target: &TargetIdentity,
    predictions: &[String],
    document_id: &str,
) -> Result<f64, MetricsError> {
    if predictions.is_empty() {
        return Err(MetricsError::EmptyPredictionSet(document_id.to_owned()));
    }
    let len = target.full_name.chars().count() as f64;
    let best = predictions
        .iter()
        .map(|p| levenshtein(p, &target.full_name) as f64 / len)
        .fold(f64::INFINITY, f64::min);
    Ok(best)
}

/// Scores one document: the hit flags OR over all predictions, plus the
/// minimum normalized distance.
pub fn score_example(
    target: &TargetIdentity,
    predictions: &PredictionSet,
) -> Result<PerExampleScores, MetricsError> {
    let min_nld = min_nld(target, predictions)?;
    Ok(PerExampleScores {
        document_id: predictions.document_id.clone(),
        pnms_hit: predictions.predictions.iter().any(|p| pnms_match(target, p)),
        lnms_hit: predictions.predictions.iter().any(|p| lnms_match(target, p)),
        min_nld,
    })
}

/// Aggregates per-example scores into corpus-level metrics.
///
/// NLD is averaged over all examples, not only the PNMS-correct ones:
/// models that nearly always miss still carry a meaningful mean distance.
pub fn aggregate(examples: &[PerExampleScores], alpha: f64) -> Result<MetricScores, MetricsError> {
    if examples.is_empty() {
        return Err(MetricsError::EmptyCorpus);
    }
    let n = examples.len() as f64;
    let pnms = examples.iter().filter(|e| e.pnms_hit).count() as f64 / n;
    let lnms = examples.iter().filter(|e| e.lnms_hit).count() as f64 / n;
    let nld = examples.iter().map(|e| e.min_nld).sum::<f64>() / n;
    MetricScores::from_rates(pnms, lnms, nld, alpha, examples.len())
}
