//! Battle-testing toolkit for anonymized documents.
//!
//! Given a corpus of texts in which a person's name is replaced by a mask
//! token, this crate measures how well candidate-name producers (remote
//! models, a retrieval-augmented pipeline, or calibration baselines) can
//! recover the hidden identity, and reports the risk with four
//! name-matching metrics:
//!
//! - **PNMS** — partial name match: any part of the target name overlaps a
//!   prediction.
//! - **LNMS** — the same rule restricted to the last name.
//! - **NLD** — minimum normalized Levenshtein distance of the ranked
//!   predictions to the full name.
//! - **W-PNMS** — `0.35 * PNMS + 0.65 * LNMS`, emphasizing last names.
//!
//! The crate is a library first: each major capability has a runnable
//! example under `examples/`, and the thin `reident` binary exposes the
//! same operations as subcommands (`mask`, `evaluate`, `sweep`, `baseline`,
//! `rag`, `categorize`, `report`).

pub mod backends;
pub mod baselines;
pub mod categorize;
pub mod cli;
pub mod harness;
pub mod masking;
pub mod metrics;
pub mod model;
pub mod rag;
pub mod synthetic;

pub use model::{
    DecodingSpec, DecodingStrategy, DocumentKind, MaskedDocument, PredictionSet, TargetIdentity,
    DEFAULT_MASK_TOKEN,
};

pub use metrics::{
    aggregate, levenshtein, lnms_match, min_nld, pnms_match, score_example, MetricScores,
    PerExampleScores, DEFAULT_ALPHA,
};
