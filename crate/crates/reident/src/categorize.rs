//! Classifies raw predictions into error-analysis categories, separating
//! possible re-identifications from noise.
//!
//! Precedence is fixed: empty → mask token → short letters → in-text →
//! good → non-name. In-text comes before good because rulings are full of
//! real names (law firms, judges) that are not re-identifications of the
//! masked person.

use std::collections::BTreeMap;
use std::collections::HashSet;
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Name tokens bundled for out-of-the-box categorization: the baseline
/// pools plus common fixture names.
const BUNDLED_GAZETTEER: &str = include_str!("../data/gazetteer.txt");

#[derive(Debug, Error, PartialEq)]
pub enum CategorizeError {
    #[error("gazetteer is empty")]
    EmptyGazetteer,
}

/// Bucket a single prediction falls into.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionCategory {
    /// A plausible name that is not lifted from the text: the only
    /// category that can be a real re-identification.
    Good,
    /// Already present verbatim in the source document.
    InText,
    /// The mask token itself.
    MaskToken,
    /// Anonymization-style fragments like "X.__" or "A.___".
    ShortLetters,
    /// Blank, whitespace or newline-only.
    Empty,
    /// Anything else: refusals, common words, cloze fillers.
    NonName,
}

impl PredictionCategory {
    pub fn as_str(&self) -> &'static str {
        match self {
            PredictionCategory::Good => "good",
            PredictionCategory::InText => "in_text",
            PredictionCategory::MaskToken => "mask_token",
            PredictionCategory::ShortLetters => "short_letters",
            PredictionCategory::Empty => "empty",
            PredictionCategory::NonName => "non_name",
        }
    }

    pub const ALL: [PredictionCategory; 6] = [
        PredictionCategory::Good,
        PredictionCategory::InText,
        PredictionCategory::MaskToken,
        PredictionCategory::ShortLetters,
        PredictionCategory::Empty,
        PredictionCategory::NonName,
    ];
}

/// Flat lookup of known name tokens, lowercase, exact-token.
#[derive(Debug, Clone)]
pub struct NameGazetteer {
    entries: HashSet<String>,
}

impl NameGazetteer {
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self, CategorizeError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let entries: HashSet<String> = tokens
            .into_iter()
            .map(|t| t.as_ref().trim().to_lowercase())
            .filter(|t| !t.is_empty())
            .collect();
        if entries.is_empty() {
            return Err(CategorizeError::EmptyGazetteer);
        }
        Ok(NameGazetteer { entries })
    }

    /// One token per line, lowercase.
    pub fn from_file(path: &std::path::Path) -> std::io::Result<Result<Self, CategorizeError>> {
        let text = std::fs::read_to_string(path)?;
        Ok(NameGazetteer::from_tokens(text.lines()))
    }

    pub fn bundled() -> Self {
        NameGazetteer::from_tokens(BUNDLED_GAZETTEER.lines()).expect("bundled gazetteer non-empty")
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains(&token.to_lowercase())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn short_letters_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"^\p{L}{1,2}[._]*$").expect("valid pattern"))
}

/// Assigns exactly one category to a prediction.
pub fn categorize(
    prediction: &str,
    source_text: &str,
    mask_token: &str,
    gazetteer: &NameGazetteer,
) -> PredictionCategory {
    let trimmed = prediction.trim();
    if trimmed.is_empty() {
        return PredictionCategory::Empty;
    }
    if trimmed == mask_token {
        return PredictionCategory::MaskToken;
    }
    if short_letters_re().is_match(trimmed) {
        return PredictionCategory::ShortLetters;
    }
    if source_text.to_lowercase().contains(&trimmed.to_lowercase()) {
        return PredictionCategory::InText;
    }
    let is_name = trimmed
        .split_whitespace()
        .map(|tok| tok.trim_matches(|c: char| !c.is_alphanumeric()))
        .any(|tok| !tok.is_empty() && gazetteer.contains(tok));
    if is_name {
        PredictionCategory::Good
    } else {
        PredictionCategory::NonName
    }
}

/// Counts categories over a stream of predictions; the counts sum to the
/// number of predictions.
pub fn histogram<'a, I>(categories: I) -> BTreeMap<PredictionCategory, usize>
where
    I: IntoIterator<Item = &'a PredictionCategory>,
{
    let mut counts = BTreeMap::new();
    for c in categories {
        *counts.entry(*c).or_insert(0) += 1;
    }
    counts
}
