//! Domain types shared by every other module.
//!
//! All types here are immutable after construction and validate their
//! invariants in their constructors, so a value that exists is a value
//! that is well-formed. They are safe to share across worker threads.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The literal placeholder substituted for every occurrence of a target name.
pub const DEFAULT_MASK_TOKEN: &str = "<mask>";

#[derive(Debug, Error, PartialEq)]
pub enum ModelError {
    #[error("name is empty after trimming")]
    EmptyName,
    #[error("document {0}: masked_text contains no occurrence of mask token {1:?}")]
    MissingMask(String, String),
    #[error("document {0}: masked_text still contains the target name {1:?}")]
    TargetLeak(String, String),
    #[error("prediction set for {0}: {1} predictions exceed n = {2}")]
    TooManyPredictions(String, usize, usize),
    #[error("invalid decoding spec: {0}")]
    InvalidDecoding(String),
    #[error("target identity is inconsistent: {0}")]
    InconsistentIdentity(String),
}

/// The ground-truth person name and its tokenized parts.
///
/// Parts are the whitespace-separated tokens of the normalized full name;
/// the last name is defined as the final part. Hyphens and apostrophes
/// stay inside a single part ("Saint-Exupéry" is one token).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TargetIdentity {
    pub full_name: String,
    pub parts: Vec<String>,
    pub last_name: String,
}

/// Normalizes a raw name into a [`TargetIdentity`].
///
/// Collapses runs of whitespace to single spaces, preserves case, splits
/// parts on whitespace and sets the last name to the final part.
pub fn normalize_name(raw: &str) -> Result<TargetIdentity, ModelError> {
    let parts: Vec<String> = raw.split_whitespace().map(str::to_owned).collect();
    if parts.is_empty() {
        return Err(ModelError::EmptyName);
    }
    let full_name = parts.join(" ");
    let last_name = parts.last().expect("non-empty").clone();
    Ok(TargetIdentity {
        full_name,
        parts,
        last_name,
    })
}

impl TargetIdentity {
    /// Validates the internal consistency of an identity built field-by-field
    /// (e.g. deserialized from a corpus file).
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.parts.is_empty() {
            return Err(ModelError::InconsistentIdentity("no parts".into()));
        }
        if self.parts.join(" ") != self.full_name {
            return Err(ModelError::InconsistentIdentity(format!(
                "parts {:?} do not reproduce full_name {:?}",
                self.parts, self.full_name
            )));
        }
        if self.parts.last() != Some(&self.last_name) {
            return Err(ModelError::InconsistentIdentity(format!(
                "last_name {:?} is not the final part",
                self.last_name
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for TargetIdentity {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        normalize_name(s)
    }
}

// Corpus files may spell a target either as a plain string (normalized on
// load) or as the explicit three-field struct (validated on load).
impl<'de> Deserialize<'de> for TargetIdentity {
    fn deserialize<D>(deserializer: D) -> Result<Self, D::Error>
    where
        D: serde::Deserializer<'de>,
    {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Name(String),
            Full {
                full_name: String,
                parts: Vec<String>,
                last_name: String,
            },
        }
        match Repr::deserialize(deserializer)? {
            Repr::Name(s) => normalize_name(&s).map_err(serde::de::Error::custom),
            Repr::Full {
                full_name,
                parts,
                last_name,
            } => {
                let id = TargetIdentity {
                    full_name,
                    parts,
                    last_name,
                };
                id.validate().map_err(serde::de::Error::custom)?;
                Ok(id)
            }
        }
    }
}

/// Source category of a document.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocumentKind {
    Wikipedia,
    Ruling,
    #[default]
    Other,
}

fn default_mask_token() -> String {
    DEFAULT_MASK_TOKEN.to_owned()
}

/// An anonymized text with mask tokens plus provenance fields.
///
/// Construction enforces that the masked text contains at least one mask
/// token and, when a target is known, that the target's full name no longer
/// appears as a contiguous case-insensitive substring.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskedDocument {
    pub id: String,
    pub masked_text: String,
    #[serde(default = "default_mask_token")]
    pub mask_token: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<TargetIdentity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paraphrased_text: Option<String>,
    #[serde(default)]
    pub kind: DocumentKind,
}

impl MaskedDocument {
    pub fn new(
        id: impl Into<String>,
        masked_text: impl Into<String>,
        mask_token: impl Into<String>,
        target: Option<TargetIdentity>,
        kind: DocumentKind,
    ) -> Result<Self, ModelError> {
        let doc = MaskedDocument {
            id: id.into(),
            masked_text: masked_text.into(),
            mask_token: mask_token.into(),
            target,
            original_text: None,
            paraphrased_text: None,
            kind,
        };
        doc.validate()?;
        Ok(doc)
    }

    pub fn with_original(mut self, original: impl Into<String>) -> Self {
        self.original_text = Some(original.into());
        self
    }

    pub fn with_paraphrased(mut self, paraphrased: impl Into<String>) -> Self {
        self.paraphrased_text = Some(paraphrased.into());
        self
    }

    /// Checks the masked-document invariants: mask presence and the no-leak
    /// guard against the target name.
    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.masked_text.contains(&self.mask_token) {
            return Err(ModelError::MissingMask(
                self.id.clone(),
                self.mask_token.clone(),
            ));
        }
        if let Some(target) = &self.target {
            target.validate()?;
            let haystack = self.masked_text.to_lowercase();
            if haystack.contains(&target.full_name.to_lowercase()) {
                return Err(ModelError::TargetLeak(
                    self.id.clone(),
                    target.full_name.clone(),
                ));
            }
        }
        Ok(())
    }
}

/// How candidates are requested from a decoder.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum DecodingStrategy {
    Greedy,
    Beam { width: usize },
    TopK { k: usize },
    TopP { p: f64 },
}

/// Decoding parameters carried alongside every prediction set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodingSpec {
    #[serde(flatten)]
    pub strategy: DecodingStrategy,
    pub temperature: f64,
}

impl DecodingSpec {
    pub fn greedy() -> Self {
        DecodingSpec {
            strategy: DecodingStrategy::Greedy,
            temperature: 1.0,
        }
    }

    pub fn beam(width: usize) -> Self {
        DecodingSpec {
            strategy: DecodingStrategy::Beam { width },
            temperature: 1.0,
        }
    }

    pub fn top_k(k: usize) -> Self {
        DecodingSpec {
            strategy: DecodingStrategy::TopK { k },
            temperature: 1.0,
        }
    }

    pub fn top_p(p: f64) -> Self {
        DecodingSpec {
            strategy: DecodingStrategy::TopP { p },
            temperature: 1.0,
        }
    }

    pub fn with_temperature(mut self, temperature: f64) -> Self {
        self.temperature = temperature;
        self
    }

    /// Greedy decoding can only ever yield a single distinct candidate.
    pub fn is_greedy(&self) -> bool {
        matches!(self.strategy, DecodingStrategy::Greedy)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if self.temperature < 0.0 {
            return Err(ModelError::InvalidDecoding(format!(
                "temperature {} is negative",
                self.temperature
            )));
        }
        match self.strategy {
            DecodingStrategy::Greedy => Ok(()),
            DecodingStrategy::Beam { width } if width >= 1 => Ok(()),
            DecodingStrategy::Beam { width } => Err(ModelError::InvalidDecoding(format!(
                "beam width {width} < 1"
            ))),
            DecodingStrategy::TopK { k } if k >= 1 => Ok(()),
            DecodingStrategy::TopK { k } => {
                Err(ModelError::InvalidDecoding(format!("top-k {k} < 1")))
            }
            DecodingStrategy::TopP { p } if p > 0.0 && p <= 1.0 => Ok(()),
            DecodingStrategy::TopP { p } => Err(ModelError::InvalidDecoding(format!(
                "top-p {p} outside (0, 1]"
            ))),
        }
    }
}

impl Default for DecodingSpec {
    /// Beam search with temperature 1, the reference configuration used for
    /// the main experiments.
    fn default() -> Self {
        DecodingSpec::beam(5)
    }
}

/// Ranked candidate names (up to `n`) produced by one backend run.
///
/// Index 0 is the top-1 prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub document_id: String,
    pub predictions: Vec<String>,
    pub n: usize,
    pub backend_id: String,
    pub decoding: DecodingSpec,
}

impl PredictionSet {
    pub fn new(
        document_id: impl Into<String>,
        predictions: Vec<String>,
        n: usize,
        backend_id: impl Into<String>,
        decoding: DecodingSpec,
    ) -> Result<Self, ModelError> {
        let document_id = document_id.into();
        if predictions.len() > n {
            return Err(ModelError::TooManyPredictions(
                document_id,
                predictions.len(),
                n,
            ));
        }
        decoding.validate()?;
        Ok(PredictionSet {
            document_id,
            predictions,
            n,
            backend_id: backend_id.into(),
            decoding,
        })
    }
}
