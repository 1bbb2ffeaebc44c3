//! Masked-corpus construction from raw person-centric texts.
//!
//! The pipeline filters short pages, replaces person entities that share a
//! name part with the target, validates that a mask appears early enough to
//! survive input truncation, and optionally routes the text through a
//! pluggable sentence-level paraphrasing provider.
//!
//! Entity recognition itself is out of process: spans arrive precomputed in
//! the input records (or from an external tagger). Offsets are character
//! offsets, not bytes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{normalize_name, DocumentKind, MaskedDocument, ModelError, TargetIdentity};

/// Pages at or below this many characters are discarded by default.
pub const DEFAULT_MIN_CHARS: usize = 4000;

/// A mask must appear within this many leading characters by default.
pub const DEFAULT_EARLY_WINDOW: usize = 1000;

#[derive(Debug, Error)]
pub enum MaskingError {
    #[error("spans overlap at character {0}")]
    OverlappingSpans(usize),
    #[error("span {start}..{end} is invalid: {reason}")]
    InvalidSpan {
        start: usize,
        end: usize,
        reason: String,
    },
    #[error("paraphrase provider unavailable: {0}")]
    ProviderUnavailable(String),
    #[error("cannot split empty input into sentences")]
    SentenceSplitFailure,
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Label attached to a recognized entity span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpanLabel {
    Person,
    Other,
}

/// A recognized entity: character offsets into the source text plus the
/// surface string those offsets cover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntitySpan {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub label: SpanLabel,
}

/// Why a record was kept or dropped, and how many replacements were made.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaskingReport {
    pub masked_count: usize,
    pub dropped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drop_reason: Option<DropReason>,
}

impl MaskingReport {
    fn kept(masked_count: usize) -> Self {
        MaskingReport {
            masked_count,
            dropped: false,
            drop_reason: None,
        }
    }

    fn dropped(masked_count: usize, reason: DropReason) -> Self {
        MaskingReport {
            masked_count,
            dropped: true,
            drop_reason: Some(reason),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropReason {
    TooShort,
    NoEarlyMask,
    NoMatch,
}

/// Length filter: keep only texts strictly longer than `min_chars`
/// characters, a proxy for the person's prevalence.
pub fn filter_by_length(text: &str, min_chars: usize) -> bool {
    text.chars().count() > min_chars
}

/// Replaces every person-labeled span that shares at least one
/// case-insensitive name part with the target by the mask token.
///
/// Sharing is whole-word: a span surface token must equal a target part
/// (ignoring case and surrounding punctuation). Characters outside replaced
/// spans are never altered. Returns the masked text and a report; a record
/// with zero replacements is flagged as dropped with `NoMatch`.
pub fn mask_entities(
    text: &str,
    spans: &[EntitySpan],
    target: &TargetIdentity,
    mask_token: &str,
) -> Result<(String, MaskingReport), MaskingError> {
    let chars: Vec<char> = text.chars().collect();
    let mut sorted: Vec<&EntitySpan> = spans.iter().collect();
    sorted.sort_by_key(|s| (s.start, s.end));
    for pair in sorted.windows(2) {
        if pair[1].start < pair[0].end {
            return Err(MaskingError::OverlappingSpans(pair[1].start));
        }
    }
    for span in &sorted {
        if span.start >= span.end || span.end > chars.len() {
            return Err(MaskingError::InvalidSpan {
                start: span.start,
                end: span.end,
                reason: format!("outside text of {} characters", chars.len()),
            });
        }
        let slice: String = chars[span.start..span.end].iter().collect();
        if slice != span.surface {
            return Err(MaskingError::InvalidSpan {
                start: span.start,
                end: span.end,
                reason: format!("surface {:?} does not equal slice {:?}", span.surface, slice),
            });
        }
    }

    let target_parts: Vec<String> = target
        .parts
        .iter()
        .map(|p| trim_token(p).to_lowercase())
        .collect();
    let shares_part = |surface: &str| {
        surface
            .split_whitespace()
            .map(|tok| trim_token(tok).to_lowercase())
            .any(|tok| !tok.is_empty() && target_parts.contains(&tok))
    };

    let mut out = String::with_capacity(text.len());
    let mut cursor = 0usize;
    let mut masked_count = 0usize;
    for span in &sorted {
        if span.label == SpanLabel::Person && shares_part(&span.surface) {
            out.extend(&chars[cursor..span.start]);
            out.push_str(mask_token);
            masked_count += 1;
            cursor = span.end;
        }
    }
    out.extend(&chars[cursor..]);

    let report = if masked_count == 0 {
        MaskingReport::dropped(0, DropReason::NoMatch)
    } else {
        MaskingReport::kept(masked_count)
    };
    Ok((out, report))
}

fn trim_token(tok: &str) -> &str {
    tok.trim_matches(|c: char| !c.is_alphanumeric())
}

/// True when a mask-token occurrence starts within the first `window_chars`
/// characters of the text.
pub fn has_early_mask(masked_text: &str, mask_token: &str, window_chars: usize) -> bool {
    if mask_token.is_empty() {
        return false;
    }
    match masked_text.find(mask_token) {
        Some(byte_off) => masked_text[..byte_off].chars().count() < window_chars,
        None => false,
    }
}

/// Splits text into sentences on `.`, `!` or `?` followed by whitespace and
/// an uppercase letter. Abbreviations split imperfectly; downstream scoring
/// is insensitive to split quality.
pub fn split_sentences(text: &str) -> Vec<&str> {
    let mut sentences = Vec::new();
    let bytes: Vec<(usize, char)> = text.char_indices().collect();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < bytes.len() {
        let (pos, c) = bytes[i];
        if matches!(c, '.' | '!' | '?') {
            // scan forward over whitespace to the next visible character
            let mut j = i + 1;
            while j < bytes.len() && bytes[j].1.is_whitespace() {
                j += 1;
            }
            let boundary = j > i + 1 && j < bytes.len() && bytes[j].1.is_uppercase();
            if boundary {
                let end = pos + c.len_utf8();
                let sentence = text[start..end].trim();
                if !sentence.is_empty() {
                    sentences.push(sentence);
                }
                start = bytes[j].0;
                i = j;
                continue;
            }
        }
        i += 1;
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail);
    }
    sentences
}

/// A text rewriting service applied one sentence at a time. Implementations
/// must tolerate concurrent in-flight calls.
pub trait TextTransformProvider: Send + Sync {
    fn transform(&self, sentence: &str) -> Result<String, MaskingError>;
}

impl<F> TextTransformProvider for F
where
    F: Fn(&str) -> Result<String, MaskingError> + Send + Sync,
{
    fn transform(&self, sentence: &str) -> Result<String, MaskingError> {
        self(sentence)
    }
}

/// Paraphrases a document sentence-by-sentence and rejoins the outputs with
/// single spaces.
///
/// The reference provider configuration is 10 beams at temperature 1.5;
/// those parameters travel with the provider, not with this function.
pub fn paraphrase_document(
    text: &str,
    provider: &dyn TextTransformProvider,
) -> Result<String, MaskingError> {
    let sentences = split_sentences(text);
    if sentences.is_empty() {
        return Err(MaskingError::SentenceSplitFailure);
    }
    let mut out = Vec::with_capacity(sentences.len());
    for sentence in sentences {
        out.push(provider.transform(sentence)?);
    }
    Ok(out.join(" "))
}

/// Replaces whole-word occurrences of any target name part with the mask
/// token, collapsing runs of adjacent masks into one. Used to re-mask
/// paraphrased text, where no precomputed spans exist.
pub fn mask_name_parts(text: &str, target: &TargetIdentity, mask_token: &str) -> (String, usize) {
    let mut alternatives: Vec<String> = Vec::new();
    for part in &target.parts {
        let escaped = regex::escape(part);
        let lead = if part.starts_with(|c: char| c.is_alphanumeric()) {
            r"\b"
        } else {
            ""
        };
        let trail = if part.ends_with(|c: char| c.is_alphanumeric()) {
            r"\b"
        } else {
            ""
        };
        alternatives.push(format!("{lead}{escaped}{trail}"));
    }
    let pattern = format!("(?i)(?:{})", alternatives.join("|"));
    let re = regex::Regex::new(&pattern).expect("escaped pattern is valid");
    let count = re.find_iter(text).count();
    let replaced = re.replace_all(text, mask_token).into_owned();

    // collapse "<mask> <mask>" runs left by multi-part names
    let run = regex::Regex::new(&format!(
        "(?:{tok})(?:\\s+(?:{tok}))+",
        tok = regex::escape(mask_token)
    ))
    .expect("escaped pattern is valid");
    (run.replace_all(&replaced, mask_token).into_owned(), count)
}

/// One record of the raw-corpus input file: a page title naming the target
/// person, the page text, and precomputed entity spans.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRecord {
    pub id: String,
    pub title: String,
    pub text: String,
    #[serde(default)]
    pub spans: Vec<EntitySpan>,
}

/// Knobs for the corpus-construction pipeline.
#[derive(Debug, Clone)]
pub struct MaskingOptions {
    pub min_chars: usize,
    pub mask_token: String,
    pub early_window: usize,
    pub kind: DocumentKind,
}

impl Default for MaskingOptions {
    fn default() -> Self {
        MaskingOptions {
            min_chars: DEFAULT_MIN_CHARS,
            mask_token: crate::model::DEFAULT_MASK_TOKEN.to_owned(),
            early_window: DEFAULT_EARLY_WINDOW,
            kind: DocumentKind::Wikipedia,
        }
    }
}

/// Runs one record through the full pipeline: length filter, entity
/// masking, leak guard, early-mask filter and (optionally) paraphrase plus
/// re-mask. Returns the kept document, or `None` with the drop reason in
/// the report.
pub fn process_record(
    record: &RawRecord,
    options: &MaskingOptions,
    paraphraser: Option<&dyn TextTransformProvider>,
) -> Result<(Option<MaskedDocument>, MaskingReport), MaskingError> {
    if !filter_by_length(&record.text, options.min_chars) {
        return Ok((None, MaskingReport::dropped(0, DropReason::TooShort)));
    }
    let target = normalize_name(&record.title)?;
    let (masked, report) = mask_entities(&record.text, &record.spans, &target, &options.mask_token)?;
    if report.dropped {
        return Ok((None, report));
    }
    // Entity recognition misses leave the name in the clear; such records
    // are discarded rather than silently patched.
    if masked
        .to_lowercase()
        .contains(&target.full_name.to_lowercase())
    {
        return Ok((
            None,
            MaskingReport::dropped(report.masked_count, DropReason::NoMatch),
        ));
    }
    if !has_early_mask(&masked, &options.mask_token, options.early_window) {
        return Ok((
            None,
            MaskingReport::dropped(report.masked_count, DropReason::NoEarlyMask),
        ));
    }

    let paraphrased = match paraphraser {
        None => None,
        Some(provider) => {
            let rewritten = paraphrase_document(&record.text, provider)?;
            let (remasked, mask_count) =
                mask_name_parts(&rewritten, &target, &options.mask_token);
            if mask_count == 0 {
                return Ok((
                    None,
                    MaskingReport::dropped(report.masked_count, DropReason::NoMatch),
                ));
            }
            if !has_early_mask(&remasked, &options.mask_token, options.early_window) {
                return Ok((
                    None,
                    MaskingReport::dropped(report.masked_count, DropReason::NoEarlyMask),
                ));
            }
            Some(remasked)
        }
    };

    let mut doc = MaskedDocument::new(
        &record.id,
        masked,
        &options.mask_token,
        Some(target),
        options.kind,
    )?
    .with_original(&record.text);
    doc.paraphrased_text = paraphrased;
    Ok((Some(doc), report))
}
