//! Boundary predictors and the rollback truncation they drive.
//!
//! A predictor judges one freshly generated block and answers with the number
//! of leading characters that still belong to the token type the current
//! generator is responsible for. Verdicts speak characters, not model tokens,
//! because teacher, student and predictor each tokenize differently.

use std::collections::HashSet;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::PredictorSelector;
use crate::gateway::http::join_url;
use crate::gateway::{GatewayError, HttpClient};
use crate::record::Origin;
use crate::text::{char_len, char_prefix, word_ranges};

/// Token type a unit of text belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenKind {
    Capability,
    Style,
}

/// The token type a generator is expected to produce.
pub type BoundaryTarget = TokenKind;

impl TokenKind {
    /// Teachers write capability spans, students write style spans.
    pub fn for_origin(origin: Origin) -> TokenKind {
        match origin {
            Origin::Teacher => TokenKind::Capability,
            Origin::Student => TokenKind::Style,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TokenKind::Capability => "capability",
            TokenKind::Style => "style",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UnitLabel {
    pub start: usize,
    pub end: usize,
    pub label: TokenKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundaryVerdict {
    pub keep_prefix_chars: usize,
    pub unit_labels: Option<Vec<UnitLabel>>,
}

#[derive(Debug, Error)]
pub enum BoundaryError {
    #[error("cannot judge empty text")]
    EmptyText,
    #[error("verdict keeps {keep} characters of a {len}-character text")]
    KeepOutOfRange { keep: usize, len: usize },
    #[error("predictor unreachable: {0}")]
    Transport(#[from] GatewayError),
    #[error("predictor protocol violation: {0}")]
    Protocol(String),
}

impl BoundaryVerdict {
    /// Cut position implied by unit labels: start of the first unit whose
    /// label differs from `target`, or `len` when none does.
    pub fn keep_from_labels(labels: &[UnitLabel], target: TokenKind, len: usize) -> usize {
        labels
            .iter()
            .find(|u| u.label != target)
            .map_or(len, |u| u.start)
    }

    /// Checks the verdict against a text of `len` characters.
    pub fn check(&self, len: usize, target: TokenKind) -> Result<(), String> {
        if self.keep_prefix_chars > len {
            return Err(format!(
                "keep_prefix_chars {} exceeds text length {len}",
                self.keep_prefix_chars
            ));
        }
        if let Some(units) = &self.unit_labels {
            let mut pos = 0;
            for u in units {
                if u.start != pos || u.end < u.start {
                    return Err(format!("unit [{}, {}) does not tile at {pos}", u.start, u.end));
                }
                pos = u.end;
            }
            if pos != len {
                return Err(format!("units cover {pos} of {len} characters"));
            }
            let expected = Self::keep_from_labels(units, target, len);
            if expected != self.keep_prefix_chars {
                return Err(format!(
                    "keep_prefix_chars {} disagrees with unit labels ({expected})",
                    self.keep_prefix_chars
                ));
            }
        }
        Ok(())
    }
}

pub trait BoundaryPredictor: Send + Sync {
    fn predict(&self, text: &str, target: BoundaryTarget) -> Result<BoundaryVerdict, BoundaryError>;
}

impl<T: BoundaryPredictor + ?Sized> BoundaryPredictor for Arc<T> {
    fn predict(&self, text: &str, target: BoundaryTarget) -> Result<BoundaryVerdict, BoundaryError> {
        (**self).predict(text, target)
    }
}

pub const DEFAULT_STYLE_PHRASES: &[&str] = &[
    "okay", "ok", "wait", "hmm", "so", "let's", "but", "let me", "i think", "alright",
    "now", "well", "oh", "let's see", "actually", "hold on", "in this case",
    "for example", "to begin with", "but if",
];

/// Lowercase word forms and phrases treated as style markers.
#[derive(Debug, Clone)]
pub struct StyleLexicon {
    phrases: HashSet<Vec<String>>,
    longest: usize,
}

/// Lowercases and strips leading/trailing punctuation from a word.
pub fn normalize_word(word: &str) -> String {
    word.replace('\u{2019}', "'")
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

impl StyleLexicon {
    pub fn new<I, S>(phrases: I) -> Option<Self>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let phrases: HashSet<Vec<String>> = phrases
            .into_iter()
            .map(|p| {
                p.as_ref()
                    .split_whitespace()
                    .map(normalize_word)
                    .filter(|w| !w.is_empty())
                    .collect::<Vec<_>>()
            })
            .filter(|p| !p.is_empty())
            .collect();
        let longest = phrases.iter().map(Vec::len).max()?;
        Some(StyleLexicon { phrases, longest })
    }

    /// Labels every whitespace-delimited word of `text`.
    ///
    /// Words are matched greedily left to right against the longest phrase
    /// first. Words that normalize to nothing (bare punctuation) get `None`.
    pub fn label_words(&self, text: &str) -> Vec<((usize, usize), Option<TokenKind>)> {
        let words = word_ranges(text);
        let chars: Vec<char> = text.chars().collect();
        let normalized: Vec<String> = words
            .iter()
            .map(|&(s, e)| normalize_word(&chars[s..e].iter().collect::<String>()))
            .collect();
        let mut labels = vec![None; words.len()];
        let mut i = 0;
        while i < words.len() {
            if normalized[i].is_empty() {
                i += 1;
                continue;
            }
            let max = self.longest.min(words.len() - i);
            let matched = (1..=max).rev().find(|&n| {
                let window = &normalized[i..i + n];
                window.iter().all(|w| !w.is_empty()) && self.phrases.contains(window)
            });
            match matched {
                Some(n) => {
                    labels[i..i + n].fill(Some(TokenKind::Style));
                    i += n;
                }
                None => {
                    labels[i] = Some(TokenKind::Capability);
                    i += 1;
                }
            }
        }
        words.into_iter().zip(labels).collect()
    }
}

impl Default for StyleLexicon {
    fn default() -> Self {
        StyleLexicon::new(DEFAULT_STYLE_PHRASES).expect("default lexicon is non-empty")
    }
}

/// Deterministic stand-in for a learned predictor.
///
/// Units tile the text: each starts at a word (the first at offset 0, so it
/// absorbs leading whitespace) and runs to the next word. Bare punctuation
/// inherits the label of the preceding unit, or the target when first.
#[derive(Debug, Clone, Default)]
pub struct LexiconPredictor {
    lexicon: StyleLexicon,
}

impl LexiconPredictor {
    pub fn new(lexicon: StyleLexicon) -> Self {
        LexiconPredictor { lexicon }
    }

    pub fn lexicon(&self) -> &StyleLexicon {
        &self.lexicon
    }

    pub fn units(&self, text: &str, target: TokenKind) -> Vec<UnitLabel> {
        let len = char_len(text);
        let words = self.lexicon.label_words(text);
        if words.is_empty() {
            return vec![UnitLabel {
                start: 0,
                end: len,
                label: target,
            }];
        }
        let mut units = Vec::with_capacity(words.len());
        let mut prev = target;
        for (i, ((start, _), label)) in words.iter().enumerate() {
            let start = if i == 0 { 0 } else { *start };
            let end = words.get(i + 1).map_or(len, |w| w.0 .0);
            let label = label.unwrap_or(prev);
            prev = label;
            units.push(UnitLabel { start, end, label });
        }
        units
    }
}

impl BoundaryPredictor for LexiconPredictor {
    fn predict(&self, text: &str, target: BoundaryTarget) -> Result<BoundaryVerdict, BoundaryError> {
        if text.is_empty() {
            return Err(BoundaryError::EmptyText);
        }
        let units = self.units(text, target);
        let keep = BoundaryVerdict::keep_from_labels(&units, target, char_len(text));
        Ok(BoundaryVerdict {
            keep_prefix_chars: keep,
            unit_labels: Some(units),
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WireLabelRequest {
    pub text: String,
    pub target: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WireLabelResponse {
    pub keep_prefix_chars: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub units: Option<Vec<UnitLabel>>,
}

impl From<BoundaryVerdict> for WireLabelResponse {
    fn from(v: BoundaryVerdict) -> Self {
        WireLabelResponse {
            keep_prefix_chars: v.keep_prefix_chars,
            units: v.unit_labels,
        }
    }
}

/// Client for a predictor service speaking `POST /v1/label`.
pub struct RemotePredictor {
    client: Arc<HttpClient>,
    url: String,
}

impl RemotePredictor {
    pub fn new(client: Arc<HttpClient>, url: &str) -> Self {
        RemotePredictor {
            client,
            url: join_url(url, "/v1/label"),
        }
    }
}

impl BoundaryPredictor for RemotePredictor {
    fn predict(&self, text: &str, target: BoundaryTarget) -> Result<BoundaryVerdict, BoundaryError> {
        if text.is_empty() {
            return Err(BoundaryError::EmptyText);
        }
        let body = serde_json::to_string(&WireLabelRequest {
            text: text.to_string(),
            target: target.as_str().to_string(),
        })
        .map_err(|e| BoundaryError::Protocol(e.to_string()))?;
        let reply = self.client.post_json(&self.url, &body)?;
        let parsed: WireLabelResponse = serde_json::from_str(&reply)
            .map_err(|e| BoundaryError::Protocol(format!("malformed label body: {e}")))?;
        let verdict = BoundaryVerdict {
            keep_prefix_chars: parsed.keep_prefix_chars,
            unit_labels: parsed.units,
        };
        verdict
            .check(char_len(text), target)
            .map_err(BoundaryError::Protocol)?;
        Ok(verdict)
    }
}

/// Builds the predictor named by a config selector.
pub fn predictor_from_selector(
    selector: &PredictorSelector,
    client: &Arc<HttpClient>,
) -> Arc<dyn BoundaryPredictor> {
    match selector {
        PredictorSelector::Lexicon => Arc::new(LexiconPredictor::default()),
        PredictorSelector::LexiconWith { phrases } => Arc::new(LexiconPredictor::new(
            StyleLexicon::new(phrases).unwrap_or_default(),
        )),
        PredictorSelector::Remote { url } => Arc::new(RemotePredictor::new(client.clone(), url)),
    }
}

/// Keeps the verdict's prefix of `raw`; reports whether anything was cut.
pub fn truncate_span(raw: &str, verdict: &BoundaryVerdict) -> Result<(String, bool), BoundaryError> {
    let len = char_len(raw);
    if verdict.keep_prefix_chars > len {
        return Err(BoundaryError::KeepOutOfRange {
            keep: verdict.keep_prefix_chars,
            len,
        });
    }
    let retained = char_prefix(raw, verdict.keep_prefix_chars);
    Ok((retained.to_string(), verdict.keep_prefix_chars < len))
}

/// Drops a trailing partial word so a cut never leaves a dangling subword.
pub fn trim_partial_word(retained: &str) -> String {
    match retained.chars().last() {
        None => String::new(),
        Some(c) if c.is_whitespace() => retained.to_string(),
        Some(_) => {
            let cut = retained
                .char_indices()
                .rev()
                .find(|(_, c)| c.is_whitespace())
                .map_or(0, |(i, c)| i + c.len_utf8());
            retained[..cut].to_string()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn keep(text: &str, target: TokenKind) -> usize {
        LexiconPredictor::default()
            .predict(text, target)
            .unwrap()
            .keep_prefix_chars
    }

    #[test]
    fn style_target_stops_at_first_capability_word() {
        let text = "Okay, let's compute the gcd of both values";
        assert_eq!(keep(text, TokenKind::Style), text.find("compute").unwrap());
    }

    #[test]
    fn capability_target_without_style_keeps_all() {
        let text = "compute gcd(a,b) then reduce";
        assert_eq!(keep(text, TokenKind::Capability), char_len(text));
    }

    #[test]
    fn capability_target_cut_at_leading_style() {
        assert_eq!(keep("Wait, hmm.", TokenKind::Capability), 0);
    }

    #[test]
    fn phrases_match_greedily() {
        // "let me" is a phrase; "me" alone is not style.
        assert_eq!(keep("Let me check x", TokenKind::Style), 7);
        assert_eq!(keep("me check", TokenKind::Style), 0);
        // "I think" as a phrase, "think" alone is capability.
        assert_eq!(keep("x = 2 I think", TokenKind::Capability), 6);
        assert_eq!(keep("think hard", TokenKind::Style), 0);
    }

    #[test]
    fn punctuation_units_inherit_label() {
        // "..." is neutral and rides along with the preceding style word.
        assert_eq!(keep("So ... x", TokenKind::Style), 7);
        assert_eq!(keep("x = 3", TokenKind::Capability), 5);
        assert_eq!(keep("  ", TokenKind::Style), 2);
    }

    #[test]
    fn empty_text_rejected() {
        assert!(matches!(
            LexiconPredictor::default().predict("", TokenKind::Style),
            Err(BoundaryError::EmptyText)
        ));
    }

    #[test]
    fn verdict_check_detects_inconsistency() {
        let units = vec![
            UnitLabel { start: 0, end: 3, label: TokenKind::Style },
            UnitLabel { start: 3, end: 6, label: TokenKind::Capability },
        ];
        let good = BoundaryVerdict { keep_prefix_chars: 3, unit_labels: Some(units.clone()) };
        assert!(good.check(6, TokenKind::Style).is_ok());
        let bad = BoundaryVerdict { keep_prefix_chars: 6, unit_labels: Some(units) };
        assert!(bad.check(6, TokenKind::Style).is_err());
        let over = BoundaryVerdict { keep_prefix_chars: 7, unit_labels: None };
        assert!(over.check(6, TokenKind::Style).is_err());
    }

    #[test]
    fn truncate_cases() {
        let v = |k| BoundaryVerdict { keep_prefix_chars: k, unit_labels: None };
        assert_eq!(truncate_span("abcdef", &v(6)).unwrap(), ("abcdef".into(), false));
        assert_eq!(truncate_span("abcdef", &v(0)).unwrap(), (String::new(), true));
        assert!(matches!(
            truncate_span("abc", &v(4)),
            Err(BoundaryError::KeepOutOfRange { keep: 4, len: 3 })
        ));
        let raw = "Okay, let's compute";
        let verdict = LexiconPredictor::default().predict(raw, TokenKind::Style).unwrap();
        assert_eq!(truncate_span(raw, &verdict).unwrap(), ("Okay, let's ".into(), true));
    }

    #[test]
    fn trim_cases() {
        assert_eq!(trim_partial_word("compute the gc"), "compute the ");
        assert_eq!(trim_partial_word("compute the "), "compute the ");
        assert_eq!(trim_partial_word(""), "");
        assert_eq!(trim_partial_word("gc"), "");
        assert_eq!(trim_partial_word("a\u{3000}bπ"), "a\u{3000}");
    }
}
