//! Provenance model: spans, synthesized records and their structural checks.

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::text::char_len;

/// Which model produced a span.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Origin {
    Student,
    Teacher,
}

impl Origin {
    pub fn other(self) -> Origin {
        match self {
            Origin::Student => Origin::Teacher,
            Origin::Teacher => Origin::Student,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Origin::Student => "student",
            Origin::Teacher => "teacher",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Think,
    Answer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TerminatedBy {
    EndOfThinkMarker,
    BudgetExhausted,
    EndpointStop,
}

/// A contiguous run of synthesized text from one generator call.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Span {
    pub index: usize,
    pub origin: Origin,
    pub role: Role,
    pub text: String,
    pub truncated: bool,
    /// Length of the generator's block before rollback.
    pub raw_length_chars: usize,
}

impl Span {
    /// A span kept whole.
    pub fn whole(index: usize, origin: Origin, role: Role, text: impl Into<String>) -> Self {
        let text = text.into();
        let raw_length_chars = char_len(&text);
        Span {
            index,
            origin,
            role,
            text,
            truncated: false,
            raw_length_chars,
        }
    }

    /// A span retained from a longer raw block of `raw_length_chars` characters.
    pub fn retained(
        index: usize,
        origin: Origin,
        role: Role,
        text: impl Into<String>,
        raw_length_chars: usize,
    ) -> Self {
        let text = text.into();
        let truncated = char_len(&text) < raw_length_chars;
        Span {
            index,
            origin,
            role,
            text,
            truncated,
            raw_length_chars,
        }
    }

    pub fn len_chars(&self) -> usize {
        char_len(&self.text)
    }
}

/// One prompt's complete synthesized output.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisRecord {
    pub id: String,
    pub prompt: String,
    pub spans: Vec<Span>,
    pub strategy: String,
    pub config_fingerprint: String,
    pub terminated_by: TerminatedBy,
    pub meta: Map<String, Value>,
}

pub const TESSY_STRATEGY: &str = "tessy";

/// Meta key under which the end-of-think marker used for a record is stored.
pub const META_MARKER: &str = "end_of_think_marker";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RecordError {
    #[error("span at position {position} has index {found}")]
    NonConsecutiveIndex { position: usize, found: usize },
    #[error("span {index}: text longer than raw_length_chars")]
    SpanLength { index: usize },
    #[error("span {index}: truncated flag disagrees with text/raw lengths")]
    TruncationFlag { index: usize },
    #[error("span {index}: think span after an answer span")]
    RoleOrder { index: usize },
    #[error("tessy record must open with a student span")]
    FirstSpanNotStudent,
    #[error("span {index}: tessy answer span not produced by the student")]
    AnswerNotStudent { index: usize },
    #[error("end-of-think marker misplaced in think text")]
    MarkerHygiene,
    #[error("span {index}: partition violation: {detail}")]
    Partition { index: usize, detail: String },
}

impl SynthesisRecord {
    pub fn think_spans(&self) -> impl Iterator<Item = &Span> {
        self.spans.iter().filter(|s| s.role == Role::Think)
    }

    pub fn answer_spans(&self) -> impl Iterator<Item = &Span> {
        self.spans.iter().filter(|s| s.role == Role::Answer)
    }

    pub fn think_text(&self) -> String {
        self.think_spans().map(|s| s.text.as_str()).collect()
    }

    pub fn answer_text(&self) -> String {
        self.answer_spans().map(|s| s.text.as_str()).collect()
    }

    /// Character ranges `[start, end)` of each span within the output.
    pub fn span_ranges(&self) -> Vec<(usize, usize)> {
        let mut pos = 0;
        self.spans
            .iter()
            .map(|s| {
                let start = pos;
                pos += s.len_chars();
                (start, pos)
            })
            .collect()
    }

    pub fn marker(&self) -> Option<&str> {
        self.meta.get(META_MARKER).and_then(Value::as_str)
    }

    /// Checks every structural invariant a record must satisfy.
    pub fn validate(&self) -> Result<(), RecordError> {
        check_indices(&self.spans)?;
        let mut seen_answer = false;
        for span in &self.spans {
            let len = span.len_chars();
            if len > span.raw_length_chars {
                return Err(RecordError::SpanLength { index: span.index });
            }
            if span.truncated != (len < span.raw_length_chars) {
                return Err(RecordError::TruncationFlag { index: span.index });
            }
            match span.role {
                Role::Answer => seen_answer = true,
                Role::Think if seen_answer => {
                    return Err(RecordError::RoleOrder { index: span.index })
                }
                Role::Think => {}
            }
        }
        if self.strategy == TESSY_STRATEGY {
            if let Some(first) = self.spans.first() {
                if first.origin != Origin::Student {
                    return Err(RecordError::FirstSpanNotStudent);
                }
            }
            if let Some(s) = self.answer_spans().find(|s| s.origin != Origin::Student) {
                return Err(RecordError::AnswerNotStudent { index: s.index });
            }
        }
        if let Some(marker) = self.marker().filter(|m| !m.is_empty()) {
            let think = self.think_text();
            let count = think.matches(marker).count();
            let ok = match self.terminated_by {
                TerminatedBy::EndOfThinkMarker => count == 1 && think.ends_with(marker),
                _ => count == 0,
            };
            if !ok {
                return Err(RecordError::MarkerHygiene);
            }
        }
        Ok(())
    }
}

fn check_indices(spans: &[Span]) -> Result<(), RecordError> {
    for (position, span) in spans.iter().enumerate() {
        if span.index != position {
            return Err(RecordError::NonConsecutiveIndex {
                position,
                found: span.index,
            });
        }
    }
    Ok(())
}

/// Concatenation of all span texts in order.
pub fn reconstruct(record: &SynthesisRecord) -> Result<String, RecordError> {
    check_indices(&record.spans)?;
    Ok(record.spans.iter().map(|s| s.text.as_str()).collect())
}
