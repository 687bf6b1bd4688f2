//! Training data for boundary predictors: render the annotation prompt,
//! parse the annotator's verbatim span list, and emit labeled segments.

use std::collections::HashSet;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::boundary::TokenKind;
use crate::config::EndpointProfile;
use crate::gateway::{CompletionBackend, CompletionRequest, GatewayError};
use crate::record::{Origin, Role, SynthesisRecord};
use crate::text::{byte_offset, char_len, char_slice};

pub const DEFAULT_PREDICTOR_SAMPLES: usize = 100_000;

pub const INPUT_OPEN: &str = "<input_text>\n";
pub const INPUT_CLOSE: &str = "\n</input_text>";
const SEGMENT_PLACEHOLDER: &str = "{think_text}";

pub const ANNOTATION_PROMPT: &str = r#"You are a text analysis expert.

Task: Extract all spans of text that are transitional, filler, or tone-setting phrases.

What to extract:
- Include phrases or sentences that:
  - Express hesitation, tone, or attitude (e.g., "well", "okay", "so", "let's see", "I think")
  - Indicate transition or setup (e.g., "to begin with", "in this case", "for example", "but if")
  - Serve as narration or connection, not analysis
- Do not include:
  - Actual reasoning, deduction, or explanation
  - Code or formula descriptions
  - Problem-solving steps

Output format (STRICT JSON):
- Return a JSON array of strings, e.g.: ["<span 1>", "<span 2>", ...]
- Rules:
  1. Each span must be copied verbatim from the original text.
  2. Preserve order of appearance.
  3. If there are none, return an empty list: []
  4. Output only the JSON array — no explanation or extra text.

<input_text>
{think_text}
</input_text>"#;

#[derive(Debug, Error)]
pub enum AnnotationError {
    #[error("segment text is empty")]
    EmptySegment,
    #[error("annotator output is not a JSON array of strings: {0}")]
    Format(String),
    #[error("span {span:?} not found verbatim at or after character {from}")]
    VerbatimViolation { span: String, from: usize },
    #[error("sample_count must be positive")]
    ZeroSamples,
    #[error("no {0:?} think text long enough to sample from")]
    NoSourceText(Origin),
    #[error("annotator call failed: {0}")]
    Gateway(#[from] GatewayError),
    #[error("writing corpus: {0}")]
    Io(#[from] std::io::Error),
}

/// A think-text segment with its style spans, as character ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSegment {
    pub text: String,
    pub style_spans: Vec<(usize, usize)>,
    pub source: Origin,
}

pub fn render_annotation_prompt(segment_text: &str) -> Result<String, AnnotationError> {
    if segment_text.is_empty() {
        return Err(AnnotationError::EmptySegment);
    }
    Ok(ANNOTATION_PROMPT.replacen(SEGMENT_PLACEHOLDER, segment_text, 1))
}

/// First balanced top-level `[...]` in `s`, skipping brackets inside strings.
fn first_json_array(s: &str) -> Option<&str> {
    let start = s.find('[')?;
    let mut depth = 0usize;
    let mut in_string = false;
    let mut escaped = false;
    for (i, c) in s[start..].char_indices() {
        if in_string {
            match c {
                _ if escaped => escaped = false,
                '\\' => escaped = true,
                '"' => in_string = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' => in_string = true,
            '[' => depth += 1,
            ']' => {
                depth -= 1;
                if depth == 0 {
                    return Some(&s[start..start + i + 1]);
                }
            }
            _ => {}
        }
    }
    None
}

/// Parses the annotator's reply and locates each span in `segment_text`.
///
/// Spans are located by a left-to-right scan, each search starting where the
/// previous match ended, so duplicate strings resolve to successive
/// occurrences. A span that cannot be found is an error, never repaired.
pub fn parse_annotation(
    segment_text: &str,
    annotator_output: &str,
    source: Origin,
) -> Result<AnnotatedSegment, AnnotationError> {
    let array = first_json_array(annotator_output)
        .ok_or_else(|| AnnotationError::Format("no JSON array found".into()))?;
    let values: Vec<Value> =
        serde_json::from_str(array).map_err(|e| AnnotationError::Format(e.to_string()))?;
    let mut spans = Vec::with_capacity(values.len());
    let mut cursor_chars = 0;
    for value in values {
        let Value::String(span) = value else {
            return Err(AnnotationError::Format(format!("non-string element {value}")));
        };
        if span.is_empty() {
            return Err(AnnotationError::Format("empty span string".into()));
        }
        let from_byte = byte_offset(segment_text, cursor_chars);
        let found = segment_text[from_byte..].find(&span).ok_or_else(|| {
            AnnotationError::VerbatimViolation {
                span: span.clone(),
                from: cursor_chars,
            }
        })?;
        let start = cursor_chars + char_len(&segment_text[from_byte..from_byte + found]);
        let end = start + char_len(&span);
        spans.push((start, end));
        cursor_chars = end;
    }
    Ok(AnnotatedSegment {
        text: segment_text.to_string(),
        style_spans: spans,
        source,
    })
}

/// Per-character labels: style inside any style span, capability elsewhere.
pub fn labels_from_segment(seg: &AnnotatedSegment) -> Vec<TokenKind> {
    let mut labels = vec![TokenKind::Capability; char_len(&seg.text)];
    for &(start, end) in &seg.style_spans {
        let end = end.min(labels.len());
        if start < end {
            labels[start..end].fill(TokenKind::Style);
        }
    }
    labels
}

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    pub sample_count: usize,
    pub min_chars: usize,
    pub max_chars: usize,
    pub source: Origin,
    pub seed: u64,
    pub annotator_max_tokens: usize,
}

impl Default for CorpusOptions {
    fn default() -> Self {
        CorpusOptions {
            sample_count: DEFAULT_PREDICTOR_SAMPLES,
            min_chars: 200,
            max_chars: 2000,
            source: Origin::Teacher,
            seed: 0,
            annotator_max_tokens: 1024,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CorpusSummary {
    pub requested: usize,
    pub sampled: usize,
    pub accepted: usize,
    pub malformed: usize,
    /// Requested segments that could not be drawn from the source text.
    pub shortfall: usize,
}

/// Maximal runs of consecutive think spans of `source`, concatenated.
fn source_runs(records: &[SynthesisRecord], source: Origin, min_chars: usize) -> Vec<String> {
    let mut runs = Vec::new();
    for record in records {
        let mut current = String::new();
        for span in &record.spans {
            if span.role == Role::Think && span.origin == source {
                current.push_str(&span.text);
            } else if !current.is_empty() {
                runs.push(std::mem::take(&mut current));
            }
        }
        if !current.is_empty() {
            runs.push(current);
        }
    }
    runs.retain(|r| char_len(r) >= min_chars);
    runs
}

fn is_sentence_end(c: char) -> bool {
    matches!(c, '.' | '?' | '!' | '\n')
}

/// Moves a window onto sentence boundaries when one lies within a quarter of
/// its length, keeping at least `min_chars` characters.
fn align_window(chars: &[char], start: usize, end: usize, min_chars: usize) -> (usize, usize) {
    let slack = (end - start) / 4;
    let mut s = start;
    if start > 0 && !is_sentence_end(chars[start - 1]) {
        if let Some(off) = (start..start + slack).find(|&i| i > 0 && is_sentence_end(chars[i - 1])) {
            s = off;
        }
    }
    let mut e = end;
    if end < chars.len() && !is_sentence_end(chars[end - 1]) {
        if let Some(off) = (end - slack..end).rev().find(|&i| is_sentence_end(chars[i - 1])) {
            e = off;
        }
    }
    if e <= s || e - s < min_chars {
        (start, end)
    } else {
        (s, e)
    }
}

/// Draws distinct segments from the source runs with a seeded sampler.
pub fn sample_segments(
    records: &[SynthesisRecord],
    options: &CorpusOptions,
) -> Result<Vec<String>, AnnotationError> {
    if options.sample_count == 0 {
        return Err(AnnotationError::ZeroSamples);
    }
    let min = options.min_chars.max(1);
    let max = options.max_chars.max(min);
    let runs = source_runs(records, options.source, min);
    if runs.is_empty() {
        return Err(AnnotationError::NoSourceText(options.source));
    }
    let chars: Vec<Vec<char>> = runs.iter().map(|r| r.chars().collect()).collect();
    let total: usize = chars.iter().map(Vec::len).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let max_attempts = options.sample_count.saturating_mul(20);
    let mut attempts = 0;
    while out.len() < options.sample_count && attempts < max_attempts {
        attempts += 1;
        let mut pick = rng.random_range(0..total);
        let run = chars
            .iter()
            .position(|c| {
                if pick < c.len() {
                    true
                } else {
                    pick -= c.len();
                    false
                }
            })
            .expect("pick within total");
        let run_chars = &chars[run];
        let len = rng.random_range(min..=max.min(run_chars.len()));
        let start = rng.random_range(0..=run_chars.len() - len);
        let (s, e) = align_window(run_chars, start, start + len, min);
        if seen.insert((run, s, e)) {
            out.push(run_chars[s..e].iter().collect());
        }
    }
    Ok(out)
}

/// Samples think segments, has the annotator label them, and writes one
/// [`AnnotatedSegment`] per line. Malformed annotations are counted and skipped.
pub fn build_predictor_corpus<W: Write>(
    records: &[SynthesisRecord],
    options: &CorpusOptions,
    backend: &dyn CompletionBackend,
    annotator: &EndpointProfile,
    out: &mut W,
) -> Result<CorpusSummary, AnnotationError> {
    let segments = sample_segments(records, options)?;
    let replies: Vec<Result<String, GatewayError>> = segments
        .par_iter()
        .enumerate()
        .map(|(i, segment)| {
            let prompt = render_annotation_prompt(segment).expect("segments are non-empty");
            let request = CompletionRequest::new(annotator, prompt, options.annotator_max_tokens)
                .routed(&format!("annotate-{i}"), Origin::Teacher);
            backend.complete(annotator, &request).map(|r| r.text)
        })
        .collect();
    let mut accepted = 0;
    let mut malformed = 0;
    for (segment, reply) in segments.iter().zip(replies) {
        match parse_annotation(segment, &reply?, options.source) {
            Ok(seg) => {
                serde_json::to_writer(&mut *out, &seg).map_err(std::io::Error::from)?;
                out.write_all(b"\n")?;
                accepted += 1;
            }
            Err(e) => {
                log::debug!("skipping annotation: {e}");
                malformed += 1;
            }
        }
    }
    out.flush()?;
    Ok(CorpusSummary {
        requested: options.sample_count,
        sampled: segments.len(),
        accepted,
        malformed,
        shortfall: options.sample_count - segments.len(),
    })
}

/// Text covered by a style span, for verbatim checks.
pub fn span_text(seg: &AnnotatedSegment, span: (usize, usize)) -> &str {
    char_slice(&seg.text, span.0, span.1)
}
