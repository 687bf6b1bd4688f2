//! Offline completion backends.
//!
//! [`ScriptedBackend`] replays hand-written continuations per trajectory and
//! role. [`SyntheticBackend`] is a stateless temperature-0 model: its output
//! is a pure function of (spec, model name, prompt, max_tokens), so results
//! do not depend on call order or concurrency.

use std::collections::{BTreeMap, HashMap};
use std::sync::Mutex;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CompletionBackend, CompletionRequest, CompletionResult, FinishReason, GatewayError};
use crate::annotation::{INPUT_CLOSE, INPUT_OPEN};
use crate::boundary::{StyleLexicon, TokenKind};
use crate::config::EndpointProfile;
use crate::record::Origin;
use crate::text::char_slice;

/// Splits text into mock "tokens": each word with its trailing whitespace;
/// leading whitespace rides on the first piece.
pub fn mock_tokens(text: &str) -> Vec<&str> {
    let mut pieces = Vec::new();
    let mut start = 0;
    let mut in_space = false;
    let mut seen_word = false;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            in_space = true;
        } else {
            if in_space && seen_word {
                pieces.push(&text[start..i]);
                start = i;
            }
            in_space = false;
            seen_word = true;
        }
    }
    if start < text.len() {
        pieces.push(&text[start..]);
    }
    pieces
}

/// Cuts `text` to at most `max_tokens` mock tokens.
pub fn cut_block(text: &str, max_tokens: usize, natural: FinishReason) -> CompletionResult {
    let pieces = mock_tokens(text);
    if pieces.len() > max_tokens {
        CompletionResult {
            text: pieces[..max_tokens].concat(),
            finish_reason: FinishReason::Length,
        }
    } else {
        CompletionResult {
            text: text.to_string(),
            finish_reason: natural,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MockEntry {
    pub origin: Origin,
    pub text: String,
    /// Finish reason when the entry fits the block; defaults to `Stop`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub finish: Option<FinishReason>,
}

impl MockEntry {
    pub fn new(origin: Origin, text: impl Into<String>) -> Self {
        MockEntry {
            origin,
            text: text.into(),
            finish: None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MockScript {
    pub entries: Vec<MockEntry>,
    /// Every call on this trajectory fails with an endpoint error.
    #[serde(default)]
    pub fail: bool,
}

impl MockScript {
    pub fn new(entries: Vec<MockEntry>) -> Self {
        MockScript {
            entries,
            fail: false,
        }
    }

    pub fn failing() -> Self {
        MockScript {
            entries: Vec::new(),
            fail: true,
        }
    }
}

#[derive(Debug)]
struct ScriptState {
    script: MockScript,
    cursors: [usize; 2],
}

fn slot(origin: Origin) -> usize {
    match origin {
        Origin::Student => 0,
        Origin::Teacher => 1,
    }
}

/// Replays scripted continuations. Each call consumes the next entry whose
/// origin matches the requesting role; an exhausted role yields `""`/`Stop`.
#[derive(Debug, Default)]
pub struct ScriptedBackend {
    states: Mutex<HashMap<String, ScriptState>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&self, trajectory: &str, script: MockScript) {
        self.states.lock().unwrap().insert(
            trajectory.to_string(),
            ScriptState {
                script,
                cursors: [0, 0],
            },
        );
    }

    pub fn reset(&self, trajectory: &str) {
        if let Some(state) = self.states.lock().unwrap().get_mut(trajectory) {
            state.cursors = [0, 0];
        }
    }
}

impl CompletionBackend for ScriptedBackend {
    fn complete(
        &self,
        _profile: &EndpointProfile,
        request: &CompletionRequest,
    ) -> Result<CompletionResult, GatewayError> {
        request.validate()?;
        let (Some(trajectory), Some(origin)) = (&request.trajectory, request.origin) else {
            return Err(GatewayError::Mock("scripted call without routing hints".into()));
        };
        let mut states = self.states.lock().unwrap();
        let state = states
            .get_mut(trajectory)
            .ok_or_else(|| GatewayError::Mock(format!("no script for trajectory {trajectory:?}")))?;
        if state.script.fail {
            return Err(GatewayError::Endpoint {
                status: 500,
                body: format!("scripted failure for {trajectory}"),
            });
        }
        let cursor = &mut state.cursors[slot(origin)];
        let next = state.script.entries[*cursor..]
            .iter()
            .position(|e| e.origin == origin)
            .map(|offset| *cursor + offset);
        match next {
            Some(idx) => {
                *cursor = idx + 1;
                let entry = &state.script.entries[idx];
                Ok(cut_block(
                    &entry.text,
                    request.max_tokens,
                    entry.finish.unwrap_or(FinishReason::Stop),
                ))
            }
            None => {
                *cursor = state.script.entries.len();
                Ok(CompletionResult {
                    text: String::new(),
                    finish_reason: FinishReason::Stop,
                })
            }
        }
    }
}

/// Parameters of the synthetic temperature-0 model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MockSpec {
    pub seed: u64,
    pub end_of_think_marker: String,
    /// Prompt length, in words, after which the model closes its thinking.
    pub think_words: usize,
    pub answer_words: usize,
    /// Probability of a style word, per model name.
    pub style_rate: BTreeMap<String, f64>,
    pub default_style_rate: f64,
    /// Prompts ending with this cue are answered with a 1-10 score.
    pub judge_cue: String,
}

impl Default for MockSpec {
    fn default() -> Self {
        let mut style_rate = BTreeMap::new();
        style_rate.insert("student".to_string(), 0.45);
        style_rate.insert("teacher".to_string(), 0.1);
        MockSpec {
            seed: 0,
            end_of_think_marker: "</think>".to_string(),
            think_words: 160,
            answer_words: 40,
            style_rate,
            default_style_rate: 0.25,
            judge_cue: "Score (1-10):".to_string(),
        }
    }
}

const STYLE_WORDS: &[&str] = &[
    "Okay,", "so", "wait,", "Hmm,", "let me", "alright,", "now", "but", "I think", "well,",
];

const CAPABILITY_WORDS: &[&str] = &[
    "compute", "gcd(a,b)", "x", "=", "n", "mod", "p", "sum", "array", "index", "prefix",
    "loop", "returns", "2", "17", "value", "divides", "hence", "sorted", "dp[i]", "+", "1",
    "check", "edge", "case", "O(n)", "pair", "count", "max", "min",
];

/// Stateless deterministic model driven by a [`MockSpec`].
#[derive(Debug, Clone, Default)]
pub struct SyntheticBackend {
    spec: MockSpec,
    lexicon: StyleLexicon,
}

impl SyntheticBackend {
    pub fn new(spec: MockSpec) -> Self {
        SyntheticBackend {
            spec,
            lexicon: StyleLexicon::default(),
        }
    }

    pub fn spec(&self) -> &MockSpec {
        &self.spec
    }

    fn rng(&self, model: &str, prompt: &str, max_tokens: usize) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.spec.seed.to_le_bytes());
        h.update(model.as_bytes());
        h.update([0]);
        h.update((max_tokens as u64).to_le_bytes());
        h.update(prompt.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into())
    }

    /// Acts as the annotator: reports maximal runs of lexicon style words.
    fn annotate(&self, text: &str) -> String {
        let mut spans: Vec<String> = Vec::new();
        let mut run: Option<(usize, usize)> = None;
        for ((start, end), label) in self.lexicon.label_words(text) {
            if label == Some(TokenKind::Style) {
                run = Some(run.map_or((start, end), |(s, _)| (s, end)));
            } else if let Some((s, e)) = run.take() {
                spans.push(char_slice(text, s, e).to_string());
            }
        }
        if let Some((s, e)) = run {
            spans.push(char_slice(text, s, e).to_string());
        }
        serde_json::to_string(&spans).expect("strings serialize")
    }

    /// Generates one block for `model`. The style rate depends on the model.
    pub fn generate(&self, model: &str, prompt: &str, max_tokens: usize) -> CompletionResult {
        let stop = |text: String| CompletionResult {
            text,
            finish_reason: FinishReason::Stop,
        };
        if let Some(open) = prompt.rfind(INPUT_OPEN) {
            let inner = &prompt[open + INPUT_OPEN.len()..];
            if let Some(close) = inner.rfind(INPUT_CLOSE) {
                return stop(self.annotate(&inner[..close]));
            }
        }
        let mut rng = self.rng(model, prompt, max_tokens);
        if !self.spec.judge_cue.is_empty() && prompt.trim_end().ends_with(&self.spec.judge_cue) {
            return stop(format!(" {}", rng.random_range(1..=10)));
        }
        let marker = &self.spec.end_of_think_marker;
        let style_rate = self
            .spec
            .style_rate
            .get(model)
            .copied()
            .unwrap_or(self.spec.default_style_rate)
            .clamp(0.0, 1.0);
        let mut text = String::new();
        let (mut answering, mut remaining) = match (!marker.is_empty())
            .then(|| prompt.rfind(marker.as_str()))
            .flatten()
        {
            Some(pos) => {
                let written = prompt[pos + marker.len()..].split_whitespace().count();
                (true, self.spec.answer_words.saturating_sub(written))
            }
            None => {
                let written = prompt.split_whitespace().count();
                (false, self.spec.think_words.saturating_sub(written))
            }
        };
        for _ in 0..max_tokens {
            if answering && remaining == 0 {
                return stop(text);
            }
            if !answering && remaining == 0 {
                text.push(' ');
                text.push_str(marker);
                answering = true;
                remaining = self.spec.answer_words;
                continue;
            }
            let word = if !answering && rng.random_bool(style_rate) {
                STYLE_WORDS[rng.random_range(0..STYLE_WORDS.len())]
            } else {
                CAPABILITY_WORDS[rng.random_range(0..CAPABILITY_WORDS.len())]
            };
            text.push(' ');
            text.push_str(word);
            remaining -= 1;
        }
        let finish_reason = if answering && remaining == 0 {
            FinishReason::Stop
        } else {
            FinishReason::Length
        };
        CompletionResult {
            text,
            finish_reason,
        }
    }
}

impl CompletionBackend for SyntheticBackend {
    fn complete(
        &self,
        profile: &EndpointProfile,
        request: &CompletionRequest,
    ) -> Result<CompletionResult, GatewayError> {
        request.validate()?;
        Ok(self.generate(&profile.model_name, &request.prompt, request.max_tokens))
    }
}
