//! Per-prompt generation state and the loops that drive it.

use serde_json::{Map, Value};

use super::{Engine, StepError, SynthesisError};
use crate::boundary::{trim_partial_word, truncate_span, TokenKind};
use crate::gateway::{render_prompt, CompletionRequest, CompletionResult, FinishReason, GatewayError};
use crate::record::{Origin, Role, Span, SynthesisRecord, TerminatedBy};
use crate::text::{char_len, char_prefix};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Thinking,
    Answering,
    Done,
}

/// The synthetic sequence under construction for one prompt.
#[derive(Debug, Clone)]
pub struct TrajectoryState {
    /// Concatenated think text so far.
    pub accumulated: String,
    pub current_role: Origin,
    pub spans_so_far: Vec<Span>,
    /// Consecutive think spans whose retained text was empty.
    pub consecutive_empty: usize,
    pub think_chars_used: usize,
    pub phase: Phase,
}

impl TrajectoryState {
    fn new() -> Self {
        TrajectoryState {
            accumulated: String::new(),
            current_role: Origin::Student,
            spans_so_far: Vec::new(),
            consecutive_empty: 0,
            think_chars_used: 0,
            phase: Phase::Thinking,
        }
    }
}

pub(crate) struct Trajectory<'e> {
    engine: &'e Engine,
    id: String,
    /// Routing key passed to the backend (differs from `id` for sub-runs).
    key: String,
    question: String,
    pub(crate) state: TrajectoryState,
    answer_text: String,
    forced_progress: usize,
    marker_injected: bool,
}

/// Leading whitespace plus the first whitespace-delimited word.
fn first_word(raw: &str) -> &str {
    let lead = raw.len() - raw.trim_start().len();
    match raw[lead..].find(char::is_whitespace) {
        Some(end) => &raw[..lead + end],
        None => raw,
    }
}

impl<'e> Trajectory<'e> {
    pub(crate) fn new(engine: &'e Engine, id: &str, key: &str, question: &str) -> Self {
        Trajectory {
            engine,
            id: id.to_string(),
            key: key.to_string(),
            question: question.to_string(),
            state: TrajectoryState::new(),
            answer_text: String::new(),
            forced_progress: 0,
            marker_injected: false,
        }
    }

    fn call(&self, origin: Origin, body: &str, max_tokens: usize) -> Result<CompletionResult, StepError> {
        let profile = self.engine.config().profile(origin);
        let prompt = render_prompt(profile, &self.question, body).map_err(GatewayError::from)?;
        let request = CompletionRequest::new(profile, prompt, max_tokens).routed(&self.key, origin);
        Ok(self.engine.backend().complete(profile, &request)?)
    }

    fn push(&mut self, origin: Origin, role: Role, text: String, raw_len: usize) {
        let index = self.state.spans_so_far.len();
        match role {
            Role::Think => {
                self.state.think_chars_used += char_len(&text);
                self.state.accumulated.push_str(&text);
            }
            Role::Answer => self.answer_text.push_str(&text),
        }
        self.state
            .spans_so_far
            .push(Span::retained(index, origin, role, text, raw_len));
    }

    fn budget_spent(&self) -> bool {
        self.state.think_chars_used >= self.engine.config().think_budget_chars
    }

    /// Locates the end-of-think marker in `raw`, including a marker that
    /// started in the accumulated text. Returns the marker's start (clamped
    /// to 0) and end as character offsets into `raw`.
    fn find_marker(&self, raw: &str) -> Option<(usize, usize)> {
        let marker = &self.engine.config().end_of_think_marker;
        let marker_chars = char_len(marker);
        let acc = &self.state.accumulated;
        let tail_chars = (marker_chars - 1).min(char_len(acc));
        let tail = &acc[crate::text::byte_offset(acc, char_len(acc) - tail_chars)..];
        let combined = format!("{tail}{raw}");
        let at = combined.find(marker.as_str())?;
        let end_in_raw = at + marker.len() - tail.len();
        let start_in_raw = at.saturating_sub(tail.len());
        Some((char_len(&raw[..start_in_raw]), char_len(&raw[..end_in_raw])))
    }

    /// The alternating think loop with generate-then-rollback.
    pub(crate) fn cooperative_think(&mut self) -> Result<TerminatedBy, StepError> {
        let cfg = self.engine.config();
        let trim = cfg.vocab_mismatch_trim && cfg.vocabularies_differ();
        loop {
            let origin = self.state.current_role;
            let body = self.state.accumulated.clone();
            let block = self.call(origin, &body, cfg.k_max_tokens)?;
            let raw = block.text;
            if raw.is_empty() {
                return Ok(TerminatedBy::EndpointStop);
            }
            let raw_len = char_len(&raw);
            let target = TokenKind::for_origin(origin);
            let predictor = self.engine.predictor(origin);
            let forced = self.state.consecutive_empty >= cfg.zero_progress_limit;

            let verdict = if let Some((m_start, m_end)) = self.find_marker(&raw) {
                let pre = char_prefix(&raw, m_start);
                let cut = if forced || pre.is_empty() {
                    None
                } else {
                    let v = predictor.predict(pre, target)?;
                    (v.keep_prefix_chars < char_len(pre)).then_some(v)
                };
                match cut {
                    Some(v) => v,
                    None => {
                        let kept = char_prefix(&raw, m_end).to_string();
                        self.push(origin, Role::Think, kept, raw_len);
                        return Ok(TerminatedBy::EndOfThinkMarker);
                    }
                }
            } else if block.finish_reason == FinishReason::EndpointStop {
                self.push(origin, Role::Think, raw, raw_len);
                return Ok(TerminatedBy::EndpointStop);
            } else if forced {
                // Both generators keep rolling back to nothing: take one word
                // from the current generator so the sequence always grows.
                let kept = first_word(&raw).to_string();
                let kept_len = char_len(&kept);
                self.forced_progress += 1;
                self.state.consecutive_empty = 0;
                self.push(origin, Role::Think, kept, kept_len);
                if self.budget_spent() {
                    return Ok(TerminatedBy::BudgetExhausted);
                }
                continue;
            } else {
                predictor.predict(&raw, target)?
            };

            let (mut kept, truncated) = truncate_span(&raw, &verdict)?;
            if truncated && trim {
                kept = trim_partial_word(&kept);
            }
            if kept.is_empty() {
                self.state.consecutive_empty += 1;
            } else {
                self.state.consecutive_empty = 0;
            }
            self.push(origin, Role::Think, kept, raw_len);
            if truncated {
                self.state.current_role = origin.other();
            }
            if self.budget_spent() {
                return Ok(TerminatedBy::BudgetExhausted);
            }
        }
    }

    /// Thinking by a single generator, without rollback.
    pub(crate) fn single_think(&mut self, origin: Origin) -> Result<TerminatedBy, StepError> {
        self.state.current_role = origin;
        let block_tokens = self.engine.config().long_block_tokens;
        loop {
            let body = self.state.accumulated.clone();
            let block = self.call(origin, &body, block_tokens)?;
            let raw = block.text;
            if raw.is_empty() {
                return Ok(TerminatedBy::EndpointStop);
            }
            let raw_len = char_len(&raw);
            if let Some((_, m_end)) = self.find_marker(&raw) {
                let kept = char_prefix(&raw, m_end).to_string();
                self.push(origin, Role::Think, kept, raw_len);
                return Ok(TerminatedBy::EndOfThinkMarker);
            }
            self.push(origin, Role::Think, raw, raw_len);
            if block.finish_reason == FinishReason::EndpointStop {
                return Ok(TerminatedBy::EndpointStop);
            }
            if self.budget_spent() {
                return Ok(TerminatedBy::BudgetExhausted);
            }
        }
    }

    /// Final answer by `origin`, in untruncated blocks until the endpoint
    /// stops or the answer budget is spent.
    pub(crate) fn answer(&mut self, origin: Origin) -> Result<(), StepError> {
        let cfg = self.engine.config();
        self.state.phase = Phase::Answering;
        let mut prefix = self.state.accumulated.clone();
        if !prefix.ends_with(cfg.end_of_think_marker.as_str()) {
            prefix.push_str(&cfg.end_of_think_marker);
            self.marker_injected = true;
        }
        let mut answer_chars = 0;
        loop {
            let body = format!("{prefix}{}", self.answer_text);
            let block = self.call(origin, &body, cfg.long_block_tokens)?;
            if block.text.is_empty() {
                break;
            }
            answer_chars += char_len(&block.text);
            let len = char_len(&block.text);
            self.push(origin, Role::Answer, block.text, len);
            if block.finish_reason != FinishReason::Length || answer_chars >= cfg.answer_budget_chars {
                break;
            }
        }
        self.state.phase = Phase::Done;
        Ok(())
    }

    pub(crate) fn answer_text(&self) -> &str {
        &self.answer_text
    }

    pub(crate) fn fail(&self, source: StepError) -> SynthesisError {
        SynthesisError::Trajectory {
            id: self.id.clone(),
            source,
            partial: self.state.spans_so_far.clone(),
        }
    }

    pub(crate) fn into_record(
        self,
        strategy: &str,
        terminated_by: TerminatedBy,
        mut meta: Map<String, Value>,
    ) -> SynthesisRecord {
        meta.insert("forced_progress".into(), self.forced_progress.into());
        meta.insert("marker_injected".into(), self.marker_injected.into());
        self.engine.record(
            &self.id,
            &self.question,
            strategy,
            self.state.spans_so_far,
            terminated_by,
            meta,
        )
    }
}
