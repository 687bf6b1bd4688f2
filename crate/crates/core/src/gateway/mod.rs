//! Uniform access to text-completion endpoints.
//!
//! Every call sends the full accumulated prefix; the engine never rewrites
//! earlier context, so a prefix-caching server can reuse its attention state
//! when the engine hops between teacher and student.

pub mod http;
mod limit;
pub mod mock;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use http::{HttpBackend, HttpClient, RetryPolicy};
pub use limit::InFlightLimit;
pub use mock::{MockEntry, MockScript, MockSpec, ScriptedBackend, SyntheticBackend};

use crate::config::{ConfigError, EndpointProfile, BODY_PLACEHOLDER, QUESTION_PLACEHOLDER};
use crate::record::Origin;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinishReason {
    /// Block budget exhausted.
    Length,
    /// Natural end of generation.
    Stop,
    /// Any other reason reported by the endpoint.
    EndpointStop,
}

impl FinishReason {
    pub fn from_wire(s: &str) -> Self {
        match s {
            "length" => FinishReason::Length,
            "stop" => FinishReason::Stop,
            _ => FinishReason::EndpointStop,
        }
    }

    pub fn as_wire(self) -> &'static str {
        match self {
            FinishReason::Length => "length",
            FinishReason::Stop => "stop",
            FinishReason::EndpointStop => "endpoint_stop",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompletionRequest {
    pub prompt: String,
    pub max_tokens: usize,
    pub temperature: f64,
    pub top_p: f64,
    pub stop: Option<Vec<String>>,
    /// Routing hint for in-process mocks; never sent over the wire.
    pub trajectory: Option<String>,
    /// Routing hint for in-process mocks; never sent over the wire.
    pub origin: Option<Origin>,
}

impl CompletionRequest {
    /// A request using the profile's sampling parameters.
    pub fn new(profile: &EndpointProfile, prompt: String, max_tokens: usize) -> Self {
        CompletionRequest {
            prompt,
            max_tokens,
            temperature: profile.sampling.temperature,
            top_p: profile.sampling.top_p,
            stop: None,
            trajectory: None,
            origin: None,
        }
    }

    pub fn routed(mut self, trajectory: &str, origin: Origin) -> Self {
        self.trajectory = Some(trajectory.to_string());
        self.origin = Some(origin);
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_tokens == 0 {
            return Err(GatewayError::InvalidRequest("max_tokens must be at least 1".into()));
        }
        if self.temperature.is_nan() || self.temperature < 0.0 {
            return Err(GatewayError::InvalidRequest("temperature must be nonnegative".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(GatewayError::InvalidRequest("top_p must lie in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompletionResult {
    pub text: String,
    pub finish_reason: FinishReason,
}

#[derive(Debug, Clone, Error)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("endpoint returned status {status}: {body}")]
    Endpoint { status: u16, body: String },
    #[error("protocol error: {0}")]
    Protocol(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("mock: {0}")]
    Mock(String),
}

impl GatewayError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, GatewayError::Transport(_))
    }
}

/// Something that can continue a prompt.
pub trait CompletionBackend: Send + Sync {
    fn complete(
        &self,
        profile: &EndpointProfile,
        request: &CompletionRequest,
    ) -> Result<CompletionResult, GatewayError>;
}

impl<T: CompletionBackend + ?Sized> CompletionBackend for std::sync::Arc<T> {
    fn complete(
        &self,
        profile: &EndpointProfile,
        request: &CompletionRequest,
    ) -> Result<CompletionResult, GatewayError> {
        (**self).complete(profile, request)
    }
}

/// Substitutes the question and accumulated body into the profile's template.
///
/// Substitution is a single left-to-right pass over the template, so
/// placeholder text occurring inside `question` or `body` is left alone.
pub fn render_prompt(
    profile: &EndpointProfile,
    question: &str,
    body: &str,
) -> Result<String, ConfigError> {
    let template = &profile.prompt_template;
    let count = template.matches(BODY_PLACEHOLDER).count();
    if count != 1 {
        return Err(ConfigError::Placeholder {
            placeholder: BODY_PLACEHOLDER,
            count,
        });
    }
    let mut out = String::with_capacity(template.len() + question.len() + body.len());
    let mut rest = template.as_str();
    loop {
        let next_body = rest.find(BODY_PLACEHOLDER);
        let next_q = rest.find(QUESTION_PLACEHOLDER);
        let (pos, placeholder, value) = match (next_body, next_q) {
            (Some(b), Some(q)) if q < b => (q, QUESTION_PLACEHOLDER, question),
            (Some(b), _) => (b, BODY_PLACEHOLDER, body),
            (None, Some(q)) => (q, QUESTION_PLACEHOLDER, question),
            (None, None) => break,
        };
        out.push_str(&rest[..pos]);
        out.push_str(value);
        rest = &rest[pos + placeholder.len()..];
    }
    out.push_str(rest);
    Ok(out)
}
