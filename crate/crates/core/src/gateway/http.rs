//! OpenAI-compatible `/v1/completions` client over blocking HTTP.

use std::sync::Arc;
use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::Agent;

use super::{CompletionBackend, CompletionRequest, CompletionResult, FinishReason, GatewayError, InFlightLimit};
use crate::config::EndpointProfile;

#[derive(Debug, Clone, Copy)]
pub struct RetryPolicy {
    pub max_retries: u32,
    pub base_delay: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        RetryPolicy {
            max_retries: 3,
            base_delay: Duration::from_millis(250),
        }
    }
}

impl RetryPolicy {
    fn delay(&self, attempt: u32) -> Duration {
        self.base_delay * 2u32.saturating_pow(attempt)
    }
}

/// JSON-over-HTTP client shared by the completion backend and the remote
/// boundary predictor. Transport failures are retried with exponential
/// backoff; status and body errors surface immediately.
pub struct HttpClient {
    agent: Agent,
    retry: RetryPolicy,
    limit: Arc<InFlightLimit>,
}

impl HttpClient {
    pub fn new(max_in_flight: usize) -> Self {
        Self::with_policy(max_in_flight, RetryPolicy::default())
    }

    pub fn with_policy(max_in_flight: usize, retry: RetryPolicy) -> Self {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(600)))
            .build()
            .into();
        HttpClient {
            agent,
            retry,
            limit: Arc::new(InFlightLimit::new(max_in_flight)),
        }
    }

    pub fn limit(&self) -> &InFlightLimit {
        &self.limit
    }

    /// POSTs a JSON body and returns the response body of a 2xx reply.
    pub fn post_json(&self, url: &str, body: &str) -> Result<String, GatewayError> {
        let mut attempt = 0;
        loop {
            match self.post_once(url, body) {
                Err(e) if e.is_retryable() && attempt < self.retry.max_retries => {
                    log::warn!("{url}: {e}; retrying");
                    thread::sleep(self.retry.delay(attempt));
                    attempt += 1;
                }
                other => return other,
            }
        }
    }

    fn post_once(&self, url: &str, body: &str) -> Result<String, GatewayError> {
        let _permit = self.limit.acquire();
        let mut response = self
            .agent
            .post(url)
            .header("content-type", "application/json")
            .send(body)
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        let status = response.status().as_u16();
        let text = response
            .body_mut()
            .read_to_string()
            .map_err(|e| GatewayError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(GatewayError::Endpoint { status, body: text });
        }
        Ok(text)
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WireCompletionRequest {
    pub model: String,
    pub prompt: String,
    pub max_tokens: usize,
    pub temperature: f64,
    pub top_p: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stop: Option<Vec<String>>,
    #[serde(default)]
    pub echo: bool,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WireChoice {
    pub text: String,
    #[serde(default)]
    pub finish_reason: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
pub(crate) struct WireCompletionResponse {
    pub choices: Vec<WireChoice>,
}

pub(crate) fn join_url(base: &str, path: &str) -> String {
    format!("{}{}", base.trim_end_matches('/'), path)
}

/// Completion backend speaking the `/v1/completions` wire protocol.
pub struct HttpBackend {
    client: Arc<HttpClient>,
}

impl HttpBackend {
    pub fn new(client: Arc<HttpClient>) -> Self {
        HttpBackend { client }
    }

    pub fn client(&self) -> &Arc<HttpClient> {
        &self.client
    }
}

impl CompletionBackend for HttpBackend {
    fn complete(
        &self,
        profile: &EndpointProfile,
        request: &CompletionRequest,
    ) -> Result<CompletionResult, GatewayError> {
        request.validate()?;
        let wire = WireCompletionRequest {
            model: profile.model_name.clone(),
            prompt: request.prompt.clone(),
            max_tokens: request.max_tokens,
            temperature: request.temperature,
            top_p: request.top_p,
            stop: request.stop.clone(),
            echo: false,
        };
        let body = serde_json::to_string(&wire).map_err(|e| GatewayError::Protocol(e.to_string()))?;
        let text = self
            .client
            .post_json(&join_url(&profile.base_url, "/v1/completions"), &body)?;
        let parsed: WireCompletionResponse = serde_json::from_str(&text)
            .map_err(|e| GatewayError::Protocol(format!("malformed completion body: {e}")))?;
        let choice = parsed
            .choices
            .into_iter()
            .next()
            .ok_or_else(|| GatewayError::Protocol("response has no choices".into()))?;
        Ok(CompletionResult {
            text: choice.text,
            finish_reason: FinishReason::from_wire(choice.finish_reason.as_deref().unwrap_or("")),
        })
    }
}
