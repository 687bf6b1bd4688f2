//! Endpoint profiles, synthesis configuration and the configuration fingerprint.

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::gateway::mock::MockSpec;

/// Placeholder for the accumulated generation inside a prompt template.
pub const BODY_PLACEHOLDER: &str = "{body}";
/// Optional placeholder for the question text.
pub const QUESTION_PLACEHOLDER: &str = "{question}";

pub const DEFAULT_K_MAX_TOKENS: usize = 20;
pub const DEFAULT_REJECT_CANDIDATES: usize = 5;
pub const DEFAULT_MIX_RATIO: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ConfigError {
    #[error("{field}: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("prompt template must contain {placeholder} exactly once (found {count})")]
    Placeholder {
        placeholder: &'static str,
        count: usize,
    },
}

fn invalid(field: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        reason: reason.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    pub top_p: f64,
}

impl Default for Sampling {
    fn default() -> Self {
        Sampling {
            temperature: 0.0,
            top_p: 1.0,
        }
    }
}

/// Everything needed to call one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EndpointProfile {
    pub base_url: String,
    pub model_name: String,
    #[serde(default = "default_template")]
    pub prompt_template: String,
    #[serde(default)]
    pub sampling: Sampling,
    /// Tokenizer family; empty means the model name.
    #[serde(default)]
    pub vocab_family: String,
}

pub const DEFAULT_PROMPT_TEMPLATE: &str = "{question}\n<think>\n{body}";

fn default_template() -> String {
    DEFAULT_PROMPT_TEMPLATE.to_string()
}

impl EndpointProfile {
    pub fn new(base_url: &str, model_name: &str) -> Self {
        EndpointProfile {
            base_url: base_url.to_string(),
            model_name: model_name.to_string(),
            prompt_template: default_template(),
            sampling: Sampling::default(),
            vocab_family: model_name.to_string(),
        }
    }

    pub fn vocab_family(&self) -> &str {
        if self.vocab_family.is_empty() {
            &self.model_name
        } else {
            &self.vocab_family
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let count = self.prompt_template.matches(BODY_PLACEHOLDER).count();
        if count != 1 {
            return Err(ConfigError::Placeholder {
                placeholder: BODY_PLACEHOLDER,
                count,
            });
        }
        let q = self.prompt_template.matches(QUESTION_PLACEHOLDER).count();
        if q > 1 {
            return Err(ConfigError::Placeholder {
                placeholder: QUESTION_PLACEHOLDER,
                count: q,
            });
        }
        if self.sampling.temperature.is_nan() || self.sampling.temperature < 0.0 {
            return Err(invalid("sampling.temperature", "must be nonnegative"));
        }
        if !(self.sampling.top_p > 0.0 && self.sampling.top_p <= 1.0) {
            return Err(invalid("sampling.top_p", "must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Which boundary predictor judges a generator's blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PredictorSelector {
    /// Built-in lexicon predictor; `phrases` replaces the default lexicon.
    #[default]
    Lexicon,
    LexiconWith { phrases: Vec<String> },
    Remote { url: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthesisConfig {
    /// Per-block generation budget in the endpoint's own tokens.
    pub k_max_tokens: usize,
    pub think_budget_chars: usize,
    pub answer_budget_chars: usize,
    /// Block size for answer phases and single-generator thinking.
    pub long_block_tokens: usize,
    pub end_of_think_marker: String,
    pub vocab_mismatch_trim: bool,
    pub zero_progress_limit: usize,
    pub student: EndpointProfile,
    pub teacher: EndpointProfile,
    pub student_predictor: PredictorSelector,
    pub teacher_predictor: PredictorSelector,
    pub mix_ratio: f64,
    pub reject_candidates: usize,
    /// Student prompt for self-distillation; `{question}` and `{reference}`.
    pub self_distillation_template: String,
    /// Teacher scoring prompt for reject sampling; `{question}` and `{response}`.
    pub judge_template: String,
    pub seed: u64,
    pub max_in_flight: usize,
    /// In-process mock endpoints instead of HTTP.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mock: Option<MockSpec>,
}

pub const DEFAULT_JUDGE_TEMPLATE: &str = "Rate the following response to the question on a scale from 1 to 10.\n\nQuestion:\n{question}\n\nResponse:\n{response}\n\nScore (1-10):";
pub const DEFAULT_SELF_DISTILLATION_TEMPLATE: &str =
    "{question}\n\nA reference answer is given below.\n{reference}";

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            k_max_tokens: DEFAULT_K_MAX_TOKENS,
            think_budget_chars: 160_000,
            answer_budget_chars: 32_000,
            long_block_tokens: 1024,
            end_of_think_marker: "</think>".to_string(),
            vocab_mismatch_trim: true,
            zero_progress_limit: 2,
            student: EndpointProfile::new("http://127.0.0.1:8000", "student"),
            teacher: EndpointProfile::new("http://127.0.0.1:8001", "teacher"),
            student_predictor: PredictorSelector::Lexicon,
            teacher_predictor: PredictorSelector::Lexicon,
            mix_ratio: DEFAULT_MIX_RATIO,
            reject_candidates: DEFAULT_REJECT_CANDIDATES,
            self_distillation_template: DEFAULT_SELF_DISTILLATION_TEMPLATE.to_string(),
            judge_template: DEFAULT_JUDGE_TEMPLATE.to_string(),
            seed: 0,
            max_in_flight: 32,
            mock: None,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k_max_tokens == 0 {
            return Err(invalid("k_max_tokens", "must be at least 1"));
        }
        if self.zero_progress_limit == 0 {
            return Err(invalid("zero_progress_limit", "must be at least 1"));
        }
        if self.end_of_think_marker.is_empty() {
            return Err(invalid("end_of_think_marker", "must be non-empty"));
        }
        if self.think_budget_chars == 0 || self.answer_budget_chars == 0 {
            return Err(invalid("think_budget_chars", "budgets must be positive"));
        }
        if self.long_block_tokens == 0 {
            return Err(invalid("long_block_tokens", "must be at least 1"));
        }
        if !(self.mix_ratio > 0.0 && self.mix_ratio < 1.0) {
            return Err(invalid("mix_ratio", "must lie in (0, 1)"));
        }
        if self.reject_candidates < 2 {
            return Err(invalid("reject_candidates", "must be at least 2"));
        }
        if self.max_in_flight == 0 {
            return Err(invalid("max_in_flight", "must be at least 1"));
        }
        self.student.validate()?;
        self.teacher.validate()?;
        Ok(())
    }

    /// Whether student and teacher tokenize differently.
    pub fn vocabularies_differ(&self) -> bool {
        self.student.vocab_family() != self.teacher.vocab_family()
    }

    pub fn profile(&self, origin: crate::Origin) -> &EndpointProfile {
        match origin {
            crate::Origin::Student => &self.student,
            crate::Origin::Teacher => &self.teacher,
        }
    }

    pub fn predictor_selector(&self, origin: crate::Origin) -> &PredictorSelector {
        match origin {
            crate::Origin::Student => &self.student_predictor,
            crate::Origin::Teacher => &self.teacher_predictor,
        }
    }
}

/// Recursively sorts object keys.
pub fn canonicalize(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            let mut out = serde_json::Map::new();
            for (k, v) in entries {
                out.insert(k.clone(), canonicalize(v));
            }
            Value::Object(out)
        }
        Value::Array(items) => Value::Array(items.iter().map(canonicalize).collect()),
        other => other.clone(),
    }
}

/// Stable SHA-256 over the canonical JSON form of the configuration.
pub fn fingerprint(config: &SynthesisConfig) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let canonical = serde_json::to_string(&canonicalize(&value)).expect("value serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}
