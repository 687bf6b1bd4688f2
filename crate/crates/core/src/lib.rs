//! Cooperative teacher/student synthesis of reasoning traces.
//!
//! A student model opens every trajectory. Generation proceeds in short
//! blocks; after each block a boundary predictor decides how much of it the
//! current generator may keep, and control passes to the other model whenever
//! something was cut. The student always writes the final answer.
//!
//! Start with [`Engine`] and [`StrategySelector`]; records are persisted with
//! the helpers in [`dataset`].

pub mod analytics;
pub mod annotation;
pub mod boundary;
pub mod config;
pub mod dataset;
pub mod fixture;
pub mod gateway;
pub mod orchestrator;
pub mod record;
pub mod text;

pub use boundary::{BoundaryPredictor, BoundaryTarget, BoundaryVerdict, LexiconPredictor, TokenKind};
pub use config::{fingerprint, ConfigError, EndpointProfile, PredictorSelector, Sampling, SynthesisConfig};
pub use dataset::PromptEntry;
pub use gateway::{CompletionBackend, CompletionRequest, CompletionResult, FinishReason, GatewayError};
pub use orchestrator::{run_batch, Engine, StrategySelector, SynthesisError};
pub use record::{reconstruct, Origin, RecordError, Role, Span, SynthesisRecord, TerminatedBy};
