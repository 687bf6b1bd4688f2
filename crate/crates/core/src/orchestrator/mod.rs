//! Synthesis strategies: the cooperative teacher/student loop and the
//! single-generator baselines it is compared against.

mod baseline;
mod batch;
mod judge;
mod trajectory;

use std::sync::Arc;

use serde_json::{Map, Value};
use thiserror::Error;

pub use batch::run_batch;
pub use judge::{CandidateJudge, FnJudge, TeacherScoreJudge};
pub use trajectory::{Phase, TrajectoryState};

use crate::boundary::{predictor_from_selector, BoundaryError, BoundaryPredictor};
use crate::config::{fingerprint, ConfigError, SynthesisConfig};
use crate::gateway::{CompletionBackend, GatewayError, HttpBackend, HttpClient, SyntheticBackend};
use crate::record::{Origin, Span, SynthesisRecord, TerminatedBy, META_MARKER, TESSY_STRATEGY};

/// Which synthesis strategy produces a record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategySelector {
    Tessy,
    TeacherOnly,
    StudentOnly,
    /// Probability of a teacher-only record per prompt.
    TeacherMix(f64),
    /// Number of student candidates to choose from.
    RejectSampling(usize),
    SelfDistillation,
    TeacherAnswer,
    TeacherThink,
}

pub const STRATEGY_NAMES: &[&str] = &[
    "tessy",
    "teacher-only",
    "student-only",
    "teacher-mix",
    "reject-sampling",
    "self-distillation",
    "teacher-answer",
    "teacher-think",
];

impl StrategySelector {
    pub fn name(&self) -> &'static str {
        match self {
            StrategySelector::Tessy => TESSY_STRATEGY,
            StrategySelector::TeacherOnly => "teacher-only",
            StrategySelector::StudentOnly => "student-only",
            StrategySelector::TeacherMix(_) => "teacher-mix",
            StrategySelector::RejectSampling(_) => "reject-sampling",
            StrategySelector::SelfDistillation => "self-distillation",
            StrategySelector::TeacherAnswer => "teacher-answer",
            StrategySelector::TeacherThink => "teacher-think",
        }
    }

    /// Resolves a strategy name, taking the mix ratio and candidate count
    /// from the configuration.
    pub fn from_name(name: &str, config: &SynthesisConfig) -> Option<Self> {
        Some(match name {
            "tessy" => StrategySelector::Tessy,
            "teacher-only" => StrategySelector::TeacherOnly,
            "student-only" => StrategySelector::StudentOnly,
            "teacher-mix" => StrategySelector::TeacherMix(config.mix_ratio),
            "reject-sampling" => StrategySelector::RejectSampling(config.reject_candidates),
            "self-distillation" => StrategySelector::SelfDistillation,
            "teacher-answer" => StrategySelector::TeacherAnswer,
            "teacher-think" => StrategySelector::TeacherThink,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match *self {
            StrategySelector::TeacherMix(r) if !(r > 0.0 && r < 1.0) => Err(ConfigError::Invalid {
                field: "mix_ratio",
                reason: format!("{r} is outside (0, 1)"),
            }),
            StrategySelector::RejectSampling(n) if n < 2 => Err(ConfigError::Invalid {
                field: "reject_candidates",
                reason: format!("{n} candidates; need at least 2"),
            }),
            _ => Ok(()),
        }
    }
}

/// A failed model or predictor call inside a trajectory.
#[derive(Debug, Error)]
pub enum StepError {
    #[error(transparent)]
    Gateway(#[from] GatewayError),
    #[error(transparent)]
    Boundary(#[from] BoundaryError),
}

#[derive(Debug, Error)]
pub enum SynthesisError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("trajectory {id}: {source}")]
    Trajectory {
        id: String,
        #[source]
        source: StepError,
        /// Spans generated before the failure.
        partial: Vec<Span>,
    },
    #[error("judge failed on {id}: {reason}")]
    Judge { id: String, reason: String },
}

/// Shared, immutable synthesis context: configuration, endpoints and
/// predictors. Safe to use from many trajectories at once.
pub struct Engine {
    config: SynthesisConfig,
    fingerprint: String,
    backend: Arc<dyn CompletionBackend>,
    student_predictor: Arc<dyn BoundaryPredictor>,
    teacher_predictor: Arc<dyn BoundaryPredictor>,
    judge: Option<Arc<dyn CandidateJudge>>,
}

impl Engine {
    pub fn new(
        config: SynthesisConfig,
        backend: Arc<dyn CompletionBackend>,
        student_predictor: Arc<dyn BoundaryPredictor>,
        teacher_predictor: Arc<dyn BoundaryPredictor>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Engine {
            fingerprint: fingerprint(&config),
            config,
            backend,
            student_predictor,
            teacher_predictor,
            judge: None,
        })
    }

    /// Wires endpoints and predictors as the configuration describes: the
    /// in-process synthetic model when `mock` is set, HTTP otherwise.
    pub fn from_config(config: SynthesisConfig) -> Result<Self, ConfigError> {
        let client = Arc::new(HttpClient::new(config.max_in_flight));
        let backend: Arc<dyn CompletionBackend> = match &config.mock {
            Some(spec) => Arc::new(SyntheticBackend::new(spec.clone())),
            None => Arc::new(HttpBackend::new(client.clone())),
        };
        let student = predictor_from_selector(&config.student_predictor, &client);
        let teacher = predictor_from_selector(&config.teacher_predictor, &client);
        Engine::new(config, backend, student, teacher)
    }

    /// Replaces the default teacher-scored judge used by reject sampling.
    pub fn with_judge(mut self, judge: Arc<dyn CandidateJudge>) -> Self {
        self.judge = Some(judge);
        self
    }

    pub fn config(&self) -> &SynthesisConfig {
        &self.config
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn backend(&self) -> &dyn CompletionBackend {
        self.backend.as_ref()
    }

    pub(crate) fn predictor(&self, origin: Origin) -> &dyn BoundaryPredictor {
        match origin {
            Origin::Student => self.student_predictor.as_ref(),
            Origin::Teacher => self.teacher_predictor.as_ref(),
        }
    }

    /// Runs one prompt through the chosen strategy.
    pub fn synthesize(
        &self,
        id: &str,
        prompt: &str,
        selector: StrategySelector,
    ) -> Result<SynthesisRecord, SynthesisError> {
        selector.validate()?;
        match selector {
            StrategySelector::Tessy => self.synthesize_tessy(id, prompt),
            other => self.synthesize_baseline(id, prompt, other),
        }
    }

    /// Cooperative synthesis: the student opens, generators alternate on
    /// every rollback, and the student writes the final answer.
    pub fn synthesize_tessy(&self, id: &str, prompt: &str) -> Result<SynthesisRecord, SynthesisError> {
        let mut t = trajectory::Trajectory::new(self, id, id, prompt);
        let terminated_by = t.cooperative_think().map_err(|e| t.fail(e))?;
        t.answer(Origin::Student).map_err(|e| t.fail(e))?;
        Ok(t.into_record(TESSY_STRATEGY, terminated_by, Map::new()))
    }

    fn record(
        &self,
        id: &str,
        prompt: &str,
        strategy: &str,
        spans: Vec<Span>,
        terminated_by: TerminatedBy,
        mut meta: Map<String, Value>,
    ) -> SynthesisRecord {
        meta.insert(
            META_MARKER.to_string(),
            Value::String(self.config.end_of_think_marker.clone()),
        );
        SynthesisRecord {
            id: id.to_string(),
            prompt: prompt.to_string(),
            spans,
            strategy: strategy.to_string(),
            config_fingerprint: self.fingerprint.clone(),
            terminated_by,
            meta,
        }
    }
}
