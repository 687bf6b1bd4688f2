//! Single-generator and split-role baselines.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use super::trajectory::Trajectory;
use super::{CandidateJudge, Engine, StrategySelector, SynthesisError, TeacherScoreJudge};
use crate::record::{Origin, SynthesisRecord};

impl Engine {
    /// Think with `thinker`, answer with `answerer`, no rollback.
    #[allow(clippy::too_many_arguments)]
    fn split_roles(
        &self,
        id: &str,
        key: &str,
        question: &str,
        thinker: Origin,
        answerer: Origin,
        strategy: &str,
        meta: Map<String, Value>,
    ) -> Result<SynthesisRecord, SynthesisError> {
        let mut t = Trajectory::new(self, id, key, question);
        let terminated_by = t.single_think(thinker).map_err(|e| t.fail(e))?;
        t.answer(answerer).map_err(|e| t.fail(e))?;
        Ok(t.into_record(strategy, terminated_by, meta))
    }

    /// Per-prompt coin for the teacher/student mix; depends only on the seed
    /// and the prompt id.
    pub fn mix_coin(&self, id: &str) -> f64 {
        let mut h = Sha256::new();
        h.update(self.config().seed.to_le_bytes());
        h.update(b"teacher-mix");
        h.update(id.as_bytes());
        ChaCha8Rng::from_seed(h.finalize().into()).random::<f64>()
    }

    pub fn synthesize_baseline(
        &self,
        id: &str,
        prompt: &str,
        selector: StrategySelector,
    ) -> Result<SynthesisRecord, SynthesisError> {
        selector.validate()?;
        let name = selector.name();
        use Origin::{Student, Teacher};
        match selector {
            StrategySelector::Tessy => self.synthesize_tessy(id, prompt),
            StrategySelector::TeacherOnly => {
                self.split_roles(id, id, prompt, Teacher, Teacher, name, Map::new())
            }
            StrategySelector::StudentOnly => {
                self.split_roles(id, id, prompt, Student, Student, name, Map::new())
            }
            StrategySelector::TeacherThink => {
                self.split_roles(id, id, prompt, Teacher, Student, name, Map::new())
            }
            StrategySelector::TeacherAnswer => {
                self.split_roles(id, id, prompt, Student, Teacher, name, Map::new())
            }
            StrategySelector::TeacherMix(ratio) => {
                let use_teacher = self.mix_coin(id) < ratio;
                let origin = if use_teacher { Teacher } else { Student };
                let mut meta = Map::new();
                meta.insert("mix_choice".into(), origin.as_str().into());
                self.split_roles(id, id, prompt, origin, origin, name, meta)
            }
            StrategySelector::RejectSampling(n) => {
                let candidates = (0..n)
                    .map(|i| {
                        let key = format!("{id}#candidate-{i}");
                        self.split_roles(id, &key, prompt, Student, Student, name, Map::new())
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                let chosen = match &self.judge {
                    Some(judge) => judge.choose(prompt, &candidates),
                    None => TeacherScoreJudge::new(self).choose(prompt, &candidates),
                }
                .map_err(|reason| SynthesisError::Judge {
                    id: id.to_string(),
                    reason,
                })?;
                if chosen >= candidates.len() {
                    return Err(SynthesisError::Judge {
                        id: id.to_string(),
                        reason: format!("picked candidate {chosen} of {}", candidates.len()),
                    });
                }
                let mut record = candidates.into_iter().nth(chosen).expect("index checked");
                record.meta.insert("candidates".into(), n.into());
                record.meta.insert("chosen_candidate".into(), chosen.into());
                Ok(record)
            }
            StrategySelector::SelfDistillation => {
                let mut reference = Trajectory::new(self, id, &format!("{id}#reference"), prompt);
                reference.single_think(Teacher).map_err(|e| reference.fail(e))?;
                reference.answer(Teacher).map_err(|e| reference.fail(e))?;
                let reference_answer = reference.answer_text().to_string();
                let guided = self
                    .config()
                    .self_distillation_template
                    .replacen("{question}", prompt, 1)
                    .replacen("{reference}", &reference_answer, 1);
                let mut meta = Map::new();
                meta.insert("reference_answer".into(), reference_answer.into());
                let mut record = self.split_roles(id, id, &guided, Student, Student, name, meta)?;
                record.prompt = prompt.to_string();
                Ok(record)
            }
        }
    }
}
