use rayon::prelude::*;

use super::{Engine, StrategySelector, SynthesisError};
use crate::config::ConfigError;
use crate::dataset::PromptEntry;
use crate::record::SynthesisRecord;

/// Synthesizes every prompt with at most `parallelism` trajectories in
/// flight. Results come back in input order; a failed prompt does not abort
/// the others.
pub fn run_batch(
    engine: &Engine,
    prompts: &[PromptEntry],
    selector: StrategySelector,
    parallelism: usize,
) -> Result<Vec<Result<SynthesisRecord, SynthesisError>>, ConfigError> {
    if parallelism == 0 {
        return Err(ConfigError::Invalid {
            field: "parallelism",
            reason: "must be at least 1".into(),
        });
    }
    selector.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(parallelism)
        .build()
        .map_err(|e| ConfigError::Invalid {
            field: "parallelism",
            reason: e.to_string(),
        })?;
    Ok(pool.install(|| {
        prompts
            .par_iter()
            .map(|p| engine.synthesize(&p.id, &p.question, selector))
            .collect()
    }))
}
