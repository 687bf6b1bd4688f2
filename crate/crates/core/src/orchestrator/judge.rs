use crate::config::EndpointProfile;
use crate::gateway::{CompletionBackend, CompletionRequest};
use crate::record::{reconstruct, Origin, SynthesisRecord};

use super::Engine;

/// Picks one of several candidate records for reject sampling.
pub trait CandidateJudge: Send + Sync {
    /// Index of the chosen candidate.
    fn choose(&self, question: &str, candidates: &[SynthesisRecord]) -> Result<usize, String>;
}

/// Adapts a closure into a judge.
pub struct FnJudge<F>(pub F);

impl<F> CandidateJudge for FnJudge<F>
where
    F: Fn(&str, &[SynthesisRecord]) -> Result<usize, String> + Send + Sync,
{
    fn choose(&self, question: &str, candidates: &[SynthesisRecord]) -> Result<usize, String> {
        (self.0)(question, candidates)
    }
}

/// The teacher rates each candidate from 1 to 10; the highest score wins,
/// ties going to the lowest index.
pub struct TeacherScoreJudge<'a> {
    backend: &'a dyn CompletionBackend,
    teacher: &'a EndpointProfile,
    template: &'a str,
}

impl<'a> TeacherScoreJudge<'a> {
    pub fn new(engine: &'a Engine) -> Self {
        TeacherScoreJudge {
            backend: engine.backend(),
            teacher: &engine.config().teacher,
            template: &engine.config().judge_template,
        }
    }

    pub fn score(&self, question: &str, candidate: &SynthesisRecord) -> Result<u32, String> {
        let response = reconstruct(candidate).map_err(|e| e.to_string())?;
        let prompt = self
            .template
            .replacen("{question}", question, 1)
            .replacen("{response}", &response, 1);
        let request = CompletionRequest::new(self.teacher, prompt, 16)
            .routed(&format!("{}#judge", candidate.id), Origin::Teacher);
        let reply = self
            .backend
            .complete(self.teacher, &request)
            .map_err(|e| e.to_string())?;
        parse_score(&reply.text).ok_or_else(|| format!("unparseable score {:?}", reply.text))
    }
}

/// First integer in `text`, accepted when it lies in 1..=10.
pub(crate) fn parse_score(text: &str) -> Option<u32> {
    let digits: String = text
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(char::is_ascii_digit)
        .collect();
    digits.parse().ok().filter(|s| (1..=10).contains(s))
}

impl CandidateJudge for TeacherScoreJudge<'_> {
    fn choose(&self, question: &str, candidates: &[SynthesisRecord]) -> Result<usize, String> {
        let mut best: Option<(usize, u32)> = None;
        for (i, c) in candidates.iter().enumerate() {
            let s = self.score(question, c)?;
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| i).ok_or_else(|| "no candidates".to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::parse_score;

    #[test]
    fn scores() {
        assert_eq!(parse_score(" 7"), Some(7));
        assert_eq!(parse_score("Score: 10/10"), Some(10));
        assert_eq!(parse_score("0"), None);
        assert_eq!(parse_score("eleven"), None);
    }
}
