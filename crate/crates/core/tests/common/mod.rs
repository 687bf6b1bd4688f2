//! Test-only oracle: a straight-line reference interpreter of the cooperative
//! loop, scripted scenario generation, and toy boundary predictors.
//!
//! The interpreter is written from the algorithm's rules, not from the engine
//! source. It shares only the scripted endpoint semantics (`cut_block`) with
//! the engine, since that is the fixture both sides are driven by.

#![allow(dead_code)]

use std::sync::Arc;

use cosynth_core::boundary::{BoundaryError, BoundaryPredictor, BoundaryVerdict, TokenKind};
use cosynth_core::gateway::mock::cut_block;
use cosynth_core::gateway::{FinishReason, MockEntry, MockScript, ScriptedBackend};
use cosynth_core::{Engine, Origin, Role, SynthesisConfig, SynthesisRecord, TerminatedBy};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const MARKER: &str = "</think>";

/// How a toy predictor decides where to cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Rule {
    /// Words starting with `s` are style, everything else capability.
    Tagged,
    /// Always keep nothing.
    KeepZero,
    /// Pseudo-random keep derived from the text and a salt.
    Noise(u64),
}

fn chars(s: &str) -> usize {
    s.chars().count()
}

/// Char offsets of word starts, with each word's first char.
fn word_starts(text: &str) -> Vec<(usize, char)> {
    let mut out = Vec::new();
    let mut prev_space = true;
    for (i, c) in text.chars().enumerate() {
        if !c.is_whitespace() && prev_space {
            out.push((i, c));
        }
        prev_space = c.is_whitespace();
    }
    out
}

pub fn toy_keep(rule: Rule, text: &str, target: TokenKind) -> usize {
    let len = chars(text);
    match rule {
        Rule::KeepZero => 0,
        Rule::Noise(salt) => {
            let mut h: u64 = 0xcbf29ce484222325 ^ salt;
            for b in text.bytes() {
                h = (h ^ b as u64).wrapping_mul(0x100000001b3);
            }
            // biased toward "keep all" so trajectories make progress
            if h % 3 == 0 {
                len
            } else {
                (h >> 8) as usize % (len + 1)
            }
        }
        Rule::Tagged => {
            let is_target = |c: char| match target {
                TokenKind::Style => c == 's',
                TokenKind::Capability => c != 's',
            };
            match word_starts(text).iter().position(|&(_, c)| !is_target(c)) {
                None => len,
                Some(0) => 0,
                Some(i) => word_starts(text)[i].0,
            }
        }
    }
}

pub struct ToyPredictor(pub Rule);

impl BoundaryPredictor for ToyPredictor {
    fn predict(&self, text: &str, target: TokenKind) -> Result<BoundaryVerdict, BoundaryError> {
        if text.is_empty() {
            return Err(BoundaryError::EmptyText);
        }
        Ok(BoundaryVerdict {
            keep_prefix_chars: toy_keep(self.0, text, target),
            unit_labels: None,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub k: usize,
    pub long_block: usize,
    pub think_budget: usize,
    pub answer_budget: usize,
    pub zero_limit: usize,
    pub vocab_differs: bool,
    pub student_rule: Rule,
    pub teacher_rule: Rule,
    pub entries: Vec<MockEntry>,
}

impl Scenario {
    pub fn config(&self) -> SynthesisConfig {
        let mut c = SynthesisConfig::default();
        c.k_max_tokens = self.k;
        c.long_block_tokens = self.long_block;
        c.think_budget_chars = self.think_budget;
        c.answer_budget_chars = self.answer_budget;
        c.zero_progress_limit = self.zero_limit;
        c.end_of_think_marker = MARKER.to_string();
        c.vocab_mismatch_trim = true;
        c.student.vocab_family = "fam-a".into();
        c.teacher.vocab_family = if self.vocab_differs { "fam-b" } else { "fam-a" }.into();
        c
    }

    /// Engine wired to a scripted backend preloaded under `id`.
    pub fn engine(&self, id: &str) -> Engine {
        let backend = ScriptedBackend::new();
        backend.insert(id, MockScript::new(self.entries.clone()));
        Engine::new(
            self.config(),
            Arc::new(backend),
            Arc::new(ToyPredictor(self.student_rule)),
            Arc::new(ToyPredictor(self.teacher_rule)),
        )
        .expect("scenario config is valid")
    }
}

fn random_word(rng: &mut ChaCha8Rng, style_p: f64) -> String {
    const STEMS: &[&str] = &["a", "bq", "数", "é7", "xy", "ω", "zz9", "gcd(a,b)", "n+1"];
    let stem = STEMS.choose(rng).unwrap();
    if rng.random_bool(style_p) {
        format!("s{stem}")
    } else {
        format!("c{stem}")
    }
}

fn random_text(rng: &mut ChaCha8Rng, words: usize) -> String {
    let style_p = *[0.0, 0.2, 0.5, 0.8, 1.0].choose(rng).unwrap();
    let mut out = String::new();
    if rng.random_bool(0.7) {
        out.push(' ');
    }
    for i in 0..words {
        if i > 0 {
            out.push_str(["  ", " ", " ", "\n"].choose(rng).unwrap());
        }
        out.push_str(&random_word(rng, style_p));
    }
    if rng.random_bool(0.3) {
        out.push(' ');
    }
    out
}

/// Random scripted scenario: interleaved style/capability text, random block
/// size, optional end-of-think marker (whole or split across two entries).
pub fn random_scenario(seed: u64) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::new();
    for origin in [Origin::Student, Origin::Teacher] {
        for _ in 0..rng.random_range(0..10) {
            let n = rng.random_range(1..50);
            let mut e = MockEntry::new(origin, random_text(&mut rng, n));
            e.finish = match rng.random_range(0..20) {
                0 => Some(FinishReason::EndpointStop),
                1..=5 => Some(FinishReason::Length),
                _ => None,
            };
            entries.push(e);
        }
    }
    match rng.random_range(0..10) {
        0..=3 if !entries.is_empty() => {
            let i = rng.random_range(0..entries.len());
            let words: Vec<&str> = entries[i].text.split(' ').collect();
            let at = rng.random_range(0..=words.len());
            let mut w: Vec<String> = words.iter().map(|s| s.to_string()).collect();
            w.insert(at, MARKER.to_string());
            entries[i].text = w.join(" ");
        }
        4 if entries.len() >= 2 => {
            // Marker split across two consecutive entries of one origin.
            let origin = entries[0].origin;
            let idx: Vec<usize> = (0..entries.len()).filter(|&j| entries[j].origin == origin).collect();
            if idx.len() >= 2 {
                let j = rng.random_range(0..idx.len() - 1);
                let cut = rng.random_range(1..MARKER.len());
                let (a, b) = MARKER.split_at(cut);
                entries[idx[j]].text.push_str(&format!(" {a}"));
                entries[idx[j + 1]].text = format!("{b} {}", entries[idx[j + 1]].text);
            }
        }
        _ => {}
    }
    // Order entries by a shuffle so per-origin order stays but interleaving varies.
    let rules = [Rule::Tagged, Rule::Tagged, Rule::Noise(seed), Rule::KeepZero];
    Scenario {
        k: rng.random_range(1..=40),
        long_block: rng.random_range(1..=200),
        think_budget: rng.random_range(20..=1500),
        answer_budget: rng.random_range(1..=400),
        zero_limit: rng.random_range(1..=3),
        vocab_differs: rng.random_bool(0.5),
        student_rule: *rules.choose(&mut rng).unwrap(),
        teacher_rule: *rules.choose(&mut rng).unwrap(),
        entries,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefSpan {
    pub origin: Origin,
    pub role: Role,
    pub text: String,
    pub truncated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RefOutcome {
    pub spans: Vec<RefSpan>,
    pub terminated_by: TerminatedBy,
}

impl RefOutcome {
    pub fn of(record: &SynthesisRecord) -> RefOutcome {
        RefOutcome {
            spans: record
                .spans
                .iter()
                .map(|s| RefSpan {
                    origin: s.origin,
                    role: s.role,
                    text: s.text.clone(),
                    truncated: s.truncated,
                })
                .collect(),
            terminated_by: record.terminated_by,
        }
    }
}

fn prefix_chars(s: &str, n: usize) -> String {
    s.chars().take(n).collect()
}

fn drop_partial_word(s: &str) -> String {
    s.trim_end_matches(|c: char| !c.is_whitespace()).to_string()
}

/// Straight-line reference interpreter for the cooperative loop.
pub fn reference(s: &Scenario) -> RefOutcome {
    let student: Vec<&MockEntry> = s.entries.iter().filter(|e| e.origin == Origin::Student).collect();
    let teacher: Vec<&MockEntry> = s.entries.iter().filter(|e| e.origin == Origin::Teacher).collect();
    let mut next = [0usize, 0usize];
    let mut generate = |origin: Origin, max_tokens: usize| -> (String, FinishReason) {
        let (list, slot) = match origin {
            Origin::Student => (&student, 0),
            Origin::Teacher => (&teacher, 1),
        };
        match list.get(next[slot]) {
            Some(e) => {
                next[slot] += 1;
                let r = cut_block(&e.text, max_tokens, e.finish.unwrap_or(FinishReason::Stop));
                (r.text, r.finish_reason)
            }
            None => (String::new(), FinishReason::Stop),
        }
    };
    let rule = |o: Origin| match o {
        Origin::Student => s.student_rule,
        Origin::Teacher => s.teacher_rule,
    };
    let target = |o: Origin| match o {
        Origin::Student => TokenKind::Style,
        Origin::Teacher => TokenKind::Capability,
    };

    let mut spans: Vec<RefSpan> = Vec::new();
    let mut think = String::new();
    let mut who = Origin::Student;
    let mut empty_run = 0;
    let terminated_by;
    'think: loop {
        let (raw, finish) = generate(who, s.k);
        if raw.is_empty() {
            terminated_by = TerminatedBy::EndpointStop;
            break;
        }
        let raw_chars = chars(&raw);
        let forced = empty_run >= s.zero_limit;
        let joined = format!("{think}{raw}");
        let mut cut: Option<usize> = None;
        if let Some(p) = joined.find(MARKER) {
            let end_in_raw = p + MARKER.len() - think.len();
            let pre = &raw[..p.saturating_sub(think.len())];
            if !forced && !pre.is_empty() {
                let keep = toy_keep(rule(who), pre, target(who));
                if keep < chars(pre) {
                    cut = Some(keep);
                }
            }
            if cut.is_none() {
                let kept = raw[..end_in_raw].to_string();
                let truncated = chars(&kept) < raw_chars;
                spans.push(RefSpan { origin: who, role: Role::Think, text: kept, truncated });
                terminated_by = TerminatedBy::EndOfThinkMarker;
                break;
            }
        } else if finish == FinishReason::EndpointStop {
            spans.push(RefSpan { origin: who, role: Role::Think, text: raw, truncated: false });
            terminated_by = TerminatedBy::EndpointStop;
            break;
        } else if forced {
            let lead = raw.len() - raw.trim_start().len();
            let word_end = raw[lead..].find(char::is_whitespace).map_or(raw.len(), |e| lead + e);
            let kept = raw[..word_end].to_string();
            think.push_str(&kept);
            spans.push(RefSpan { origin: who, role: Role::Think, text: kept, truncated: false });
            empty_run = 0;
            if chars(&think) >= s.think_budget {
                terminated_by = TerminatedBy::BudgetExhausted;
                break 'think;
            }
            continue;
        } else {
            cut = Some(toy_keep(rule(who), &raw, target(who)));
        }

        let keep = cut.expect("set on every remaining path");
        let truncated = keep < raw_chars;
        let mut kept = prefix_chars(&raw, keep);
        if truncated && s.vocab_differs {
            kept = drop_partial_word(&kept);
        }
        empty_run = if kept.is_empty() { empty_run + 1 } else { 0 };
        think.push_str(&kept);
        spans.push(RefSpan { origin: who, role: Role::Think, text: kept, truncated });
        if truncated {
            who = match who {
                Origin::Student => Origin::Teacher,
                Origin::Teacher => Origin::Student,
            };
        }
        if chars(&think) >= s.think_budget {
            terminated_by = TerminatedBy::BudgetExhausted;
            break;
        }
    }

    let mut answer_chars = 0;
    loop {
        let (text, finish) = generate(Origin::Student, s.long_block);
        if text.is_empty() {
            break;
        }
        answer_chars += chars(&text);
        spans.push(RefSpan { origin: Origin::Student, role: Role::Answer, text, truncated: false });
        if finish != FinishReason::Length || answer_chars >= s.answer_budget {
            break;
        }
    }
    RefOutcome { spans, terminated_by }
}

/// Structural checks shared by the invariant tests. Returns a description of
/// the first violation.
pub fn check_invariants(record: &SynthesisRecord, think_budget: usize, max_block_chars: usize) -> Result<(), String> {
    record.validate().map_err(|e| e.to_string())?;
    let spans = &record.spans;
    if spans.first().is_some_and(|s| s.origin != Origin::Student) {
        return Err("first span not student".into());
    }
    if spans.iter().any(|s| s.role == Role::Answer && s.origin != Origin::Student) {
        return Err("answer span not student".into());
    }
    let thinks: Vec<_> = spans.iter().filter(|s| s.role == Role::Think).collect();
    for w in thinks.windows(2) {
        let switched = w[0].origin != w[1].origin;
        if switched != w[0].truncated {
            return Err(format!("switch-iff-truncated broken at span {}", w[0].index));
        }
    }
    if let Some(first_answer) = spans.iter().position(|s| s.role == Role::Answer) {
        if spans[first_answer..].iter().any(|s| s.role == Role::Think) {
            return Err("think after answer".into());
        }
    }
    let rebuilt = cosynth_core::reconstruct(record).map_err(|e| e.to_string())?;
    let ranges = record.span_ranges();
    for (s, &(a, b)) in spans.iter().zip(&ranges) {
        let piece: String = rebuilt.chars().skip(a).take(b - a).collect();
        if piece != s.text {
            return Err(format!("partition mismatch at span {}", s.index));
        }
    }
    if ranges.last().map_or(0, |r| r.1) != rebuilt.chars().count() {
        return Err("ranges do not cover the output".into());
    }
    let think_chars: usize = thinks.iter().map(|s| s.text.chars().count()).sum();
    if think_chars >= think_budget + max_block_chars {
        return Err(format!("think text {think_chars} chars overran budget {think_budget}"));
    }
    Ok(())
}

/// A fuzzed annotation case: text plus embedded style spans (char ranges),
/// and whether left-to-right string search is guaranteed to recover them.
#[derive(Debug, Clone)]
pub struct AnnotationCase {
    pub text: String,
    pub spans: Vec<(usize, usize)>,
    pub unambiguous: bool,
}

impl AnnotationCase {
    pub fn span_strings(&self) -> Vec<String> {
        self.spans
            .iter()
            .map(|&(a, b)| self.text.chars().skip(a).take(b - a).collect())
            .collect()
    }
}

pub fn annotation_case(seed: u64) -> AnnotationCase {
    const PIECES: &[&str] = &[
        "Okay, ", "wait", " so", "x = 2", "\"quoted\"", "back\\slash", "[1, 2]", "数学", "é",
        "\n", "let me check", "gcd(a,b)", " ", "Hmm…", "{json}", "tab\t", "😀", "mod p",
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut text = String::new();
    let mut spans = Vec::new();
    let mut pos = 0;
    for _ in 0..rng.random_range(1..12) {
        let mut frag = String::new();
        for _ in 0..rng.random_range(1..4) {
            frag.push_str(PIECES.choose(&mut rng).unwrap());
        }
        let n = chars(&frag);
        // adjacent spans would merge into one run; keep a gap between them
        let prev_end = spans.last().map_or(usize::MAX, |s: &(usize, usize)| s.1);
        if rng.random_bool(0.4) && prev_end != pos {
            spans.push((pos, pos + n));
        }
        text.push_str(&frag);
        pos += n;
    }
    let mut case = AnnotationCase { text, spans, unambiguous: true };
    // Each span must be the first match at or after the previous span's end.
    let strings = case.span_strings();
    let mut cursor = 0;
    for (s, &(start, _)) in strings.iter().zip(&case.spans) {
        let from: String = case.text.chars().skip(cursor).collect();
        let found = from.find(s.as_str()).map(|b| cursor + chars(&from[..b]));
        if found != Some(start) {
            case.unambiguous = false;
        }
        cursor = start + chars(s);
    }
    case
}

/// Annotator double: checks the segment arrived verbatim between the input
/// tags and replies with the given span strings.
pub struct EchoAnnotator {
    pub expected_text: String,
    pub reply: Vec<String>,
}

impl cosynth_core::CompletionBackend for EchoAnnotator {
    fn complete(
        &self,
        _profile: &cosynth_core::EndpointProfile,
        request: &cosynth_core::CompletionRequest,
    ) -> Result<cosynth_core::CompletionResult, cosynth_core::GatewayError> {
        use cosynth_core::annotation::{INPUT_CLOSE, INPUT_OPEN};
        let p = &request.prompt;
        let open = p.rfind(INPUT_OPEN).expect("prompt carries the input tag") + INPUT_OPEN.len();
        let close = p.rfind(INPUT_CLOSE).expect("prompt closes the input tag");
        assert_eq!(&p[open..close], self.expected_text, "segment not embedded verbatim");
        Ok(cosynth_core::CompletionResult {
            text: format!("Here are the spans:\n{}\n", serde_json::to_string(&self.reply).unwrap()),
            finish_reason: FinishReason::Stop,
        })
    }
}
