use std::sync::Arc;

use cosynth_core::dataset::{
    export_example, read_prompts, read_records, record_from_line, record_to_line, write_prompts, write_records,
    DatasetError, PromptEntry,
};
use cosynth_core::gateway::{MockSpec, SyntheticBackend};
use cosynth_core::{Engine, LexiconPredictor, RecordError, StrategySelector, SynthesisConfig};

fn engine() -> Engine {
    Engine::new(
        SynthesisConfig::default(),
        Arc::new(SyntheticBackend::new(MockSpec { think_words: 50, answer_words: 10, ..MockSpec::default() })),
        Arc::new(LexiconPredictor::default()),
        Arc::new(LexiconPredictor::default()),
    )
    .unwrap()
}

#[test]
fn records_survive_disk_round_trip() {
    let e = engine();
    let records: Vec<_> = ["tessy", "teacher-mix", "reject-sampling", "self-distillation"]
        .iter()
        .enumerate()
        .map(|(i, s)| {
            let sel = StrategySelector::from_name(s, e.config()).unwrap();
            e.synthesize(&format!("id{i}"), "Sum 1..n, «quickly»", sel).unwrap()
        })
        .collect();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("out.jsonl");
    write_records(&records, &path).unwrap();
    assert_eq!(read_records(&path).unwrap(), records);
}

#[test]
fn corrupted_partitions_are_rejected() {
    let r = engine().synthesize_tessy("x", "q").unwrap();
    assert!(r.spans.len() >= 2);
    let mut v: serde_json::Value = serde_json::from_str(&record_to_line(&r)).unwrap();
    v["spans"][1]["start"] = (v["spans"][1]["start"].as_u64().unwrap() + 1).into();
    match record_from_line(1, &v.to_string()) {
        Err(DatasetError::Invalid { source: RecordError::Partition { index: 1, .. }, .. }) => {}
        other => panic!("{other:?}"),
    }
    let mut v: serde_json::Value = serde_json::from_str(&record_to_line(&r)).unwrap();
    v["spans"][0]["truncated"] = (!v["spans"][0]["truncated"].as_bool().unwrap()).into();
    assert!(matches!(
        record_from_line(1, &v.to_string()),
        Err(DatasetError::Invalid { source: RecordError::TruncationFlag { .. }, .. })
    ));
    let mut v: serde_json::Value = serde_json::from_str(&record_to_line(&r)).unwrap();
    v["spans"][0]["bogus"] = 1.into();
    assert!(matches!(record_from_line(1, &v.to_string()), Err(DatasetError::Parse { .. })));
}

#[test]
fn prompts_round_trip_and_reject_duplicates() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("p.jsonl");
    let prompts = vec![PromptEntry::new("a", "first?"), PromptEntry::new("b", "second\nline")];
    write_prompts(&prompts, &path).unwrap();
    assert_eq!(read_prompts(&path).unwrap(), prompts);
    std::fs::write(&path, "{\"id\":\"a\",\"question\":\"x\"}\n{\"id\":\"a\",\"question\":\"y\"}\n").unwrap();
    assert!(matches!(read_prompts(&path), Err(DatasetError::DuplicateId { .. })));
}

#[test]
fn export_joins_think_marker_answer() {
    let r = engine().synthesize_tessy("x", "q").unwrap();
    let ex = export_example(&r, "</think>");
    assert_eq!(ex.prompt, "q");
    assert_eq!(ex.response, format!("{}{}", r.think_text(), r.answer_text()));
    assert_eq!(ex.response.matches("</think>").count(), 1);
}

mod random_records {
    use cosynth_core::dataset::{record_from_line, record_to_line};
    use cosynth_core::{Origin, Role, Span, SynthesisRecord, TerminatedBy};
    use proptest::prelude::*;

    fn span_strategy() -> impl Strategy<Value = (bool, String, usize)> {
        (any::<bool>(), "[a-zé数 ,.\\n\"\\\\]{0,12}", 0usize..4)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn any_valid_record_round_trips(
            think in prop::collection::vec(span_strategy(), 0..6),
            answer in prop::collection::vec(span_strategy(), 0..3),
            id in "[a-z0-9-]{1,8}",
            end in 0u8..3,
        ) {
            let mut spans = Vec::new();
            for (role, parts) in [(Role::Think, &think), (Role::Answer, &answer)] {
                for (teacher, text, extra) in parts {
                    let origin = if *teacher && role == Role::Think { Origin::Teacher } else { Origin::Student };
                    let raw = text.chars().count() + extra;
                    spans.push(Span::retained(spans.len(), origin, role, text.clone(), raw));
                }
            }
            if let Some(first) = spans.first_mut() {
                first.origin = Origin::Student;
            }
            let record = SynthesisRecord {
                id,
                prompt: "p \u{1F600}".into(),
                spans,
                strategy: "tessy".into(),
                config_fingerprint: "f".into(),
                terminated_by: [TerminatedBy::BudgetExhausted, TerminatedBy::EndpointStop, TerminatedBy::EndpointStop][end as usize],
                meta: Default::default(),
            };
            record.validate().unwrap();
            let line = record_to_line(&record);
            prop_assert!(!line.contains('\n'));
            prop_assert_eq!(record_from_line(1, &line).unwrap(), record);
        }
    }
}
