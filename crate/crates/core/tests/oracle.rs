mod common;

use common::{random_scenario, reference, RefOutcome};

#[test]
fn engine_matches_reference_interpreter() {
    for seed in 0..500 {
        let s = random_scenario(seed);
        let record = s.engine("t").synthesize_tessy("t", "q").expect("scripted run succeeds");
        let expected = reference(&s);
        assert_eq!(RefOutcome::of(&record), expected, "seed {seed}: {s:?}");
    }
}

#[test]
fn scenarios_cover_every_termination() {
    use cosynth_core::TerminatedBy::*;
    let mut seen = [0usize; 3];
    let mut forced = 0;
    for seed in 0..500 {
        let s = random_scenario(seed);
        let r = reference(&s);
        seen[match r.terminated_by {
            EndOfThinkMarker => 0,
            BudgetExhausted => 1,
            EndpointStop => 2,
        }] += 1;
        let rec = s.engine("t").synthesize_tessy("t", "q").unwrap();
        forced += rec.meta["forced_progress"].as_u64().unwrap() as usize;
    }
    assert!(seen.iter().all(|&n| n > 10), "termination mix {seen:?}");
    assert!(forced > 0);
}

#[test]
fn budget_is_spent_at_exact_landing() {
    use common::{Rule, Scenario};
    use cosynth_core::gateway::MockEntry;
    use cosynth_core::{Origin, Role, TerminatedBy};

    let s = Scenario {
        k: 40,
        long_block: 40,
        think_budget: 7,
        answer_budget: 100,
        zero_limit: 2,
        vocab_differs: false,
        student_rule: Rule::Tagged,
        teacher_rule: Rule::Tagged,
        entries: vec![
            MockEntry::new(Origin::Student, "saa sbb"),
            MockEntry::new(Origin::Student, " sss"),
            MockEntry::new(Origin::Student, "cans"),
        ],
    };
    let record = s.engine("t").synthesize_tessy("t", "q").unwrap();
    assert_eq!(record.terminated_by, TerminatedBy::BudgetExhausted);
    let think: Vec<_> = record.spans.iter().filter(|sp| sp.role == Role::Think).collect();
    assert_eq!(think.len(), 1);
    assert_eq!(think[0].text, "saa sbb");
    assert_eq!(RefOutcome::of(&record), reference(&s));
}
