//! Property tests for the module invariants that hold over arbitrary inputs.

use obfudge_core::corpus::{self, SourceSample, VulnLabel};
use obfudge_core::detector::Finding;
use obfudge_core::judge::{self, classify_outcome, EvaluationMode, Outcome, Score};
use obfudge_core::lang::Language;
use obfudge_core::metrics;
use proptest::prelude::*;

fn arb_sample() -> impl Strategy<Value = SourceSample> {
    (
        0u32..30,
        prop_oneof![Just(Language::C), Just(Language::Cpp), Just(Language::Python), Just(Language::Solidity)],
        0u8..4,
        1u32..700,
    )
        .prop_map(|(id, language, vuln, loc)| SourceSample {
            id: format!("s{id:02}"),
            dataset: "prop".into(),
            language,
            code: "x".into(),
            label: VulnLabel { vuln_type: format!("CWE-{}", 100 + vuln as u32), location: None },
            loc,
            function_count: 1,
            complexity: 1,
        })
}

proptest! {
    #[test]
    fn filter_is_idempotent_subset_and_order_preserving(samples in proptest::collection::vec(arb_sample(), 0..60)) {
        let once = corpus::filter_corpus_default(&samples);
        let twice = corpus::filter_corpus_default(&once);
        let once_ids: Vec<&str> = once.iter().map(|s| s.id.as_str()).collect();
        let twice_ids: Vec<&str> = twice.iter().map(|s| s.id.as_str()).collect();
        prop_assert_eq!(&once_ids, &twice_ids);

        // subset in input order
        let mut cursor = 0usize;
        for kept in &once_ids {
            let pos = samples[cursor..].iter().position(|s| s.id == *kept);
            prop_assert!(pos.is_some(), "kept sample not in input order");
            cursor += pos.unwrap() + 1;
        }
    }

    #[test]
    fn existence_rate_dominates_type_rate(values in proptest::collection::vec(1u8..=4, 1..80)) {
        let scores: Vec<Score> = values.iter().map(|v| Score::from_value(*v).unwrap()).collect();
        let t = metrics::detection_success_rate(&scores, EvaluationMode::TypeEval).unwrap();
        let e = metrics::detection_success_rate(&scores, EvaluationMode::ExistenceEval).unwrap();
        prop_assert!(e >= t);
    }

    #[test]
    fn type_normalization_symmetric_under_case_and_padding(n in 1u32..1500, zeros in 0usize..3) {
        let plain = format!("CWE-{n}");
        let padded = format!("cwe-{}{}", "0".repeat(zeros), n);
        let spaced = format!("CWE {n}");
        let a = Finding { vuln_type: padded, location: None, description: String::new() };
        let b = Finding { vuln_type: spaced, location: None, description: String::new() };
        let label = VulnLabel { vuln_type: plain, location: None };
        prop_assert!(judge::match_finding(&a, &label));
        prop_assert!(judge::match_finding(&b, &label));
    }

    #[test]
    fn transition_counts_partition(pairs in proptest::collection::vec((1u8..=4, 1u8..=4), 1..100)) {
        let mut down = 0usize;
        let mut up = 0usize;
        let mut stable = 0usize;
        for (a, b) in &pairs {
            match metrics::transition(Score::from_value(*a).unwrap(), Score::from_value(*b).unwrap()) {
                metrics::Transition::Downgrade => down += 1,
                metrics::Transition::Upgrade => up += 1,
                metrics::Transition::Stable => stable += 1,
            }
        }
        prop_assert_eq!(down + up + stable, pairs.len());
    }

    #[test]
    fn outcome_classification_total(value in 1u8..=4) {
        let score = Score::from_value(value).unwrap();
        for mode in [EvaluationMode::TypeEval, EvaluationMode::ExistenceEval] {
            let outcome = classify_outcome(score, mode);
            prop_assert!(matches!(outcome, Outcome::Positive | Outcome::Negative));
        }
    }
}
