//! Acceptance suite: one test per criterion, each printing a PASS line.
//!
//! Criteria with fixture corpora use the shipped runnable programs under
//! fixtures/corpus; the offline reproducibility criterion replays the
//! shipped reply fixtures under fixtures/replay.

use obfudge_core::corpus::{self, LineRange, SourceSample, VulnLabel};
use obfudge_core::detector::{DetectionReport, Endpoint, Finding, ModelFamily, ModelSpec};
use obfudge_core::equivalence::{self, Behavior, HarnessSpec};
use obfudge_core::judge::{self, EvaluationMode, Score};
use obfudge_core::lang::{self, Language, TokenKind};
use obfudge_core::metrics::{self, Transition};
use obfudge_core::obfuscate::{self, ObfuscationMode, ObfuscationRequest};
use obfudge_core::report::{self, JudgeMode, RunConfig};
use obfudge_core::taxonomy;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::path::{Path, PathBuf};
use std::time::Instant;

const FIXTURE_SEED: u64 = 42;

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn load_fixture_corpus() -> Vec<SourceSample> {
    let root = fixture_root().join("corpus");
    corpus::ingest(&root, &root.join("manifest.tsv")).expect("fixture corpus ingests")
}

fn runnable(samples: &[SourceSample], language: Language) -> Vec<&SourceSample> {
    samples.iter().filter(|s| s.language == language).collect()
}

// ---------------------------------------------------------------------------
// criterion 1: scoring oracle equivalence
// ---------------------------------------------------------------------------

/// Independent restatement of the 1-4 rubric: 1 when the set is empty, 2 when
/// non-empty without the truth, 3 when exactly the truth, 4 when the truth
/// sits among others.
fn rubric_oracle(findings_count: usize, hit: bool) -> u8 {
    if findings_count == 0 {
        1
    } else if !hit {
        2
    } else if findings_count == 1 {
        3
    } else {
        4
    }
}

#[test]
fn acceptance_1_scoring_oracle_equivalence() {
    let started = Instant::now();
    let label = VulnLabel {
        vuln_type: "CWE-125".into(),
        location: Some(LineRange::new(10, 12)),
    };
    let matching = Finding {
        vuln_type: "CWE-0125".into(),
        location: Some(LineRange::new(11, 14)),
        description: "hit".into(),
    };
    let mut mismatches = 0usize;
    let mut cases = 0usize;
    for n in 0usize..=3 {
        for hit in [false, true] {
            if hit && n == 0 {
                continue; // a hit needs at least one finding
            }
            // place the matching finding at every position
            let positions: Vec<Option<usize>> = if hit { (0..n).map(Some).collect() } else { vec![None] };
            for position in positions {
                let mut findings = Vec::new();
                for i in 0..n {
                    if Some(i) == position {
                        findings.push(matching.clone());
                    } else {
                        findings.push(Finding {
                            vuln_type: format!("CWE-{}", 900 + i),
                            location: None,
                            description: "miss".into(),
                        });
                    }
                }
                let report = DetectionReport {
                    raw: String::new(),
                    findings,
                    model: "m".into(),
                    sample_id: "s".into(),
                    combo_id: "original".into(),
                    fallback_parse: false,
                };
                let got = judge::score_report(&report, &label).value();
                let expected = rubric_oracle(n, hit);
                cases += 1;
                if got != expected {
                    mismatches += 1;
                    eprintln!("rubric mismatch: n={n} hit={hit} got={got} expected={expected}");
                }
            }
        }
    }
    assert_eq!(mismatches, 0, "{mismatches} rubric mismatches of {cases}");
    assert!(started.elapsed().as_secs_f64() < 1.0, "rubric enumeration exceeded 1 s");
    println!("acceptance 1 (scoring oracle equivalence): PASS ({cases} cases, 0 mismatches)");
}

// ---------------------------------------------------------------------------
// criterion 2: transition exhaustiveness
// ---------------------------------------------------------------------------

#[test]
fn acceptance_2_transition_exhaustiveness() {
    let mut mismatches = 0usize;
    for a in Score::all() {
        for b in Score::all() {
            let orig_positive = matches!(a.value(), 3 | 4);
            let obf_positive = matches!(b.value(), 3 | 4);
            let expected = if orig_positive && !obf_positive {
                Transition::Downgrade
            } else if !orig_positive && obf_positive {
                Transition::Upgrade
            } else {
                Transition::Stable
            };
            if metrics::transition(a, b) != expected {
                mismatches += 1;
                eprintln!("transition mismatch at ({}, {})", a.value(), b.value());
            }
        }
    }
    assert_eq!(mismatches, 0);
    println!("acceptance 2 (transition exhaustiveness): PASS (16 pairs, 0 mismatches)");
}

// ---------------------------------------------------------------------------
// criterion 3: evaluation-mode relaxation
// ---------------------------------------------------------------------------

#[test]
fn acceptance_3_evaluation_mode_relaxation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE7A1);
    let mut holds = 0usize;
    const TRIALS: usize = 1_000;
    for _ in 0..TRIALS {
        let n = rng.random_range(1..=50usize);
        let scores: Vec<Score> = (0..n)
            .map(|_| Score::from_value(rng.random_range(1..=4u8)).unwrap())
            .collect();
        let type_rate = metrics::detection_success_rate(&scores, EvaluationMode::TypeEval).unwrap();
        let existence_rate =
            metrics::detection_success_rate(&scores, EvaluationMode::ExistenceEval).unwrap();
        if existence_rate >= type_rate {
            holds += 1;
        }
    }
    assert_eq!(holds, TRIALS, "relaxation failed in {} trials", TRIALS - holds);
    println!("acceptance 3 (evaluation-mode relaxation): PASS ({TRIALS}/{TRIALS} trials)");
}

// ---------------------------------------------------------------------------
// criterion 4: semantic preservation on the runnable fixture corpus
// ---------------------------------------------------------------------------

#[test]
fn acceptance_4_semantic_preservation() {
    let started = Instant::now();
    let samples = load_fixture_corpus();
    let python = runnable(&samples, Language::Python);
    let c = runnable(&samples, Language::C);
    assert!(python.len() >= 10, "need >= 10 python fixtures, have {}", python.len());
    assert!(c.len() >= 10, "need >= 10 c fixtures, have {}", c.len());

    let harness = HarnessSpec::default();
    let mut checks = 0usize;
    let mut divergences = Vec::new();
    for sample in python.iter().chain(c.iter()) {
        for combo in taxonomy::list_combos() {
            if !combo.applies_to(sample.language) {
                continue;
            }
            let request = ObfuscationRequest {
                sample,
                combo,
                mode: ObfuscationMode::Deterministic,
                seed: FIXTURE_SEED,
            };
            let result = obfuscate::obfuscate(&request)
                .unwrap_or_else(|e| panic!("{} x {}: {e}", sample.id, combo.id));
            let verdict = equivalence::behavioral_check(
                &sample.code,
                &result.code,
                sample.language,
                Some(&harness),
            )
            .unwrap_or_else(|e| panic!("{} x {}: {e}", sample.id, combo.id));
            checks += 1;
            if !verdict.parse_ok || verdict.behavior != Behavior::Identical {
                divergences.push(format!(
                    "{} x {}: parse_ok={} behavior={:?} ({})",
                    sample.id, combo.id, verdict.parse_ok, verdict.behavior, verdict.details
                ));
            }
        }
    }
    for d in &divergences {
        eprintln!("divergence: {d}");
    }
    assert!(divergences.is_empty(), "{} divergences of {checks}", divergences.len());
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs() < 300, "suite took {elapsed:?}, limit 5 minutes");
    println!(
        "acceptance 4 (semantic preservation): PASS ({checks} combo runs, 0 divergences, {:.1}s)",
        elapsed.as_secs_f64()
    );
}

// ---------------------------------------------------------------------------
// criterion 5: transform invariants on every fixture file
// ---------------------------------------------------------------------------

fn is_hashed_name(name: &str) -> bool {
    name.len() == 10
        && name.starts_with("OX")
        && name[2..].chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_lowercase())
}

#[test]
fn acceptance_5_transform_invariants() {
    let samples = load_fixture_corpus();
    let mut files = 0usize;
    for sample in &samples {
        files += 1;
        let language = sample.language;

        // L2 idempotence
        let once = obfuscate::strip_comments(&sample.code, language).expect("L2");
        let twice = obfuscate::strip_comments(&once, language).expect("L2 twice");
        assert_eq!(once, twice, "L2 not idempotent on {}", sample.id);

        // L1 injective renaming, every new name matching OX[0-9A-F]{8};
        // token kinds align positionally, so the mapping is recoverable
        let renamed = obfuscate::rename_identifiers(&sample.code, language, FIXTURE_SEED).expect("L1");
        let before = lang::lex(&sample.code, language).unwrap();
        let after = lang::lex(&renamed, language).unwrap();
        let b: Vec<_> = before.lexical_tokens().collect();
        let a: Vec<_> = after.lexical_tokens().collect();
        assert_eq!(a.len(), b.len(), "L1 changed token count on {}", sample.id);
        let mut mapping: std::collections::BTreeMap<String, String> = Default::default();
        for (tb, ta) in b.iter().zip(a.iter()) {
            assert_eq!(tb.kind, ta.kind, "L1 changed token kinds on {}", sample.id);
            if tb.kind == TokenKind::Ident {
                let from = before.text(tb).to_string();
                let to = after.text(ta).to_string();
                if from != to {
                    assert!(is_hashed_name(&to), "{}: `{to}` not OX[0-9A-F]{{8}}", sample.id);
                    if let Some(prev) = mapping.insert(from.clone(), to.clone()) {
                        assert_eq!(prev, to, "{}: `{from}` renamed inconsistently", sample.id);
                    }
                }
            }
        }
        let distinct_targets: std::collections::BTreeSet<_> = mapping.values().collect();
        assert_eq!(
            distinct_targets.len(),
            mapping.len(),
            "{}: renaming not injective",
            sample.id
        );

        // L3 token-sequence preservation
        let mangled = obfuscate::mangle_formatting(&sample.code, language, FIXTURE_SEED).expect("L3");
        assert_eq!(
            lang::lex(&sample.code, language).unwrap().fingerprint(),
            lang::lex(&mangled, language).unwrap().fingerprint(),
            "L3 changed the token sequence on {}",
            sample.id
        );

        // C1 strictly increases complexity
        let c1 = obfuscate::insert_opaque_predicates(&sample.code, language, FIXTURE_SEED).expect("C1");
        let before_cx = corpus::complexity(&sample.code, language).unwrap();
        let after_cx = corpus::complexity(&c1, language).unwrap();
        assert!(
            after_cx > before_cx,
            "{}: C1 complexity {before_cx} -> {after_cx} not strictly increasing",
            sample.id
        );
    }
    println!("acceptance 5 (transform invariants): PASS ({files} files, all four properties)");
}

// ---------------------------------------------------------------------------
// criterion 6: filtering rules
// ---------------------------------------------------------------------------

#[test]
fn acceptance_6_filtering_rules() {
    let mk = |id: &str, loc: u32, vuln: &str| SourceSample {
        id: id.to_string(),
        dataset: "synth".into(),
        language: Language::C,
        code: "int main(void) { return 0; }".into(),
        label: VulnLabel { vuln_type: vuln.into(), location: None },
        loc,
        function_count: 1,
        complexity: 1,
    };
    let mut samples = vec![
        mk("loc499", 499, "CWE-400"),
        mk("loc500", 500, "CWE-401"),
        mk("loc501", 501, "CWE-402"),
    ];
    for i in 0..7 {
        samples.push(mk(&format!("dup{i}"), 50, "CWE-125"));
    }
    let kept = corpus::filter_corpus_default(&samples);
    let ids: Vec<&str> = kept.iter().map(|s| s.id.as_str()).collect();
    assert!(ids.contains(&"loc499"));
    assert!(ids.contains(&"loc500"), "500 lines is not more than 500");
    assert!(!ids.contains(&"loc501"), "501 lines must drop");
    let dups = ids.iter().filter(|i| i.starts_with("dup")).count();
    assert_eq!(dups, 5, "exactly 5 of 7 same-CWE files retained");
    assert_eq!(kept.len(), 7);
    println!("acceptance 6 (filtering rules): PASS (501 dropped, 5 of 7 kept)");
}

// ---------------------------------------------------------------------------
// criterion 7: paper-anchored aggregate
// ---------------------------------------------------------------------------

#[test]
fn acceptance_7_paper_anchored_aggregate() {
    const TOTAL: usize = 23_040;
    const DOWNGRADES: usize = 2_475;
    let mut records = Vec::with_capacity(TOTAL);
    for i in 0..TOTAL {
        let (orig, obf) = if i < DOWNGRADES {
            (Score::Three, Score::One)
        } else {
            (Score::Three, Score::Three)
        };
        records.push(metrics::TransitionRecord {
            sample_id: format!("s{}", i % 128),
            model: format!("m{}", i % 15),
            combo_id: "C3".into(),
            score_original: orig,
            score_obfuscated: obf,
            dataset: "smartbugs".into(),
            language: "solidity".into(),
            vuln_type: "reentrancy".into(),
            loc: 35,
            complexity: 4,
            loc_after: 40,
            complexity_after: 6,
            family: ModelFamily::Qwen,
            param_count: Some(7),
            reasoning: false,
        });
    }
    let edges = metrics::bucket_edges(&records);
    let rates = metrics::transition_rates(&records, metrics::Dimension::Dataset, &edges);
    assert_eq!(rates.len(), 1);
    let rate = rates[0].downgrade_rate;
    assert!(
        (rate - 0.107).abs() <= 0.0005,
        "downgrade rate {rate} not within 0.107 +/- 0.0005"
    );
    println!("acceptance 7 (paper-anchored aggregate): PASS (2475/23040 -> {rate:.6})");
}

// ---------------------------------------------------------------------------
// criterion 8: offline reproducibility over shipped reply fixtures
// ---------------------------------------------------------------------------

pub fn replay_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec {
            name: "replay-alpha".into(),
            family: ModelFamily::Qwen,
            param_count: Some(7),
            reasoning: false,
            endpoint: Endpoint::Replay,
            temperature: 1e-5,
        },
        ModelSpec {
            name: "replay-beta".into(),
            family: ModelFamily::Llama,
            param_count: Some(70),
            reasoning: true,
            endpoint: Endpoint::Replay,
            temperature: 1e-5,
        },
    ]
}

pub fn replay_config(run_root: PathBuf) -> RunConfig {
    RunConfig {
        run_root,
        dataset_root: fixture_root().join("corpus"),
        manifest: fixture_root().join("corpus/manifest.tsv"),
        datasets: vec![],
        combos: vec![],
        models: replay_models(),
        obfuscation_mode: ObfuscationMode::Deterministic,
        judge: JudgeMode::Deterministic,
        judge_model: None,
        obfuscation_model: None,
        evaluation_modes: vec![EvaluationMode::TypeEval, EvaluationMode::ExistenceEval],
        seed: FIXTURE_SEED,
        jobs: 4,
        replay_only: true,
        cache_dir: fixture_root().join("replay"),
        max_loc: 500,
        max_per_cwe: 5,
        behavioral_checks: false,
    }
}

#[test]
fn acceptance_8_offline_reproducibility() {
    let scratch = tempfile::tempdir().unwrap();
    let run_a = scratch.path().join("run-a");
    let run_b = scratch.path().join("run-b");
    report::run_pipeline(&replay_config(run_a.clone())).expect("first replay run");
    report::run_pipeline(&replay_config(run_b.clone())).expect("second replay run");

    let compare = |rel: &str| {
        let a = std::fs::read(run_a.join(rel)).unwrap_or_else(|_| panic!("{rel} missing in run a"));
        let b = std::fs::read(run_b.join(rel)).unwrap_or_else(|_| panic!("{rel} missing in run b"));
        assert_eq!(a, b, "{rel} differs between consecutive replay runs");
    };
    compare("metrics/records.jsonl");
    compare("metrics/summary.json");
    compare("metrics/buckets.json");
    compare("emit/success_type_eval.txt");
    compare("emit/success_type_eval.json");
    compare("emit/success_existence_eval.txt");
    compare("emit/success_existence_eval.json");

    // sanity: the run produced transition records for both models
    let records = std::fs::read_to_string(run_a.join("metrics/records.jsonl")).unwrap();
    assert!(records.lines().count() > 100, "replay run produced too few records");
    println!(
        "acceptance 8 (offline reproducibility): PASS ({} records, byte-identical outputs)",
        records.lines().count()
    );
}

// ---------------------------------------------------------------------------
// criterion 9: prompt fidelity
// ---------------------------------------------------------------------------

#[test]
fn acceptance_9_prompt_fidelity() {
    const SYSTEM_PROMPT: &str = "You are an expert code obfuscater. Your task is to rewrite the given code by the given instructions, to make it less readable while preserving its functionality. Maintain code correctness and ensure the code can still be compiled and run correctly. Do not add any comments indicating the obfuscation process.";
    let samples = load_fixture_corpus();
    let sample = &samples[0];
    let mut checked = 0usize;
    for combo in taxonomy::list_combos() {
        let prompt = obfuscate::build_obfuscation_prompt(sample, combo);
        assert_eq!(prompt.system, SYSTEM_PROMPT, "system prompt must be verbatim");
        for technique_id in &combo.techniques {
            let instruction = taxonomy::technique(*technique_id).instruction;
            assert!(
                prompt.user.contains(instruction),
                "combo {} user prompt missing {} instruction",
                combo.id,
                technique_id
            );
        }
        assert!(prompt.user.contains(&sample.code), "code must embed verbatim");
        checked += 1;
    }
    assert_eq!(checked, 12);
    println!("acceptance 9 (prompt fidelity): PASS (system verbatim, 12 combos covered)");
}
