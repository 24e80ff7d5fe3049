//! Pipeline integration: replay-mode runs over the shipped fixtures, stage
//! resumability, and the fixture regeneration entry point.

use obfudge_core::corpus::SourceSample;
use obfudge_core::detector::{DetectorClient, Endpoint, ModelSpec};
use obfudge_core::judge::EvaluationMode;
use obfudge_core::metrics::Transition;
use obfudge_core::obfuscate::{self, ObfuscationMode, ObfuscationRequest};
use obfudge_core::report::{self, JudgeMode, RunConfig};
use obfudge_core::taxonomy;
use std::path::{Path, PathBuf};

const FIXTURE_SEED: u64 = 42;

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures")
}

fn replay_models() -> Vec<ModelSpec> {
    vec![
        ModelSpec {
            name: "replay-alpha".into(),
            family: obfudge_core::detector::ModelFamily::Qwen,
            param_count: Some(7),
            reasoning: false,
            endpoint: Endpoint::Replay,
            temperature: 1e-5,
        },
        ModelSpec {
            name: "replay-beta".into(),
            family: obfudge_core::detector::ModelFamily::Llama,
            param_count: Some(70),
            reasoning: true,
            endpoint: Endpoint::Replay,
            temperature: 1e-5,
        },
    ]
}

fn replay_config(run_root: PathBuf) -> RunConfig {
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
fn replay_run_completes_offline_and_resumes() {
    let scratch = tempfile::tempdir().unwrap();
    let config = replay_config(scratch.path().join("run"));
    report::run_pipeline(&config).expect("replay pipeline");

    // the emit stage regenerates without re-running earlier stages
    let detect_marker = config.run_root.join("detect/.complete");
    let detect_mtime = std::fs::metadata(&detect_marker).unwrap().modified().unwrap();
    std::fs::remove_dir_all(config.run_root.join("emit")).unwrap();
    report::run_pipeline(&config).expect("resume");
    assert!(config.run_root.join("emit/success_type_eval.txt").exists());
    let detect_mtime_after = std::fs::metadata(&detect_marker).unwrap().modified().unwrap();
    assert_eq!(detect_mtime, detect_mtime_after, "detect stage must not rerun");

    // transitions exist in both directions somewhere in the replay data
    let records = report::load_records(&config).unwrap();
    let has_downgrade = records.iter().any(|r| r.transition() == Transition::Downgrade);
    let has_upgrade = records.iter().any(|r| r.transition() == Transition::Upgrade);
    assert!(has_downgrade && has_upgrade, "replay fixtures should produce both transition kinds");

    // 22 figures + 22 sidecars
    let figures: Vec<_> = std::fs::read_dir(config.run_root.join("emit/figures"))
        .unwrap()
        .collect();
    assert_eq!(figures.len(), 44);
}

#[test]
fn llm_judge_stage_agrees_with_deterministic_scores() {
    let scratch = tempfile::tempdir().unwrap();
    let config = replay_config(scratch.path().join("run"));
    report::run_pipeline(&config).expect("deterministic replay run");
    let expected = report::load_scores(&config).unwrap();

    // rewind to just before judging and rerun with the llm judge, seeding
    // one "SCORE: n" reply per report from the deterministic grades
    for stage in ["judge", "metrics", "emit"] {
        std::fs::remove_dir_all(config.run_root.join(stage)).unwrap();
    }
    let judge_cache = scratch.path().join("judge-cache");
    let mut llm_config = config.clone();
    llm_config.judge = JudgeMode::LlmJudge;
    llm_config.judge_model = Some("replay-beta".into());
    llm_config.cache_dir = judge_cache.clone();

    let samples = report::load_samples(&config).unwrap();
    let client = DetectorClient::new(&judge_cache, false);
    for row in &expected {
        let sample = samples.iter().find(|s| s.id == row.sample_id).unwrap();
        let report_path = config
            .run_root
            .join("detect")
            .join(&row.model)
            .join(format!("{}__{}.json", row.sample_id, row.combo_id));
        let report: obfudge_core::detector::DetectionReport =
            serde_json::from_slice(&std::fs::read(report_path).unwrap()).unwrap();
        let prompt = obfudge_core::judge::build_judge_prompt(&report, &sample.label);
        client
            .seed_reply(
                "replay-beta",
                &sample.dataset,
                &sample.id,
                &format!("judge-{}", row.combo_id),
                &prompt,
                &format!("Reviewing the report against the ground truth.\nSCORE: {}", row.score.value()),
            )
            .unwrap();
    }

    report::run_pipeline(&llm_config).expect("llm-judged rerun");
    let got = report::load_scores(&llm_config).unwrap();
    assert_eq!(got.len(), expected.len());
    for (g, e) in got.iter().zip(expected.iter()) {
        assert_eq!(g.score, e.score, "{} {} {}", g.model, g.sample_id, g.combo_id);
    }
}

#[test]
fn replay_only_missing_key_is_cache_miss() {
    let scratch = tempfile::tempdir().unwrap();
    let mut config = replay_config(scratch.path().join("run"));
    config.cache_dir = scratch.path().join("empty-cache");
    let err = report::run_pipeline(&config).unwrap_err();
    let message = err.to_string();
    assert!(message.contains("cache miss"), "{message}");
}

// ---------------------------------------------------------------------------
// fixture regeneration
// ---------------------------------------------------------------------------

/// Deterministic synthetic reply for one (model, sample, combo) cell. The
/// outcome class is a hash of the identifiers, biased so stronger models and
/// heavier combos shift the distribution the way the replay corpus needs
/// both downgrades and upgrades.
fn synthesize_reply(model: &ModelSpec, sample: &SourceSample, combo_id: &str) -> String {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in model
        .name
        .bytes()
        .chain(sample.id.bytes())
        .chain(combo_id.bytes())
    {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    let strong = model.param_count.unwrap_or(0) >= 8;
    let heavy = matches!(combo_id, "C2" | "C3" | "L7" | "L8");
    let roll = (h >> 8) % 100;
    let hit_threshold = match (strong, combo_id == "original", heavy) {
        (true, true, _) => 75,
        (false, true, _) => 45,
        (true, false, false) => 60,
        (true, false, true) => 35,
        (false, false, false) => 35,
        (false, false, true) => 15,
    };
    let label = &sample.label;
    let location = label
        .location
        .map(|r| format!("{}-{}", r.start, r.end))
        .unwrap_or_else(|| "1-5".into());
    if roll < hit_threshold {
        let extra = (h >> 16) % 3 == 0;
        let mut reply = format!(
            "After reviewing the code I found issues.\n\nFINDINGS:\n- type: {} | lines: {} | note: matches the risky pattern\n",
            label.vuln_type, location
        );
        if extra {
            reply.push_str("- type: CWE-703 | lines: 1-2 | note: improper error handling\n");
        }
        reply
    } else if roll < hit_threshold + 20 {
        format!(
            "The code has a problem.\n\nFINDINGS:\n- type: CWE-{} | lines: 1-3 | note: suspicious construct\n",
            400 + (h % 97)
        )
    } else {
        "I reviewed the code carefully and found no security issues.\n\nFINDINGS: NONE\n".to_string()
    }
}

/// Regenerates fixtures/replay from the current transforms. Run after any
/// change that alters deterministic obfuscation output:
/// `cargo test -p obfudge-core --test pipeline regen_replay_fixtures -- --ignored`
#[test]
#[ignore = "writes into fixtures/replay; run explicitly after transform changes"]
fn regen_replay_fixtures() {
    let replay_dir = fixture_root().join("replay");
    if replay_dir.exists() {
        std::fs::remove_dir_all(&replay_dir).unwrap();
    }
    std::fs::create_dir_all(&replay_dir).unwrap();

    let corpus_root = fixture_root().join("corpus");
    let samples =
        obfudge_core::corpus::ingest(&corpus_root, &corpus_root.join("manifest.tsv")).unwrap();
    let client = DetectorClient::new(&replay_dir, false);
    let mut seeded = 0usize;

    for model in replay_models() {
        for sample in &samples {
            // original
            let prompt = obfudge_core::detector::build_detection_prompt(&sample.code, sample.language);
            client
                .seed_reply(
                    &model.name,
                    &sample.dataset,
                    &sample.id,
                    "original",
                    &prompt,
                    &synthesize_reply(&model, sample, "original"),
                )
                .unwrap();
            seeded += 1;
            // every applicable combo, with the exact variant bytes
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
                let variant = obfuscate::obfuscate(&request)
                    .unwrap_or_else(|e| panic!("{} x {}: {e}", sample.id, combo.id));
                let prompt =
                    obfudge_core::detector::build_detection_prompt(&variant.code, sample.language);
                client
                    .seed_reply(
                        &model.name,
                        &sample.dataset,
                        &sample.id,
                        combo.id,
                        &prompt,
                        &synthesize_reply(&model, sample, combo.id),
                    )
                    .unwrap();
                seeded += 1;
            }
        }
    }
    println!("seeded {seeded} replay fixtures under {}", replay_dir.display());
}
