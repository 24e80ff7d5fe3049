//! End-to-end runs of the `obfudge` binary over the shipped replay fixtures.

use std::path::{Path, PathBuf};
use std::process::Command;

fn fixture_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../obfudge-core/fixtures")
        .canonicalize()
        .expect("fixtures present")
}

fn write_config(dir: &Path, run_root: &Path, combos: &str) -> PathBuf {
    let fixtures = fixture_root();
    let config = format!(
        r#"
run_root = "{run}"
dataset_root = "{fx}/corpus"
manifest = "{fx}/corpus/manifest.tsv"
cache_dir = "{fx}/replay"
combos = {combos}
seed = 42
jobs = 4
replay_only = true
behavioral_checks = false

[[models]]
name = "replay-alpha"
family = "qwen"
param_count = 7
reasoning = false
temperature = 1e-5

[models.endpoint]
kind = "replay"

[[models]]
name = "replay-beta"
family = "llama"
param_count = 70
reasoning = true
temperature = 1e-5

[models.endpoint]
kind = "replay"
"#,
        run = run_root.display(),
        fx = fixtures.display(),
        combos = combos,
    );
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

fn obfudge() -> Command {
    Command::new(env!("CARGO_BIN_EXE_obfudge"))
}

#[test]
fn replay_run_twice_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let run_a = dir.path().join("run-a");
    let run_b = dir.path().join("run-b");
    let config_a = write_config(&dir.path().join("."), &run_a, "[]");
    let out = obfudge()
        .args(["--config", config_a.to_str().unwrap(), "--replay-only", "run"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    let dir_b = tempfile::tempdir().unwrap();
    let config_b = write_config(dir_b.path(), &run_b, "[]");
    let out = obfudge()
        .args(["--config", config_b.to_str().unwrap(), "--replay-only", "run"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));

    for rel in [
        "metrics/records.jsonl",
        "emit/success_type_eval.txt",
        "emit/success_existence_eval.txt",
    ] {
        let a = std::fs::read(run_a.join(rel)).unwrap();
        let b = std::fs::read(run_b.join(rel)).unwrap();
        assert_eq!(a, b, "{rel} differs between runs");
    }
}

#[test]
fn stage_verbs_compose() {
    let dir = tempfile::tempdir().unwrap();
    let run_root = dir.path().join("run");
    let config = write_config(dir.path(), &run_root, r#"["L1", "C3"]"#);
    for verb in ["ingest", "obfuscate", "equivalence", "detect", "judge", "metrics", "emit"] {
        let out = obfudge()
            .args(["--config", config.to_str().unwrap(), verb])
            .output()
            .unwrap();
        assert!(
            out.status.success(),
            "{verb} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    assert!(run_root.join("ingest/samples.jsonl").exists());
    assert!(run_root.join("metrics/records.jsonl").exists());
    assert!(run_root.join("emit/figures/downgrade_combo.svg").exists());
}

#[test]
fn unknown_combo_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let run_root = dir.path().join("run");
    let config = write_config(dir.path(), &run_root, r#"["L9"]"#);
    let out = obfudge()
        .args(["--config", config.to_str().unwrap(), "run"])
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(2), "config errors exit with 2");
    assert!(!run_root.exists(), "no work may start on invalid config");
}

#[test]
fn export_taxonomy_emits_19_records() {
    let out = obfudge().arg("export-taxonomy").output().unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = stdout.lines().filter(|l| !l.trim().is_empty()).collect();
    assert_eq!(lines.len(), 19);
    let first: serde_json::Value = serde_json::from_str(lines[0]).unwrap();
    assert_eq!(first["id"], "L1");
    assert!(first["instruction"].as_str().unwrap().contains("OX7B4DF339"));
}
