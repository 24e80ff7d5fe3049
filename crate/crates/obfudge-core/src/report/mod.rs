//! Pipeline orchestration: configuration, staged execution with persisted
//! intermediates, and emission of tables and figures.

pub mod figures;
pub mod tables;

use crate::corpus::{self, SourceSample};
use crate::detector::{DetectorClient, ModelSpec};
use crate::equivalence::{self, HarnessSpec};
use crate::error::PipelineError;
use crate::judge::{self, EvaluationMode, Score};
use crate::metrics::{self, BucketEdges, TransitionRecord};
use crate::obfuscate::{self, ObfuscationMode, ObfuscationRequest};
use crate::taxonomy;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunConfig {
    pub run_root: PathBuf,
    pub dataset_root: PathBuf,
    pub manifest: PathBuf,
    /// Datasets to include; empty means every dataset in the manifest.
    #[serde(default)]
    pub datasets: Vec<String>,
    /// Combo ids; empty means all twelve.
    #[serde(default)]
    pub combos: Vec<String>,
    pub models: Vec<ModelSpec>,
    #[serde(default = "default_mode")]
    pub obfuscation_mode: ObfuscationMode,
    #[serde(default = "default_judge")]
    pub judge: JudgeMode,
    #[serde(default)]
    pub judge_model: Option<String>,
    /// Model placing llm-mode obfuscation requests; defaults to the first
    /// configured model.
    #[serde(default)]
    pub obfuscation_model: Option<String>,
    #[serde(default = "default_eval_modes")]
    pub evaluation_modes: Vec<EvaluationMode>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_jobs")]
    pub jobs: usize,
    #[serde(default)]
    pub replay_only: bool,
    pub cache_dir: PathBuf,
    #[serde(default = "default_max_loc")]
    pub max_loc: u32,
    #[serde(default = "default_max_per_cwe")]
    pub max_per_cwe: usize,
    /// Run behavioral equivalence checks for samples with a harness sidecar.
    #[serde(default)]
    pub behavioral_checks: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JudgeMode {
    Deterministic,
    LlmJudge,
}

fn default_mode() -> ObfuscationMode {
    ObfuscationMode::Deterministic
}

fn default_judge() -> JudgeMode {
    JudgeMode::Deterministic
}

fn default_eval_modes() -> Vec<EvaluationMode> {
    vec![EvaluationMode::TypeEval, EvaluationMode::ExistenceEval]
}

fn default_jobs() -> usize {
    4
}

fn default_max_loc() -> u32 {
    corpus::DEFAULT_MAX_LOC
}

fn default_max_per_cwe() -> usize {
    corpus::DEFAULT_MAX_PER_CWE
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<RunConfig, PipelineError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| PipelineError::Config(format!("{}: {e}", path.display())))?;
        let mut config: RunConfig =
            toml::from_str(&text).map_err(|e| PipelineError::Config(e.to_string()))?;
        // paths resolve relative to the config file
        if let Some(base) = path.parent() {
            for p in [&mut config.run_root, &mut config.dataset_root, &mut config.manifest, &mut config.cache_dir] {
                if p.is_relative() {
                    *p = base.join(&p);
                }
            }
        }
        config.validate()?;
        Ok(config)
    }

    /// All referenced ids must resolve before any work starts.
    pub fn validate(&self) -> Result<(), PipelineError> {
        for combo in &self.combos {
            taxonomy::resolve_combo(combo)
                .map_err(|e| PipelineError::Config(e.to_string()))?;
        }
        if self.models.is_empty() {
            return Err(PipelineError::Config("no models configured".into()));
        }
        let mut names = std::collections::BTreeSet::new();
        for m in &self.models {
            if !names.insert(&m.name) {
                return Err(PipelineError::Config(format!("duplicate model name `{}`", m.name)));
            }
        }
        for (field, reference) in [("judge_model", &self.judge_model), ("obfuscation_model", &self.obfuscation_model)] {
            if let Some(name) = reference {
                if !self.models.iter().any(|m| &m.name == name) {
                    return Err(PipelineError::Config(format!(
                        "{field} `{name}` is not a configured model"
                    )));
                }
            }
        }
        if self.judge == JudgeMode::LlmJudge && self.judge_model.is_none() {
            return Err(PipelineError::Config("llm_judge requires judge_model".into()));
        }
        if self.jobs == 0 {
            return Err(PipelineError::Config("jobs must be at least 1".into()));
        }
        Ok(())
    }

    pub fn combo_ids(&self) -> Vec<&'static str> {
        if self.combos.is_empty() {
            taxonomy::COMBO_IDS.to_vec()
        } else {
            self.combos
                .iter()
                .map(|c| taxonomy::resolve_combo(c).expect("validated").id)
                .collect()
        }
    }

    fn digest(&self) -> String {
        let canonical = serde_json::to_vec(self).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&canonical);
        let d = hasher.finalize();
        d.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_digest: String,
    pub seed: u64,
    pub detection_prompt_version: String,
    pub judge_rubric_digest: String,
}

pub const STAGES: &[&str] = &["ingest", "obfuscate", "equivalence", "detect", "judge", "metrics", "emit"];

fn stage_dir(config: &RunConfig, stage: &str) -> PathBuf {
    config.run_root.join(stage)
}

fn stage_done(config: &RunConfig, stage: &str) -> bool {
    stage_dir(config, stage).join(".complete").exists()
}

fn mark_done(config: &RunConfig, stage: &str) -> Result<(), PipelineError> {
    std::fs::write(stage_dir(config, stage).join(".complete"), b"")?;
    Ok(())
}

/// Runs every stage in order; stages whose outputs exist are skipped, so a
/// partially complete run resumes where it stopped.
pub fn run_pipeline(config: &RunConfig) -> Result<PathBuf, PipelineError> {
    config.validate()?;
    std::fs::create_dir_all(&config.run_root)?;
    let meta = RunMeta {
        config_digest: config.digest(),
        seed: config.seed,
        detection_prompt_version: crate::detector::DETECTION_PROMPT_VERSION.to_string(),
        judge_rubric_digest: judge::judge_rubric_digest(),
    };
    std::fs::write(
        config.run_root.join("run_meta.json"),
        serde_json::to_vec_pretty(&meta).expect("meta serializes"),
    )?;

    if !stage_done(config, "ingest") {
        stage_ingest(config)?;
    }
    if !stage_done(config, "obfuscate") {
        stage_obfuscate(config)?;
    }
    if !stage_done(config, "equivalence") {
        stage_equivalence(config)?;
    }
    if !stage_done(config, "detect") {
        stage_detect(config)?;
    }
    if !stage_done(config, "judge") {
        stage_judge(config)?;
    }
    if !stage_done(config, "metrics") {
        stage_metrics(config)?;
    }
    if !stage_done(config, "emit") {
        stage_emit(config)?;
    }
    Ok(config.run_root.clone())
}

// ---------------------------------------------------------------------------
// stage: ingest
// ---------------------------------------------------------------------------

pub fn stage_ingest(config: &RunConfig) -> Result<(), PipelineError> {
    let dir = stage_dir(config, "ingest");
    std::fs::create_dir_all(&dir)?;
    let samples = corpus::ingest(&config.dataset_root, &config.manifest)
        .map_err(|e| PipelineError::stage("ingest", e))?;
    let samples: Vec<SourceSample> = samples
        .into_iter()
        .filter(|s| config.datasets.is_empty() || config.datasets.contains(&s.dataset))
        .collect();
    let filtered = corpus::filter_corpus(&samples, config.max_loc, config.max_per_cwe);
    if filtered.is_empty() {
        return Err(PipelineError::stage("ingest", "no samples after filtering"));
    }
    write_jsonl(&dir.join("samples.jsonl"), &filtered)?;
    mark_done(config, "ingest")
}

pub fn load_samples(config: &RunConfig) -> Result<Vec<SourceSample>, PipelineError> {
    read_jsonl(&stage_dir(config, "ingest").join("samples.jsonl"))
}

// ---------------------------------------------------------------------------
// stage: obfuscate
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct VariantDiag {
    sample_id: String,
    combo_id: String,
    status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    applied: Option<BTreeMap<String, obfuscate::Application>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loc_after: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    complexity_after: Option<u32>,
}

pub fn stage_obfuscate(config: &RunConfig) -> Result<(), PipelineError> {
    let dir = stage_dir(config, "obfuscate");
    std::fs::create_dir_all(&dir)?;
    let samples = load_samples(config)?;
    for sample in &samples {
        for combo_id in config.combo_ids() {
            let combo = taxonomy::resolve_combo(combo_id).expect("validated");
            let out_dir = dir.join(&sample.dataset).join(combo_id);
            std::fs::create_dir_all(&out_dir)?;
            let diag_path = out_dir.join(format!("{}.diag.json", sample.id));
            if !combo.applies_to(sample.language) {
                let diag = VariantDiag {
                    sample_id: sample.id.clone(),
                    combo_id: combo_id.to_string(),
                    status: "inapplicable".into(),
                    applied: None,
                    loc_after: None,
                    complexity_after: None,
                };
                std::fs::write(&diag_path, serde_json::to_vec_pretty(&diag).unwrap())?;
                continue;
            }
            let request = ObfuscationRequest {
                sample,
                combo,
                mode: config.obfuscation_mode,
                seed: config.seed,
            };
            let result = match config.obfuscation_mode {
                ObfuscationMode::Deterministic => obfuscate::obfuscate(&request),
                ObfuscationMode::Llm => {
                    let client = DetectorClient::new(&config.cache_dir, config.replay_only);
                    let model = match &config.obfuscation_model {
                        Some(name) => config.models.iter().find(|m| &m.name == name),
                        None => config.models.first(),
                    }
                    .ok_or_else(|| PipelineError::stage("obfuscate", "llm mode needs a model"))?;
                    obfuscate::obfuscate_llm(&request, |system, user| {
                        let prompt = obfuscate::PromptPair {
                            system: system.to_string(),
                            user: user.to_string(),
                        };
                        client
                            .cached_completion(model, &sample.dataset, &sample.id, &format!("obf-{combo_id}"), &prompt)
                            .map_err(crate::error::ObfuscateError::from)
                    })
                }
            };
            let result = result.map_err(|e| {
                PipelineError::stage("obfuscate", format!("{}/{}/{}: {e}", sample.dataset, combo_id, sample.id))
            })?;
            let ext = sample.language.file_extension();
            std::fs::write(out_dir.join(format!("{}.{ext}", sample.id)), &result.code)?;
            let diag = VariantDiag {
                sample_id: sample.id.clone(),
                combo_id: combo_id.to_string(),
                status: "ok".into(),
                applied: Some(result.applied.clone()),
                loc_after: Some(result.loc_after),
                complexity_after: Some(result.complexity_after),
            };
            std::fs::write(&diag_path, serde_json::to_vec_pretty(&diag).unwrap())?;
        }
    }
    mark_done(config, "obfuscate")
}

pub fn load_variant(config: &RunConfig, sample: &SourceSample, combo_id: &str) -> Option<(String, u32, u32)> {
    let dir = stage_dir(config, "obfuscate").join(&sample.dataset).join(combo_id);
    let code = std::fs::read_to_string(dir.join(format!("{}.{}", sample.id, sample.language.file_extension()))).ok()?;
    let diag: VariantDiag =
        serde_json::from_slice(&std::fs::read(dir.join(format!("{}.diag.json", sample.id))).ok()?).ok()?;
    Some((code, diag.loc_after.unwrap_or(0), diag.complexity_after.unwrap_or(0)))
}

// ---------------------------------------------------------------------------
// stage: equivalence
// ---------------------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize)]
struct VerdictRow {
    sample_id: String,
    dataset: String,
    combo_id: String,
    parse_ok: bool,
    behavior: equivalence::Behavior,
    details: String,
}

pub fn stage_equivalence(config: &RunConfig) -> Result<(), PipelineError> {
    let dir = stage_dir(config, "equivalence");
    std::fs::create_dir_all(&dir)?;
    let samples = load_samples(config)?;
    let mut rows: Vec<VerdictRow> = Vec::new();
    for sample in &samples {
        let harness = load_harness(config, sample);
        for combo_id in config.combo_ids() {
            let Some((code, _, _)) = load_variant(config, sample, combo_id) else { continue };
            let verdict = if config.behavioral_checks {
                equivalence::behavioral_check(&sample.code, &code, sample.language, harness.as_ref())
                    .map_err(|e| PipelineError::stage("equivalence", e))?
            } else {
                let parse = equivalence::parse_check(&code, sample.language);
                equivalence::EquivalenceVerdict {
                    parse_ok: parse.ok,
                    behavior: equivalence::Behavior::NotRunnable,
                    details: "behavioral checks disabled".into(),
                }
            };
            rows.push(VerdictRow {
                sample_id: sample.id.clone(),
                dataset: sample.dataset.clone(),
                combo_id: combo_id.to_string(),
                parse_ok: verdict.parse_ok,
                behavior: verdict.behavior,
                details: verdict.details,
            });
        }
    }
    rows.sort_by(|a, b| (&a.dataset, &a.sample_id, &a.combo_id).cmp(&(&b.dataset, &b.sample_id, &b.combo_id)));
    write_jsonl(&dir.join("verdicts.jsonl"), &rows)?;
    mark_done(config, "equivalence")
}

/// Harness sidecar: `<dataset_root>/<dataset>/<sample>.harness.json`.
pub fn load_harness(config: &RunConfig, sample: &SourceSample) -> Option<HarnessSpec> {
    let path = config
        .dataset_root
        .join(&sample.dataset)
        .join(format!("{}.harness.json", sample.id));
    let bytes = std::fs::read(path).ok()?;
    serde_json::from_slice(&bytes).ok()
}

// ---------------------------------------------------------------------------
// stage: detect
// ---------------------------------------------------------------------------

pub const ORIGINAL_ID: &str = "original";

pub fn stage_detect(config: &RunConfig) -> Result<(), PipelineError> {
    let dir = stage_dir(config, "detect");
    std::fs::create_dir_all(&dir)?;
    let samples = load_samples(config)?;
    let client = DetectorClient::new(&config.cache_dir, config.replay_only);

    struct Item {
        model_idx: usize,
        sample_idx: usize,
        combo_id: String,
        code: String,
    }
    let mut items: Vec<Item> = Vec::new();
    for (mi, _) in config.models.iter().enumerate() {
        for (si, sample) in samples.iter().enumerate() {
            items.push(Item {
                model_idx: mi,
                sample_idx: si,
                combo_id: ORIGINAL_ID.to_string(),
                code: sample.code.clone(),
            });
            for combo_id in config.combo_ids() {
                if let Some((code, _, _)) = load_variant(config, sample, combo_id) {
                    items.push(Item {
                        model_idx: mi,
                        sample_idx: si,
                        combo_id: combo_id.to_string(),
                        code,
                    });
                }
            }
        }
    }

    for m in &config.models {
        std::fs::create_dir_all(dir.join(&m.name))?;
    }
    let queue = Mutex::new(items.into_iter().collect::<std::collections::VecDeque<_>>());
    let errors: Mutex<Vec<String>> = Mutex::new(Vec::new());
    let workers = config.jobs.max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let item = {
                    let mut q = queue.lock().unwrap();
                    q.pop_front()
                };
                let Some(item) = item else { break };
                let model = &config.models[item.model_idx];
                let sample = &samples[item.sample_idx];
                match client.detect(model, &sample.dataset, &sample.id, &item.combo_id, &item.code, sample.language) {
                    Ok(report) => {
                        let path = dir
                            .join(&model.name)
                            .join(format!("{}__{}.json", sample.id, item.combo_id));
                        if let Err(e) = std::fs::write(&path, serde_json::to_vec_pretty(&report).unwrap()) {
                            errors.lock().unwrap().push(e.to_string());
                        }
                    }
                    Err(e) => {
                        errors.lock().unwrap().push(format!(
                            "{}/{}/{}: {e}",
                            model.name, sample.id, item.combo_id
                        ));
                    }
                }
            });
        }
    });
    let errors = errors.into_inner().unwrap();
    if !errors.is_empty() {
        return Err(PipelineError::stage("detect", errors.join("; ")));
    }
    mark_done(config, "detect")
}

// ---------------------------------------------------------------------------
// stage: judge
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScoreRow {
    pub model: String,
    pub dataset: String,
    pub sample_id: String,
    pub combo_id: String,
    pub score: Score,
}

pub fn stage_judge(config: &RunConfig) -> Result<(), PipelineError> {
    let dir = stage_dir(config, "judge");
    std::fs::create_dir_all(&dir)?;
    let samples = load_samples(config)?;
    let detect_dir = stage_dir(config, "detect");
    let client = DetectorClient::new(&config.cache_dir, config.replay_only);
    let judge_model = config
        .judge_model
        .as_ref()
        .and_then(|name| config.models.iter().find(|m| &m.name == name));

    let mut rows: Vec<ScoreRow> = Vec::new();
    for model in &config.models {
        for sample in &samples {
            let mut combo_ids = vec![ORIGINAL_ID.to_string()];
            combo_ids.extend(config.combo_ids().iter().map(|s| s.to_string()));
            for combo_id in combo_ids {
                let path = detect_dir
                    .join(&model.name)
                    .join(format!("{}__{}.json", sample.id, combo_id));
                let Ok(bytes) = std::fs::read(&path) else { continue };
                let report: crate::detector::DetectionReport = serde_json::from_slice(&bytes)
                    .map_err(|e| PipelineError::stage("judge", format!("{}: {e}", path.display())))?;
                let score = match config.judge {
                    JudgeMode::Deterministic => judge::score_report(&report, &sample.label),
                    JudgeMode::LlmJudge => {
                        let jm = judge_model
                            .ok_or_else(|| PipelineError::stage("judge", "judge model missing"))?;
                        let prompt = judge::build_judge_prompt(&report, &sample.label);
                        let raw = client
                            .cached_completion(jm, &sample.dataset, &sample.id, &format!("judge-{combo_id}"), &prompt)
                            .map_err(|e| PipelineError::stage("judge", e))?;
                        judge::parse_judge_reply(&raw).map_err(|e| PipelineError::stage("judge", e))?
                    }
                };
                rows.push(ScoreRow {
                    model: model.name.clone(),
                    dataset: sample.dataset.clone(),
                    sample_id: sample.id.clone(),
                    combo_id,
                    score,
                });
            }
        }
    }
    rows.sort_by(|a, b| {
        (&a.model, &a.dataset, &a.sample_id, &a.combo_id)
            .cmp(&(&b.model, &b.dataset, &b.sample_id, &b.combo_id))
    });
    write_jsonl(&dir.join("scores.jsonl"), &rows)?;
    mark_done(config, "judge")
}

pub fn load_scores(config: &RunConfig) -> Result<Vec<ScoreRow>, PipelineError> {
    read_jsonl(&stage_dir(config, "judge").join("scores.jsonl"))
}

// ---------------------------------------------------------------------------
// stage: metrics
// ---------------------------------------------------------------------------

pub fn stage_metrics(config: &RunConfig) -> Result<(), PipelineError> {
    let dir = stage_dir(config, "metrics");
    std::fs::create_dir_all(&dir)?;
    let samples = load_samples(config)?;
    let scores = load_scores(config)?;

    let mut originals: BTreeMap<(String, String), Score> = BTreeMap::new();
    for row in &scores {
        if row.combo_id == ORIGINAL_ID {
            originals.insert((row.model.clone(), row.sample_id.clone()), row.score);
        }
    }
    let sample_by_id: BTreeMap<&str, &SourceSample> =
        samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let model_by_name: BTreeMap<&str, &ModelSpec> =
        config.models.iter().map(|m| (m.name.as_str(), m)).collect();

    let mut records: Vec<TransitionRecord> = Vec::new();
    for row in &scores {
        if row.combo_id == ORIGINAL_ID {
            continue;
        }
        let Some(orig) = originals.get(&(row.model.clone(), row.sample_id.clone())) else { continue };
        let Some(sample) = sample_by_id.get(row.sample_id.as_str()) else { continue };
        let Some(model) = model_by_name.get(row.model.as_str()) else { continue };
        let (loc_after, complexity_after) = load_variant(config, sample, &row.combo_id)
            .map(|(_, l, c)| (l, c))
            .unwrap_or((sample.loc, sample.complexity));
        records.push(TransitionRecord {
            sample_id: row.sample_id.clone(),
            model: row.model.clone(),
            combo_id: row.combo_id.clone(),
            score_original: *orig,
            score_obfuscated: row.score,
            dataset: sample.dataset.clone(),
            language: sample.language.name().to_string(),
            vuln_type: sample.label.vuln_type.clone(),
            loc: sample.loc,
            complexity: sample.complexity,
            loc_after,
            complexity_after,
            family: model.family,
            param_count: model.param_count,
            reasoning: model.reasoning,
        });
    }
    records.sort_by(|a, b| {
        (&a.model, &a.dataset, &a.sample_id, &a.combo_id)
            .cmp(&(&b.model, &b.dataset, &b.sample_id, &b.combo_id))
    });
    write_jsonl(&dir.join("records.jsonl"), &records)?;

    let edges = metrics::bucket_edges(&records);
    std::fs::write(dir.join("buckets.json"), serde_json::to_vec_pretty(&edges).unwrap())?;

    let mut summary: BTreeMap<String, Vec<metrics::GroupRates>> = BTreeMap::new();
    for dimension in metrics::Dimension::all() {
        summary.insert(
            dimension.name().to_string(),
            metrics::transition_rates(&records, dimension, &edges),
        );
    }
    std::fs::write(dir.join("summary.json"), serde_json::to_vec_pretty(&summary).unwrap())?;
    mark_done(config, "metrics")
}

pub fn load_records(config: &RunConfig) -> Result<Vec<TransitionRecord>, PipelineError> {
    read_jsonl(&stage_dir(config, "metrics").join("records.jsonl"))
}

pub fn load_bucket_edges(config: &RunConfig) -> Result<BucketEdges, PipelineError> {
    let bytes = std::fs::read(stage_dir(config, "metrics").join("buckets.json"))?;
    serde_json::from_slice(&bytes).map_err(|e| PipelineError::stage("metrics", e))
}

// ---------------------------------------------------------------------------
// stage: emit
// ---------------------------------------------------------------------------

pub fn stage_emit(config: &RunConfig) -> Result<(), PipelineError> {
    let dir = stage_dir(config, "emit");
    std::fs::create_dir_all(&dir)?;
    let scores = load_scores(config)?;
    let records = load_records(config)?;
    let edges = load_bucket_edges(config)?;

    for mode in &config.evaluation_modes {
        let (text, sidecar) = tables::success_table(&scores, config, *mode);
        std::fs::write(dir.join(format!("success_{}.txt", mode.name())), text)?;
        std::fs::write(
            dir.join(format!("success_{}.json", mode.name())),
            serde_json::to_vec_pretty(&sidecar).unwrap(),
        )?;
    }

    let fig_dir = dir.join("figures");
    std::fs::create_dir_all(&fig_dir)?;
    figures::emit_distribution_figures(&records, &edges, &fig_dir)
        .map_err(|e| PipelineError::stage("emit", e))?;
    mark_done(config, "emit")
}

// ---------------------------------------------------------------------------
// jsonl helpers
// ---------------------------------------------------------------------------

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), PipelineError> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).expect("row serializes"));
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, PipelineError> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        rows.push(
            serde_json::from_str(line)
                .map_err(|e| PipelineError::stage("io", format!("{}:{}: {e}", path.display(), i + 1)))?,
        );
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detector::{Endpoint, ModelFamily};

    fn minimal_config(root: &Path) -> RunConfig {
        RunConfig {
            run_root: root.join("run"),
            dataset_root: root.join("corpus"),
            manifest: root.join("corpus/manifest.tsv"),
            datasets: vec![],
            combos: vec![],
            models: vec![ModelSpec {
                name: "replay-a".into(),
                family: ModelFamily::Qwen,
                param_count: Some(7),
                reasoning: false,
                endpoint: Endpoint::Replay,
                temperature: 1e-5,
            }],
            obfuscation_mode: ObfuscationMode::Deterministic,
            judge: JudgeMode::Deterministic,
            judge_model: None,
            obfuscation_model: None,
            evaluation_modes: default_eval_modes(),
            seed: 1,
            jobs: 2,
            replay_only: true,
            cache_dir: root.join("cache"),
            max_loc: 500,
            max_per_cwe: 5,
            behavioral_checks: false,
        }
    }

    #[test]
    fn unknown_combo_rejected_before_work() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = minimal_config(dir.path());
        config.combos = vec!["L9".into()];
        let err = config.validate();
        assert!(matches!(err, Err(PipelineError::Config(_))));
        // no stage directory was created
        assert!(!config.run_root.exists());
    }

    #[test]
    fn config_file_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.toml");
        std::fs::write(
            &path,
            r#"
run_root = "run"
dataset_root = "corpus"
manifest = "corpus/manifest.tsv"
cache_dir = "cache"
seed = 7
replay_only = true

[[models]]
name = "replay-a"
family = "qwen"
param_count = 7
reasoning = false
temperature = 1e-5

[models.endpoint]
kind = "replay"
"#,
        )
        .unwrap();
        let config = RunConfig::from_file(&path).unwrap();
        assert_eq!(config.seed, 7);
        assert!(config.replay_only);
        assert!(config.run_root.is_absolute() || config.run_root.starts_with(dir.path()));
        assert_eq!(config.combo_ids().len(), 12);
    }
}
