//! Model endpoints, detection prompts, and the reply cache.
//!
//! Every raw reply persists under `<cache>/<model>/<key>/` so a warm cache
//! replays the full pipeline bit-identically with no network access.

use crate::corpus::LineRange;
use crate::error::DetectError;
use crate::lang::Language;
use crate::obfuscate::PromptPair;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelFamily {
    Qwen,
    Llama,
    Deepseek,
    Openai,
    Other,
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ModelFamily::Qwen => "qwen",
            ModelFamily::Llama => "llama",
            ModelFamily::Deepseek => "deepseek",
            ModelFamily::Openai => "openai",
            ModelFamily::Other => "other",
        };
        f.write_str(s)
    }
}

pub const DEFAULT_TEMPERATURE: f64 = 1e-5;

fn default_temperature() -> f64 {
    DEFAULT_TEMPERATURE
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: String,
    pub family: ModelFamily,
    /// Parameter count in billions, when disclosed.
    #[serde(default)]
    pub param_count: Option<u32>,
    #[serde(default)]
    pub reasoning: bool,
    pub endpoint: Endpoint,
    #[serde(default = "default_temperature")]
    pub temperature: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Endpoint {
    /// Serve exclusively from the cache; a miss is an error.
    Replay,
    /// OpenAI-compatible chat completions endpoint. The API key is read from
    /// the named environment variable.
    OpenAiCompatible {
        base_url: String,
        model: String,
        #[serde(default)]
        api_key_env: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub vuln_type: String,
    pub location: Option<LineRange>,
    pub description: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectionReport {
    pub raw: String,
    pub findings: Vec<Finding>,
    pub model: String,
    pub sample_id: String,
    /// Combo id, or "original" for the unobfuscated version.
    pub combo_id: String,
    /// True when the structured findings section was missing and the
    /// tolerant extractor (or empty fallback) produced the findings.
    #[serde(default)]
    pub fallback_parse: bool,
}

// ---------------------------------------------------------------------------
// detection prompt
// ---------------------------------------------------------------------------

/// Bump when the prompt wording changes; participates in cache keys so a
/// prompt edit invalidates stale replies.
pub const DETECTION_PROMPT_VERSION: &str = "v1";

pub fn build_detection_prompt(sample_code: &str, language: Language) -> PromptPair {
    let system = format!(
        "You are a security auditor reviewing {lang} source code. Identify every \
         vulnerability in the given code. For each finding report its type (a CWE \
         identifier such as CWE-125 when applicable, otherwise a short class name \
         like reentrancy), the affected line range, and a one-line justification. \
         After your analysis, end your reply with a findings section in exactly \
         this format:\n\
         FINDINGS:\n\
         - type: <CWE-### or class name> | lines: <start>-<end> | note: <one line>\n\
         with one line per finding. If you find no vulnerabilities, end with:\n\
         FINDINGS: NONE\n\
         (detection prompt {version})",
        lang = language.fence_name(),
        version = DETECTION_PROMPT_VERSION,
    );
    let user = format!("Audit the following {} code:\n\n{}", language.fence_name(), sample_code);
    PromptPair { system, user }
}

pub fn prompt_digest(prompt: &PromptPair) -> String {
    let mut hasher = Sha256::new();
    hasher.update(prompt.system.as_bytes());
    hasher.update([0x1f]);
    hasher.update(prompt.user.as_bytes());
    let digest = hasher.finalize();
    hex_prefix(&digest, 16)
}

fn hex_prefix(bytes: &[u8], chars: usize) -> String {
    let mut s = String::with_capacity(chars);
    for b in bytes {
        s.push_str(&format!("{b:02x}"));
        if s.len() >= chars {
            break;
        }
    }
    s.truncate(chars);
    s
}

fn sanitize(part: &str) -> String {
    part.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '.' { c } else { '_' })
        .collect()
}

/// Stable, filesystem-safe, injective over its inputs: sanitized fields plus
/// a digest of the raw tuple.
pub fn cache_key(
    model_name: &str,
    dataset: &str,
    sample_id: &str,
    combo_id: &str,
    prompt_digest: &str,
) -> String {
    let mut hasher = Sha256::new();
    for field in [model_name, dataset, sample_id, combo_id, prompt_digest] {
        hasher.update(field.as_bytes());
        hasher.update([0x1f]);
    }
    let digest = hex_prefix(&hasher.finalize(), 12);
    format!(
        "{}__{}__{}__{}",
        sanitize(dataset),
        sanitize(sample_id),
        sanitize(combo_id),
        digest
    )
}

// ---------------------------------------------------------------------------
// findings extraction
// ---------------------------------------------------------------------------

/// Parses the structured findings section; falls back to a tolerant scan of
/// the whole reply. Returns (findings, used_fallback).
pub fn parse_findings(raw: &str) -> (Vec<Finding>, bool) {
    if let Some(pos) = raw.rfind("FINDINGS:") {
        let section = &raw[pos + "FINDINGS:".len()..];
        if section.trim_start().to_ascii_uppercase().starts_with("NONE") {
            return (Vec::new(), false);
        }
        let mut findings = Vec::new();
        for line in section.lines() {
            let line = line.trim();
            let Some(body) = line.strip_prefix('-') else {
                if !line.is_empty() && !findings.is_empty() {
                    break; // structured block ended
                }
                continue;
            };
            let mut vuln_type = String::new();
            let mut location = None;
            let mut description = String::new();
            for piece in body.split('|') {
                let piece = piece.trim();
                if let Some(v) = piece.strip_prefix("type:") {
                    vuln_type = v.trim().to_string();
                } else if let Some(v) = piece.strip_prefix("lines:") {
                    location = parse_line_range(v.trim());
                } else if let Some(v) = piece.strip_prefix("note:") {
                    description = v.trim().to_string();
                }
            }
            if !vuln_type.is_empty() {
                findings.push(Finding { vuln_type, location, description });
            }
        }
        if !findings.is_empty() {
            return (findings, false);
        }
    }
    (scan_loose_findings(raw), true)
}

fn parse_line_range(text: &str) -> Option<LineRange> {
    let text = text.trim();
    if let Some((a, b)) = text.split_once('-') {
        let start: u32 = a.trim().parse().ok()?;
        let end: u32 = b.trim().parse().ok()?;
        if start >= 1 && start <= end {
            return Some(LineRange::new(start, end));
        }
        return None;
    }
    let only: u32 = text.parse().ok()?;
    if only >= 1 {
        Some(LineRange::new(only, only))
    } else {
        None
    }
}

/// Recovers `CWE-###` mentions (with a nearby `lines A-B` if present) from
/// free-form reply text.
fn scan_loose_findings(raw: &str) -> Vec<Finding> {
    let mut findings: Vec<Finding> = Vec::new();
    for line in raw.lines() {
        let lower = line.to_ascii_lowercase();
        let mut from = 0usize;
        while let Some(at) = lower[from..].find("cwe") {
            let start = from + at;
            let rest = &line[start + 3..];
            let digits: String = rest
                .trim_start_matches(['-', '_', ' '])
                .chars()
                .take_while(|c| c.is_ascii_digit())
                .collect();
            from = start + 3;
            if digits.is_empty() {
                continue;
            }
            let vuln_type = format!("CWE-{digits}");
            let location = find_lines_mention(&lower);
            if !findings.iter().any(|f| f.vuln_type == vuln_type && f.location == location) {
                findings.push(Finding {
                    vuln_type,
                    location,
                    description: line.trim().chars().take(160).collect(),
                });
            }
        }
    }
    findings
}

fn find_lines_mention(lower_line: &str) -> Option<LineRange> {
    let at = lower_line.find("line")?;
    let rest = &lower_line[at..];
    let digits_at = rest.find(|c: char| c.is_ascii_digit())?;
    let tail = &rest[digits_at..];
    let start: u32 = tail
        .chars()
        .take_while(|c| c.is_ascii_digit())
        .collect::<String>()
        .parse()
        .ok()?;
    let after = &tail[tail.chars().take_while(|c| c.is_ascii_digit()).count()..];
    let end = after
        .strip_prefix('-')
        .map(|t| {
            t.chars()
                .take_while(|c| c.is_ascii_digit())
                .collect::<String>()
                .parse::<u32>()
                .unwrap_or(start)
        })
        .unwrap_or(start);
    if start >= 1 && start <= end {
        Some(LineRange::new(start, end))
    } else {
        None
    }
}

// ---------------------------------------------------------------------------
// client
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
pub struct DetectorClient {
    pub cache_dir: PathBuf,
    pub replay_only: bool,
    /// Total attempts per request (first try plus retries).
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CacheMeta {
    model: String,
    dataset: String,
    sample_id: String,
    combo_id: String,
    prompt_digest: String,
}

impl DetectorClient {
    pub fn new(cache_dir: impl Into<PathBuf>, replay_only: bool) -> DetectorClient {
        DetectorClient {
            cache_dir: cache_dir.into(),
            replay_only,
            max_attempts: 3,
            backoff_base_ms: 250,
        }
    }

    fn reply_path(&self, model: &str, key: &str) -> PathBuf {
        self.cache_dir.join(sanitize(model)).join(key)
    }

    /// Chat completion with cache-through semantics. Returns the raw reply.
    pub fn cached_completion(
        &self,
        model: &ModelSpec,
        dataset: &str,
        sample_id: &str,
        combo_id: &str,
        prompt: &PromptPair,
    ) -> Result<String, DetectError> {
        let digest = prompt_digest(prompt);
        let key = cache_key(&model.name, dataset, sample_id, combo_id, &digest);
        let dir = self.reply_path(&model.name, &key);
        let reply_file = dir.join("reply.txt");
        if reply_file.exists() {
            return Ok(std::fs::read_to_string(&reply_file)?);
        }
        if self.replay_only || matches!(model.endpoint, Endpoint::Replay) {
            return Err(DetectError::CacheMiss(key));
        }
        let raw = self.call_endpoint(model, prompt)?;
        // write-then-rename so concurrent writers never publish partial data
        let staging = self.cache_dir.join(sanitize(&model.name)).join(format!(
            ".tmp-{}-{}",
            std::process::id(),
            key
        ));
        std::fs::create_dir_all(&staging)?;
        std::fs::write(staging.join("reply.txt"), &raw)?;
        let meta = CacheMeta {
            model: model.name.clone(),
            dataset: dataset.to_string(),
            sample_id: sample_id.to_string(),
            combo_id: combo_id.to_string(),
            prompt_digest: digest,
        };
        std::fs::write(
            staging.join("meta.json"),
            serde_json::to_vec_pretty(&meta).expect("meta serializes"),
        )?;
        match std::fs::rename(&staging, &dir) {
            Ok(()) => {}
            Err(_) if dir.join("reply.txt").exists() => {
                // another writer won the race; their bytes are equivalent
                let _ = std::fs::remove_dir_all(&staging);
            }
            Err(e) => return Err(e.into()),
        }
        Ok(raw)
    }

    fn call_endpoint(&self, model: &ModelSpec, prompt: &PromptPair) -> Result<String, DetectError> {
        let Endpoint::OpenAiCompatible { base_url, model: model_id, api_key_env } = &model.endpoint else {
            return Err(DetectError::EndpointError {
                attempts: 0,
                message: "replay endpoint cannot place requests".into(),
            });
        };
        let url = format!("{}/chat/completions", base_url.trim_end_matches('/'));
        let payload = serde_json::json!({
            "model": model_id,
            "temperature": model.temperature,
            "messages": [
                { "role": "system", "content": prompt.system },
                { "role": "user", "content": prompt.user },
            ],
        });
        let api_key = api_key_env
            .as_ref()
            .and_then(|var| std::env::var(var).ok());

        let mut last_error = String::new();
        for attempt in 0..self.max_attempts {
            if attempt > 0 {
                let delay = self.backoff_base_ms.saturating_mul(1 << (attempt - 1));
                std::thread::sleep(std::time::Duration::from_millis(delay));
            }
            let mut request = ureq::post(&url).header("content-type", "application/json");
            if let Some(key) = &api_key {
                request = request.header("authorization", &format!("Bearer {key}"));
            }
            match request.send_json(&payload) {
                Ok(mut response) => {
                    let body: serde_json::Value = match response.body_mut().read_json() {
                        Ok(v) => v,
                        Err(e) => {
                            last_error = format!("bad json: {e}");
                            continue;
                        }
                    };
                    if let Some(text) = body["choices"][0]["message"]["content"].as_str() {
                        return Ok(text.to_string());
                    }
                    last_error = "reply missing choices[0].message.content".into();
                }
                Err(e) => {
                    last_error = e.to_string();
                }
            }
        }
        Err(DetectError::EndpointError { attempts: self.max_attempts, message: last_error })
    }

    /// Obtains one detection report for a sample version.
    pub fn detect(
        &self,
        model: &ModelSpec,
        dataset: &str,
        sample_id: &str,
        combo_id: &str,
        sample_code: &str,
        language: Language,
    ) -> Result<DetectionReport, DetectError> {
        let prompt = build_detection_prompt(sample_code, language);
        let raw = self.cached_completion(model, dataset, sample_id, combo_id, &prompt)?;
        let (findings, fallback_parse) = parse_findings(&raw);
        Ok(DetectionReport {
            raw,
            findings,
            model: model.name.clone(),
            sample_id: sample_id.to_string(),
            combo_id: combo_id.to_string(),
            fallback_parse,
        })
    }

    /// Seeds a cache entry directly; used to build replay fixtures.
    pub fn seed_reply(
        &self,
        model_name: &str,
        dataset: &str,
        sample_id: &str,
        combo_id: &str,
        prompt: &PromptPair,
        raw_reply: &str,
    ) -> Result<(), DetectError> {
        let digest = prompt_digest(prompt);
        let key = cache_key(model_name, dataset, sample_id, combo_id, &digest);
        let dir = self.reply_path(model_name, &key);
        std::fs::create_dir_all(&dir)?;
        std::fs::write(dir.join("reply.txt"), raw_reply)?;
        let meta = CacheMeta {
            model: model_name.to_string(),
            dataset: dataset.to_string(),
            sample_id: sample_id.to_string(),
            combo_id: combo_id.to_string(),
            prompt_digest: digest,
        };
        std::fs::write(
            dir.join("meta.json"),
            serde_json::to_vec_pretty(&meta).expect("meta serializes"),
        )?;
        Ok(())
    }
}
