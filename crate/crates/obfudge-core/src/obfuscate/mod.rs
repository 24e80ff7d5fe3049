//! Source-to-source obfuscation: deterministic passes for the taxonomy
//! techniques, plus the prompt-driven LLM mode.
//!
//! Deterministic mode is a pure function of (code, combo, seed): identical
//! inputs give byte-identical outputs.

mod cblock;
mod comments;
mod constants;
mod constructs;
mod datastruct;
mod dynaccess;
mod flatten;
mod formatting;
mod mixlang;
mod opaque;
mod pyblock;
mod rename;
mod virtualize;

pub use comments::strip_comments;
pub use constants::encode_constants;
pub use constructs::transform_constructs;
pub use datastruct::restructure_data;
pub use dynaccess::dynamic_access;
pub use flatten::flatten_control_flow;
pub use formatting::mangle_formatting;
pub use mixlang::{inject_mixed_language, MixVariant};
pub use opaque::insert_opaque_predicates;
pub use rename::rename_identifiers;
pub use virtualize::{interpret, virtualize};

use crate::corpus::{self, SourceSample};
use crate::error::ObfuscateError;
use crate::lang::Language;
use crate::taxonomy::{self, Combo, TechniqueId};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObfuscationMode {
    Deterministic,
    Llm,
}

#[derive(Debug, Clone)]
pub struct ObfuscationRequest<'a> {
    pub sample: &'a SourceSample,
    pub combo: &'a Combo,
    pub mode: ObfuscationMode,
    pub seed: u64,
}

/// Per-technique application status inside one combo run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum Application {
    Applied { sites: u32 },
    Skipped { reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ObfuscationResult {
    pub code: String,
    pub mode: ObfuscationMode,
    /// Technique id -> applied/skipped, for every combo member.
    pub applied: BTreeMap<String, Application>,
    pub loc_after: u32,
    pub complexity_after: u32,
}

/// Outcome of one deterministic pass: rewritten code plus how many sites the
/// pass touched. Zero sites means the pass found nothing applicable.
pub(crate) struct PassOutcome {
    pub code: String,
    pub sites: u32,
}

impl PassOutcome {
    pub fn unchanged(code: &str) -> PassOutcome {
        PassOutcome { code: code.to_string(), sites: 0 }
    }
}

fn technique_rng(seed: u64, id: TechniqueId) -> ChaCha8Rng {
    // split the run seed per technique so a technique's output does not
    // depend on its position in the combo
    let mut h: u64 = 0xcbf29ce484222325;
    for b in id.as_str().bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    ChaCha8Rng::seed_from_u64(seed ^ h)
}

fn run_technique(
    id: TechniqueId,
    code: &str,
    language: Language,
    seed: u64,
) -> Result<PassOutcome, ObfuscateError> {
    let mut rng = technique_rng(seed, id);
    match id {
        TechniqueId::L1 => rename::pass(code, language, &mut rng),
        TechniqueId::L2 => comments::pass(code, language),
        TechniqueId::L3 => formatting::pass(code, language, &mut rng),
        TechniqueId::L4 => constructs::pass_for_to_while(code, language),
        TechniqueId::L5 => constructs::pass_if_to_switch(code, language),
        TechniqueId::L6 => constructs::pass_loop_to_recursion(code, language),
        TechniqueId::L7 => mixlang::pass(code, language, MixVariant::InlineAsm, &mut rng),
        TechniqueId::L8 => mixlang::pass(code, language, MixVariant::ExternalCall, &mut rng),
        TechniqueId::D1 => constants::pass_arithmetic(code, language, &mut rng),
        TechniqueId::D2 => constants::pass_boolean(code, language, &mut rng),
        TechniqueId::D3 => constants::pass_string(code, language, &mut rng),
        TechniqueId::D4 => datastruct::pass_aggregate(code, language),
        TechniqueId::D5 => datastruct::pass_split(code, language),
        TechniqueId::D6 => datastruct::pass_reorder(code, language, &mut rng),
        TechniqueId::D7 => datastruct::pass_scope(code, language),
        TechniqueId::D8 => dynaccess::pass(code, language),
        TechniqueId::C1 => opaque::pass(code, language, &mut rng),
        TechniqueId::C2 => flatten::pass(code, language),
        TechniqueId::C3 => virtualize::pass(code, language),
    }
}

/// Applies a combo to a sample. Deterministic mode runs the member techniques
/// in combo order as source-to-source passes; techniques that do not apply to
/// the sample's language (or find no applicable site) are recorded as skipped,
/// never dropped silently.
pub fn obfuscate(request: &ObfuscationRequest) -> Result<ObfuscationResult, ObfuscateError> {
    let language = request.sample.language;
    if !request.combo.applies_to(language) {
        return Err(ObfuscateError::AllTechniquesInapplicable {
            combo: request.combo.id.to_string(),
            language: language.to_string(),
        });
    }
    match request.mode {
        ObfuscationMode::Deterministic => obfuscate_deterministic(request),
        ObfuscationMode::Llm => Err(ObfuscateError::ModelRefusal(
            "llm mode requires a client; use obfuscate_llm with a detector client".into(),
        )),
    }
}

fn obfuscate_deterministic(request: &ObfuscationRequest) -> Result<ObfuscationResult, ObfuscateError> {
    let language = request.sample.language;
    let mut code = request.sample.code.clone();
    let mut applied = BTreeMap::new();

    for id in &request.combo.techniques {
        let tech = taxonomy::technique(*id);
        if !tech.applies_to(language) {
            applied.insert(
                id.to_string(),
                Application::Skipped { reason: format!("not applicable to {language}") },
            );
            continue;
        }
        match run_technique(*id, &code, language, request.seed) {
            Ok(outcome) => {
                let status = if outcome.sites > 0 {
                    Application::Applied { sites: outcome.sites }
                } else {
                    Application::Skipped { reason: "no applicable sites".into() }
                };
                applied.insert(id.to_string(), status);
                code = outcome.code;
            }
            Err(ObfuscateError::NothingVirtualizable) => {
                applied.insert(
                    id.to_string(),
                    Application::Skipped { reason: "nothing virtualizable".into() },
                );
            }
            Err(ObfuscateError::VariantUnsupportedForLanguage { variant, language }) => {
                applied.insert(
                    id.to_string(),
                    Application::Skipped {
                        reason: format!("variant {variant} unsupported for {language}"),
                    },
                );
            }
            Err(e) => return Err(e),
        }
    }

    finish_result(code, ObfuscationMode::Deterministic, applied, language)
}

fn finish_result(
    code: String,
    mode: ObfuscationMode,
    applied: BTreeMap<String, Application>,
    language: Language,
) -> Result<ObfuscationResult, ObfuscateError> {
    let loc_after = crate::lang::count_loc(&code);
    let complexity_after = corpus::complexity(&code, language)
        .map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    Ok(ObfuscationResult { code, mode, applied, loc_after, complexity_after })
}

// ---------------------------------------------------------------------------
// LLM mode
// ---------------------------------------------------------------------------

/// System and user messages for prompt-driven obfuscation.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub system: String,
    pub user: String,
}

pub const OBFUSCATION_SYSTEM_PROMPT: &str = "You are an expert code obfuscater. Your task is to rewrite the given code by the given instructions, to make it less readable while preserving its functionality. Maintain code correctness and ensure the code can still be compiled and run correctly. Do not add any comments indicating the obfuscation process.";

/// Builds the obfuscation prompt: the fixed system prompt plus the user
/// template with the combo's instruction block and the code substituted.
pub fn build_obfuscation_prompt(sample: &SourceSample, combo: &Combo) -> PromptPair {
    let user = format!(
        "Modify the given code by the following instructions:\n{}\n\nCode:\n{}\n\nYour answer must contain only the modified code! Do not explan anything extra! Wrap the output code with ```language ```, where language is the programming language of the code, like python, c, c++, solidity, etc.",
        combo.instruction_block(),
        sample.code,
    );
    PromptPair { system: OBFUSCATION_SYSTEM_PROMPT.to_string(), user }
}

/// Extracts the first fenced code block from a model reply. A fence language
/// that disagrees with the sample language is accepted with a warning, since
/// models mislabel fences.
pub fn extract_code_block(reply: &str, expected: Language) -> Result<(String, Option<String>), ObfuscateError> {
    let mut lines = reply.lines();
    let mut fence_lang: Option<String> = None;
    let mut body: Vec<&str> = Vec::new();
    let mut inside = false;
    for line in &mut lines {
        let trimmed = line.trim_start();
        if !inside {
            if let Some(rest) = trimmed.strip_prefix("```") {
                inside = true;
                let tag = rest.trim().to_string();
                if !tag.is_empty() {
                    fence_lang = Some(tag);
                }
            }
            continue;
        }
        if trimmed.starts_with("```") {
            let code = body.join("\n");
            if code.trim().is_empty() {
                return Err(ObfuscateError::NoCodeBlock);
            }
            let warning = fence_lang.as_deref().and_then(|tag| {
                let matches = Language::from_name(tag).map(|l| l == expected).unwrap_or(false);
                if matches {
                    None
                } else {
                    Some(format!("fence language `{tag}` does not match sample language {expected}"))
                }
            });
            return Ok((code, warning));
        }
        body.push(line);
    }
    Err(ObfuscateError::NoCodeBlock)
}

/// Runs llm-mode obfuscation through a chat completion function. The closure
/// receives (system, user) and returns the raw model reply.
pub fn obfuscate_llm<F>(request: &ObfuscationRequest, complete: F) -> Result<ObfuscationResult, ObfuscateError>
where
    F: FnOnce(&str, &str) -> Result<String, ObfuscateError>,
{
    let language = request.sample.language;
    if !request.combo.applies_to(language) {
        return Err(ObfuscateError::AllTechniquesInapplicable {
            combo: request.combo.id.to_string(),
            language: language.to_string(),
        });
    }
    let prompt = build_obfuscation_prompt(request.sample, request.combo);
    let reply = complete(&prompt.system, &prompt.user)?;
    if reply.trim().is_empty() {
        return Err(ObfuscateError::ModelRefusal("empty reply".into()));
    }
    let (code, warning) = extract_code_block(&reply, language)?;
    let mut applied = BTreeMap::new();
    for id in &request.combo.techniques {
        let note = match &warning {
            Some(w) => format!("llm pass ({w})"),
            None => "llm pass".to_string(),
        };
        applied.insert(id.to_string(), Application::Skipped { reason: note });
    }
    finish_result(code, ObfuscationMode::Llm, applied, language)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::VulnLabel;

    pub(crate) fn sample_of(code: &str, language: Language) -> SourceSample {
        SourceSample {
            id: "t".into(),
            dataset: "unit".into(),
            language,
            code: code.into(),
            label: VulnLabel { vuln_type: "CWE-1".into(), location: None },
            loc: crate::lang::count_loc(code),
            function_count: 0,
            complexity: corpus::complexity(code, language).unwrap(),
        }
    }

    #[test]
    fn prompt_contains_system_and_instructions() {
        let s = sample_of("x = 1\n", Language::Python);
        let combo = taxonomy::resolve_combo("L1").unwrap();
        let p = build_obfuscation_prompt(&s, combo);
        assert!(p.system.starts_with("You are an expert code obfuscater"));
        assert!(p.user.contains(taxonomy::technique(TechniqueId::L1).instruction));
        assert!(p.user.contains("x = 1"));
        assert!(p.user.ends_with("like python, c, c++, solidity, etc."));
    }

    #[test]
    fn code_block_extraction() {
        let reply = "Sure!\n```python\nx = 2\n```\ntrailing";
        let (code, warn) = extract_code_block(reply, Language::Python).unwrap();
        assert_eq!(code, "x = 2");
        assert!(warn.is_none());

        let mislabeled = "```javascript\nx = 2\n```";
        let (_, warn) = extract_code_block(mislabeled, Language::Python).unwrap();
        assert!(warn.is_some());

        assert!(matches!(
            extract_code_block("no code here", Language::Python),
            Err(ObfuscateError::NoCodeBlock)
        ));
    }

    #[test]
    fn deterministic_mode_is_pure() {
        let s = sample_of("def f(a):\n    return a + 1\n\nprint(f(2))\n", Language::Python);
        let combo = taxonomy::resolve_combo("L1").unwrap();
        let req = ObfuscationRequest { sample: &s, combo, mode: ObfuscationMode::Deterministic, seed: 7 };
        let a = obfuscate(&req).unwrap();
        let b = obfuscate(&req).unwrap();
        assert_eq!(a.code, b.code);
    }

    #[test]
    fn inapplicable_combo_is_an_error() {
        let s = sample_of("int main(void) { return 0; }\n", Language::C);
        let combo = taxonomy::resolve_combo("L8").unwrap();
        let req = ObfuscationRequest { sample: &s, combo, mode: ObfuscationMode::Deterministic, seed: 1 };
        assert!(matches!(
            obfuscate(&req),
            Err(ObfuscateError::AllTechniquesInapplicable { .. })
        ));
    }

    #[test]
    fn every_combo_member_appears_in_applied_map() {
        let s = sample_of("def f(a):\n    return a + 1\n", Language::Python);
        for combo in taxonomy::list_combos() {
            if !combo.applies_to(Language::Python) {
                continue;
            }
            let req = ObfuscationRequest { sample: &s, combo, mode: ObfuscationMode::Deterministic, seed: 3 };
            let out = obfuscate(&req).unwrap();
            for id in &combo.techniques {
                assert!(out.applied.contains_key(&id.to_string()), "{} missing in {}", id, combo.id);
            }
        }
    }
}
