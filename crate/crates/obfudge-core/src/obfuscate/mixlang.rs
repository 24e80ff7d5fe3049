//! L7/L8: mixed-language constructs. Deterministic mode inserts semantically
//! inert pieces: no-op inline assembly at function entries (L7), or routes an
//! arithmetic value through a C library boundary with an identity fallback
//! (L8, Python via ctypes).

use super::cblock;
use super::pyblock::{LineKind, PySource};
use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Edit, Language, TokenKind};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixVariant {
    InlineAsm,
    ExternalCall,
}

impl MixVariant {
    fn name(self) -> &'static str {
        match self {
            MixVariant::InlineAsm => "inline_asm",
            MixVariant::ExternalCall => "external_call",
        }
    }
}

pub fn inject_mixed_language(
    code: &str,
    language: Language,
    variant: MixVariant,
    seed: u64,
) -> Result<String, ObfuscateError> {
    let id = match variant {
        MixVariant::InlineAsm => crate::taxonomy::TechniqueId::L7,
        MixVariant::ExternalCall => crate::taxonomy::TechniqueId::L8,
    };
    let mut rng = super::technique_rng(seed, id);
    Ok(pass(code, language, variant, &mut rng)?.code)
}

pub(crate) fn pass(
    code: &str,
    language: Language,
    variant: MixVariant,
    _rng: &mut ChaCha8Rng,
) -> Result<PassOutcome, ObfuscateError> {
    match (variant, language) {
        (MixVariant::InlineAsm, Language::C | Language::Cpp) => inline_asm_c(code, language),
        (MixVariant::InlineAsm, Language::Solidity) => inline_asm_solidity(code),
        (MixVariant::ExternalCall, Language::Python) => external_call_python(code),
        _ => Err(ObfuscateError::VariantUnsupportedForLanguage {
            variant: variant.name().to_string(),
            language: language.to_string(),
        }),
    }
}

/// Inserts a no-op assembly statement at each function entry.
fn inline_asm_c(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let mut edits = Vec::new();
    let mut sites = 0u32;
    for f in cblock::find_functions(&lexed) {
        let open = &lexed.tokens[f.body_open];
        edits.push(Edit::insert(open.end, " __asm__ volatile(\"\" ::: \"memory\");"));
        sites += 1;
    }
    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}

fn inline_asm_solidity(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, Language::Solidity).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let mut edits = Vec::new();
    let mut sites = 0u32;
    for f in cblock::find_functions(&lexed) {
        let open = &lexed.tokens[f.body_open];
        edits.push(Edit::insert(open.end, " assembly { let scratch := 0 scratch := add(scratch, 1) }"));
        sites += 1;
    }
    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}

const PY_BRIDGE_NAME: &str = "relay_through_native";

/// Python: defines a ctypes bridge through libc's `labs` (identity on
/// magnitude, sign restored) and routes integer-literal initializations
/// through it. Falls back to the identity when no C runtime is loadable.
fn external_call_python(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let py = PySource::parse(code)?;
    if code.contains(PY_BRIDGE_NAME) {
        return Ok(PassOutcome::unchanged(code));
    }
    let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
    let mut sites = 0u32;

    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code {
            continue;
        }
        let toks = py.tokens_of(logical);
        // NAME = <integer literal>
        if toks.len() == 3
            && py.token(toks[0]).kind == TokenKind::Ident
            && py.token_text(toks[1]) == "="
            && py.token(toks[2]).kind == TokenKind::Number
            && py.token_text(toks[2]).chars().all(|c| c.is_ascii_digit())
        {
            let name = py.token_text(toks[0]);
            let value = py.token_text(toks[2]);
            replacements[li] = Some(vec![format!(
                "{}{} = {PY_BRIDGE_NAME}({})",
                logical.indent, name, value
            )]);
            sites += 1;
        }
    }
    if sites == 0 {
        return Ok(PassOutcome::unchanged(code));
    }

    // bridge helper after the import block
    let mut insert_at_logical = 0usize;
    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code {
            continue;
        }
        match py.head_word(li) {
            Some("import") | Some("from") => insert_at_logical = li + 1,
            _ => break,
        }
    }
    let bridge = vec![
        format!("def {PY_BRIDGE_NAME}(value):"),
        "    try:".to_string(),
        "        import ctypes".to_string(),
        "        native = ctypes.CDLL(None)".to_string(),
        "        native.labs.restype = ctypes.c_long".to_string(),
        "        native.labs.argtypes = [ctypes.c_long]".to_string(),
        "        magnitude = int(native.labs(ctypes.c_long(abs(value))))".to_string(),
        "        return magnitude if value >= 0 else -magnitude".to_string(),
        "    except Exception:".to_string(),
        "        return value".to_string(),
    ];

    let inject_line = if insert_at_logical < py.logicals.len() {
        py.logicals[insert_at_logical].first
    } else {
        py.lines.len()
    };
    let rendered = py.render(&replacements);
    let mut out_lines: Vec<String> = rendered.lines().map(|l| l.to_string()).collect();
    let at = inject_line.min(out_lines.len());
    for (i, l) in bridge.into_iter().enumerate() {
        out_lines.insert(at + i, l);
    }
    let mut text = out_lines.join("\n");
    if code.ends_with('\n') {
        text.push('\n');
    }
    Ok(PassOutcome { code: text, sites })
}
