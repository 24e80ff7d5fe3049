//! C1: opaque predicates guarding original statements, with dead junk in
//! the false arm. Conditions are constant-true by construction: n*n + n is
//! even for every integer n.

use super::cblock::{self, CStmt};
use super::pyblock::{indent_step, LineKind, PySource};
use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Edit, Language, TokenKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;

pub fn insert_opaque_predicates(code: &str, language: Language, seed: u64) -> Result<String, ObfuscateError> {
    let mut rng = super::technique_rng(seed, crate::taxonomy::TechniqueId::C1);
    Ok(pass(code, language, &mut rng)?.code)
}

const FRESH_NAMES: &[&str] = &[
    "session_salt", "buffer_offset", "cache_index", "sync_window", "retry_budget",
    "frame_cursor", "pool_stride", "shard_weight", "lease_ticks", "probe_gap",
];

const JUNK_NAMES: &[&str] = &[
    "retry_count", "spill_marker", "drain_level", "audit_skew", "merge_bias",
    "fence_depth", "slot_drift", "trace_pad", "queue_debt", "flush_mark",
];

struct NamePool {
    used: BTreeSet<String>,
    counter: u32,
}

impl NamePool {
    fn new(code: &str, language: Language) -> NamePool {
        let used = lang::lex(code, language)
            .map(|lexed| {
                lexed
                    .tokens
                    .iter()
                    .filter(|t| t.kind == TokenKind::Ident)
                    .map(|t| lexed.text(t).to_string())
                    .collect()
            })
            .unwrap_or_default();
        NamePool { used, counter: 0 }
    }

    fn fresh(&mut self, pool: &[&str], rng: &mut ChaCha8Rng) -> String {
        let base = pool[rng.random_range(0..pool.len() as u32) as usize];
        let mut name = base.to_string();
        while self.used.contains(&name) {
            self.counter += 1;
            name = format!("{base}{}", self.counter);
        }
        self.used.insert(name.clone());
        name
    }
}

/// Predicate text over a fresh integer variable, always true.
fn predicate(var: &str, rng: &mut ChaCha8Rng) -> String {
    match rng.random_range(0..3u32) {
        0 => format!("({var} * {var} + {var}) % 2 == 0"),
        1 => format!("({var} * ({var} + 1)) % 2 == 0"),
        _ => format!("(7 * {var} * {var} + {var}) % 2 == 0"),
    }
}

pub(crate) fn pass(code: &str, language: Language, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::Python => pass_python(code, rng),
        _ => pass_c_like(code, language, rng),
    }
}

fn pass_python(code: &str, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    let py = PySource::parse(code)?;
    let step = indent_step(&py);
    let mut names = NamePool::new(code, Language::Python);
    let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
    let mut sites = 0u32;

    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code || py.opens_suite(li) {
            continue;
        }
        let head = py.head_word(li).unwrap_or("");
        // wrap plain simple statements; leave control/scope statements alone
        if matches!(head, "import" | "from" | "global" | "nonlocal" | "pass" | "break" | "continue" | "else" | "elif" | "except" | "finally" | "case" | "raise" | "yield" | "del" | "assert" | "@") {
            continue;
        }
        if logical.indent.contains('\t') {
            continue;
        }
        // seeded selection, roughly one of three statements
        if rng.random_range(0..3u32) != 0 {
            continue;
        }
        let indent = logical.indent.clone();
        let fresh = names.fresh(FRESH_NAMES, rng);
        let junk = names.fresh(JUNK_NAMES, rng);
        let init: i64 = rng.random_range(3..40);
        let cond = predicate(&fresh, rng);
        let body_indent = format!("{indent}{step}");
        let mut lines = Vec::new();
        lines.push(format!("{indent}{fresh} = {init}"));
        lines.push(format!("{indent}if {cond}:"));
        for idx in logical.first..=logical.last {
            let original = &py.lines[idx];
            lines.push(format!("{step}{original}"));
        }
        lines.push(format!("{indent}else:"));
        lines.push(format!("{body_indent}{junk} = {fresh} - {}", init + 13));
        replacements[li] = Some(lines);
        sites += 1;
    }

    if sites == 0 {
        // guarantee at least one insertion when any simple statement exists
        if let Some((li, logical)) = py
            .logicals
            .iter()
            .enumerate()
            .find(|(li, l)| {
                l.kind == LineKind::Code
                    && !py.opens_suite(*li)
                    && !matches!(
                        py.head_word(*li).unwrap_or(""),
                        "import" | "from" | "global" | "nonlocal" | "pass" | "break" | "continue"
                            | "else" | "elif" | "except" | "finally" | "case" | "raise" | "yield"
                            | "del" | "assert"
                    )
            })
        {
            let indent = logical.indent.clone();
            let fresh = names.fresh(FRESH_NAMES, rng);
            let junk = names.fresh(JUNK_NAMES, rng);
            let cond = predicate(&fresh, rng);
            let mut lines = Vec::new();
            lines.push(format!("{indent}{fresh} = 17"));
            lines.push(format!("{indent}if {cond}:"));
            for idx in logical.first..=logical.last {
                lines.push(format!("{step}{}", py.lines[idx]));
            }
            lines.push(format!("{indent}else:"));
            lines.push(format!("{indent}{step}{junk} = {fresh} - 30"));
            replacements[li] = Some(lines);
            sites = 1;
        }
    }

    Ok(PassOutcome { code: py.render(&replacements), sites })
}

fn is_c_declaration(lexed: &lang::Lexed, start: usize) -> bool {
    // a statement opening with a type keyword or struct/enum/union/typedef
    // declares names the following code needs; wrapping it in a block would
    // hide them
    let tok = &lexed.tokens[start];
    let text = lexed.text(tok);
    if tok.kind == TokenKind::Keyword {
        return matches!(
            text,
            "void" | "char" | "short" | "int" | "long" | "float" | "double" | "signed"
                | "unsigned" | "bool" | "_Bool" | "struct" | "enum" | "union" | "typedef"
                | "const" | "static" | "extern" | "register" | "auto"
        ) || crate::lang::is_solidity_elementary_type(text)
            || matches!(text, "address" | "string" | "bytes" | "mapping");
    }
    // `size_t n = ...`, typedef'd types: ident ident ...
    if tok.kind == TokenKind::Ident {
        let mut j = start + 1;
        while j < lexed.tokens.len() && lexed.tokens[j].kind == TokenKind::Comment {
            j += 1;
        }
        if j < lexed.tokens.len() && lexed.tokens[j].kind == TokenKind::Ident {
            return true;
        }
        if j < lexed.tokens.len() && lexed.text(&lexed.tokens[j]) == "*" {
            let mut k = j + 1;
            while k < lexed.tokens.len() && lexed.text(&lexed.tokens[k]) == "*" {
                k += 1;
            }
            if k < lexed.tokens.len() && lexed.tokens[k].kind == TokenKind::Ident {
                let mut m = k + 1;
                while m < lexed.tokens.len() && lexed.tokens[m].kind == TokenKind::Comment {
                    m += 1;
                }
                if m < lexed.tokens.len() && matches!(lexed.text(&lexed.tokens[m]), "=" | ";") {
                    return true;
                }
            }
        }
    }
    false
}

fn pass_c_like(code: &str, language: Language, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let mut names = NamePool::new(code, language);
    let mut edits = Vec::new();
    let mut sites = 0u32;
    let int_type = if language == Language::Solidity { "int256" } else { "long" };

    // candidate simple statements inside every function body
    let mut candidates: Vec<(usize, usize)> = Vec::new(); // byte ranges
    for f in cblock::find_functions(&lexed) {
        let Ok(stmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else {
            continue;
        };
        collect_simple(&lexed, &stmts, &mut candidates);
    }
    if candidates.is_empty() {
        return Ok(PassOutcome::unchanged(code));
    }

    let mut chosen: Vec<usize> = (0..candidates.len())
        .filter(|_| rng.random_range(0..3u32) == 0)
        .collect();
    if chosen.is_empty() {
        chosen.push(0);
    }

    for idx in chosen {
        let (start, end) = candidates[idx];
        let stmt_text = &code[start..end];
        let fresh = names.fresh(FRESH_NAMES, rng);
        let junk = names.fresh(JUNK_NAMES, rng);
        let init: i64 = rng.random_range(3..40);
        let cond = predicate(&fresh, rng);
        let replacement = format!(
            "{{ {int_type} {fresh} = {init}; if ({cond}) {{ {stmt_text} }} else {{ {int_type} {junk} = {fresh} - {}; {junk} = {junk} + 1; }} }}",
            init + 13
        );
        edits.push(Edit::replace(start, end, replacement));
        sites += 1;
    }

    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}

fn collect_simple(lexed: &lang::Lexed, stmts: &[CStmt], out: &mut Vec<(usize, usize)>) {
    for stmt in stmts {
        match stmt {
            CStmt::Simple { start, end } => {
                if !is_c_declaration(lexed, *start) {
                    out.push((lexed.tokens[*start].start, lexed.tokens[*end].end));
                }
            }
            CStmt::Block { body, .. } => collect_simple(lexed, body, out),
            CStmt::If { then, els, .. } => {
                collect_simple(lexed, std::slice::from_ref(then), out);
                if let Some(e) = els {
                    collect_simple(lexed, std::slice::from_ref(e), out);
                }
            }
            CStmt::While { body, .. } | CStmt::For { body, .. } => {
                collect_simple(lexed, std::slice::from_ref(body), out)
            }
            CStmt::Other { .. } => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::complexity;
    use rand::SeedableRng;

    #[test]
    fn python_complexity_strictly_increases() {
        let code = "def f(x):\n    y = x + 1\n    return y\n\nprint(f(1))\n";
        let before = complexity(code, Language::Python).unwrap();
        let out = insert_opaque_predicates(code, Language::Python, 5).unwrap();
        let after = complexity(&out, Language::Python).unwrap();
        assert!(after > before, "{out}");
    }

    #[test]
    fn c_complexity_strictly_increases() {
        let code = "int f(int x) { int y = x + 1; y = y * 2; return y; }\n";
        let before = complexity(code, Language::C).unwrap();
        let out = insert_opaque_predicates(code, Language::C, 5).unwrap();
        let after = complexity(&out, Language::C).unwrap();
        assert!(after > before, "{out}");
    }

    #[test]
    fn seed_fixed_double_application_identical() {
        let code = "def f(x):\n    return x + 1\n";
        let a = insert_opaque_predicates(code, Language::Python, 9).unwrap();
        let b = insert_opaque_predicates(code, Language::Python, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn junk_uses_plausible_names() {
        let code = "def f(x):\n    return x + 1\n";
        let out = insert_opaque_predicates(code, Language::Python, 2).unwrap();
        assert!(!out.contains("junk"));
        assert!(out.contains("else:"));
    }

    #[test]
    fn c_declarations_not_wrapped() {
        let code = "int f(int x) { int y = 1; return x + y; }\n";
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let out = pass(code, Language::C, &mut rng).unwrap();
        // `int y = 1;` must stay at function scope
        assert!(out.code.contains("{ int y = 1;"));
    }
}
