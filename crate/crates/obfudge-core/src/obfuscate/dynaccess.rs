//! D8: constant initializations rewritten to calls of generated getters.

use super::cblock::{self, CStmt};
use super::pyblock::{LineKind, PySource};
use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Edit, Language, TokenKind};
use std::collections::BTreeSet;

pub fn dynamic_access(code: &str, language: Language, _seed: u64) -> Result<String, ObfuscateError> {
    Ok(pass(code, language)?.code)
}

fn getter_name(var: &str, used: &mut BTreeSet<String>) -> String {
    let mut camel = String::new();
    let mut upper = true;
    for c in var.chars() {
        if c == '_' {
            upper = true;
            continue;
        }
        if upper {
            camel.extend(c.to_uppercase());
            upper = false;
        } else {
            camel.push(c);
        }
    }
    let mut name = format!("getValue{camel}");
    let mut n = 1u32;
    while used.contains(&name) {
        n += 1;
        name = format!("getValue{camel}{n}");
    }
    used.insert(name.clone());
    name
}

pub(crate) fn pass(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::Python => pass_python(code),
        Language::C | Language::Cpp => pass_c(code, language),
        Language::Solidity => pass_solidity(code),
    }
}

/// Python: `name = <literal>` statements become `name = getValueName()` with
/// module-level getters inserted after the imports.
fn pass_python(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let py = PySource::parse(code)?;
    let mut used: BTreeSet<String> = lang::lex(code, Language::Python)
        .map(|lexed| {
            lexed
                .tokens
                .iter()
                .filter(|t| t.kind == TokenKind::Ident)
                .map(|t| lexed.text(t).to_string())
                .collect()
        })
        .unwrap_or_default();

    let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
    let mut getters: Vec<(String, String)> = Vec::new(); // (name, literal)
    let mut sites = 0u32;

    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code {
            continue;
        }
        let toks = py.tokens_of(logical);
        // pattern: Ident `=` literal  (exactly three tokens)
        if toks.len() != 3 {
            continue;
        }
        let name_ok = py.token(toks[0]).kind == TokenKind::Ident;
        let eq_ok = py.token_text(toks[1]) == "=";
        let lit = py.token(toks[2]);
        let lit_ok = matches!(lit.kind, TokenKind::Number | TokenKind::Str)
            || matches!(py.token_text(toks[2]), "True" | "False" | "None");
        if !(name_ok && eq_ok && lit_ok) {
            continue;
        }
        let var = py.token_text(toks[0]).to_string();
        let literal = py.token_text(toks[2]).to_string();
        let getter = getter_name(&var, &mut used);
        replacements[li] = Some(vec![format!("{}{var} = {getter}()", logical.indent)]);
        getters.push((getter, literal));
        sites += 1;
    }

    if sites == 0 {
        return Ok(PassOutcome::unchanged(code));
    }

    // insert getters after the import block (before first non-import code)
    let mut insert_at = 0usize;
    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code {
            continue;
        }
        match py.head_word(li) {
            Some("import") | Some("from") => insert_at = li + 1,
            _ => break,
        }
    }
    let mut getter_lines = Vec::new();
    for (name, literal) in &getters {
        getter_lines.push(format!("def {name}():"));
        getter_lines.push(format!("    return {literal}"));
    }
    // splice: render with replacements, then inject getters at the line of
    // the chosen logical
    let inject_line = if insert_at < py.logicals.len() {
        py.logicals[insert_at].first
    } else {
        py.lines.len()
    };
    let rendered = py.render(&replacements);

    // recompute the physical injection point against the rendered text: the
    // replacements above keep line counts for logicals before `insert_at`
    let mut out_lines: Vec<String> = rendered.lines().map(|l| l.to_string()).collect();
    let mut delta = 0i64;
    for (li, r) in replacements.iter().enumerate() {
        if py.logicals[li].first >= inject_line {
            break;
        }
        if let Some(new_lines) = r {
            let old = py.logicals[li].last - py.logicals[li].first + 1;
            delta += new_lines.len() as i64 - old as i64;
        }
    }
    let at = ((inject_line as i64) + delta).max(0) as usize;
    let at = at.min(out_lines.len());
    for (i, l) in getter_lines.into_iter().enumerate() {
        out_lines.insert(at + i, l);
    }
    let mut text = out_lines.join("\n");
    if code.ends_with('\n') {
        text.push('\n');
    }
    Ok(PassOutcome { code: text, sites })
}

/// C: function-local `TYPE name = <int literal>;` becomes a call to a static
/// getter defined before the first function.
fn pass_c(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let mut used: BTreeSet<String> = lexed
        .tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .map(|t| lexed.text(t).to_string())
        .collect();

    let funcs = cblock::find_functions(&lexed);
    if funcs.is_empty() {
        return Ok(PassOutcome::unchanged(code));
    }
    let mut edits = Vec::new();
    let mut getters = String::new();
    let mut sites = 0u32;

    for f in &funcs {
        let Ok(stmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else {
            continue;
        };
        rewrite_c_decls(&lexed, &stmts, &mut used, &mut getters, &mut edits, &mut sites);
    }

    if sites == 0 {
        return Ok(PassOutcome::unchanged(code));
    }
    let first_fn_start = funcs
        .iter()
        .map(|f| {
            // back up over the return type tokens to the start of that line
            let name_tok = &lexed.tokens[f.name_tok];
            lexed.src[..name_tok.start].rfind('\n').map(|p| p + 1).unwrap_or(0)
        })
        .min()
        .unwrap_or(0);
    edits.push(Edit::insert(first_fn_start, getters));
    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}

fn rewrite_c_decls(
    lexed: &lang::Lexed,
    stmts: &[CStmt],
    used: &mut BTreeSet<String>,
    getters: &mut String,
    edits: &mut Vec<Edit>,
    sites: &mut u32,
) {
    const INT_TYPES: &[&str] = &["int", "long", "short", "unsigned", "signed", "char", "size_t"];
    for stmt in stmts {
        match stmt {
            CStmt::Simple { start, end } => {
                // pattern: TYPE+ name = <number> ;
                let toks: Vec<usize> = (*start..=*end)
                    .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
                    .collect();
                if toks.len() < 5 {
                    continue;
                }
                let is_int_type = |i: usize| {
                    let t = &lexed.tokens[toks[i]];
                    t.kind == TokenKind::Keyword && INT_TYPES.contains(&lexed.text(t))
                        || (t.kind == TokenKind::Ident && lexed.text(t) == "size_t")
                };
                if !is_int_type(0) {
                    continue;
                }
                let mut k = 1;
                while k < toks.len() && is_int_type(k) {
                    k += 1;
                }
                // TYPE+ name = literal ;
                if k + 4 != toks.len() {
                    continue;
                }
                let name_t = &lexed.tokens[toks[k]];
                let eq_t = &lexed.tokens[toks[k + 1]];
                let lit_t = &lexed.tokens[toks[k + 2]];
                if name_t.kind != TokenKind::Ident
                    || lexed.text(eq_t) != "="
                    || lit_t.kind != TokenKind::Number
                {
                    continue;
                }
                let type_text: Vec<&str> = (0..k).map(|i| lexed.text(&lexed.tokens[toks[i]])).collect();
                let type_text = type_text.join(" ");
                let var = lexed.text(name_t).to_string();
                let literal = lexed.text(lit_t).to_string();
                let getter = getter_name(&var, used);
                getters.push_str(&format!(
                    "static {type_text} {getter}(void) {{ return {literal}; }}\n"
                ));
                edits.push(Edit::replace(lit_t.start, lit_t.end, format!("{getter}()")));
                *sites += 1;
            }
            CStmt::Block { body, .. } => rewrite_c_decls(lexed, body, used, getters, edits, sites),
            CStmt::If { then, els, .. } => {
                rewrite_c_decls(lexed, std::slice::from_ref(then), used, getters, edits, sites);
                if let Some(e) = els {
                    rewrite_c_decls(lexed, std::slice::from_ref(e), used, getters, edits, sites);
                }
            }
            CStmt::While { body, .. } | CStmt::For { body, .. } => {
                rewrite_c_decls(lexed, std::slice::from_ref(body), used, getters, edits, sites)
            }
            CStmt::Other { .. } => {}
        }
    }
}

/// Solidity: in-function `TYPE name = <int literal>;` becomes a private pure
/// getter call; getters are appended before the contract's closing brace.
fn pass_solidity(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, Language::Solidity).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let mut used: BTreeSet<String> = lexed
        .tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .map(|t| lexed.text(t).to_string())
        .collect();

    let funcs = cblock::find_functions(&lexed);
    let mut edits = Vec::new();
    let mut getters = String::new();
    let mut sites = 0u32;
    let mut last_body_close = None;

    for f in &funcs {
        last_body_close = Some(f.body_close.max(last_body_close.unwrap_or(0)));
        let Ok(stmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else {
            continue;
        };
        for stmt in &stmts {
            if let CStmt::Simple { start, end } = stmt {
                let toks: Vec<usize> = (*start..=*end)
                    .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
                    .collect();
                if toks.len() != 5 {
                    continue;
                }
                let ty = &lexed.tokens[toks[0]];
                let name_t = &lexed.tokens[toks[1]];
                let eq_t = &lexed.tokens[toks[2]];
                let lit_t = &lexed.tokens[toks[3]];
                let is_int = ty.kind == TokenKind::Keyword
                    && crate::lang::is_solidity_elementary_type(lexed.text(ty));
                if !is_int
                    || name_t.kind != TokenKind::Ident
                    || lexed.text(eq_t) != "="
                    || lit_t.kind != TokenKind::Number
                {
                    continue;
                }
                let ty_text = lexed.text(ty).to_string();
                let var = lexed.text(name_t).to_string();
                let literal = lexed.text(lit_t).to_string();
                let getter = getter_name(&var, &mut used);
                getters.push_str(&format!(
                    "    function {getter}() private pure returns ({ty_text}) {{ return {literal}; }}\n"
                ));
                edits.push(Edit::replace(lit_t.start, lit_t.end, format!("{getter}()")));
                sites += 1;
            }
        }
    }

    if sites == 0 {
        return Ok(PassOutcome::unchanged(code));
    }
    // insert before the contract's closing brace: the first `}` after the
    // last function body
    let after = last_body_close.unwrap() + 1;
    let close = (after..lexed.tokens.len())
        .find(|&i| lexed.text(&lexed.tokens[i]) == "}")
        .map(|i| lexed.tokens[i].start);
    if let Some(pos) = close {
        edits.push(Edit::insert(pos, format!("{getters}")));
    }
    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}
