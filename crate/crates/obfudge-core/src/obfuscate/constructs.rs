//! L4/L5/L6: loop and branch construct rewrites.
//!
//! Untransformable sites (continue interplay, non-literal bounds, for-else)
//! are skipped; the combo diagnostics record zero-site passes.

use super::cblock::{self, CStmt};
use super::pyblock::{indent_step, LineKind, PySource};
use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Language, Lexed, TokenKind};

/// The spec's combined L4+L5+L6 operation.
pub fn transform_constructs(code: &str, language: Language, _seed: u64) -> Result<String, ObfuscateError> {
    let a = pass_for_to_while(code, language)?;
    let b = pass_if_to_switch(&a.code, language)?;
    let c = pass_loop_to_recursion(&b.code, language)?;
    Ok(c.code)
}

// ---------------------------------------------------------------------------
// L4: for -> while
// ---------------------------------------------------------------------------

pub(crate) fn pass_for_to_while(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::Python => for_to_while_python(code),
        _ => for_to_while_c(code, language),
    }
}

fn for_to_while_python(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let mut current = code.to_string();
    let mut sites = 0u32;
    // rewrite one loop per round; a rewritten loop leaves no `for` header
    loop {
        let py = PySource::parse(&current)?;
        let step = indent_step(&py);
        let mut replaced = false;
        let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];

        'scan: for (li, logical) in py.logicals.iter().enumerate() {
            if logical.kind != LineKind::Code || py.head_word(li) != Some("for") || !py.opens_suite(li) {
                continue;
            }
            let toks = py.tokens_of(logical);
            // split header at the depth-0 `in`
            let mut depth = 0i32;
            let mut in_at = None;
            for (k, &t) in toks.iter().enumerate() {
                match py.token_text(t) {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    "in" if depth == 0 && py.token(t).kind == TokenKind::Keyword => {
                        in_at = Some(k);
                        break;
                    }
                    _ => {}
                }
            }
            let Some(in_k) = in_at else { continue };
            // leave literal-range loops to the recursion rewrite (L6 runs
            // after L4 inside the same combo and would find nothing otherwise)
            if python_recursion_plan(&py, &current, li).is_some() {
                continue;
            }
            let colon = *toks.last().unwrap();
            let target = current[py.token(toks[0]).end..py.token(toks[in_k]).start].trim().to_string();
            let iterable = current[py.token(toks[in_k]).end..py.token(colon).start].trim().to_string();
            if target.is_empty() || iterable.is_empty() {
                continue;
            }
            let end = py.suite_end(li);
            // for-else directly after the suite is not expressible
            if let Some(next) = py.next_code(end) {
                if py.logicals[next].indent == logical.indent && py.head_word(next) == Some("else") {
                    continue 'scan;
                }
            }
            let indent = logical.indent.clone();
            let feed = fresh_name(&current, "loop_feed");
            let mut lines = Vec::new();
            lines.push(format!("{indent}{feed} = iter({iterable})"));
            lines.push(format!("{indent}while True:"));
            lines.push(format!("{indent}{step}try:"));
            lines.push(format!("{indent}{step}{step}{target} = next({feed})"));
            lines.push(format!("{indent}{step}except StopIteration:"));
            lines.push(format!("{indent}{step}{step}break"));
            replacements[li] = Some(lines);
            sites += 1;
            replaced = true;
            break 'scan;
        }

        if !replaced {
            break;
        }
        current = {
            let py2 = PySource::parse(&current)?;
            py2.render(&replacements)
        };
    }
    Ok(PassOutcome { code: current, sites })
}

fn fresh_name(code: &str, base: &str) -> String {
    if !code.contains(base) {
        return base.to_string();
    }
    let mut n = 2u32;
    loop {
        let name = format!("{base}{n}");
        if !code.contains(&name) {
            return name;
        }
        n += 1;
    }
}

fn stmt_contains_direct(lexed: &Lexed, stmt: &CStmt, word: &str) -> bool {
    match stmt {
        CStmt::Simple { start, .. } => lexed.text(&lexed.tokens[*start]) == word,
        CStmt::Block { body, .. } => body.iter().any(|s| stmt_contains_direct(lexed, s, word)),
        CStmt::If { then, els, .. } => {
            stmt_contains_direct(lexed, then, word)
                || els.as_ref().map(|e| stmt_contains_direct(lexed, e, word)).unwrap_or(false)
        }
        // nested loops own their continue/break
        CStmt::While { .. } | CStmt::For { .. } | CStmt::Other { .. } => false,
    }
}

fn contains_nested_for(lexed: &Lexed, stmt: &CStmt) -> bool {
    match stmt {
        CStmt::For { .. } => true,
        CStmt::Block { body, .. } => body.iter().any(|s| contains_nested_for(lexed, s)),
        CStmt::If { then, els, .. } => {
            contains_nested_for(lexed, then)
                || els.as_ref().map(|e| contains_nested_for(lexed, e)).unwrap_or(false)
        }
        CStmt::While { body, .. } => contains_nested_for(lexed, body),
        _ => false,
    }
}

fn body_inner_text<'a>(lexed: &'a Lexed, stmt: &CStmt) -> &'a str {
    match stmt {
        CStmt::Block { open, close, .. } => &lexed.src[lexed.tokens[*open].end..lexed.tokens[*close].start],
        other => {
            let (s, e) = cblock::byte_range(lexed, other);
            &lexed.src[s..e]
        }
    }
}

fn for_to_while_c(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    let mut current = code.to_string();
    let mut sites = 0u32;
    for _round in 0..64 {
        let lexed = lang::lex(&current, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
        let mut edits = Vec::new();
        for f in cblock::find_functions(&lexed) {
            let Ok(stmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else { continue };
            collect_for_rewrites(&lexed, language, &stmts, &mut edits);
        }
        if edits.is_empty() {
            break;
        }
        sites += edits.len() as u32;
        current = lang::apply_edits(&current, edits);
    }
    Ok(PassOutcome { code: current, sites })
}

fn collect_for_rewrites(lexed: &Lexed, language: Language, stmts: &[CStmt], edits: &mut Vec<lang::Edit>) {
    for stmt in stmts {
        match stmt {
            CStmt::For { kw, header_open, header_close, body } => {
                if contains_nested_for(lexed, body) {
                    // innermost loops first; the outer is revisited next round
                    if let CStmt::Block { body: inner, .. } = body.as_ref() {
                        collect_for_rewrites(lexed, language, inner, edits);
                    } else {
                        collect_for_rewrites(lexed, language, std::slice::from_ref(body), edits);
                    }
                    continue;
                }
                if stmt_contains_direct(lexed, body, "continue") {
                    continue; // increment would be skipped
                }
                // leave counter loops eligible for the recursion rewrite alone
                if language == Language::Cpp && cpp_recursion_candidate(lexed, header_open, header_close, body).is_some() {
                    continue;
                }
                // split header into init; cond; inc at depth 1
                let header = &lexed.src[lexed.tokens[*header_open].end..lexed.tokens[*header_close].start];
                let parts = split_depth0(header, ';');
                if parts.len() != 3 {
                    continue; // range-for or unusual header
                }
                let (init, cond, inc) = (parts[0].trim(), parts[1].trim(), parts[2].trim());
                let cond = if cond.is_empty() { "1" } else { cond };
                let inner = body_inner_text(lexed, body);
                let mut replacement = String::from("{ ");
                if !init.is_empty() {
                    replacement.push_str(init);
                    replacement.push_str("; ");
                }
                replacement.push_str(&format!("while ({cond}) {{ {inner}"));
                if !inc.is_empty() {
                    replacement.push_str(&format!(" {inc};"));
                }
                replacement.push_str(" } }");
                let start = lexed.tokens[*kw].start;
                let end = lexed.tokens[body.last_tok()].end;
                edits.push(lang::Edit::replace(start, end, replacement));
            }
            CStmt::Block { body, .. } => collect_for_rewrites(lexed, language, body, edits),
            CStmt::If { then, els, .. } => {
                collect_for_rewrites(lexed, language, std::slice::from_ref(then), edits);
                if let Some(e) = els {
                    collect_for_rewrites(lexed, language, std::slice::from_ref(e), edits);
                }
            }
            CStmt::While { body, .. } => collect_for_rewrites(lexed, language, std::slice::from_ref(body), edits),
            _ => {}
        }
    }
}

/// L6 eligibility for a C++ counter loop: `int i = A; i < B; i++/i += S`
/// with literal bounds, a body free of break/continue/return.
fn cpp_recursion_candidate(
    lexed: &Lexed,
    header_open: &usize,
    header_close: &usize,
    body: &CStmt,
) -> Option<(String, RangeSpec)> {
    if stmt_contains_direct(lexed, body, "continue")
        || stmt_contains_direct(lexed, body, "break")
        || contains_return(lexed, body)
        || contains_nested_for(lexed, body)
    {
        return None;
    }
    let header = &lexed.src[lexed.tokens[*header_open].end..lexed.tokens[*header_close].start];
    let parts = split_depth0(header, ';');
    if parts.len() != 3 {
        return None;
    }
    parse_c_counter(parts[0], parts[1], parts[2])
}

fn split_depth0(text: &str, sep: char) -> Vec<&str> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0usize;
    let bytes = text.as_bytes();
    let mut in_str: Option<u8> = None;
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i];
        if let Some(q) = in_str {
            if c == b'\\' {
                i += 2;
                continue;
            }
            if c == q {
                in_str = None;
            }
            i += 1;
            continue;
        }
        match c {
            b'"' | b'\'' => in_str = Some(c),
            b'(' | b'[' | b'{' => depth += 1,
            b')' | b']' | b'}' => depth -= 1,
            _ => {
                if c == sep as u8 && depth == 0 {
                    parts.push(&text[start..i]);
                    start = i + 1;
                }
            }
        }
        i += 1;
    }
    parts.push(&text[start..]);
    parts
}

// ---------------------------------------------------------------------------
// L5: if-else <-> switch
// ---------------------------------------------------------------------------

pub(crate) fn pass_if_to_switch(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::C | Language::Cpp => if_chain_to_switch_c(code, language),
        Language::Python => match_to_if_python(code),
        Language::Solidity => Ok(PassOutcome::unchanged(code)),
    }
}

struct Chain<'a> {
    scrutinee: &'a str,
    arms: Vec<(String, (usize, usize))>, // (constant text, byte range of arm body inner)
    default: Option<(usize, usize)>,
    start: usize,
    end: usize,
}

fn if_chain_to_switch_c(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    let mut current = code.to_string();
    let mut sites = 0u32;
    for _round in 0..64 {
        let lexed = lang::lex(&current, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
        let mut found = None;
        for f in cblock::find_functions(&lexed) {
            let Ok(stmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else { continue };
            if let Some(chain) = find_chain(&lexed, &stmts) {
                found = Some(chain);
                break;
            }
        }
        let Some(chain) = found else { break };
        let mut replacement = format!("switch ({}) {{ ", chain.scrutinee);
        for (constant, (bs, be)) in &chain.arms {
            replacement.push_str(&format!("case {constant}: {{ {} break; }} ", &current[*bs..*be]));
        }
        if let Some((bs, be)) = chain.default {
            replacement.push_str(&format!("default: {{ {} break; }} ", &current[bs..be]));
        }
        replacement.push('}');
        current = lang::apply_edits(&current, vec![lang::Edit::replace(chain.start, chain.end, replacement)]);
        sites += 1;
    }
    Ok(PassOutcome { code: current, sites })
}

fn find_chain<'a>(lexed: &'a Lexed, stmts: &[CStmt]) -> Option<Chain<'a>> {
    for stmt in stmts {
        match stmt {
            CStmt::If { .. } => {
                if let Some(chain) = chain_of(lexed, stmt) {
                    return Some(chain);
                }
                // descend into arms for nested chains
                if let CStmt::If { then, els, .. } = stmt {
                    if let Some(c) = find_chain(lexed, std::slice::from_ref(then)) {
                        return Some(c);
                    }
                    if let Some(e) = els {
                        if let Some(c) = find_chain(lexed, std::slice::from_ref(e)) {
                            return Some(c);
                        }
                    }
                }
            }
            CStmt::Block { body, .. } => {
                if let Some(c) = find_chain(lexed, body) {
                    return Some(c);
                }
            }
            CStmt::While { body, .. } | CStmt::For { body, .. } => {
                if let Some(c) = find_chain(lexed, std::slice::from_ref(body)) {
                    return Some(c);
                }
            }
            _ => {}
        }
    }
    None
}

/// Matches `if (v == K1) ... else if (v == K2) ... [else ...]` with at least
/// two integer equality arms over the same simple variable.
fn chain_of<'a>(lexed: &'a Lexed, stmt: &CStmt) -> Option<Chain<'a>> {
    let mut arms = Vec::new();
    let mut default = None;
    let mut scrutinee: Option<&str> = None;
    let start = stmt.first_tok();
    let end = stmt.last_tok();
    let mut cursor = stmt;
    loop {
        let CStmt::If { cond_open, cond_close, then, els, .. } = cursor else { break };
        // condition tokens must be exactly: Ident == Number
        let cond_toks: Vec<usize> = (*cond_open + 1..*cond_close)
            .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
            .collect();
        if cond_toks.len() != 3 {
            return None;
        }
        let var = &lexed.tokens[cond_toks[0]];
        let op = &lexed.tokens[cond_toks[1]];
        let lit = &lexed.tokens[cond_toks[2]];
        if var.kind != TokenKind::Ident || lexed.text(op) != "==" || lit.kind != TokenKind::Number {
            return None;
        }
        if !lexed.text(lit).chars().all(|c| c.is_ascii_digit()) {
            return None;
        }
        match scrutinee {
            None => scrutinee = Some(lexed.text(var)),
            Some(v) if v == lexed.text(var) => {}
            _ => return None,
        }
        if stmt_contains_direct(lexed, then, "break") || contains_decl_start(lexed, then) {
            return None;
        }
        let (bs, be) = inner_byte_range(lexed, then);
        arms.push((lexed.text(lit).to_string(), (bs, be)));
        match els {
            Some(e) => match e.as_ref() {
                CStmt::If { .. } => cursor = e,
                other => {
                    if stmt_contains_direct(lexed, other, "break") || contains_decl_start(lexed, other) {
                        return None;
                    }
                    default = Some(inner_byte_range(lexed, other));
                    break;
                }
            },
            None => break,
        }
    }
    if arms.len() < 2 {
        return None;
    }
    Some(Chain {
        scrutinee: scrutinee?,
        arms,
        default,
        start: lexed.tokens[start].start,
        end: lexed.tokens[end].end,
    })
}

fn inner_byte_range(lexed: &Lexed, stmt: &CStmt) -> (usize, usize) {
    match stmt {
        CStmt::Block { open, close, .. } => (lexed.tokens[*open].end, lexed.tokens[*close].start),
        other => cblock::byte_range(lexed, other),
    }
}

fn contains_decl_start(lexed: &Lexed, stmt: &CStmt) -> bool {
    match stmt {
        CStmt::Simple { start, .. } => {
            let t = &lexed.tokens[*start];
            t.kind == TokenKind::Keyword
                && matches!(
                    lexed.text(t),
                    "int" | "long" | "short" | "char" | "float" | "double" | "unsigned" | "signed"
                        | "bool" | "_Bool" | "const" | "static" | "struct" | "enum" | "union"
                )
        }
        CStmt::Block { body, .. } => body.iter().any(|s| contains_decl_start(lexed, s)),
        CStmt::If { then, els, .. } => {
            contains_decl_start(lexed, then)
                || els.as_ref().map(|e| contains_decl_start(lexed, e)).unwrap_or(false)
        }
        CStmt::While { body, .. } | CStmt::For { body, .. } => contains_decl_start(lexed, body),
        CStmt::Other { .. } => false,
    }
}

/// Python direction: literal `match` statements become if/elif/else chains.
fn match_to_if_python(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let mut current = code.to_string();
    let mut sites = 0u32;
    loop {
        let py = PySource::parse(&current)?;
        let step = indent_step(&py);
        let mut replaced = false;
        let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];

        for (li, logical) in py.logicals.iter().enumerate() {
            if logical.kind != LineKind::Code || py.head_word(li) != Some("match") || !py.opens_suite(li) {
                continue;
            }
            let toks = py.tokens_of(logical);
            // scrutinee must be a bare name or dotted name (safe to re-evaluate)
            let scrutinee = current
                [py.token(toks[0]).end..py.token(*toks.last().unwrap()).start]
                .trim()
                .to_string();
            if !scrutinee.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                continue;
            }
            let end = py.suite_end(li);
            // collect case arms
            let mut arms: Vec<(Option<String>, Vec<String>)> = Vec::new();
            let mut ok = true;
            let mut k = li + 1;
            while k < end {
                let l = &py.logicals[k];
                if l.kind != LineKind::Code {
                    k += 1;
                    continue;
                }
                if py.head_word(k) != Some("case") || !py.opens_suite(k) {
                    ok = false;
                    break;
                }
                let ctoks = py.tokens_of(&py.logicals[k]);
                let pattern = current
                    [py.token(ctoks[0]).end..py.token(*ctoks.last().unwrap()).start]
                    .trim()
                    .to_string();
                let literal = match pattern.as_str() {
                    "_" => None,
                    p if p.parse::<i64>().is_ok() => Some(p.to_string()),
                    p if (p.starts_with('"') && p.ends_with('"') && p.len() >= 2)
                        || (p.starts_with('\'') && p.ends_with('\'') && p.len() >= 2) =>
                    {
                        Some(p.to_string())
                    }
                    "True" | "False" | "None" => Some(pattern.clone()),
                    _ => {
                        ok = false;
                        break;
                    }
                };
                let case_end = py.suite_end(k);
                let mut body_lines = Vec::new();
                for b in k + 1..case_end {
                    let bl = &py.logicals[b];
                    if bl.kind != LineKind::Code {
                        continue;
                    }
                    for idx in bl.first..=bl.last {
                        // dedent one level: case bodies sit two levels deep
                        let line = &py.lines[idx];
                        let cut = (logical.indent.len() + step.len()).min(line.len());
                        let dedented = if line.len() > cut && line[..cut].trim().is_empty() {
                            line[step.len().min(line.len())..].to_string()
                        } else {
                            line.clone()
                        };
                        body_lines.push(dedented);
                    }
                }
                if body_lines.is_empty() {
                    ok = false;
                    break;
                }
                arms.push((literal, body_lines));
                k = case_end;
            }
            if !ok || arms.is_empty() || arms.iter().filter(|(l, _)| l.is_some()).count() == 0 {
                continue;
            }
            // wildcard arm, if present, must be last
            if arms[..arms.len() - 1].iter().any(|(l, _)| l.is_none()) {
                continue;
            }
            let indent = logical.indent.clone();
            let mut lines = Vec::new();
            let mut first = true;
            for (literal, body) in &arms {
                match literal {
                    Some(lit) => {
                        let kw = if first { "if" } else { "elif" };
                        lines.push(format!("{indent}{kw} {scrutinee} == {lit}:"));
                        first = false;
                    }
                    None => lines.push(format!("{indent}else:")),
                }
                lines.extend(body.iter().cloned());
            }
            // replace the whole match extent: blank replacement for inner
            // logicals, new chain at the header
            replacements[li] = Some(lines);
            for inner in li + 1..end {
                replacements[inner] = Some(vec![]);
            }
            sites += 1;
            replaced = true;
            break;
        }

        if !replaced {
            break;
        }
        let py2 = PySource::parse(&current)?;
        let _ = py2;
        let py3 = PySource::parse(&current)?;
        current = py3.render(&replacements);
    }
    Ok(PassOutcome { code: current, sites })
}

// ---------------------------------------------------------------------------
// L6: loop -> recursion
// ---------------------------------------------------------------------------

const RECURSION_ITERATION_CAP: i64 = 500;

pub(crate) fn pass_loop_to_recursion(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::Python => loop_to_recursion_python(code),
        Language::Cpp => loop_to_recursion_cpp(code),
        // plain C has no closures; Solidity internals cannot capture locals
        _ => Ok(PassOutcome::unchanged(code)),
    }
}

struct RangeSpec {
    start: i64,
    stop: i64,
    step: i64,
}

impl RangeSpec {
    fn iterations(&self) -> i64 {
        if self.step <= 0 || self.stop <= self.start {
            return 0;
        }
        (self.stop - self.start + self.step - 1) / self.step
    }

    fn last_value(&self) -> Option<i64> {
        let n = self.iterations();
        if n == 0 {
            None
        } else {
            Some(self.start + self.step * (n - 1))
        }
    }
}

fn parse_range_args(args: &str) -> Option<RangeSpec> {
    let parts: Vec<&str> = split_depth0(args, ',');
    let nums: Option<Vec<i64>> = parts.iter().map(|p| p.trim().parse::<i64>().ok()).collect();
    let nums = nums?;
    let spec = match nums.len() {
        1 => RangeSpec { start: 0, stop: nums[0], step: 1 },
        2 => RangeSpec { start: nums[0], stop: nums[1], step: 1 },
        3 => RangeSpec { start: nums[0], stop: nums[1], step: nums[2] },
        _ => return None,
    };
    if spec.step <= 0 || spec.iterations() > RECURSION_ITERATION_CAP {
        return None;
    }
    Some(spec)
}

struct PyRecursionPlan {
    var: String,
    spec: RangeSpec,
    assigned: Vec<String>,
    end: usize,
}

/// Checks L6 eligibility of the for-loop headed at logical `li`: literal
/// range bounds within the iteration cap, a body free of control-flow
/// escapes and nested scopes, mutated names bound before the loop, and no
/// else clause.
fn python_recursion_plan(py: &PySource, current: &str, li: usize) -> Option<PyRecursionPlan> {
    let logical = &py.logicals[li];
    if logical.kind != LineKind::Code || py.head_word(li) != Some("for") || !py.opens_suite(li) {
        return None;
    }
    let toks = py.tokens_of(logical);
    if toks.len() < 7 {
        return None;
    }
    let name_ok = py.token(toks[1]).kind == TokenKind::Ident;
    let in_ok = py.token_text(toks[2]) == "in";
    let range_ok = py.token_text(toks[3]) == "range" && py.token_text(toks[4]) == "(";
    if !(name_ok && in_ok && range_ok) {
        return None;
    }
    let close = toks[toks.len() - 2];
    let colon = toks[toks.len() - 1];
    if py.token_text(close) != ")" || py.token_text(colon) != ":" {
        return None;
    }
    let args = &current[py.token(toks[4]).end..py.token(close).start];
    let spec = parse_range_args(args)?;
    let var = py.token_text(toks[1]).to_string();

    let end = py.suite_end(li);
    let mut assigned: Vec<String> = Vec::new();
    for k in li + 1..end {
        let l = &py.logicals[k];
        if l.kind != LineKind::Code {
            continue;
        }
        let btoks = py.tokens_of(l);
        for (bi, &t) in btoks.iter().enumerate() {
            let text = py.token_text(t);
            if matches!(text, "break" | "continue" | "return" | "yield" | "def" | "lambda" | "global" | "nonlocal") {
                return None;
            }
            if py.token(t).kind == TokenKind::Ident && bi + 1 < btoks.len() {
                let next = py.token_text(btoks[bi + 1]);
                let is_assign = matches!(
                    next,
                    "=" | "+=" | "-=" | "*=" | "/=" | "//=" | "%=" | "**=" | "&=" | "|=" | "^=" | ">>=" | "<<="
                );
                if is_assign && bi == 0 && text != var && !assigned.contains(&text.to_string()) {
                    assigned.push(text.to_string());
                }
            }
        }
    }
    let before = &current[..py.token(toks[0]).start];
    if !assigned.iter().all(|n| word_appears(before, n)) {
        return None;
    }
    if let Some(next) = py.next_code(end) {
        if py.logicals[next].indent == logical.indent && py.head_word(next) == Some("else") {
            return None;
        }
    }
    Some(PyRecursionPlan { var, spec, assigned, end })
}

fn loop_to_recursion_python(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let mut current = code.to_string();
    let mut sites = 0u32;
    loop {
        let py = PySource::parse(&current)?;
        let step = indent_step(&py);
        let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
        let mut replaced = false;

        'scan: for (li, logical) in py.logicals.iter().enumerate() {
            if logical.kind != LineKind::Code || py.head_word(li) != Some("for") {
                continue;
            }
            let Some(plan) = python_recursion_plan(&py, &current, li) else {
                continue 'scan;
            };
            let PyRecursionPlan { var, spec, assigned, end } = plan;
            let indent = logical.indent.clone();
            // nonlocal only binds inside a def; nested module-level blocks
            // (if/while suites) take global instead
            let inside_def = (0..li).any(|h| {
                py.logicals[h].kind == LineKind::Code
                    && py.head_word(h) == Some("def")
                    && py.opens_suite(h)
                    && py.suite_end(h) > li
                    && py.logicals[h].indent.len() < indent.len()
            });
            let helper = fresh_name(&current, "ladder_step");
            let mut lines = Vec::new();
            lines.push(format!("{indent}def {helper}({var}):"));
            if !assigned.is_empty() {
                let kw = if inside_def { "nonlocal" } else { "global" };
                lines.push(format!("{indent}{step}{kw} {}", assigned.join(", ")));
            }
            lines.push(format!("{indent}{step}if {var} >= {}:", spec.stop));
            lines.push(format!("{indent}{step}{step}return"));
            for k in li + 1..end {
                let l = &py.logicals[k];
                for idx in l.first..=l.last {
                    lines.push(py.lines[idx].clone());
                }
            }
            lines.push(format!("{indent}{step}{helper}({var} + {})", spec.step));
            lines.push(format!("{indent}{helper}({})", spec.start));
            if let Some(last) = spec.last_value() {
                lines.push(format!("{indent}{var} = {last}"));
            }
            replacements[li] = Some(lines);
            for inner in li + 1..end {
                replacements[inner] = Some(vec![]);
            }
            sites += 1;
            replaced = true;
            break 'scan;
        }

        if !replaced {
            break;
        }
        let py2 = PySource::parse(&current)?;
        current = py2.render(&replacements);
    }
    Ok(PassOutcome { code: current, sites })
}

fn word_appears(haystack: &str, word: &str) -> bool {
    let bytes = haystack.as_bytes();
    let mut from = 0usize;
    while let Some(pos) = haystack[from..].find(word) {
        let at = from + pos;
        let before_ok = at == 0 || !(bytes[at - 1].is_ascii_alphanumeric() || bytes[at - 1] == b'_');
        let after = at + word.len();
        let after_ok = after >= bytes.len() || !(bytes[after].is_ascii_alphanumeric() || bytes[after] == b'_');
        if before_ok && after_ok {
            return true;
        }
        from = at + word.len();
    }
    false
}

fn loop_to_recursion_cpp(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let mut current = code.to_string();
    let mut sites = 0u32;
    for _round in 0..64 {
        let lexed = lang::lex(&current, Language::Cpp).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
        let mut edits = Vec::new();
        for f in cblock::find_functions(&lexed) {
            let Ok(stmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else { continue };
            collect_recursion_rewrites(&lexed, &stmts, &mut edits, &current);
            if !edits.is_empty() {
                break;
            }
        }
        if edits.is_empty() {
            break;
        }
        sites += edits.len() as u32;
        current = lang::apply_edits(&current, edits);
    }
    Ok(PassOutcome { code: current, sites })
}

fn collect_recursion_rewrites(lexed: &Lexed, stmts: &[CStmt], edits: &mut Vec<lang::Edit>, src: &str) {
    for stmt in stmts {
        if !edits.is_empty() {
            return;
        }
        match stmt {
            CStmt::For { kw, header_open, header_close, body } => {
                if contains_nested_for(lexed, body) {
                    if let CStmt::Block { body: inner, .. } = body.as_ref() {
                        collect_recursion_rewrites(lexed, inner, edits, src);
                    }
                    continue;
                }
                let Some((var, spec)) = cpp_recursion_candidate(lexed, header_open, header_close, body) else {
                    continue;
                };
                let inner = body_inner_text(lexed, body);
                let helper = fresh_name(src, "ladder_call");
                let replacement = format!(
                    "{{ auto {helper} = [&](auto&& self_ref, long {var}) -> void {{ if (!({var} < {stop})) return; {inner} self_ref(self_ref, {var} + {step}); }}; {helper}({helper}, {start}); }}",
                    stop = spec.stop,
                    step = spec.step,
                    start = spec.start,
                );
                let s = lexed.tokens[*kw].start;
                let e = lexed.tokens[body.last_tok()].end;
                edits.push(lang::Edit::replace(s, e, replacement));
            }
            CStmt::Block { body, .. } => collect_recursion_rewrites(lexed, body, edits, src),
            CStmt::If { then, els, .. } => {
                collect_recursion_rewrites(lexed, std::slice::from_ref(then), edits, src);
                if let Some(e) = els {
                    collect_recursion_rewrites(lexed, std::slice::from_ref(e), edits, src);
                }
            }
            CStmt::While { body, .. } => collect_recursion_rewrites(lexed, std::slice::from_ref(body), edits, src),
            _ => {}
        }
    }
}

fn contains_return(lexed: &Lexed, stmt: &CStmt) -> bool {
    match stmt {
        CStmt::Simple { start, end } => (*start..=*end).any(|i| lexed.text(&lexed.tokens[i]) == "return"),
        CStmt::Block { body, .. } => body.iter().any(|s| contains_return(lexed, s)),
        CStmt::If { then, els, .. } => {
            contains_return(lexed, then)
                || els.as_ref().map(|e| contains_return(lexed, e)).unwrap_or(false)
        }
        CStmt::While { body, .. } | CStmt::For { body, .. } => contains_return(lexed, body),
        CStmt::Other { start, end } => (*start..=*end).any(|i| lexed.text(&lexed.tokens[i]) == "return"),
    }
}

/// Matches `int i = A` / `i < B` / `i++ | ++i | i += S`.
fn parse_c_counter(init: &str, cond: &str, inc: &str) -> Option<(String, RangeSpec)> {
    let init = init.trim();
    let cond = cond.trim();
    let inc = inc.trim();
    let init_words: Vec<&str> = init.split(['=']).collect();
    if init_words.len() != 2 {
        return None;
    }
    let lhs: Vec<&str> = init_words[0].trim().split_whitespace().collect();
    let var = (*lhs.last()?).to_string();
    if !lhs[..lhs.len() - 1].iter().all(|w| matches!(*w, "int" | "long" | "unsigned" | "short" | "signed")) || lhs.len() < 2 {
        return None;
    }
    let start: i64 = init_words[1].trim().parse().ok()?;
    let cond_parts: Vec<&str> = cond.splitn(2, '<').collect();
    if cond_parts.len() != 2 || cond_parts[1].starts_with('=') {
        return None;
    }
    if cond_parts[0].trim() != var {
        return None;
    }
    let stop: i64 = cond_parts[1].trim().parse().ok()?;
    let step: i64 = if inc == format!("{var}++") || inc == format!("++{var}") {
        1
    } else if let Some(rest) = inc.strip_prefix(&format!("{var} +=")) {
        rest.trim().parse().ok()?
    } else if let Some(rest) = inc.strip_prefix(&format!("{var}+=")) {
        rest.trim().parse().ok()?
    } else {
        return None;
    };
    let spec = RangeSpec { start, stop, step };
    if spec.step <= 0 || spec.iterations() > RECURSION_ITERATION_CAP {
        return None;
    }
    Some((var, spec))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn python_for_becomes_while() {
        let code = "items = [2, 4, 6]\ntotal = 0\nfor i in items:\n    total += i\nprint(total)\n";
        let out = pass_for_to_while(code, Language::Python).unwrap();
        assert_eq!(out.sites, 1);
        assert!(out.code.contains("while True:"));
        assert!(out.code.contains("StopIteration"));
        assert!(!out.code.contains("for i in items"));
    }

    #[test]
    fn python_literal_range_loop_reserved_for_recursion() {
        let code = "total = 0\nfor i in range(1, 11):\n    total += i\nprint(total)\n";
        let out = pass_for_to_while(code, Language::Python).unwrap();
        assert_eq!(out.sites, 0);
        let rec = pass_loop_to_recursion(&out.code, Language::Python).unwrap();
        assert_eq!(rec.sites, 1);
    }

    #[test]
    fn python_no_loops_unchanged() {
        let code = "x = 1\nprint(x)\n";
        let out = pass_for_to_while(code, Language::Python).unwrap();
        assert_eq!(out.code, code);
        assert_eq!(out.sites, 0);
    }

    #[test]
    fn c_for_becomes_while_preserving_header_parts() {
        let code = "int f(int n) { int s = 0; for (int i = 0; i < n; i++) { s += i; } return s; }\n";
        let out = pass_for_to_while(code, Language::C).unwrap();
        assert_eq!(out.sites, 1);
        assert!(out.code.contains("while (i < n)"));
        assert!(out.code.contains("i++;"));
        assert!(!out.code.contains("for ("));
    }

    #[test]
    fn c_continue_loop_skipped() {
        let code = "int f(int n) { int s = 0; for (int i = 0; i < n; i++) { if (i == 2) continue; s += i; } return s; }\n";
        let out = pass_for_to_while(code, Language::C).unwrap();
        assert_eq!(out.sites, 0);
        assert!(out.code.contains("for ("));
    }

    #[test]
    fn nested_c_loops_rewritten_inner_first() {
        let code = "int f(int n) { int s = 0; for (int i = 0; i < n; i++) { for (int j = 0; j < n; j++) { s += j; } } return s; }\n";
        let out = pass_for_to_while(code, Language::C).unwrap();
        assert_eq!(out.sites, 2);
        assert!(!out.code.contains("for ("));
    }

    #[test]
    fn c_equality_chain_becomes_switch() {
        let code = "int f(int v) { int r; if (v == 1) { r = 10; } else if (v == 2) { r = 20; } else { r = 0; } return r; }\n";
        let out = pass_if_to_switch(code, Language::C).unwrap();
        assert_eq!(out.sites, 1);
        assert!(out.code.contains("switch (v)"));
        assert!(out.code.contains("case 1:"));
        assert!(out.code.contains("default:"));
    }

    #[test]
    fn non_equality_chain_left_alone() {
        let code = "int f(int v) { int r = 0; if (v > 1) { r = 1; } else { r = 2; } return r; }\n";
        let out = pass_if_to_switch(code, Language::C).unwrap();
        assert_eq!(out.sites, 0);
    }

    #[test]
    fn python_match_becomes_if_chain() {
        let code = "def f(x):\n    match x:\n        case 1:\n            r = 10\n        case 2:\n            r = 20\n        case _:\n            r = 0\n    return r\n";
        let out = pass_if_to_switch(code, Language::Python).unwrap();
        assert_eq!(out.sites, 1);
        assert!(out.code.contains("if x == 1:"));
        assert!(out.code.contains("elif x == 2:"));
        assert!(out.code.contains("else:"));
        assert!(!out.code.contains("match"));
    }

    #[test]
    fn python_range_loop_becomes_recursion() {
        let code = "def f():\n    total = 0\n    for i in range(1, 11):\n        total += i\n    return total\nprint(f())\n";
        let out = pass_loop_to_recursion(code, Language::Python).unwrap();
        assert_eq!(out.sites, 1, "{}", out.code);
        assert!(out.code.contains("def ladder_step(i):"));
        assert!(out.code.contains("nonlocal total"));
        assert!(out.code.contains("ladder_step(1)"));
        assert!(out.code.contains("i = 10"));
    }

    #[test]
    fn python_dynamic_bound_loop_skipped() {
        let code = "def f(n):\n    total = 0\n    for i in range(n):\n        total += i\n    return total\n";
        let out = pass_loop_to_recursion(code, Language::Python).unwrap();
        assert_eq!(out.sites, 0);
    }

    #[test]
    fn cpp_literal_loop_becomes_lambda_recursion() {
        let code = "#include <cstdio>\nint main() { long s = 0; for (int i = 0; i < 10; i++) { s += i; } printf(\"%ld\\n\", s); return 0; }\n";
        let out = pass_loop_to_recursion(code, Language::Cpp).unwrap();
        assert_eq!(out.sites, 1);
        assert!(out.code.contains("auto ladder_call"));
        assert!(out.code.contains("self_ref(self_ref, i + 1)"));
    }

    #[test]
    fn transform_constructs_composes() {
        let code = "def f(x):\n    total = 0\n    for i in range(1, 4):\n        total += i\n    return total + x\nprint(f(0))\n";
        let out = transform_constructs(code, Language::Python, 0).unwrap();
        assert!(!out.contains("for i in range"));
    }
}
