//! D4/D5/D6/D7: data representation restructuring. Each sub-pass applies
//! only where the rewrite is syntactically safe and records zero sites
//! otherwise.

use super::cblock::{self, CStmt};
use super::pyblock::{LineKind, PySource};
use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Edit, Language, TokenKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Marker suffix for vectors built by the aggregation pass, so the splitting
/// pass does not immediately undo them inside the same combo.
const BUNDLE_SUFFIX: &str = "_bundle";

/// The spec's combined D4+D5+D6+D7 operation.
pub fn restructure_data(code: &str, language: Language, seed: u64) -> Result<String, ObfuscateError> {
    let a = pass_aggregate(code, language)?;
    let b = pass_split(&a.code, language)?;
    let mut rng = super::technique_rng(seed, crate::taxonomy::TechniqueId::D6);
    let c = pass_reorder(&b.code, language, &mut rng)?;
    let d = pass_scope(&c.code, language)?;
    Ok(d.code)
}

// ---------------------------------------------------------------------------
// D4: scalar group -> vector
// ---------------------------------------------------------------------------

pub(crate) fn pass_aggregate(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::Python => aggregate_python(code),
        Language::C | Language::Cpp => aggregate_c(code, language),
        Language::Solidity => Ok(PassOutcome::unchanged(code)),
    }
}

fn aggregate_python(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let py = PySource::parse(code)?;
    let lexed = &py.lexed;

    // one aggregation per file keeps the rewrite reviewable
    let mut run: Vec<(usize, String, String)> = Vec::new(); // (logical, name, literal)
    let mut best: Vec<(usize, String, String)> = Vec::new();
    let mut prev: Option<usize> = None;
    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code {
            continue;
        }
        let toks = py.tokens_of(logical);
        let simple = toks.len() == 3
            && py.token(toks[0]).kind == TokenKind::Ident
            && py.token_text(toks[1]) == "="
            && py.token(toks[2]).kind == TokenKind::Number
            && py.token_text(toks[2]).chars().all(|c| c.is_ascii_digit());
        let same_block = prev
            .map(|p| py.logicals[p].indent == logical.indent)
            .unwrap_or(true);
        if simple && same_block {
            run.push((li, py.token_text(toks[0]).to_string(), py.token_text(toks[2]).to_string()));
            prev = Some(li);
        } else {
            if run.len() > best.len() {
                best = run.clone();
            }
            run.clear();
            prev = None;
            if simple {
                run.push((li, py.token_text(toks[0]).to_string(), py.token_text(toks[2]).to_string()));
                prev = Some(li);
            }
        }
    }
    if run.len() > best.len() {
        best = run;
    }
    if best.len() < 2 {
        return Ok(PassOutcome::unchanged(code));
    }

    // distinct names, none used unsafely
    let names: Vec<&str> = best.iter().map(|(_, n, _)| n.as_str()).collect();
    let mut distinct = names.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() != names.len() {
        return Ok(PassOutcome::unchanged(code));
    }
    for name in &names {
        if !python_name_safe_to_alias(&py, name, &best) {
            return Ok(PassOutcome::unchanged(code));
        }
    }

    let vec_name = {
        let base = format!("{}{}", names[0], BUNDLE_SUFFIX);
        let mut name = base.clone();
        let mut n = 1;
        while code.contains(&name) {
            n += 1;
            name = format!("{base}{n}");
        }
        name
    };
    let run_lines: std::collections::BTreeSet<usize> = best.iter().map(|(li, _, _)| *li).collect();
    let first_li = *run_lines.iter().next().unwrap();
    let indent = &py.logicals[first_li].indent;
    let literals: Vec<&str> = best.iter().map(|(_, _, v)| v.as_str()).collect();

    // edits: replace the run with one vector assignment, rename reads
    let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
    replacements[first_li] = Some(vec![format!("{indent}{vec_name} = [{}]", literals.join(", "))]);
    for li in run_lines.iter().skip(1) {
        replacements[*li] = Some(vec![]);
    }
    // token renames on logicals outside the run
    for (li, logical) in py.logicals.iter().enumerate() {
        if run_lines.contains(&li) || logical.kind != LineKind::Code {
            continue;
        }
        let toks = py.tokens_of(logical);
        let mut new_lines: Vec<String> = py.lines[logical.first..=logical.last].to_vec();
        let mut changed = false;
        for &t in toks.iter().rev() {
            let tok = py.token(t);
            if tok.kind != TokenKind::Ident {
                continue;
            }
            let text = py.token_text(t);
            if let Some(pos) = names.iter().position(|n| *n == text) {
                // skip attribute access
                if t > 0 && lexed.text(&lexed.tokens[t - 1]) == "." {
                    continue;
                }
                // splice within the physical line
                let line_idx = tok.line as usize - 1 - logical.first;
                let line_start_byte = byte_of_line(code, tok.line as usize);
                let col = tok.start - line_start_byte;
                let line = &new_lines[line_idx];
                let mut s = line.clone();
                s.replace_range(col..col + text.len(), &format!("{vec_name}[{pos}]"));
                new_lines[line_idx] = s;
                changed = true;
            }
        }
        if changed {
            replacements[li] = Some(new_lines);
        }
    }

    Ok(PassOutcome { code: py.render(&replacements), sites: 1 })
}

fn byte_of_line(code: &str, line_1based: usize) -> usize {
    let mut line = 1usize;
    for (i, b) in code.bytes().enumerate() {
        if line == line_1based {
            return i;
        }
        if b == b'\n' {
            line += 1;
            if line == line_1based {
                return i + 1;
            }
        }
    }
    code.len()
}

fn python_name_safe_to_alias(py: &PySource, name: &str, run: &[(usize, String, String)]) -> bool {
    let run_lines: std::collections::BTreeSet<usize> = run.iter().map(|(li, _, _)| *li).collect();
    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code {
            continue;
        }
        let head = py.head_word(li).unwrap_or("");
        let toks = py.tokens_of(logical);
        let mentions = toks.iter().any(|&t| py.token_text(t) == name);
        if !mentions {
            continue;
        }
        if matches!(head, "def" | "class" | "import" | "from" | "global" | "nonlocal" | "del" | "lambda") {
            return false;
        }
        if run_lines.contains(&li) {
            continue;
        }
        // re-binding inside a def body would shadow; conservative reject when
        // the mention sits deeper than module level and is an assignment
        for (i, &t) in toks.iter().enumerate() {
            if py.token_text(t) == name && py.token(t).kind == TokenKind::Ident {
                let prev_dot = t > 0 && py.lexed.text(&py.lexed.tokens[t - 1]) == ".";
                if prev_dot {
                    return false;
                }
                let _ = i;
            }
        }
    }
    true
}

fn aggregate_c(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    // reject when addresses are taken anywhere
    for f in cblock::find_functions(&lexed) {
        let Ok(stmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else { continue };
        // find a run of >= 2 consecutive `int NAME = LIT;` with one shared type
        let mut run: Vec<(usize, usize, String, String, String)> = Vec::new(); // (start,end,type,name,lit)
        for stmt in &stmts {
            let mut matched = None;
            if let CStmt::Simple { start, end } = stmt {
                let toks: Vec<usize> = (*start..=*end)
                    .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
                    .collect();
                if toks.len() == 5 {
                    let ty = &lexed.tokens[toks[0]];
                    let name = &lexed.tokens[toks[1]];
                    let eq = &lexed.tokens[toks[2]];
                    let lit = &lexed.tokens[toks[3]];
                    if ty.kind == TokenKind::Keyword
                        && matches!(lexed.text(ty), "int" | "long")
                        && name.kind == TokenKind::Ident
                        && lexed.text(eq) == "="
                        && lit.kind == TokenKind::Number
                        && lexed.text(lit).chars().all(|c| c.is_ascii_digit())
                    {
                        matched = Some((
                            *start,
                            *end,
                            lexed.text(ty).to_string(),
                            lexed.text(name).to_string(),
                            lexed.text(lit).to_string(),
                        ));
                    }
                }
            }
            match matched {
                Some(m) => {
                    if let Some((_, _, ty, _, _)) = run.first() {
                        if *ty != m.2 {
                            if run.len() >= 2 {
                                break;
                            }
                            run.clear();
                        }
                    }
                    run.push(m);
                }
                None => {
                    if run.len() >= 2 {
                        break;
                    }
                    run.clear();
                }
            }
        }
        if run.len() < 2 {
            continue;
        }
        let names: Vec<&str> = run.iter().map(|(_, _, _, n, _)| n.as_str()).collect();
        // address-taken or shadowing checks across the whole function body
        let body_range = lexed.tokens[f.body_open].start..lexed.tokens[f.body_close].end;
        let mut safe = true;
        for (i, tok) in lexed.tokens.iter().enumerate() {
            if tok.kind == TokenKind::Ident && names.contains(&lexed.text(tok)) {
                if !body_range.contains(&tok.start) {
                    safe = false; // same name outside this function
                    break;
                }
                if i > 0 && lexed.text(&lexed.tokens[i - 1]) == "&" {
                    safe = false;
                    break;
                }
            }
        }
        if !safe {
            continue;
        }

        let ty = run[0].2.clone();
        let vec_name = {
            let base = format!("{}{}", names[0], BUNDLE_SUFFIX);
            let mut name = base.clone();
            let mut n = 1;
            while code.contains(&name) {
                n += 1;
                name = format!("{base}{n}");
            }
            name
        };
        let literals: Vec<&str> = run.iter().map(|(_, _, _, _, v)| v.as_str()).collect();
        let mut edits = Vec::new();
        let first_start = lexed.tokens[run[0].0].start;
        let first_end = lexed.tokens[run[0].1].end;
        edits.push(Edit::replace(
            first_start,
            first_end,
            format!("{ty} {vec_name}[{}] = {{ {} }};", run.len(), literals.join(", ")),
        ));
        for (s, e, _, _, _) in run.iter().skip(1) {
            edits.push(Edit::replace(lexed.tokens[*s].start, lexed.tokens[*e].end, String::new()));
        }
        let decl_tokens: std::collections::BTreeSet<usize> = run
            .iter()
            .flat_map(|(s, e, _, _, _)| (*s..=*e).collect::<Vec<_>>())
            .collect();
        for (i, tok) in lexed.tokens.iter().enumerate() {
            if tok.kind == TokenKind::Ident
                && body_range.contains(&tok.start)
                && !decl_tokens.contains(&i)
            {
                if let Some(pos) = names.iter().position(|n| *n == lexed.text(tok)) {
                    edits.push(Edit::replace(tok.start, tok.end, format!("{vec_name}[{pos}]")));
                }
            }
        }
        return Ok(PassOutcome { code: lang::apply_edits(code, edits), sites: 1 });
    }
    Ok(PassOutcome::unchanged(code))
}

// ---------------------------------------------------------------------------
// D5: vector -> scalars at read sites
// ---------------------------------------------------------------------------

pub(crate) fn pass_split(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::Python => split_python(code),
        Language::C | Language::Cpp => split_c(code, language),
        Language::Solidity => Ok(PassOutcome::unchanged(code)),
    }
}

fn split_python(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let py = PySource::parse(code)?;
    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code {
            continue;
        }
        let toks = py.tokens_of(logical);
        // NAME = [ lit (, lit)* ]
        if toks.len() < 5
            || py.token(toks[0]).kind != TokenKind::Ident
            || py.token_text(toks[1]) != "="
            || py.token_text(toks[2]) != "["
            || py.token_text(*toks.last().unwrap()) != "]"
        {
            continue;
        }
        let name = py.token_text(toks[0]).to_string();
        if name.contains(BUNDLE_SUFFIX) {
            continue; // freshly aggregated by D4
        }
        let mut elems = 0usize;
        let mut ok = true;
        for chunk in toks[3..toks.len() - 1].chunks(2) {
            let lit_ok = matches!(py.token(chunk[0]).kind, TokenKind::Number | TokenKind::Str)
                || matches!(py.token_text(chunk[0]), "True" | "False" | "None");
            if !lit_ok {
                ok = false;
                break;
            }
            if chunk.len() == 2 && py.token_text(chunk[1]) != "," {
                ok = false;
                break;
            }
            elems += 1;
        }
        if !ok || elems < 2 {
            continue;
        }
        if !python_vector_reads_only(&py, &name, li) {
            continue;
        }

        // alias scalars after the assignment; rewrite constant-index reads
        let indent = logical.indent.clone();
        let mut alias_names = Vec::new();
        for i in 0..elems {
            let base = format!("{name}_part{i}");
            let mut alias = base.clone();
            let mut n = 1;
            while code.contains(&alias) {
                n += 1;
                alias = format!("{base}{n}");
            }
            alias_names.push(alias);
        }
        let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
        let mut decl_lines: Vec<String> = py.lines[logical.first..=logical.last].to_vec();
        for (i, alias) in alias_names.iter().enumerate() {
            decl_lines.push(format!("{indent}{alias} = {name}[{i}]"));
        }
        replacements[li] = Some(decl_lines);

        for (lj, lg) in py.logicals.iter().enumerate() {
            if lj == li || lg.kind != LineKind::Code {
                continue;
            }
            let jtoks = py.tokens_of(lg);
            let mut new_lines: Vec<String> = py.lines[lg.first..=lg.last].to_vec();
            let mut changed = false;
            for w in (0..jtoks.len().saturating_sub(3)).rev() {
                let quad = [jtoks[w], jtoks[w + 1], jtoks[w + 2], jtoks[w + 3]];
                if py.token_text(quad[0]) == name
                    && py.token_text(quad[1]) == "["
                    && py.token(quad[2]).kind == TokenKind::Number
                    && py.token_text(quad[3]) == "]"
                {
                    let Ok(idx) = py.token_text(quad[2]).parse::<usize>() else { continue };
                    if idx >= elems {
                        continue;
                    }
                    let start_tok = py.token(quad[0]);
                    let end_tok = py.token(quad[3]);
                    let line_idx = start_tok.line as usize - 1 - lg.first;
                    let line_start = byte_of_line(code, start_tok.line as usize);
                    if end_tok.line != start_tok.line {
                        continue;
                    }
                    let col = start_tok.start - line_start;
                    let width = end_tok.end - start_tok.start;
                    let mut s = new_lines[line_idx].clone();
                    s.replace_range(col..col + width, &alias_names[idx]);
                    new_lines[line_idx] = s;
                    changed = true;
                }
            }
            if changed {
                replacements[lj] = Some(new_lines);
            }
        }
        return Ok(PassOutcome { code: py.render(&replacements), sites: 1 });
    }
    Ok(PassOutcome::unchanged(code))
}

fn python_vector_reads_only(py: &PySource, name: &str, decl_li: usize) -> bool {
    let mut assignments = 0usize;
    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code {
            continue;
        }
        let toks = py.tokens_of(logical);
        for (i, &t) in toks.iter().enumerate() {
            if py.token_text(t) != name || py.token(t).kind != TokenKind::Ident {
                continue;
            }
            if t > 0 && py.lexed.text(&py.lexed.tokens[t - 1]) == "." {
                return false;
            }
            let next = toks.get(i + 1).map(|&x| py.token_text(x)).unwrap_or("");
            if next == "." {
                return false; // method call may mutate
            }
            if next == "=" && i == 0 {
                assignments += 1;
                if li != decl_li {
                    return false;
                }
            }
            if next == "[" {
                // find matching ] then check for a store
                let mut depth = 0i32;
                let mut j = i + 1;
                while j < toks.len() {
                    match py.token_text(toks[j]) {
                        "[" => depth += 1,
                        "]" => {
                            depth -= 1;
                            if depth == 0 {
                                break;
                            }
                        }
                        _ => {}
                    }
                    j += 1;
                }
                let after = toks.get(j + 1).map(|&x| py.token_text(x)).unwrap_or("");
                if matches!(after, "=" | "+=" | "-=" | "*=" | "/=" | "//=" | "%=") {
                    return false;
                }
            }
        }
    }
    assignments == 1
}

fn split_c(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    for f in cblock::find_functions(&lexed) {
        let Ok(stmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else { continue };
        for stmt in &stmts {
            let CStmt::Simple { start, end } = stmt else { continue };
            let toks: Vec<usize> = (*start..=*end)
                .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
                .collect();
            // TYPE NAME [ N? ] = { lits } ;
            if toks.len() < 9 {
                continue;
            }
            let ty = &lexed.tokens[toks[0]];
            if ty.kind != TokenKind::Keyword || !matches!(lexed.text(ty), "int" | "long") {
                continue;
            }
            let name_t = &lexed.tokens[toks[1]];
            if name_t.kind != TokenKind::Ident || lexed.text(&lexed.tokens[toks[2]]) != "[" {
                continue;
            }
            let name = lexed.text(name_t).to_string();
            let mut k = 3usize;
            if lexed.tokens[toks[k]].kind == TokenKind::Number {
                k += 1;
            }
            if lexed.text(&lexed.tokens[toks[k]]) != "]" || lexed.text(&lexed.tokens[toks[k + 1]]) != "=" || lexed.text(&lexed.tokens[toks[k + 2]]) != "{" {
                continue;
            }
            let mut lits = Vec::new();
            let mut m = k + 3;
            let mut ok = true;
            while m < toks.len() && lexed.text(&lexed.tokens[toks[m]]) != "}" {
                let t = &lexed.tokens[toks[m]];
                if t.kind == TokenKind::Number {
                    lits.push(lexed.text(t).to_string());
                    m += 1;
                    if lexed.text(&lexed.tokens[toks[m]]) == "," {
                        m += 1;
                    }
                } else {
                    ok = false;
                    break;
                }
            }
            if !ok || lits.len() < 2 {
                continue;
            }
            if !c_vector_reads_only(&lexed, &name, *start, *end) {
                continue;
            }

            let ty_text = lexed.text(ty).to_string();
            let mut aliases = Vec::new();
            let mut decl_text = String::new();
            for (i, _) in lits.iter().enumerate() {
                let base = format!("{name}_part{i}");
                let mut alias = base.clone();
                let mut n = 1;
                while code.contains(&alias) {
                    n += 1;
                    alias = format!("{base}{n}");
                }
                decl_text.push_str(&format!(" {ty_text} {alias} = {name}[{i}];"));
                aliases.push(alias);
            }
            let mut edits = vec![Edit::insert(lexed.tokens[*end].end, decl_text)];
            // rewrite constant-index reads elsewhere in the function
            let body_range = lexed.tokens[f.body_open].start..lexed.tokens[f.body_close].end;
            let stmt_range = lexed.tokens[*start].start..lexed.tokens[*end].end;
            let all: Vec<usize> = (0..lexed.tokens.len()).collect();
            for w in 0..all.len().saturating_sub(3) {
                let t0 = &lexed.tokens[w];
                if t0.kind != TokenKind::Ident
                    || lexed.text(t0) != name
                    || !body_range.contains(&t0.start)
                    || stmt_range.contains(&t0.start)
                {
                    continue;
                }
                let t1 = &lexed.tokens[w + 1];
                let t2 = &lexed.tokens[w + 2];
                let t3 = &lexed.tokens[w + 3];
                if lexed.text(t1) == "[" && t2.kind == TokenKind::Number && lexed.text(t3) == "]" {
                    let Ok(idx) = lexed.text(t2).parse::<usize>() else { continue };
                    if idx < aliases.len() {
                        edits.push(Edit::replace(t0.start, t3.end, aliases[idx].clone()));
                    }
                }
            }
            return Ok(PassOutcome { code: lang::apply_edits(code, edits), sites: 1 });
        }
    }
    Ok(PassOutcome::unchanged(code))
}

fn c_vector_reads_only(lexed: &lang::Lexed, name: &str, decl_start: usize, decl_end: usize) -> bool {
    let decl_range = lexed.tokens[decl_start].start..lexed.tokens[decl_end].end;
    for (i, tok) in lexed.tokens.iter().enumerate() {
        if tok.kind != TokenKind::Ident || lexed.text(tok) != name {
            continue;
        }
        if decl_range.contains(&tok.start) {
            continue;
        }
        if i > 0 && lexed.text(&lexed.tokens[i - 1]) == "&" {
            return false;
        }
        let next = lexed.tokens.get(i + 1).map(|t| lexed.text(t)).unwrap_or("");
        if next != "[" {
            return false; // bare use: aliasing possible
        }
        // find matching ] and check for store
        let mut depth = 0i32;
        let mut j = i + 1;
        while j < lexed.tokens.len() {
            match lexed.text(&lexed.tokens[j]) {
                "[" => depth += 1,
                "]" => {
                    depth -= 1;
                    if depth == 0 {
                        break;
                    }
                }
                _ => {}
            }
            j += 1;
        }
        let after = lexed.tokens.get(j + 1).map(|t| lexed.text(t)).unwrap_or("");
        if matches!(after, "=" | "+=" | "-=" | "*=" | "/=" | "%=" | "++" | "--") {
            return false;
        }
    }
    true
}

// ---------------------------------------------------------------------------
// D6: member reorder
// ---------------------------------------------------------------------------

pub(crate) fn pass_reorder(code: &str, language: Language, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::C | Language::Cpp | Language::Solidity => reorder_struct(code, language, rng),
        Language::Python => reorder_class_attrs(code, rng),
    }
}

fn reorder_struct(code: &str, language: Language, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let toks = &lexed.tokens;
    let mut sites = 0u32;
    let mut edits = Vec::new();

    let mut i = 0usize;
    while i < toks.len() {
        let is_struct_kw = toks[i].kind == TokenKind::Keyword && lexed.text(&toks[i]) == "struct";
        if !is_struct_kw {
            i += 1;
            continue;
        }
        let Some(name_i) = next_non_comment(&lexed, i + 1) else { break };
        if toks[name_i].kind != TokenKind::Ident {
            i += 1;
            continue;
        }
        let Some(open_i) = next_non_comment(&lexed, name_i + 1) else { break };
        if lexed.text(&toks[open_i]) != "{" {
            i = name_i + 1;
            continue;
        }
        let Some(close_i) = cblock::match_forward(&lexed, open_i) else { break };
        let struct_name = lexed.text(&toks[name_i]);

        // positional initializers anywhere make reordering unsafe
        let braced_init = code.contains("= {") || code.contains("={") || code.contains(&format!("{struct_name}("));
        if braced_init {
            i = close_i + 1;
            continue;
        }

        // split members on `;`
        let inner = &code[toks[open_i].end..toks[close_i].start];
        let mut members: Vec<&str> = inner
            .split(';')
            .map(|m| m.trim())
            .filter(|m| !m.is_empty())
            .collect();
        if members.len() < 2 || inner.contains('{') {
            i = close_i + 1;
            continue;
        }
        // seeded non-identity permutation: rotate then swap
        let original = members.clone();
        let rot = 1 + rng.random_range(0..(members.len() as u32 - 1)) as usize;
        members.rotate_left(rot);
        if members == original {
            members.swap(0, 1);
        }
        let rebuilt = members
            .iter()
            .map(|m| format!(" {m};"))
            .collect::<Vec<_>>()
            .join("");
        edits.push(Edit::replace(toks[open_i].end, toks[close_i].start, format!("{rebuilt} ")));
        sites += 1;
        i = close_i + 1;
    }
    if sites == 0 {
        return Ok(PassOutcome::unchanged(code));
    }
    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}

fn next_non_comment(lexed: &lang::Lexed, mut i: usize) -> Option<usize> {
    while i < lexed.tokens.len() {
        if lexed.tokens[i].kind != TokenKind::Comment {
            return Some(i);
        }
        i += 1;
    }
    None
}

fn reorder_class_attrs(code: &str, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    let py = PySource::parse(code)?;
    let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
    let mut sites = 0u32;

    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code || py.head_word(li) != Some("class") || !py.opens_suite(li) {
            continue;
        }
        let end = py.suite_end(li);
        // leading run of `NAME = literal` attribute lines
        let mut run: Vec<usize> = Vec::new();
        for k in li + 1..end {
            let l = &py.logicals[k];
            if l.kind != LineKind::Code {
                continue;
            }
            let toks = py.tokens_of(l);
            let simple = toks.len() == 3
                && py.token(toks[0]).kind == TokenKind::Ident
                && py.token_text(toks[1]) == "="
                && (matches!(py.token(toks[2]).kind, TokenKind::Number | TokenKind::Str)
                    || matches!(py.token_text(toks[2]), "True" | "False" | "None"));
            if simple {
                run.push(k);
            } else {
                break;
            }
        }
        if run.len() < 2 {
            continue;
        }
        let mut order: Vec<usize> = (0..run.len()).collect();
        let rot = 1 + rng.random_range(0..(run.len() as u32 - 1)) as usize;
        order.rotate_left(rot);
        let texts: Vec<Vec<String>> = run
            .iter()
            .map(|&k| py.lines[py.logicals[k].first..=py.logicals[k].last].to_vec())
            .collect();
        for (slot, &src_idx) in order.iter().enumerate() {
            replacements[run[slot]] = Some(texts[src_idx].clone());
        }
        sites += 1;
    }
    if sites == 0 {
        return Ok(PassOutcome::unchanged(code));
    }
    Ok(PassOutcome { code: py.render(&replacements), sites })
}

// ---------------------------------------------------------------------------
// D7: widen variable scope one level
// ---------------------------------------------------------------------------

pub(crate) fn pass_scope(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::Python => scope_python(code),
        Language::C | Language::Cpp => scope_c(code, language),
        Language::Solidity => Ok(PassOutcome::unchanged(code)),
    }
}

/// Python: a function-local constant assigned exactly once, with a name used
/// nowhere else in the file, moves to module scope.
fn scope_python(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let py = PySource::parse(code)?;
    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code || py.head_word(li) != Some("def") || !py.opens_suite(li) || !logical.indent.is_empty() {
            continue;
        }
        let end = py.suite_end(li);
        for k in li + 1..end {
            let l = &py.logicals[k];
            if l.kind != LineKind::Code {
                continue;
            }
            let toks = py.tokens_of(l);
            let simple = toks.len() == 3
                && py.token(toks[0]).kind == TokenKind::Ident
                && py.token_text(toks[1]) == "="
                && (matches!(py.token(toks[2]).kind, TokenKind::Number | TokenKind::Str)
                    || matches!(py.token_text(toks[2]), "True" | "False"));
            if !simple {
                continue;
            }
            let name = py.token_text(toks[0]).to_string();
            // name must occur only inside this def, assigned exactly once
            let mut occurrences_outside = 0usize;
            let mut assignments = 0usize;
            for (lj, lg) in py.logicals.iter().enumerate() {
                if lg.kind != LineKind::Code {
                    continue;
                }
                let jtoks = py.tokens_of(lg);
                for (pos, &t) in jtoks.iter().enumerate() {
                    if py.token_text(t) != name || py.token(t).kind != TokenKind::Ident {
                        continue;
                    }
                    let inside = lj > li && lj < end;
                    if !inside {
                        occurrences_outside += 1;
                    }
                    let next = jtoks.get(pos + 1).map(|&x| py.token_text(x)).unwrap_or("");
                    if pos == 0 && matches!(next, "=" | "+=" | "-=" | "*=" | "/=" | "//=" | "%=") {
                        assignments += 1;
                    }
                }
            }
            if occurrences_outside > 0 || assignments != 1 {
                continue;
            }
            let literal = py.token_text(toks[2]).to_string();
            let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
            replacements[k] = Some(vec![]);
            // suite must not become empty
            let remaining = (li + 1..end).any(|x| x != k && py.logicals[x].kind == LineKind::Code);
            if !remaining {
                continue;
            }
            let rendered = py.render(&replacements);
            let def_line = py.logicals[li].first;
            let mut out_lines: Vec<String> = rendered.lines().map(|s| s.to_string()).collect();
            let at = def_line.min(out_lines.len());
            out_lines.insert(at, format!("{name} = {literal}"));
            let mut text = out_lines.join("\n");
            if code.ends_with('\n') {
                text.push('\n');
            }
            return Ok(PassOutcome { code: text, sites: 1 });
        }
    }
    Ok(PassOutcome::unchanged(code))
}

/// C: a declaration inside a nested block hoists to function scope when the
/// name is unique within the function.
fn scope_c(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    for f in cblock::find_functions(&lexed) {
        let Ok(stmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else { continue };
        let mut found: Option<(usize, usize, String, String, String)> = None; // (start,end,type,name,rhs)
        find_nested_decl(&lexed, &stmts, false, &mut found);
        let Some((start, end, ty, name, rhs)) = found else { continue };
        // uniqueness: the name must appear only within this declaration plus
        // reads inside the function
        let decl_count = lexed
            .tokens
            .iter()
            .enumerate()
            .filter(|(i, t)| {
                t.kind == TokenKind::Ident
                    && lexed.text(t) == name
                    && !(lexed.tokens[start].start..=lexed.tokens[end].end).contains(&t.start)
                    && {
                        let _ = i;
                        true
                    }
            })
            .count();
        let body_range = lexed.tokens[f.body_open].start..lexed.tokens[f.body_close].end;
        let outside = lexed
            .tokens
            .iter()
            .any(|t| t.kind == TokenKind::Ident && lexed.text(t) == name && !body_range.contains(&t.start));
        if outside {
            continue;
        }
        let _ = decl_count;
        let mut edits = Vec::new();
        edits.push(Edit::replace(
            lexed.tokens[start].start,
            lexed.tokens[end].end,
            format!("{name} = {rhs};"),
        ));
        edits.push(Edit::insert(lexed.tokens[f.body_open].end, format!(" {ty} {name};")));
        return Ok(PassOutcome { code: lang::apply_edits(code, edits), sites: 1 });
    }
    Ok(PassOutcome::unchanged(code))
}

fn find_nested_decl(
    lexed: &lang::Lexed,
    stmts: &[CStmt],
    nested: bool,
    found: &mut Option<(usize, usize, String, String, String)>,
) {
    const TYPES: &[&str] = &["int", "long", "short", "double", "float", "char"];
    for stmt in stmts {
        if found.is_some() {
            return;
        }
        match stmt {
            CStmt::Simple { start, end } if nested => {
                let toks: Vec<usize> = (*start..=*end)
                    .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
                    .collect();
                if toks.len() >= 5 {
                    let ty = &lexed.tokens[toks[0]];
                    let name_t = &lexed.tokens[toks[1]];
                    let eq = &lexed.tokens[toks[2]];
                    if ty.kind == TokenKind::Keyword
                        && TYPES.contains(&lexed.text(ty))
                        && name_t.kind == TokenKind::Ident
                        && lexed.text(eq) == "="
                    {
                        let rhs = lexed.src
                            [lexed.tokens[toks[3]].start..lexed.tokens[*end].start]
                            .trim()
                            .to_string();
                        *found = Some((
                            *start,
                            *end,
                            lexed.text(ty).to_string(),
                            lexed.text(name_t).to_string(),
                            rhs,
                        ));
                    }
                }
            }
            CStmt::Block { body, .. } => find_nested_decl(lexed, body, true, found),
            CStmt::If { then, els, .. } => {
                find_nested_decl(lexed, std::slice::from_ref(then), true, found);
                if let Some(e) = els {
                    find_nested_decl(lexed, std::slice::from_ref(e), true, found);
                }
            }
            CStmt::While { body, .. } | CStmt::For { body, .. } => {
                find_nested_decl(lexed, std::slice::from_ref(body), true, found)
            }
            _ => {}
        }
    }
}
