//! C2: control-flow flattening. Eligible function bodies are split into
//! basic blocks executed by a state-variable dispatcher loop; ineligible
//! functions (generators, unsupported constructs, unhoistable declarations)
//! are skipped.

use super::cblock::{self, CStmt};
use super::pyblock::{indent_step, LineKind, PySource};
use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Language, Lexed, TokenKind};

pub fn flatten_control_flow(code: &str, language: Language, _seed: u64) -> Result<String, ObfuscateError> {
    Ok(pass(code, language)?.code)
}

pub(crate) fn pass(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    match language {
        Language::Python => flatten_python(code),
        _ => flatten_c_like(code, language),
    }
}

const EXIT_STATE: isize = -1;

// ---------------------------------------------------------------------------
// language-independent lowering
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
enum Stmt {
    Simple(String),
    If { arms: Vec<(String, Vec<Stmt>)>, els: Option<Vec<Stmt>> },
    While { cond: String, body: Vec<Stmt> },
    Break,
    Continue,
}

#[derive(Debug, Clone)]
struct State {
    body: Vec<String>,
    terminal: Terminal,
}

#[derive(Debug, Clone)]
enum Terminal {
    Goto(isize),
    Branch { cond: String, then_to: isize, else_to: isize },
}

struct Lowering {
    states: Vec<Option<State>>,
}

impl Lowering {
    fn alloc(&mut self) -> isize {
        self.states.push(None);
        (self.states.len() - 1) as isize
    }

    fn set(&mut self, id: isize, state: State) {
        self.states[id as usize] = Some(state);
    }

    /// Lowers a statement sequence; execution continues at `next` afterwards.
    /// `loop_ctx` = (head, exit) of the innermost enclosing while.
    fn lower_seq(&mut self, stmts: &[Stmt], next: isize, loop_ctx: Option<(isize, isize)>) -> isize {
        let mut cont = next;
        for stmt in stmts.iter().rev() {
            cont = self.lower_one(stmt, cont, loop_ctx);
        }
        cont
    }

    fn lower_one(&mut self, stmt: &Stmt, next: isize, loop_ctx: Option<(isize, isize)>) -> isize {
        match stmt {
            Stmt::Simple(text) => {
                let id = self.alloc();
                self.set(id, State { body: vec![text.clone()], terminal: Terminal::Goto(next) });
                id
            }
            Stmt::Break => {
                let id = self.alloc();
                let (_, exit) = loop_ctx.expect("break outside loop rejected earlier");
                self.set(id, State { body: vec![], terminal: Terminal::Goto(exit) });
                id
            }
            Stmt::Continue => {
                let id = self.alloc();
                let (head, _) = loop_ctx.expect("continue outside loop rejected earlier");
                self.set(id, State { body: vec![], terminal: Terminal::Goto(head) });
                id
            }
            Stmt::If { arms, els } => {
                let else_entry = match els {
                    Some(body) => self.lower_seq(body, next, loop_ctx),
                    None => next,
                };
                let mut entry = else_entry;
                for (cond, body) in arms.iter().rev() {
                    let then_entry = self.lower_seq(body, next, loop_ctx);
                    let id = self.alloc();
                    self.set(
                        id,
                        State {
                            body: vec![],
                            terminal: Terminal::Branch { cond: cond.clone(), then_to: then_entry, else_to: entry },
                        },
                    );
                    entry = id;
                }
                entry
            }
            Stmt::While { cond, body } => {
                let head = self.alloc();
                let body_entry = self.lower_seq(body, head, Some((head, next)));
                self.set(
                    head,
                    State {
                        body: vec![],
                        terminal: Terminal::Branch { cond: cond.clone(), then_to: body_entry, else_to: next },
                    },
                );
                head
            }
        }
    }
}

fn lower(stmts: &[Stmt]) -> Option<(Vec<State>, isize)> {
    let mut l = Lowering { states: Vec::new() };
    let entry = l.lower_seq(stmts, EXIT_STATE, None);
    if l.states.len() < 2 {
        return None; // nothing worth flattening
    }
    let states = l.states.into_iter().collect::<Option<Vec<_>>>()?;
    Some((states, entry))
}

fn stmt_count(stmts: &[Stmt]) -> usize {
    stmts
        .iter()
        .map(|s| match s {
            Stmt::Simple(_) | Stmt::Break | Stmt::Continue => 1,
            Stmt::If { arms, els } => {
                1 + arms.iter().map(|(_, b)| stmt_count(b)).sum::<usize>()
                    + els.as_ref().map(|b| stmt_count(b)).unwrap_or(0)
            }
            Stmt::While { body, .. } => 1 + stmt_count(body),
        })
        .sum()
}

// ---------------------------------------------------------------------------
// Python front end
// ---------------------------------------------------------------------------

fn flatten_python(code: &str) -> Result<PassOutcome, ObfuscateError> {
    let py = PySource::parse(code)?;
    let step = indent_step(&py);
    let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
    let mut sites = 0u32;

    for (li, logical) in py.logicals.iter().enumerate() {
        if logical.kind != LineKind::Code || py.head_word(li) != Some("def") || !py.opens_suite(li) {
            continue;
        }
        let end = py.suite_end(li);
        let Some(stmts) = parse_py_block(&py, li + 1, end, &format!("{}{}", logical.indent, step), false) else {
            continue;
        };
        if stmt_count(&stmts) < 2 {
            continue;
        }
        let Some((states, entry)) = lower(&stmts) else { continue };

        let fi = &logical.indent;
        let b1 = format!("{fi}{step}");
        let b2 = format!("{b1}{step}");
        let b3 = format!("{b2}{step}");
        let var = fresh_var(code);
        let mut lines = Vec::new();
        for idx in logical.first..=logical.last {
            lines.push(py.lines[idx].clone()); // def header verbatim
        }
        lines.push(format!("{b1}{var} = {entry}"));
        lines.push(format!("{b1}while {var} != {EXIT_STATE}:"));
        for (sid, state) in states.iter().enumerate() {
            let kw = if sid == 0 { "if" } else { "elif" };
            lines.push(format!("{b2}{kw} {var} == {sid}:"));
            for text in &state.body {
                lines.push(format!("{b3}{text}"));
            }
            match &state.terminal {
                Terminal::Goto(t) => {
                    lines.push(format!("{b3}{var} = {t}"));
                }
                Terminal::Branch { cond, then_to, else_to } => {
                    lines.push(format!("{b3}{var} = {then_to} if ({cond}) else {else_to}"));
                }
            }
        }
        lines.push(format!("{b2}else:"));
        lines.push(format!("{b3}{var} = {EXIT_STATE}"));

        replacements[li] = Some(lines);
        for inner in li + 1..end {
            replacements[inner] = Some(vec![]);
        }
        sites += 1;
    }

    if sites == 0 {
        return Ok(PassOutcome::unchanged(code));
    }
    Ok(PassOutcome { code: py.render(&replacements), sites })
}

fn fresh_var(code: &str) -> String {
    let mut name = "dispatch_state".to_string();
    let mut n = 1u32;
    while code.contains(&name) {
        n += 1;
        name = format!("dispatch_state{n}");
    }
    name
}

/// Parses the logicals in [from, to) at exactly `indent` into a Stmt list.
/// Returns None when the block uses constructs the flattener cannot carry.
fn parse_py_block(py: &PySource, from: usize, to: usize, indent: &str, in_loop: bool) -> Option<Vec<Stmt>> {
    let mut stmts = Vec::new();
    let mut k = from;
    while k < to {
        let l = &py.logicals[k];
        if l.kind != LineKind::Code {
            k += 1;
            continue;
        }
        if l.indent != indent {
            return None; // inconsistent nesting
        }
        // multi-line strings cannot be joined onto one line
        let toks = py.tokens_of(l);
        if toks.iter().any(|&t| {
            py.token(t).kind == TokenKind::Str && py.token_text(t).contains('\n')
        }) {
            return None;
        }
        let head = py.head_word(k)?;
        match head {
            "if" => {
                let step = &py.logicals[py.next_code(k + 1)?].indent;
                if step.len() <= indent.len() {
                    return None;
                }
                let mut arms = Vec::new();
                let mut els = None;
                let mut cursor = k;
                loop {
                    let ctoks = py.tokens_of(&py.logicals[cursor]);
                    let hw = py.head_word(cursor)?;
                    let cond_text = if hw == "else" {
                        None
                    } else {
                        let first = ctoks.first()?;
                        let last = ctoks.last()?;
                        Some(
                            py.lexed.src[py.token(*first).end..py.token(*last).start]
                                .trim()
                                .replace('\n', " "),
                        )
                    };
                    let sub_end = py.suite_end(cursor);
                    let body = parse_py_block(py, cursor + 1, sub_end, step, in_loop)?;
                    if body.is_empty() {
                        return None;
                    }
                    match cond_text {
                        Some(c) => arms.push((c, body)),
                        None => {
                            els = Some(body);
                            k = sub_end;
                            break;
                        }
                    }
                    // elif / else sibling?
                    match py.next_code(sub_end) {
                        Some(next)
                            if next < to
                                && py.logicals[next].indent == *indent
                                && matches!(py.head_word(next), Some("elif") | Some("else"))
                                && py.opens_suite(next) =>
                        {
                            cursor = next;
                        }
                        _ => {
                            k = sub_end;
                            break;
                        }
                    }
                }
                stmts.push(Stmt::If { arms, els });
            }
            "while" => {
                let ctoks = py.tokens_of(l);
                let first = ctoks.first()?;
                let last = ctoks.last()?;
                let cond = py.lexed.src[py.token(*first).end..py.token(*last).start]
                    .trim()
                    .replace('\n', " ");
                let sub_end = py.suite_end(k);
                let inner_indent = &py.logicals[py.next_code(k + 1)?].indent;
                if inner_indent.len() <= indent.len() {
                    return None;
                }
                // while-else is not expressible in the dispatcher
                if let Some(next) = py.next_code(sub_end) {
                    if next < to && py.logicals[next].indent == *indent && py.head_word(next) == Some("else") {
                        return None;
                    }
                }
                let body = parse_py_block(py, k + 1, sub_end, inner_indent, true)?;
                if body.is_empty() {
                    return None;
                }
                stmts.push(Stmt::While { cond, body });
                k = sub_end;
            }
            "break" => {
                if !in_loop {
                    return None;
                }
                stmts.push(Stmt::Break);
                k += 1;
            }
            "continue" => {
                if !in_loop {
                    return None;
                }
                stmts.push(Stmt::Continue);
                k += 1;
            }
            "for" | "with" | "try" | "def" | "class" | "match" | "async" | "elif" | "else" | "except" | "finally" => {
                return None;
            }
            _ => {
                if py.opens_suite(k) {
                    return None;
                }
                let text = py.logical_text(l);
                if text.contains("yield") {
                    return None;
                }
                stmts.push(Stmt::Simple(text));
                k += 1;
            }
        }
    }
    Some(stmts)
}

// ---------------------------------------------------------------------------
// C / C++ / Solidity front end
// ---------------------------------------------------------------------------

fn flatten_c_like(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let mut edits = Vec::new();
    let mut sites = 0u32;

    for f in cblock::find_functions(&lexed) {
        let Ok(cstmts) = cblock::parse_statements(&lexed, f.body_open, f.body_close) else { continue };
        if cstmts.is_empty() {
            continue;
        }
        let mut hoisted: Vec<String> = Vec::new();
        let mut names = std::collections::BTreeSet::new();
        let Some(stmts) = convert_c_block(&lexed, &cstmts, false, &mut hoisted, &mut names) else {
            continue;
        };
        if stmt_count(&stmts) < 2 {
            continue;
        }
        let Some((states, entry)) = lower(&stmts) else { continue };

        let var = fresh_var(code);
        let int_ty = if language == Language::Solidity { "int256" } else { "long" };
        let mut out = String::from("\n");
        for decl in &hoisted {
            out.push_str(&format!("    {decl}\n"));
        }
        out.push_str(&format!("    {int_ty} {var} = {entry};\n"));
        out.push_str(&format!("    while ({var} != {EXIT_STATE}) {{\n"));
        for (sid, state) in states.iter().enumerate() {
            let kw = if sid == 0 { "if" } else { "else if" };
            out.push_str(&format!("        {kw} ({var} == {sid}) {{\n"));
            for text in &state.body {
                out.push_str(&format!("            {text}\n"));
            }
            match &state.terminal {
                Terminal::Goto(t) => out.push_str(&format!("            {var} = {t};\n")),
                Terminal::Branch { cond, then_to, else_to } => {
                    out.push_str(&format!(
                        "            if ({cond}) {{ {var} = {then_to}; }} else {{ {var} = {else_to}; }}\n"
                    ));
                }
            }
            out.push_str("        }\n");
        }
        out.push_str(&format!("        else {{ {var} = {EXIT_STATE}; }}\n"));
        out.push_str("    }\n");

        let body_start = lexed.tokens[f.body_open].end;
        let body_end = lexed.tokens[f.body_close].start;
        edits.push(lang::Edit::replace(body_start, body_end, out));
        sites += 1;
    }

    if sites == 0 {
        return Ok(PassOutcome::unchanged(code));
    }
    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}

const C_DECL_TYPES: &[&str] = &[
    "int", "long", "short", "char", "float", "double", "unsigned", "signed", "bool", "_Bool", "size_t",
];

/// Converts a cblock statement tree; declarations are hoisted (split into a
/// bare declaration plus an in-state assignment). Returns None when the body
/// holds anything the dispatcher cannot express.
fn convert_c_block(
    lexed: &Lexed,
    cstmts: &[CStmt],
    in_loop: bool,
    hoisted: &mut Vec<String>,
    names: &mut std::collections::BTreeSet<String>,
) -> Option<Vec<Stmt>> {
    let mut out = Vec::new();
    for stmt in cstmts {
        match stmt {
            CStmt::Simple { start, end } => {
                let toks: Vec<usize> = (*start..=*end)
                    .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
                    .collect();
                let first = &lexed.tokens[toks[0]];
                let first_text = lexed.text(first);
                if first_text == "break" {
                    if !in_loop {
                        return None;
                    }
                    out.push(Stmt::Break);
                    continue;
                }
                if first_text == "continue" {
                    if !in_loop {
                        return None;
                    }
                    out.push(Stmt::Continue);
                    continue;
                }
                if first_text == "goto" {
                    return None;
                }
                // declarations the hoist cannot carry: qualified, aggregate,
                // or typedef-named (two leading identifiers)
                if first.kind == TokenKind::Keyword
                    && matches!(
                        first_text,
                        "const" | "static" | "volatile" | "register" | "auto" | "struct" | "enum"
                            | "union" | "typedef"
                    )
                {
                    return None;
                }
                if first.kind == TokenKind::Ident
                    && toks.len() > 1
                    && lexed.tokens[toks[1]].kind == TokenKind::Ident
                {
                    return None;
                }
                let is_decl_head = (first.kind == TokenKind::Keyword && C_DECL_TYPES.contains(&first_text))
                    || crate::lang::is_solidity_elementary_type(first_text)
                    || (lexed.language == Language::Solidity
                        && matches!(first_text, "address" | "string" | "bytes"));
                if is_decl_head {
                    // TYPE+ [*]* name [= expr] ;
                    let mut k = 1usize;
                    while k < toks.len() {
                        let t = &lexed.tokens[toks[k]];
                        let tt = lexed.text(t);
                        let is_more_type = (t.kind == TokenKind::Keyword && C_DECL_TYPES.contains(&tt))
                            || tt == "*"
                            || (lexed.language == Language::Solidity
                                && matches!(tt, "memory" | "storage" | "calldata"));
                        if is_more_type {
                            k += 1;
                        } else {
                            break;
                        }
                    }
                    if k >= toks.len() || lexed.tokens[toks[k]].kind != TokenKind::Ident {
                        return None;
                    }
                    let name = lexed.text(&lexed.tokens[toks[k]]).to_string();
                    if !names.insert(name.clone()) {
                        return None; // same name declared twice across blocks
                    }
                    let decl_prefix = &lexed.src[lexed.tokens[toks[0]].start..lexed.tokens[toks[k]].end];
                    let after = toks.get(k + 1).map(|&i| lexed.text(&lexed.tokens[i]));
                    match after {
                        Some(";") => {
                            hoisted.push(format!("{decl_prefix};"));
                        }
                        Some("=") => {
                            hoisted.push(format!("{decl_prefix};"));
                            let rhs_start = lexed.tokens[toks[k + 2]].start;
                            let rhs_end = lexed.tokens[*end].end;
                            let rhs = &lexed.src[rhs_start..rhs_end];
                            out.push(Stmt::Simple(format!("{name} = {rhs}")));
                        }
                        _ => return None, // arrays, multi-declarators, calls
                    }
                    continue;
                }
                let (s, e) = (lexed.tokens[*start].start, lexed.tokens[*end].end);
                out.push(Stmt::Simple(lexed.src[s..e].to_string()));
            }
            CStmt::Block { body, .. } => {
                let inner = convert_c_block(lexed, body, in_loop, hoisted, names)?;
                out.extend(inner);
            }
            CStmt::If { cond_open, cond_close, then, els, .. } => {
                let cond = lexed.src[lexed.tokens[*cond_open].end..lexed.tokens[*cond_close].start].to_string();
                let then_body = convert_c_block(lexed, std::slice::from_ref(then), in_loop, hoisted, names)?;
                if then_body.is_empty() {
                    return None;
                }
                let else_body = match els {
                    Some(e) => {
                        let b = convert_c_block(lexed, std::slice::from_ref(e), in_loop, hoisted, names)?;
                        if b.is_empty() {
                            None
                        } else {
                            Some(b)
                        }
                    }
                    None => None,
                };
                out.push(Stmt::If { arms: vec![(cond, then_body)], els: else_body });
            }
            CStmt::While { cond_open, cond_close, body, .. } => {
                let cond = lexed.src[lexed.tokens[*cond_open].end..lexed.tokens[*cond_close].start].to_string();
                let b = convert_c_block(lexed, std::slice::from_ref(body), true, hoisted, names)?;
                if b.is_empty() {
                    return None;
                }
                out.push(Stmt::While { cond, body: b });
            }
            CStmt::For { .. } | CStmt::Other { .. } => return None,
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn python_two_branch_function_flattens_to_states() {
        let code = "def pick(x):\n    if x > 0:\n        r = 1\n    else:\n        r = 2\n    return r\n";
        let out = pass(code, Language::Python).unwrap();
        assert_eq!(out.sites, 1);
        assert!(out.code.contains("dispatch_state = "));
        assert!(out.code.contains("while dispatch_state != -1:"));
        // at least 3 states
        let states = out.code.matches("dispatch_state ==").count();
        assert!(states >= 3, "{}", out.code);
    }

    #[test]
    fn python_empty_function_unchanged() {
        let code = "def f():\n    pass\n";
        let out = pass(code, Language::Python).unwrap();
        assert_eq!(out.code, code);
        assert_eq!(out.sites, 0);
    }

    #[test]
    fn python_generator_skipped() {
        let code = "def g(n):\n    i = 0\n    yield i\n    i = n\n";
        let out = pass(code, Language::Python).unwrap();
        assert_eq!(out.sites, 0);
    }

    #[test]
    fn c_function_with_branches_flattens() {
        let code = "int pick(int x) { int r = 0; if (x > 0) { r = 1; } else { r = 2; } return r; }\n";
        let out = pass(code, Language::C).unwrap();
        assert_eq!(out.sites, 1);
        assert!(out.code.contains("long dispatch_state = "));
        assert!(out.code.contains("int r;"));
        assert!(out.code.contains("r = 0"));
        // the dispatcher loop adds decision points
        let before = crate::corpus::complexity(code, Language::C).unwrap();
        let after = crate::corpus::complexity(&out.code, Language::C).unwrap();
        assert!(after >= before);
    }

    #[test]
    fn c_while_with_break_flattens() {
        let code = "int f(int n) { int s = 0; int i = 0; while (i < n) { if (i == 3) { break; } s = s + i; i = i + 1; } return s; }\n";
        let out = pass(code, Language::C).unwrap();
        assert_eq!(out.sites, 1, "{}", out.code);
        assert!(!out.code.contains("break"));
    }

    #[test]
    fn c_for_loop_function_skipped() {
        let code = "int f(int n) { int s = 0; for (int i = 0; i < n; i++) { s += i; } return s; }\n";
        let out = pass(code, Language::C).unwrap();
        assert_eq!(out.sites, 0);
    }

    #[test]
    fn solidity_flattens_simple_function() {
        let code = "contract A { function double(int256 v) internal pure returns (int256) { int256 r = 0; r = v * 2; return r; } }\n";
        let out = pass(code, Language::Solidity).unwrap();
        assert_eq!(out.sites, 1);
        assert!(out.code.contains("int256 dispatch_state = "));
    }
}
