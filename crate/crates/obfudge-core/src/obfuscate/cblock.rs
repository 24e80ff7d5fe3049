//! Brace-structure model for C, C++, and Solidity sources: function spans,
//! bracket matching, and a statement-level parser for function bodies.

use crate::error::ObfuscateError;
use crate::lang::{Language, Lexed, TokenKind};

/// Token-index span of one function definition.
#[derive(Debug, Clone)]
pub struct FunctionSpan {
    pub name_tok: usize,
    /// Token indices of the parameter parens.
    pub params_open: usize,
    pub params_close: usize,
    /// Token indices of the body braces.
    pub body_open: usize,
    pub body_close: usize,
}

pub fn match_forward(lexed: &Lexed, open_idx: usize) -> Option<usize> {
    let open = lexed.text(&lexed.tokens[open_idx]);
    let close = match open {
        "(" => ")",
        "[" => "]",
        "{" => "}",
        _ => return None,
    };
    let mut depth = 0i32;
    for (i, tok) in lexed.tokens.iter().enumerate().skip(open_idx) {
        if tok.kind == TokenKind::Punct {
            let t = lexed.text(tok);
            if t == open {
                depth += 1;
            } else if t == close {
                depth -= 1;
                if depth == 0 {
                    return Some(i);
                }
            }
        }
    }
    None
}

/// Finds function definitions. For C/C++ this matches `ident ( ... ) {` with
/// the ident not being a control keyword; for Solidity it matches `function
/// name ( ... ) ... {` and constructors.
pub fn find_functions(lexed: &Lexed) -> Vec<FunctionSpan> {
    let toks = &lexed.tokens;
    let code: Vec<usize> = (0..toks.len())
        .filter(|&i| toks[i].kind != TokenKind::Comment)
        .collect();
    let mut out = Vec::new();

    match lexed.language {
        Language::Solidity => {
            let mut k = 0usize;
            while k < code.len() {
                let i = code[k];
                let word = lexed.text(&toks[i]);
                if toks[i].kind == TokenKind::Keyword && (word == "function" || word == "constructor") {
                    let (name_tok, open_k) = if word == "function" {
                        if k + 1 < code.len() && toks[code[k + 1]].kind == TokenKind::Ident {
                            (code[k + 1], k + 2)
                        } else {
                            k += 1;
                            continue;
                        }
                    } else {
                        (i, k + 1)
                    };
                    if open_k >= code.len() || lexed.text(&toks[code[open_k]]) != "(" {
                        k += 1;
                        continue;
                    }
                    let params_open = code[open_k];
                    let Some(params_close) = match_forward(lexed, params_open) else {
                        k += 1;
                        continue;
                    };
                    // scan past modifiers/returns(...) to `{` or `;`
                    let mut j = params_close + 1;
                    let mut body_open = None;
                    while j < toks.len() {
                        if toks[j].kind == TokenKind::Comment {
                            j += 1;
                            continue;
                        }
                        let t = lexed.text(&toks[j]);
                        if t == "{" {
                            body_open = Some(j);
                            break;
                        }
                        if t == ";" {
                            break;
                        }
                        if t == "(" {
                            match match_forward(lexed, j) {
                                Some(close) => {
                                    j = close + 1;
                                    continue;
                                }
                                None => break,
                            }
                        }
                        j += 1;
                    }
                    if let Some(open) = body_open {
                        if let Some(close) = match_forward(lexed, open) {
                            out.push(FunctionSpan {
                                name_tok,
                                params_open,
                                params_close,
                                body_open: open,
                                body_close: close,
                            });
                            k = code.iter().position(|&c| c > close).unwrap_or(code.len());
                            continue;
                        }
                    }
                }
                k += 1;
            }
        }
        _ => {
            let mut k = 0usize;
            while k < code.len() {
                let i = code[k];
                if toks[i].kind == TokenKind::Ident
                    && k + 1 < code.len()
                    && lexed.text(&toks[code[k + 1]]) == "("
                {
                    let params_open = code[k + 1];
                    if let Some(params_close) = match_forward(lexed, params_open) {
                        // next non-comment token after `)` must be `{`
                        let mut j = params_close + 1;
                        while j < toks.len() && toks[j].kind == TokenKind::Comment {
                            j += 1;
                        }
                        if j < toks.len() && lexed.text(&toks[j]) == "{" {
                            if let Some(close) = match_forward(lexed, j) {
                                out.push(FunctionSpan {
                                    name_tok: i,
                                    params_open,
                                    params_close,
                                    body_open: j,
                                    body_close: close,
                                });
                                k = code.iter().position(|&c| c > close).unwrap_or(code.len());
                                continue;
                            }
                        }
                    }
                }
                k += 1;
            }
        }
    }
    out
}

/// Statement tree for a C-family function body. Spans are token-index ranges
/// `[start, end]` inclusive over the full token stream (comments included in
/// the byte spans they cover).
#[derive(Debug, Clone)]
pub enum CStmt {
    /// `... ;` with start..=end covering the statement and its semicolon.
    Simple { start: usize, end: usize },
    /// `{ ... }`
    Block { open: usize, close: usize, body: Vec<CStmt> },
    If {
        kw: usize,
        cond_open: usize,
        cond_close: usize,
        then: Box<CStmt>,
        els: Option<Box<CStmt>>,
    },
    While {
        kw: usize,
        cond_open: usize,
        cond_close: usize,
        body: Box<CStmt>,
    },
    For {
        kw: usize,
        header_open: usize,
        header_close: usize,
        body: Box<CStmt>,
    },
    /// Anything else (switch, do-while, labels, assembly, unchecked, ...),
    /// matched by extent and treated as opaque.
    Other { start: usize, end: usize },
}

impl CStmt {
    pub fn first_tok(&self) -> usize {
        match self {
            CStmt::Simple { start, .. } | CStmt::Other { start, .. } => *start,
            CStmt::Block { open, .. } => *open,
            CStmt::If { kw, .. } | CStmt::While { kw, .. } | CStmt::For { kw, .. } => *kw,
        }
    }

    pub fn last_tok(&self) -> usize {
        match self {
            CStmt::Simple { end, .. } | CStmt::Other { end, .. } => *end,
            CStmt::Block { close, .. } => *close,
            CStmt::If { then, els, .. } => els.as_ref().map(|e| e.last_tok()).unwrap_or(then.last_tok()),
            CStmt::While { body, .. } | CStmt::For { body, .. } => body.last_tok(),
        }
    }
}

/// Parses the statements between body braces (exclusive).
pub fn parse_statements(lexed: &Lexed, open: usize, close: usize) -> Result<Vec<CStmt>, ObfuscateError> {
    let mut stmts = Vec::new();
    let mut i = next_code(lexed, open + 1, close);
    while i < close {
        let (stmt, after) = parse_one(lexed, i, close)?;
        stmts.push(stmt);
        i = next_code(lexed, after, close);
    }
    Ok(stmts)
}

fn next_code(lexed: &Lexed, mut i: usize, limit: usize) -> usize {
    while i < limit && lexed.tokens[i].kind == TokenKind::Comment {
        i += 1;
    }
    i
}

fn parse_one(lexed: &Lexed, i: usize, limit: usize) -> Result<(CStmt, usize), ObfuscateError> {
    let toks = &lexed.tokens;
    let text = lexed.text(&toks[i]);

    if text == "{" {
        let close = match_forward(lexed, i)
            .ok_or_else(|| ObfuscateError::ParseFailure("unbalanced brace".into()))?;
        let body = parse_statements(lexed, i, close)?;
        return Ok((CStmt::Block { open: i, close, body }, close + 1));
    }

    if toks[i].kind == TokenKind::Keyword {
        match text {
            "if" => {
                let cond_open = next_code(lexed, i + 1, limit);
                if lexed.text(&toks[cond_open]) != "(" {
                    return Err(ObfuscateError::ParseFailure("if without condition parens".into()));
                }
                let cond_close = match_forward(lexed, cond_open)
                    .ok_or_else(|| ObfuscateError::ParseFailure("unbalanced paren".into()))?;
                let then_start = next_code(lexed, cond_close + 1, limit);
                let (then, mut after) = parse_one(lexed, then_start, limit)?;
                let mut els = None;
                let else_at = next_code(lexed, after, limit);
                if else_at < limit && lexed.text(&toks[else_at]) == "else" {
                    let else_body_start = next_code(lexed, else_at + 1, limit);
                    let (e, a) = parse_one(lexed, else_body_start, limit)?;
                    els = Some(Box::new(e));
                    after = a;
                }
                return Ok((
                    CStmt::If { kw: i, cond_open, cond_close, then: Box::new(then), els },
                    after,
                ));
            }
            "while" => {
                let cond_open = next_code(lexed, i + 1, limit);
                if lexed.text(&toks[cond_open]) != "(" {
                    return Err(ObfuscateError::ParseFailure("while without condition parens".into()));
                }
                let cond_close = match_forward(lexed, cond_open)
                    .ok_or_else(|| ObfuscateError::ParseFailure("unbalanced paren".into()))?;
                let body_start = next_code(lexed, cond_close + 1, limit);
                let (body, after) = parse_one(lexed, body_start, limit)?;
                return Ok((CStmt::While { kw: i, cond_open, cond_close, body: Box::new(body) }, after));
            }
            "for" => {
                let header_open = next_code(lexed, i + 1, limit);
                if lexed.text(&toks[header_open]) != "(" {
                    return Err(ObfuscateError::ParseFailure("for without header parens".into()));
                }
                let header_close = match_forward(lexed, header_open)
                    .ok_or_else(|| ObfuscateError::ParseFailure("unbalanced paren".into()))?;
                let body_start = next_code(lexed, header_close + 1, limit);
                let (body, after) = parse_one(lexed, body_start, limit)?;
                return Ok((
                    CStmt::For { kw: i, header_open, header_close, body: Box::new(body) },
                    after,
                ));
            }
            "switch" | "do" | "assembly" | "unchecked" | "try" => {
                // opaque: consume keyword, any parens, block, and for do-while
                // the trailing condition and semicolon
                let mut j = i + 1;
                let mut last = i;
                let mut saw_block = false;
                while j < limit {
                    if toks[j].kind == TokenKind::Comment {
                        j += 1;
                        continue;
                    }
                    let t = lexed.text(&toks[j]);
                    if t == "(" {
                        let c = match_forward(lexed, j)
                            .ok_or_else(|| ObfuscateError::ParseFailure("unbalanced paren".into()))?;
                        last = c;
                        j = c + 1;
                        continue;
                    }
                    if t == "{" {
                        let c = match_forward(lexed, j)
                            .ok_or_else(|| ObfuscateError::ParseFailure("unbalanced brace".into()))?;
                        last = c;
                        j = c + 1;
                        saw_block = true;
                        if text != "do" && text != "try" {
                            break;
                        }
                        if text == "do" {
                            continue; // expect while (...) ;
                        }
                        // try: may be followed by catch blocks; keep consuming
                        let k = next_code(lexed, j, limit);
                        if k < limit && matches!(lexed.text(&toks[k]), "catch") {
                            j = k + 1;
                            continue;
                        }
                        break;
                    }
                    if t == ";" {
                        last = j;
                        let _ = saw_block;
                        break;
                    }
                    last = j;
                    j += 1;
                }
                return Ok((CStmt::Other { start: i, end: last }, last + 1));
            }
            _ => {}
        }
    }

    // simple statement: up to `;` at depth 0 (skipping nested groups)
    let mut j = i;
    while j < limit {
        if toks[j].kind == TokenKind::Comment {
            j += 1;
            continue;
        }
        let t = lexed.text(&toks[j]);
        match t {
            "(" | "[" | "{" => {
                let c = match_forward(lexed, j)
                    .ok_or_else(|| ObfuscateError::ParseFailure("unbalanced group".into()))?;
                j = c + 1;
            }
            ";" => return Ok((CStmt::Simple { start: i, end: j }, j + 1)),
            _ => j += 1,
        }
    }
    Err(ObfuscateError::ParseFailure("statement without terminator".into()))
}

/// Byte range covered by a statement, extended to the end token.
pub fn byte_range(lexed: &Lexed, stmt: &CStmt) -> (usize, usize) {
    let first = stmt.first_tok();
    let last = stmt.last_tok();
    (lexed.tokens[first].start, lexed.tokens[last].end)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::lex;

    #[test]
    fn finds_c_functions() {
        let src = "#include <stdio.h>\nint add(int a, int b) { return a + b; }\nint main(void) {\n  if (add(1, 2) == 3) { printf(\"ok\\n\"); }\n  return 0;\n}\n";
        let lexed = lex(src, Language::C).unwrap();
        let funcs = find_functions(&lexed);
        assert_eq!(funcs.len(), 2);
        assert_eq!(lexed.text(&lexed.tokens[funcs[0].name_tok]), "add");
        assert_eq!(lexed.text(&lexed.tokens[funcs[1].name_tok]), "main");
    }

    #[test]
    fn finds_solidity_functions() {
        let src = "contract A {\n  uint x;\n  function set(uint v) public { x = v; }\n  constructor() { x = 1; }\n}\n";
        let lexed = lex(src, Language::Solidity).unwrap();
        let funcs = find_functions(&lexed);
        assert_eq!(funcs.len(), 2);
    }

    #[test]
    fn statement_tree_shapes() {
        let src = "void f(int n) { int a = 0; if (n > 0) { a = 1; } else a = 2; while (a < n) a++; for (int i = 0; i < n; i++) { a += i; } }";
        let lexed = lex(src, Language::C).unwrap();
        let f = &find_functions(&lexed)[0];
        let stmts = parse_statements(&lexed, f.body_open, f.body_close).unwrap();
        assert_eq!(stmts.len(), 4);
        assert!(matches!(stmts[0], CStmt::Simple { .. }));
        assert!(matches!(stmts[1], CStmt::If { .. }));
        assert!(matches!(stmts[2], CStmt::While { .. }));
        assert!(matches!(stmts[3], CStmt::For { .. }));
    }

    #[test]
    fn ignores_calls_that_are_not_definitions() {
        let src = "int main(void) { helper(1); return 0; }";
        let lexed = lex(src, Language::C).unwrap();
        assert_eq!(find_functions(&lexed).len(), 1);
    }
}
