//! Logical-line and block-structure model for Python sources.
//!
//! Statements are grouped into logical lines (bracket continuations,
//! backslash continuations, and multi-line strings joined), and suites are
//! recovered from indentation prefixes. Transforms splice whole physical
//! line ranges, so untouched code keeps its original bytes.

use crate::error::ObfuscateError;
use crate::lang::{self, Language, Lexed, Token, TokenKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LineKind {
    Blank,
    CommentOnly,
    Code,
}

#[derive(Debug, Clone)]
pub struct Logical {
    /// 0-based index of the first physical line.
    pub first: usize,
    /// 0-based index of the last physical line, inclusive.
    pub last: usize,
    pub kind: LineKind,
    /// Leading whitespace of the first physical line.
    pub indent: String,
}

pub struct PySource {
    pub lines: Vec<String>,
    pub logicals: Vec<Logical>,
    pub lexed: Lexed,
    /// Whether the file ends with a trailing newline.
    trailing_newline: bool,
}

impl PySource {
    pub fn parse(src: &str) -> Result<PySource, ObfuscateError> {
        let lexed = lang::lex(src, Language::Python)
            .map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
        let lines: Vec<String> = src.lines().map(|l| l.to_string()).collect();

        // per-physical-line coverage by multi-line tokens
        let mut covered_until = vec![0usize; lines.len() + 2]; // 1-based line -> max end line
        for tok in &lexed.tokens {
            let text = lexed.text(tok);
            let span = text.matches('\n').count();
            let end_line = tok.line as usize + span;
            let s = tok.line as usize;
            if s < covered_until.len() {
                covered_until[s] = covered_until[s].max(end_line);
            }
        }

        // tokens grouped by starting line (1-based)
        let mut line_tokens: Vec<Vec<usize>> = vec![Vec::new(); lines.len() + 2];
        for (i, tok) in lexed.tokens.iter().enumerate() {
            let l = tok.line as usize;
            if l < line_tokens.len() {
                line_tokens[l].push(i);
            }
        }

        let mut logicals = Vec::new();
        let mut i = 0usize; // 0-based physical index
        while i < lines.len() {
            let lineno = i + 1;
            let raw = &lines[i];
            let toks = &line_tokens[lineno];
            if raw.trim().is_empty() {
                logicals.push(Logical { first: i, last: i, kind: LineKind::Blank, indent: String::new() });
                i += 1;
                continue;
            }
            let code_toks = toks
                .iter()
                .filter(|&&t| lexed.tokens[t].kind != TokenKind::Comment)
                .count();
            if code_toks == 0 && covered_until[lineno] <= lineno {
                let indent = leading_ws(raw);
                logicals.push(Logical { first: i, last: i, kind: LineKind::CommentOnly, indent });
                i += 1;
                continue;
            }

            // a code logical starts here; extend while continuation applies
            let indent = leading_ws(raw);
            let mut depth: i32 = 0;
            let mut j = lineno; // 1-based current line
            loop {
                for &t in &line_tokens[j] {
                    let tok = &lexed.tokens[t];
                    if tok.kind == TokenKind::Punct {
                        match lexed.text(tok) {
                            "(" | "[" | "{" => depth += 1,
                            ")" | "]" | "}" => depth -= 1,
                            _ => {}
                        }
                    }
                }
                let spans_beyond = covered_until[j] > j
                    || line_tokens[j]
                        .iter()
                        .any(|&t| lexed.tokens[t].line as usize + lexed.text(&lexed.tokens[t]).matches('\n').count() > j);
                let backslash = lines[j - 1].trim_end().ends_with('\\');
                if spans_beyond {
                    // jump to the line where the covering token ends
                    let mut endl = covered_until[j].max(j);
                    for &t in &line_tokens[j] {
                        let tok = &lexed.tokens[t];
                        endl = endl.max(tok.line as usize + lexed.text(tok).matches('\n').count());
                    }
                    j = endl;
                    // tokens on the tail line after the string end were already
                    // grouped under the token's start line, so continue scanning
                    // from the next line if depth/backslash demand it
                    let backslash2 = lines[j - 1].trim_end().ends_with('\\');
                    if depth > 0 || backslash2 {
                        j += 1;
                        continue;
                    }
                    break;
                }
                if depth > 0 || backslash {
                    j += 1;
                    if j > lines.len() {
                        return Err(ObfuscateError::ParseFailure(
                            "unterminated bracket or continuation".into(),
                        ));
                    }
                    continue;
                }
                break;
            }
            logicals.push(Logical { first: i, last: j - 1, kind: LineKind::Code, indent });
            i = j;
        }

        Ok(PySource {
            lines,
            logicals,
            lexed,
            trailing_newline: src.ends_with('\n') || src.is_empty(),
        })
    }

    /// Token indices (into `lexed.tokens`) whose start line lies inside the
    /// logical, comments excluded.
    pub fn tokens_of(&self, logical: &Logical) -> Vec<usize> {
        let lo = logical.first as u32 + 1;
        let hi = logical.last as u32 + 1;
        self.lexed
            .tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.line >= lo && t.line <= hi && t.kind != TokenKind::Comment)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn token(&self, idx: usize) -> &Token {
        &self.lexed.tokens[idx]
    }

    pub fn token_text(&self, idx: usize) -> &str {
        self.lexed.text(&self.lexed.tokens[idx])
    }

    /// True when the logical line opens a suite (its last non-comment token
    /// is a colon).
    pub fn opens_suite(&self, li: usize) -> bool {
        let toks = self.tokens_of(&self.logicals[li]);
        toks.last().map(|&t| self.token_text(t) == ":").unwrap_or(false)
    }

    /// Index one past the last logical belonging to the suite headed at `li`
    /// (body = following logicals with a strictly longer indent prefix; blank
    /// and comment-only lines in between are absorbed).
    pub fn suite_end(&self, li: usize) -> usize {
        let header_indent = &self.logicals[li].indent;
        let mut end = li + 1;
        let mut k = li + 1;
        while k < self.logicals.len() {
            let l = &self.logicals[k];
            match l.kind {
                LineKind::Blank | LineKind::CommentOnly => {
                    k += 1;
                }
                LineKind::Code => {
                    if l.indent.len() > header_indent.len() && l.indent.starts_with(header_indent.as_str()) {
                        k += 1;
                        end = k;
                    } else {
                        break;
                    }
                }
            }
        }
        end
    }

    /// First code logical index at or after `li`, if any.
    pub fn next_code(&self, li: usize) -> Option<usize> {
        (li..self.logicals.len()).find(|&k| self.logicals[k].kind == LineKind::Code)
    }

    /// The text of a logical line with continuations joined and the leading
    /// indent stripped.
    pub fn logical_text(&self, logical: &Logical) -> String {
        let mut out = String::new();
        for idx in logical.first..=logical.last {
            let line = &self.lines[idx];
            let piece = if idx == logical.first { line.trim_start() } else { line.trim() };
            let piece = piece.strip_suffix('\\').unwrap_or(piece);
            if !out.is_empty() && !out.ends_with(' ') {
                out.push(' ');
            }
            out.push_str(piece);
        }
        out
    }

    /// Renders the file with each logical's physical line span optionally
    /// replaced. `replacements[i]` = None keeps logical i verbatim.
    pub fn render(&self, replacements: &[Option<Vec<String>>]) -> String {
        assert_eq!(replacements.len(), self.logicals.len());
        let mut out: Vec<String> = Vec::with_capacity(self.lines.len());
        for (li, logical) in self.logicals.iter().enumerate() {
            match &replacements[li] {
                Some(new_lines) => out.extend(new_lines.iter().cloned()),
                None => out.extend(self.lines[logical.first..=logical.last].iter().cloned()),
            }
        }
        let mut text = out.join("\n");
        if self.trailing_newline && !text.is_empty() {
            text.push('\n');
        }
        text
    }

    /// First keyword/identifier token text of a code logical, if any.
    pub fn head_word(&self, li: usize) -> Option<&str> {
        let toks = self.tokens_of(&self.logicals[li]);
        toks.first().map(|&t| self.token_text(t))
    }
}

pub fn leading_ws(line: &str) -> String {
    line.chars().take_while(|c| *c == ' ' || *c == '\t').collect()
}

/// Guesses the indent step of the file (first seen indent of a suite body);
/// defaults to four spaces.
pub fn indent_step(py: &PySource) -> String {
    for (li, l) in py.logicals.iter().enumerate() {
        if l.kind == LineKind::Code && py.opens_suite(li) {
            if let Some(next) = py.next_code(li + 1) {
                let inner = &py.logicals[next].indent;
                if inner.len() > l.indent.len() && inner.starts_with(l.indent.as_str()) {
                    return inner[l.indent.len()..].to_string();
                }
            }
        }
    }
    "    ".to_string()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn groups_bracket_continuations() {
        let src = "x = [1,\n     2,\n     3]\ny = 4\n";
        let py = PySource::parse(src).unwrap();
        let code: Vec<_> = py.logicals.iter().filter(|l| l.kind == LineKind::Code).collect();
        assert_eq!(code.len(), 2);
        assert_eq!((code[0].first, code[0].last), (0, 2));
    }

    #[test]
    fn groups_triple_strings() {
        let src = "s = \"\"\"a\nb\nc\"\"\"\nz = 1\n";
        let py = PySource::parse(src).unwrap();
        let code: Vec<_> = py.logicals.iter().filter(|l| l.kind == LineKind::Code).collect();
        assert_eq!(code.len(), 2);
        assert_eq!((code[0].first, code[0].last), (0, 2));
    }

    #[test]
    fn suite_extent() {
        let src = "def f():\n    a = 1\n\n    if a:\n        b = 2\n    return a\nc = 3\n";
        let py = PySource::parse(src).unwrap();
        assert!(py.opens_suite(0));
        let end = py.suite_end(0);
        // suite of `def` covers logicals up to `return a`
        let last_code = &py.logicals[end - 1];
        assert!(py.lines[last_code.first].contains("return a"));
        let after = py.next_code(end).unwrap();
        assert!(py.lines[py.logicals[after].first].starts_with("c = 3"));
    }

    #[test]
    fn render_roundtrip() {
        let src = "a = 1\n\n# note\ndef f():\n    return a\n";
        let py = PySource::parse(src).unwrap();
        let keep: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];
        assert_eq!(py.render(&keep), src);
    }
}
