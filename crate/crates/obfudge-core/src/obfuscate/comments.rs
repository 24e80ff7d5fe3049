//! L2: comment and docstring deletion.

use super::pyblock::{LineKind, PySource};
use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Edit, Language, TokenKind};

/// Deletes every comment (and, for Python, leading docstrings) while leaving
/// the remaining token stream unchanged. Idempotent.
pub fn strip_comments(code: &str, language: Language) -> Result<String, ObfuscateError> {
    Ok(pass(code, language)?.code)
}

pub(crate) fn pass(code: &str, language: Language) -> Result<PassOutcome, ObfuscateError> {
    let mut sites = 0u32;
    let without_comments = remove_comment_tokens(code, language, &mut sites)?;
    let out = if language == Language::Python {
        remove_docstrings(&without_comments, &mut sites)?
    } else {
        without_comments
    };
    Ok(PassOutcome { code: out, sites })
}

fn remove_comment_tokens(code: &str, language: Language, sites: &mut u32) -> Result<String, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let bytes = code.as_bytes();
    let mut edits = Vec::new();
    for tok in &lexed.tokens {
        if tok.kind != TokenKind::Comment {
            continue;
        }
        *sites += 1;
        // expand to the whole line when the comment is the only content
        let mut start = tok.start;
        while start > 0 && (bytes[start - 1] == b' ' || bytes[start - 1] == b'\t') {
            start -= 1;
        }
        let alone_on_line = start == 0 || bytes[start - 1] == b'\n';
        let mut end = tok.end;
        let at_line_end = end >= bytes.len() || bytes[end] == b'\n';
        if alone_on_line && at_line_end {
            if end < bytes.len() {
                end += 1; // consume the newline
            }
            edits.push(Edit::replace(start, end, ""));
        } else if at_line_end {
            edits.push(Edit::replace(start, end, ""));
        } else {
            // mid-line block comment: keep token separation
            edits.push(Edit::replace(tok.start, tok.end, " "));
        }
    }
    Ok(lang::apply_edits(code, edits))
}

fn remove_docstrings(code: &str, sites: &mut u32) -> Result<String, ObfuscateError> {
    let py = PySource::parse(code)?;
    let mut replacements: Vec<Option<Vec<String>>> = vec![None; py.logicals.len()];

    // candidate suite starts: module start plus every def/class suite header
    let mut suite_starts: Vec<(Option<usize>, usize)> = Vec::new(); // (header logical, first body logical)
    if let Some(first) = py.next_code(0) {
        suite_starts.push((None, first));
    }
    for (li, l) in py.logicals.iter().enumerate() {
        if l.kind != LineKind::Code {
            continue;
        }
        if matches!(py.head_word(li), Some("def") | Some("class") | Some("async")) && py.opens_suite(li) {
            if let Some(body_first) = py.next_code(li + 1) {
                if py.logicals[body_first].indent.len() > l.indent.len() {
                    suite_starts.push((Some(li), body_first));
                }
            }
        }
    }

    for (header, body_first) in suite_starts {
        // strip consecutive leading bare-string statements
        let mut li = body_first;
        let mut removed_any = false;
        loop {
            let toks = py.tokens_of(&py.logicals[li]);
            let is_bare_string = toks.len() == 1 && py.token(toks[0]).kind == TokenKind::Str;
            if !is_bare_string {
                break;
            }
            replacements[li] = Some(vec![]);
            *sites += 1;
            removed_any = true;
            match py.next_code(li + 1) {
                Some(next)
                    if header.is_none()
                        || py.logicals[next].indent.len() > py.logicals[header.unwrap()].indent.len() =>
                {
                    li = next;
                }
                _ => {
                    // suite would become empty
                    if let Some(h) = header {
                        let indent = py.logicals[body_first].indent.clone();
                        let _ = h;
                        replacements[li] = Some(vec![format!("{indent}pass")]);
                    }
                    break;
                }
            }
        }
        // a suite that lost all statements needs a pass placeholder
        if removed_any {
            if let Some(h) = header {
                let end = py.suite_end(h);
                let has_stmt = (h + 1..end).any(|k| {
                    py.logicals[k].kind == LineKind::Code && replacements[k].is_none()
                });
                let has_pass = (h + 1..end).any(|k| {
                    replacements[k]
                        .as_ref()
                        .map(|v| !v.is_empty())
                        .unwrap_or(false)
                });
                if !has_stmt && !has_pass {
                    let indent = py.logicals[body_first].indent.clone();
                    replacements[body_first] = Some(vec![format!("{indent}pass")]);
                }
            }
        }
    }

    Ok(py.render(&replacements))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn removes_line_comments() {
        let code = "x = 1  # one\n# full line\ny = 2\n";
        let out = strip_comments(code, Language::Python).unwrap();
        assert_eq!(out, "x = 1\ny = 2\n");
    }

    #[test]
    fn idempotent() {
        let code = "def f():\n    \"\"\"doc\"\"\"\n    # c\n    return 1\n";
        let once = strip_comments(code, Language::Python).unwrap();
        let twice = strip_comments(&once, Language::Python).unwrap();
        assert_eq!(once, twice);
        assert!(!once.contains("doc"));
        assert!(!once.contains('#'));
    }

    #[test]
    fn docstring_only_body_gets_pass() {
        let code = "def f():\n    \"\"\"doc\"\"\"\nx = f()\n";
        let out = strip_comments(code, Language::Python).unwrap();
        assert_eq!(out, "def f():\n    pass\nx = f()\n");
    }

    #[test]
    fn string_literal_with_slashes_preserved() {
        let code = "int main(void) { const char *u = \"http://x\"; /* gone */ return 0; }\n";
        let out = strip_comments(code, Language::C).unwrap();
        assert!(out.contains("\"http://x\""));
        assert!(!out.contains("gone"));
    }

    #[test]
    fn token_stream_unchanged() {
        let code = "int f(void) {\n  // c1\n  int x = 1; /* c2 */\n  return x;\n}\n";
        let out = strip_comments(code, Language::C).unwrap();
        let before = lang::lex(code, Language::C).unwrap().fingerprint();
        let after = lang::lex(&out, Language::C).unwrap().fingerprint();
        assert_eq!(before, after);
    }

    #[test]
    fn module_docstring_removed() {
        let code = "\"\"\"module doc\"\"\"\nimport sys\nprint(sys.argv[0])\n";
        let out = strip_comments(code, Language::Python).unwrap();
        assert!(!out.contains("module doc"));
        assert!(out.starts_with("import sys"));
    }
}
