//! L3: formatting perturbation that preserves the lexical token sequence.

use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Language, TokenKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn mangle_formatting(code: &str, language: Language, seed: u64) -> Result<String, ObfuscateError> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(pass(code, language, &mut rng)?.code)
}

pub(crate) fn pass(code: &str, language: Language, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    let out = match language {
        Language::Python => mangle_python(code)?,
        _ => mangle_c_like(code, language, rng)?,
    };
    let sites = if out == code { 0 } else { 1 };
    Ok(PassOutcome { code: out, sites })
}

/// C-family: joins the whole token stream onto as few lines as possible.
/// Preprocessor directives keep their own lines; a line comment forces a
/// break since it would swallow the rest of its line.
fn mangle_c_like(code: &str, language: Language, rng: &mut ChaCha8Rng) -> Result<String, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let mut out = String::with_capacity(code.len());
    let mut line_open = false;
    for tok in &lexed.tokens {
        let text = lexed.text(tok);
        match tok.kind {
            TokenKind::Preproc => {
                if line_open {
                    out.push('\n');
                }
                out.push_str(text);
                out.push('\n');
                line_open = false;
            }
            TokenKind::Comment if text.starts_with("//") || text.starts_with('#') => {
                if line_open {
                    out.push(' ');
                }
                out.push_str(text);
                out.push('\n');
                line_open = false;
            }
            _ => {
                if line_open {
                    // occasional double space as extra noise
                    let pad = if rng.random_range(0..8u32) == 0 { "  " } else { " " };
                    out.push_str(pad);
                }
                out.push_str(text);
                line_open = true;
            }
        }
    }
    if line_open {
        out.push('\n');
    }
    Ok(out)
}

/// Python: rescales every indent level to a single space, removes blank
/// lines, and strips trailing whitespace. Physical lines inside multi-line
/// string tokens stay verbatim, so string contents are untouched.
fn mangle_python(code: &str) -> Result<String, ObfuscateError> {
    let lexed = lang::lex(code, Language::Python).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let lines: Vec<&str> = code.lines().collect();

    // lines strictly inside a multi-line token keep their bytes
    let mut verbatim = vec![false; lines.len() + 2];
    // lines that only continue an open bracket group get freeform indent
    let mut continuation = vec![false; lines.len() + 2];

    for tok in &lexed.tokens {
        let span = lexed.text(tok).matches('\n').count();
        if span > 0 {
            let start = tok.line as usize;
            for l in start + 1..=start + span {
                if l < verbatim.len() {
                    verbatim[l] = true;
                }
            }
        }
    }
    let mut depth = 0i32;
    let mut depth_at_line_start = vec![0i32; lines.len() + 2];
    let mut cur_line = 1usize;
    for tok in &lexed.tokens {
        while cur_line < tok.line as usize && cur_line < depth_at_line_start.len() {
            cur_line += 1;
            depth_at_line_start[cur_line] = depth;
        }
        if tok.kind == TokenKind::Punct {
            match lexed.text(tok) {
                "(" | "[" | "{" => depth += 1,
                ")" | "]" | "}" => depth -= 1,
                _ => {}
            }
        }
    }
    while cur_line + 1 < depth_at_line_start.len() {
        cur_line += 1;
        depth_at_line_start[cur_line] = depth;
    }
    let mut prev_backslash = false;
    for (i, line) in lines.iter().enumerate() {
        let ln = i + 1;
        if depth_at_line_start[ln] > 0 || prev_backslash {
            continuation[ln] = true;
        }
        prev_backslash = !verbatim[ln] && line.trim_end().ends_with('\\');
    }

    // indentation stack over the original indents to recover block depth
    let mut stack: Vec<String> = Vec::new();
    let mut out: Vec<String> = Vec::new();
    for (i, line) in lines.iter().enumerate() {
        let ln = i + 1;
        if verbatim[ln] {
            out.push((*line).to_string());
            continue;
        }
        let trimmed_end = line.trim_end();
        if trimmed_end.trim().is_empty() {
            continue; // drop blank lines
        }
        if continuation[ln] {
            let body = trimmed_end.trim_start();
            out.push(format!("  {body}"));
            continue;
        }
        let indent: String = super::pyblock::leading_ws(line);
        while let Some(top) = stack.last() {
            if indent.len() < top.len() || !indent.starts_with(top.as_str()) {
                stack.pop();
            } else {
                break;
            }
        }
        if indent.len() > stack.last().map(|s| s.len()).unwrap_or(0) {
            stack.push(indent.clone());
        } else if stack.is_empty() && !indent.is_empty() {
            stack.push(indent.clone());
        }
        let level = if indent.is_empty() { 0 } else { stack.len() };
        let body = trimmed_end.trim_start();
        out.push(format!("{}{}", " ".repeat(level), body));
    }
    let mut text = out.join("\n");
    if code.ends_with('\n') && !text.is_empty() {
        text.push('\n');
    }
    Ok(text)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fingerprints_equal(a: &str, b: &str, language: Language) -> bool {
        lang::lex(a, language).unwrap().fingerprint() == lang::lex(b, language).unwrap().fingerprint()
    }

    #[test]
    fn c_tokens_preserved_and_lines_halved() {
        let code = "#include <stdio.h>\nint main(void)\n{\n    int x = 1;\n    int y = 2;\n    printf(\"%d\\n\", x + y);\n    return 0;\n}\n";
        let out = mangle_formatting(code, Language::C, 1).unwrap();
        assert!(fingerprints_equal(code, &out, Language::C));
        let before = code.lines().count();
        let after = out.lines().count();
        assert!(after * 2 <= before, "{after} vs {before}");
    }

    #[test]
    fn python_tokens_preserved_and_parses_shape() {
        let code = "def f(x):\n    if x:\n        return [1,\n                2]\n    return 0\n\n\nprint(f(1))\n";
        let out = mangle_formatting(code, Language::Python, 1).unwrap();
        assert!(fingerprints_equal(code, &out, Language::Python));
        assert!(out.contains("\n if x:"));
        assert!(!out.contains("\n\n"));
    }

    #[test]
    fn python_triple_string_interior_untouched() {
        let code = "s = \"\"\"line one\n   spaced   line\n\"\"\"\nx   =   1\n";
        let out = mangle_formatting(code, Language::Python, 1).unwrap();
        assert!(out.contains("   spaced   line"));
        assert!(fingerprints_equal(code, &out, Language::Python));
    }
}
