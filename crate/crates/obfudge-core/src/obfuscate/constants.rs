//! D1/D2/D3: literal constants replaced with equivalent expressions.

use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Edit, Language, Lexed, TokenKind};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Applies D1 (arithmetic), D2 (boolean), and D3 (string substitution) in
/// order; the spec's combined operation.
pub fn encode_constants(code: &str, language: Language, seed: u64) -> Result<String, ObfuscateError> {
    let mut rng = super::technique_rng(seed, crate::taxonomy::TechniqueId::D1);
    let a = pass_arithmetic(code, language, &mut rng)?;
    let mut rng = super::technique_rng(seed, crate::taxonomy::TechniqueId::D2);
    let b = pass_boolean(&a.code, language, &mut rng)?;
    let mut rng = super::technique_rng(seed, crate::taxonomy::TechniqueId::D3);
    let c = pass_string(&b.code, language, &mut rng)?;
    Ok(c.code)
}

/// True for lines a literal pass must not touch: imports, decorators, and
/// (for C) preprocessor text is already excluded at token level.
fn exempt_lines(lexed: &Lexed) -> Vec<bool> {
    let line_count = lexed.src.lines().count();
    let mut exempt = vec![false; line_count + 2];
    if lexed.language == Language::Python {
        for (i, line) in lexed.src.lines().enumerate() {
            let t = line.trim_start();
            // match/case patterns only admit literal syntax, not expressions
            if t.starts_with("import ")
                || t.starts_with("from ")
                || t.starts_with('@')
                || t.starts_with("case ")
                || t.starts_with("match ")
            {
                exempt[i + 1] = true;
            }
        }
    }
    if lexed.language == Language::Solidity {
        for (i, line) in lexed.src.lines().enumerate() {
            let t = line.trim_start();
            if t.starts_with("pragma") || t.starts_with("import") {
                exempt[i + 1] = true;
            }
        }
    }
    exempt
}

pub(crate) fn pass_arithmetic(code: &str, language: Language, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let exempt = exempt_lines(&lexed);
    let mut edits = Vec::new();
    let mut sites = 0u32;

    for tok in &lexed.tokens {
        if tok.kind != TokenKind::Number || exempt[tok.line as usize] {
            continue;
        }
        let text = lexed.text(tok);
        // plain decimal integers only; suffixed/hex/float literals stay
        if !text.chars().all(|c| c.is_ascii_digit()) {
            continue;
        }
        let Ok(value) = text.parse::<i64>() else { continue };
        if value > 1_000_000_000 {
            continue;
        }
        let expr = arithmetic_expr(value, language, rng);
        edits.push(Edit::replace(tok.start, tok.end, expr));
        sites += 1;
    }
    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}

/// Builds a seeded expression equal to `value`. Patterns stay within the
/// +,-,*,/ family; intermediates never go negative, so checked arithmetic
/// (Solidity 0.8 uints) stays safe.
fn arithmetic_expr(value: i64, language: Language, rng: &mut ChaCha8Rng) -> String {
    let div = if language == Language::Python { "//" } else { "/" };
    if value == 1 && rng.random_range(0..3u32) == 0 {
        return format!("((999-900){div}99+0*250)");
    }
    let a: i64 = rng.random_range(3..97);
    let b: i64 = rng.random_range(2..9);
    match rng.random_range(0..3u32) {
        0 => format!("(({value}+{a})-{a})"),
        1 => format!("({value}+0*{a})"),
        _ => format!("(({value}*{b}){div}{b})"),
    }
}

pub(crate) fn pass_boolean(code: &str, language: Language, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let exempt = exempt_lines(&lexed);
    let mut edits = Vec::new();
    let mut sites = 0u32;

    for tok in &lexed.tokens {
        if exempt[tok.line as usize] {
            continue;
        }
        let text = lexed.text(tok);
        let truth = match (language, tok.kind, text) {
            (Language::Python, TokenKind::Keyword, "True") => Some(true),
            (Language::Python, TokenKind::Keyword, "False") => Some(false),
            (Language::C | Language::Cpp, TokenKind::Keyword, "true") => Some(true),
            (Language::C | Language::Cpp, TokenKind::Keyword, "false") => Some(false),
            (Language::Solidity, TokenKind::Keyword, "true") => Some(true),
            (Language::Solidity, TokenKind::Keyword, "false") => Some(false),
            _ => None,
        };
        let Some(truth) = truth else { continue };
        let expr = boolean_expr(truth, language, rng);
        edits.push(Edit::replace(tok.start, tok.end, expr));
        sites += 1;
    }
    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}

fn boolean_expr(truth: bool, language: Language, rng: &mut ChaCha8Rng) -> String {
    let a: i64 = rng.random_range(2..50);
    let b = a + rng.random_range(1..9) as i64;
    if language == Language::Python {
        if truth {
            match rng.random_range(0..3u32) {
                0 => format!("({a} == {a})"),
                1 => format!("(not {a} == {b})"),
                _ => format!("({b} > {a})"),
            }
        } else {
            match rng.random_range(0..3u32) {
                0 => format!("({a} == {b})"),
                1 => format!("(not {a} == {a})"),
                _ => format!("({a} > {b})"),
            }
        }
    } else if truth {
        match rng.random_range(0..3u32) {
            0 => format!("({a} == {a})"),
            1 => format!("(!({a} == {b}))"),
            _ => format!("({b} > {a})"),
        }
    } else {
        match rng.random_range(0..3u32) {
            0 => format!("({a} == {b})"),
            1 => format!("(!({a} == {a}))"),
            _ => format!("({a} > {b})"),
        }
    }
}

pub(crate) fn pass_string(code: &str, language: Language, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    if language == Language::Solidity {
        // string concatenation needs version-gated helpers; leave to llm mode
        return Ok(PassOutcome::unchanged(code));
    }
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let exempt = exempt_lines(&lexed);
    let mut edits = Vec::new();
    let mut sites = 0u32;

    for tok in &lexed.tokens {
        if tok.kind != TokenKind::Str || exempt[tok.line as usize] {
            continue;
        }
        let text = lexed.text(tok);
        let Some(fragments) = split_string(text, language, rng) else { continue };
        edits.push(Edit::replace(tok.start, tok.end, fragments));
        sites += 1;
    }
    Ok(PassOutcome { code: lang::apply_edits(code, edits), sites })
}

/// Splits a simple quoted literal into >= 2 concatenated fragments. Literals
/// with prefixes, escapes, or triple quotes are left alone.
fn split_string(text: &str, language: Language, rng: &mut ChaCha8Rng) -> Option<String> {
    let quote = text.chars().next()?;
    if quote != '"' && quote != '\'' {
        return None; // prefixed (f"", r"", b"") or malformed
    }
    if text.len() < 2 || !text.ends_with(quote) {
        return None;
    }
    let inner = &text[1..text.len() - 1];
    if inner.contains('\\') || inner.contains(quote) || !inner.is_ascii() {
        return None;
    }
    let joiner = match language {
        Language::Python => " + ",
        _ => " ", // adjacent literal concatenation
    };
    let parts = if inner.is_empty() {
        format!("{q}{q}{j}{q}{q}", q = quote, j = joiner)
    } else if inner.len() == 1 {
        format!("{q}{q}{j}{q}{inner}{q}", q = quote, j = joiner)
    } else {
        let cut = 1 + rng.random_range(0..(inner.len() - 1) as u32) as usize;
        let (head, tail) = inner.split_at(cut);
        format!("{q}{head}{q}{j}{q}{tail}{q}", q = quote, j = joiner)
    };
    if language == Language::Python {
        Some(format!("({parts})"))
    } else {
        Some(parts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    fn eval_int(expr: &str) -> i64 {
        // tiny evaluator for the emitted patterns via python-free parsing:
        // patterns are fully parenthesized with + - * // over literals
        fn parse(s: &str, div: &str) -> i64 {
            let s = s.trim();
            if let Ok(v) = s.parse::<i64>() {
                return v;
            }
            let inner = s.strip_prefix('(').and_then(|x| x.strip_suffix(')')).unwrap_or(s);
            // scan top-level operators right to left for + and -, then * and /
            let bytes = inner.as_bytes();
            let mut depth = 0i32;
            let mut split: Option<(usize, char)> = None;
            for (i, &b) in bytes.iter().enumerate().rev() {
                match b {
                    b')' => depth += 1,
                    b'(' => depth -= 1,
                    b'+' | b'-' if depth == 0 && i > 0 => {
                        split = Some((i, b as char));
                        break;
                    }
                    _ => {}
                }
            }
            if split.is_none() {
                let mut depth = 0i32;
                for (i, &b) in bytes.iter().enumerate().rev() {
                    match b {
                        b')' => depth += 1,
                        b'(' => depth -= 1,
                        b'*' if depth == 0 => {
                            split = Some((i, '*'));
                            break;
                        }
                        b'/' if depth == 0 => {
                            let width = div.len();
                            let start = i + 1 - width;
                            if inner[start..i + 1].ends_with(div) {
                                split = Some((start, '/'));
                            }
                            break;
                        }
                        _ => {}
                    }
                }
            }
            let (i, op) = split.expect("operator");
            let (l, r) = (&inner[..i], &inner[i + 1..]);
            let r = if op == '/' { r.trim_start_matches('/') } else { r };
            match op {
                '+' => parse(l, div) + parse(r, div),
                '-' => parse(l, div) - parse(r, div),
                '*' => parse(l, div) * parse(r, div),
                '/' => parse(l, div) / parse(r, div),
                _ => unreachable!(),
            }
        }
        parse(expr, "/")
    }

    #[test]
    fn arithmetic_patterns_evaluate_back() {
        let mut r = rng();
        for v in [0i64, 1, 2, 7, 100, 999, 65535] {
            for _ in 0..8 {
                let e = arithmetic_expr(v, Language::C, &mut r);
                assert_eq!(eval_int(&e), v, "{e}");
            }
        }
    }

    #[test]
    fn rewrites_integer_assignment() {
        let mut r = rng();
        let out = pass_arithmetic("a = 1\n", Language::Python, &mut r).unwrap();
        assert_eq!(out.sites, 1);
        assert!(out.code != "a = 1\n");
        assert!(!out.code.contains("a = 1\n"));
    }

    #[test]
    fn splits_string_into_fragments() {
        let mut r = rng();
        let out = pass_string("a = 'hello'\n", Language::Python, &mut r).unwrap();
        assert_eq!(out.sites, 1);
        // fragments concatenate back to hello
        let code = out.code;
        let open = code.find('(').unwrap();
        let close = code.rfind(')').unwrap();
        let parts: String = code[open + 1..close]
            .split('+')
            .map(|p| p.trim().trim_matches('\''))
            .collect();
        assert_eq!(parts, "hello");
    }

    #[test]
    fn no_literals_means_unchanged() {
        let mut r = rng();
        let code = "def f(x):\n    return x\n";
        let out = pass_arithmetic(code, Language::Python, &mut r).unwrap();
        assert_eq!(out.code, code);
        assert_eq!(out.sites, 0);
    }

    #[test]
    fn import_lines_exempt() {
        let mut r = rng();
        let code = "from collections import deque\nq = deque([1])\n";
        let out = pass_string(code, Language::Python, &mut r).unwrap();
        assert!(out.code.starts_with("from collections import deque"));
    }

    #[test]
    fn c_strings_use_adjacent_literals() {
        let mut r = rng();
        let code = "const char *m = \"hello\";\n";
        let out = pass_string(code, Language::C, &mut r).unwrap();
        assert_eq!(out.sites, 1);
        let lexed = lang::lex(&out.code, Language::C).unwrap();
        let strs = lexed.tokens.iter().filter(|t| t.kind == TokenKind::Str).count();
        assert_eq!(strs, 2);
    }

    #[test]
    fn booleans_substituted() {
        let mut r = rng();
        let out = pass_boolean("flag = True\nother = False\n", Language::Python, &mut r).unwrap();
        assert_eq!(out.sites, 2);
        assert!(!out.code.contains("True"));
        assert!(!out.code.contains("False"));
    }

    #[test]
    fn preproc_values_left_alone() {
        let mut r = rng();
        let code = "#define N 10\nint x = 5;\n";
        let out = pass_arithmetic(code, Language::C, &mut r).unwrap();
        assert!(out.code.contains("#define N 10"));
        assert!(!out.code.contains("x = 5;"));
    }
}
