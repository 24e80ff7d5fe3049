//! Supported source languages and a shared token-level lexer.
//!
//! The lexer is the substrate for every deterministic transform: it yields
//! byte-offset tokens so passes can splice edits into the original text
//! without disturbing untouched regions.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Solidity,
    C,
    Cpp,
    Python,
}

impl Language {
    pub fn from_name(name: &str) -> Option<Language> {
        match name.trim().to_ascii_lowercase().as_str() {
            "solidity" | "sol" => Some(Language::Solidity),
            "c" => Some(Language::C),
            "cpp" | "c++" | "cxx" => Some(Language::Cpp),
            "python" | "py" => Some(Language::Python),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::Solidity => "solidity",
            Language::C => "c",
            Language::Cpp => "cpp",
            Language::Python => "python",
        }
    }

    /// Name used inside markdown code fences.
    pub fn fence_name(self) -> &'static str {
        match self {
            Language::Cpp => "c++",
            other => other.name(),
        }
    }

    pub fn file_extension(self) -> &'static str {
        match self {
            Language::Solidity => "sol",
            Language::C => "c",
            Language::Cpp => "cpp",
            Language::Python => "py",
        }
    }

    pub fn from_extension(ext: &str) -> Option<Language> {
        match ext {
            "sol" => Some(Language::Solidity),
            "c" | "h" => Some(Language::C),
            "cpp" | "cc" | "cxx" | "hpp" => Some(Language::Cpp),
            "py" => Some(Language::Python),
            _ => None,
        }
    }

    pub fn all() -> [Language; 4] {
        [Language::Solidity, Language::C, Language::Cpp, Language::Python]
    }

    fn is_c_like(self) -> bool {
        !matches!(self, Language::Python)
    }
}

impl std::fmt::Display for Language {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TokenKind {
    Ident,
    Keyword,
    Number,
    Str,
    Char,
    Comment,
    /// A full preprocessor line (C/C++), including continuations.
    Preproc,
    Punct,
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the first character.
    pub start: usize,
    /// Byte offset one past the last character.
    pub end: usize,
    /// 1-based line of the first character.
    pub line: u32,
}

#[derive(Debug, Clone)]
pub struct Lexed {
    pub language: Language,
    pub src: String,
    pub tokens: Vec<Token>,
}

impl Lexed {
    pub fn text(&self, tok: &Token) -> &str {
        &self.src[tok.start..tok.end]
    }

    /// Tokens that constitute the lexical fingerprint: everything except
    /// comments. Whitespace never produces tokens.
    pub fn lexical_tokens(&self) -> impl Iterator<Item = &Token> {
        self.tokens.iter().filter(|t| t.kind != TokenKind::Comment)
    }

    /// (kind, text) pairs of the non-comment token stream, used by the
    /// token-preservation invariants for L1/L2/L3.
    pub fn fingerprint(&self) -> Vec<(TokenKind, String)> {
        self.lexical_tokens()
            .map(|t| (t.kind, self.text(t).to_string()))
            .collect()
    }
}

#[derive(Debug, thiserror::Error)]
#[error("lex error at line {line}: {message}")]
pub struct LexError {
    pub line: u32,
    pub message: String,
}

pub fn lex(src: &str, language: Language) -> Result<Lexed, LexError> {
    let tokens = match language {
        Language::Python => lex_python(src)?,
        _ => lex_c_like(src, language)?,
    };
    Ok(Lexed {
        language,
        src: src.to_string(),
        tokens,
    })
}

/// Counts non-empty source lines (blank lines excluded, comment lines included).
pub fn count_loc(src: &str) -> u32 {
    src.lines().filter(|l| !l.trim().is_empty()).count() as u32
}

// ---------------------------------------------------------------------------
// keyword tables
// ---------------------------------------------------------------------------

pub const PYTHON_KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class", "continue",
    "def", "del", "elif", "else", "except", "finally", "for", "from", "global", "if", "import",
    "in", "is", "lambda", "match", "case", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

pub const C_KEYWORDS: &[&str] = &[
    "auto", "break", "case", "char", "const", "continue", "default", "do", "double", "else",
    "enum", "extern", "float", "for", "goto", "if", "inline", "int", "long", "register",
    "restrict", "return", "short", "signed", "sizeof", "static", "struct", "switch", "typedef",
    "union", "unsigned", "void", "volatile", "while", "_Bool", "bool", "true", "false",
];

pub const CPP_EXTRA_KEYWORDS: &[&str] = &[
    "alignas", "alignof", "catch", "class", "constexpr", "decltype", "delete", "dynamic_cast",
    "explicit", "export", "friend", "mutable", "namespace", "new", "noexcept", "nullptr",
    "operator", "private", "protected", "public", "reinterpret_cast", "static_assert",
    "static_cast", "template", "this", "throw", "try", "typeid", "typename", "using", "virtual",
    "wchar_t", "auto", "override", "final",
];

pub const SOLIDITY_KEYWORDS: &[&str] = &[
    "abstract", "address", "anonymous", "as", "assembly", "bool", "break", "bytes", "calldata",
    "case", "catch", "constant", "constructor", "continue", "contract", "delete", "do", "else",
    "emit", "enum", "error", "event", "external", "fallback", "false", "for", "function", "if",
    "immutable", "import", "indexed", "interface", "internal", "is", "let", "library", "mapping",
    "memory", "modifier", "new", "override", "payable", "pragma", "private", "public", "pure",
    "receive", "return", "returns", "revert", "storage", "string", "struct", "switch", "this",
    "throw", "true", "try", "type", "unchecked", "using", "view", "virtual", "while",
];

pub fn is_keyword(word: &str, language: Language) -> bool {
    match language {
        Language::Python => PYTHON_KEYWORDS.contains(&word),
        Language::C => C_KEYWORDS.contains(&word),
        Language::Cpp => C_KEYWORDS.contains(&word) || CPP_EXTRA_KEYWORDS.contains(&word),
        Language::Solidity => {
            SOLIDITY_KEYWORDS.contains(&word) || is_solidity_elementary_type(word)
        }
    }
}

pub fn is_solidity_elementary_type(word: &str) -> bool {
    if let Some(rest) = word.strip_prefix("uint").or_else(|| word.strip_prefix("int")) {
        return rest.is_empty() || rest.parse::<u32>().map(|n| n % 8 == 0 && n <= 256).unwrap_or(false);
    }
    if let Some(rest) = word.strip_prefix("bytes") {
        return rest.is_empty() || rest.parse::<u32>().map(|n| (1..=32).contains(&n)).unwrap_or(false);
    }
    false
}

// ---------------------------------------------------------------------------
// C-family lexer (C, C++, Solidity)
// ---------------------------------------------------------------------------

fn lex_c_like(src: &str, language: Language) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    let mut line: u32 = 1;
    let mut at_line_start = true;

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            at_line_start = true;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }

        let start = i;
        let start_line = line;

        // preprocessor line (C/C++ only)
        if c == b'#' && at_line_start && language.is_c_like() && language != Language::Solidity {
            while i < bytes.len() {
                if bytes[i] == b'\\' && i + 1 < bytes.len() && bytes[i + 1] == b'\n' {
                    line += 1;
                    i += 2;
                    continue;
                }
                if bytes[i] == b'\n' {
                    break;
                }
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Preproc, start, end: i, line: start_line });
            continue;
        }
        at_line_start = false;

        // comments
        if c == b'/' && i + 1 < bytes.len() {
            if bytes[i + 1] == b'/' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
                tokens.push(Token { kind: TokenKind::Comment, start, end: i, line: start_line });
                continue;
            }
            if bytes[i + 1] == b'*' {
                i += 2;
                loop {
                    if i + 1 >= bytes.len() {
                        return Err(LexError { line: start_line, message: "unterminated block comment".into() });
                    }
                    if bytes[i] == b'\n' {
                        line += 1;
                    }
                    if bytes[i] == b'*' && bytes[i + 1] == b'/' {
                        i += 2;
                        break;
                    }
                    i += 1;
                }
                tokens.push(Token { kind: TokenKind::Comment, start, end: i, line: start_line });
                continue;
            }
        }

        // string literal
        if c == b'"' {
            i += 1;
            loop {
                if i >= bytes.len() || bytes[i] == b'\n' {
                    return Err(LexError { line: start_line, message: "unterminated string literal".into() });
                }
                if bytes[i] == b'\\' {
                    i += 2;
                    continue;
                }
                if bytes[i] == b'"' {
                    i += 1;
                    break;
                }
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Str, start, end: i, line: start_line });
            continue;
        }

        // char literal
        if c == b'\'' && language != Language::Solidity {
            i += 1;
            loop {
                if i >= bytes.len() || bytes[i] == b'\n' {
                    return Err(LexError { line: start_line, message: "unterminated character literal".into() });
                }
                if bytes[i] == b'\\' {
                    i += 2;
                    continue;
                }
                if bytes[i] == b'\'' {
                    i += 1;
                    break;
                }
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Char, start, end: i, line: start_line });
            continue;
        }
        // solidity single-quoted string
        if c == b'\'' && language == Language::Solidity {
            i += 1;
            loop {
                if i >= bytes.len() || bytes[i] == b'\n' {
                    return Err(LexError { line: start_line, message: "unterminated string literal".into() });
                }
                if bytes[i] == b'\\' {
                    i += 2;
                    continue;
                }
                if bytes[i] == b'\'' {
                    i += 1;
                    break;
                }
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Str, start, end: i, line: start_line });
            continue;
        }

        // number
        if c.is_ascii_digit() || (c == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit()) {
            i += 1;
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric()
                    || bytes[i] == b'.'
                    || bytes[i] == b'_'
                    || ((bytes[i] == b'+' || bytes[i] == b'-')
                        && matches!(bytes[i - 1], b'e' | b'E' | b'p' | b'P')))
            {
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Number, start, end: i, line: start_line });
            continue;
        }

        // identifier / keyword
        if c.is_ascii_alphabetic() || c == b'_' || c == b'$' {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_' || bytes[i] == b'$') {
                i += 1;
            }
            let word = &src[start..i];
            let kind = if is_keyword(word, language) { TokenKind::Keyword } else { TokenKind::Ident };
            tokens.push(Token { kind, start, end: i, line: start_line });
            continue;
        }

        // operators and punctuation, longest match first
        const OPS3: &[&str] = &["<<=", ">>=", "...", "->*", "**="];
        const OPS2: &[&str] = &[
            "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "++", "--", "+=", "-=", "*=", "/=",
            "%=", "&=", "|=", "^=", "->", "::", ":=", "=>", "**",
        ];
        let rest = &src[i..];
        let mut matched = 0usize;
        for op in OPS3 {
            if rest.starts_with(op) {
                matched = 3;
                break;
            }
        }
        if matched == 0 {
            for op in OPS2 {
                if rest.starts_with(op) {
                    matched = 2;
                    break;
                }
            }
        }
        if matched == 0 {
            matched = 1;
        }
        i += matched;
        tokens.push(Token { kind: TokenKind::Punct, start, end: i, line: start_line });
    }
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// Python lexer
// ---------------------------------------------------------------------------

fn string_prefix_len(src: &str, i: usize) -> usize {
    // longest prefix of r/b/f/u letters (max 2) directly before a quote
    let bytes = src.as_bytes();
    for plen in (1..=2usize).rev() {
        if i + plen >= bytes.len() {
            continue;
        }
        let prefix = &src[i..i + plen];
        if prefix.chars().all(|c| matches!(c.to_ascii_lowercase(), 'r' | 'b' | 'f' | 'u'))
            && (bytes[i + plen] == b'"' || bytes[i + plen] == b'\'')
        {
            return plen;
        }
    }
    0
}

fn lex_python(src: &str) -> Result<Vec<Token>, LexError> {
    let bytes = src.as_bytes();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    let mut line: u32 = 1;

    while i < bytes.len() {
        let c = bytes[i];
        if c == b'\n' {
            line += 1;
            i += 1;
            continue;
        }
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        // explicit line continuation
        if c == b'\\' && i + 1 < bytes.len() && bytes[i + 1] == b'\n' {
            line += 1;
            i += 2;
            continue;
        }

        let start = i;
        let start_line = line;

        if c == b'#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Comment, start, end: i, line: start_line });
            continue;
        }

        // string with optional prefix
        let plen = string_prefix_len(src, i);
        let qpos = i + plen;
        if qpos < bytes.len() && (bytes[qpos] == b'"' || bytes[qpos] == b'\'') {
            let quote = bytes[qpos];
            let raw = src[i..qpos].to_ascii_lowercase().contains('r');
            let triple = qpos + 2 < bytes.len() && bytes[qpos + 1] == quote && bytes[qpos + 2] == quote;
            i = qpos + if triple { 3 } else { 1 };
            loop {
                if i >= bytes.len() {
                    return Err(LexError { line: start_line, message: "unterminated string literal".into() });
                }
                let b = bytes[i];
                if b == b'\n' {
                    if !triple {
                        return Err(LexError { line: start_line, message: "unterminated string literal".into() });
                    }
                    line += 1;
                    i += 1;
                    continue;
                }
                if b == b'\\' && !raw {
                    if i + 1 < bytes.len() && bytes[i + 1] == b'\n' {
                        line += 1;
                    }
                    i += 2;
                    continue;
                }
                if b == quote {
                    if triple {
                        if i + 2 < bytes.len() && bytes[i + 1] == quote && bytes[i + 2] == quote {
                            i += 3;
                            break;
                        }
                        i += 1;
                        continue;
                    }
                    i += 1;
                    break;
                }
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Str, start, end: i, line: start_line });
            continue;
        }

        if c.is_ascii_digit() || (c == b'.' && i + 1 < bytes.len() && bytes[i + 1].is_ascii_digit()) {
            i += 1;
            while i < bytes.len()
                && (bytes[i].is_ascii_alphanumeric()
                    || bytes[i] == b'.'
                    || bytes[i] == b'_'
                    || ((bytes[i] == b'+' || bytes[i] == b'-') && matches!(bytes[i - 1], b'e' | b'E')))
            {
                i += 1;
            }
            tokens.push(Token { kind: TokenKind::Number, start, end: i, line: start_line });
            continue;
        }

        if c.is_ascii_alphabetic() || c == b'_' {
            i += 1;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &src[start..i];
            let kind = if is_keyword(word, Language::Python) { TokenKind::Keyword } else { TokenKind::Ident };
            tokens.push(Token { kind, start, end: i, line: start_line });
            continue;
        }

        const OPS3: &[&str] = &["**=", "//=", ">>=", "<<=", "..."];
        const OPS2: &[&str] = &[
            "**", "//", ">>", "<<", "<=", ">=", "==", "!=", "->", "+=", "-=", "*=", "/=", "%=",
            "&=", "|=", "^=", ":=", "@=",
        ];
        let rest = &src[i..];
        let mut matched = 0usize;
        for op in OPS3 {
            if rest.starts_with(op) {
                matched = 3;
                break;
            }
        }
        if matched == 0 {
            for op in OPS2 {
                if rest.starts_with(op) {
                    matched = 2;
                    break;
                }
            }
        }
        if matched == 0 {
            matched = src[i..].chars().next().map(|ch| ch.len_utf8()).unwrap_or(1);
        }
        i += matched;
        tokens.push(Token { kind: TokenKind::Punct, start, end: i, line: start_line });
    }
    Ok(tokens)
}

// ---------------------------------------------------------------------------
// edit application
// ---------------------------------------------------------------------------

/// A byte-range replacement against the original source.
#[derive(Debug, Clone)]
pub struct Edit {
    pub start: usize,
    pub end: usize,
    pub replacement: String,
}

impl Edit {
    pub fn replace(start: usize, end: usize, replacement: impl Into<String>) -> Edit {
        Edit { start, end, replacement: replacement.into() }
    }

    pub fn insert(at: usize, text: impl Into<String>) -> Edit {
        Edit { start: at, end: at, replacement: text.into() }
    }
}

/// Applies non-overlapping edits. Edits are sorted by start offset; zero-width
/// inserts at the same offset keep their submission order.
pub fn apply_edits(src: &str, mut edits: Vec<Edit>) -> String {
    edits.sort_by_key(|e| (e.start, e.end));
    let mut out = String::with_capacity(src.len() + 64);
    let mut pos = 0usize;
    for e in edits {
        assert!(e.start >= pos, "overlapping edits at byte {}", e.start);
        out.push_str(&src[pos..e.start]);
        out.push_str(&e.replacement);
        pos = e.end;
    }
    out.push_str(&src[pos..]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_c_comments_and_strings() {
        let src = "int main() { // line\n  char* s = \"a//b\"; /* block\n */ return 0; }";
        let lexed = lex(src, Language::C).unwrap();
        let comments: Vec<_> = lexed
            .tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Comment)
            .map(|t| lexed.text(t).to_string())
            .collect();
        assert_eq!(comments.len(), 2);
        let strs: Vec<_> = lexed
            .tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Str)
            .map(|t| lexed.text(t).to_string())
            .collect();
        assert_eq!(strs, vec!["\"a//b\""]);
    }

    #[test]
    fn lexes_python_triple_strings() {
        let src = "def f():\n    \"\"\"doc\n    string\"\"\"\n    return 'x' + \"y\"\n";
        let lexed = lex(src, Language::Python).unwrap();
        let strs: Vec<_> = lexed
            .tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Str)
            .map(|t| lexed.text(t).to_string())
            .collect();
        assert_eq!(strs.len(), 3);
        assert!(strs[0].starts_with("\"\"\""));
    }

    #[test]
    fn unterminated_string_reports_line() {
        let src = "x = 1\ny = 'abc\n";
        let err = lex(src, Language::Python).unwrap_err();
        assert_eq!(err.line, 2);
    }

    #[test]
    fn preprocessor_is_one_token() {
        let src = "#include <stdio.h>\n#define A \\\n  5\nint x;\n";
        let lexed = lex(src, Language::C).unwrap();
        let pre: Vec<_> = lexed
            .tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Preproc)
            .map(|t| lexed.text(t).to_string())
            .collect();
        assert_eq!(pre.len(), 2);
        assert!(pre[1].contains("5"));
    }

    #[test]
    fn count_loc_skips_blank_lines() {
        assert_eq!(count_loc("a\n\nb\n  \nc"), 3);
    }

    #[test]
    fn apply_edits_splices() {
        let src = "abcdef";
        let out = apply_edits(
            src,
            vec![Edit::replace(0, 1, "X"), Edit::insert(3, "_"), Edit::replace(5, 6, "")],
        );
        assert_eq!(out, "Xbc_de");
    }

    #[test]
    fn solidity_uint_types_are_keywords() {
        assert!(is_keyword("uint256", Language::Solidity));
        assert!(is_keyword("bytes32", Language::Solidity));
        assert!(!is_keyword("uint257", Language::Solidity));
    }
}
