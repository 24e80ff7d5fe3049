//! L1: user-defined identifiers replaced by hashed names (`OX` + 8 hex).
//!
//! Declared names are collected per language with conservative heuristics;
//! language keywords, builtins, and imported/external names stay untouched.
//! The mapping is injective: collisions retry with a salt up to 4 times.

use super::cblock;
use super::pyblock::PySource;
use super::PassOutcome;
use crate::error::ObfuscateError;
use crate::lang::{self, Edit, Language, Lexed, TokenKind};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};

pub fn rename_identifiers(code: &str, language: Language, seed: u64) -> Result<String, ObfuscateError> {
    let mut rng = super::technique_rng(seed, crate::taxonomy::TechniqueId::L1);
    Ok(pass_with_seed(code, language, seed, &mut rng)?.code)
}

pub(crate) fn pass(code: &str, language: Language, rng: &mut ChaCha8Rng) -> Result<PassOutcome, ObfuscateError> {
    // the rng parameter keeps the pass signature uniform; hashing uses a
    // seed drawn from it so combo-level and direct calls stay deterministic
    use rand::RngCore;
    let seed = rng.next_u64();
    pass_with_seed(code, language, seed, rng)
}

fn pass_with_seed(
    code: &str,
    language: Language,
    seed: u64,
    _rng: &mut ChaCha8Rng,
) -> Result<PassOutcome, ObfuscateError> {
    let lexed = lang::lex(code, language).map_err(|e| ObfuscateError::ParseFailure(e.to_string()))?;
    let (declared, protected) = match language {
        Language::Python => collect_python(&lexed)?,
        Language::C | Language::Cpp => collect_c(&lexed),
        Language::Solidity => collect_solidity(&lexed),
    };

    let declared: BTreeSet<String> = declared
        .into_iter()
        .filter(|name| !protected.contains(name) && !is_builtin(name, language))
        .collect();
    if declared.is_empty() {
        return Ok(PassOutcome::unchanged(code));
    }

    // names that will remain in the file must not collide with replacements
    let mut occupied: BTreeSet<String> = lexed
        .tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Ident)
        .map(|t| lexed.text(t).to_string())
        .filter(|n| !declared.contains(n))
        .collect();

    let mut mapping: BTreeMap<String, String> = BTreeMap::new();
    for name in &declared {
        let hashed = hashed_name(name, seed, &occupied)?;
        occupied.insert(hashed.clone());
        mapping.insert(name.clone(), hashed);
    }

    let mut edits = Vec::new();
    for tok in &lexed.tokens {
        match tok.kind {
            TokenKind::Ident => {
                if let Some(new_name) = mapping.get(lexed.text(tok)) {
                    edits.push(Edit::replace(tok.start, tok.end, new_name.clone()));
                }
            }
            TokenKind::Preproc => {
                let text = lexed.text(tok);
                let rewritten = replace_words(text, &mapping);
                if rewritten != text {
                    edits.push(Edit::replace(tok.start, tok.end, rewritten));
                }
            }
            TokenKind::Str if language == Language::Python => {
                let text = lexed.text(tok);
                let prefix_end = text.find(['"', '\'']).unwrap_or(0);
                if text[..prefix_end].to_ascii_lowercase().contains('f') {
                    let rewritten = replace_in_fstring(text, &mapping);
                    if rewritten != text {
                        edits.push(Edit::replace(tok.start, tok.end, rewritten));
                    }
                }
            }
            _ => {}
        }
    }

    Ok(PassOutcome {
        code: lang::apply_edits(code, edits),
        sites: mapping.len() as u32,
    })
}

fn fnv64(input: &str) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for b in input.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// "OX" + 8 uppercase hex digits of a 64-bit string hash mixed with the seed.
fn hashed_name(name: &str, seed: u64, occupied: &BTreeSet<String>) -> Result<String, ObfuscateError> {
    for salt in 0..=4u32 {
        let input = if salt == 0 { name.to_string() } else { format!("{name}#{salt}") };
        let h = fnv64(&input) ^ seed;
        let candidate = format!("OX{:08X}", (h & 0xFFFF_FFFF) as u32);
        if !occupied.contains(&candidate) {
            return Ok(candidate);
        }
    }
    Err(ObfuscateError::HashCollision(name.to_string()))
}

fn replace_words(text: &str, mapping: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(text.len());
    let bytes = text.as_bytes();
    let mut i = 0usize;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_alphabetic() || c == b'_' {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let word = &text[start..i];
            out.push_str(mapping.get(word).map(|s| s.as_str()).unwrap_or(word));
        } else {
            out.push(c as char);
            i += 1;
        }
    }
    out
}

/// Rewrites `{...}` interpolation regions of an f-string.
fn replace_in_fstring(text: &str, mapping: &BTreeMap<String, String>) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(open) = rest.find('{') {
        // `{{` is an escaped brace
        if rest[open..].starts_with("{{") {
            out.push_str(&rest[..open + 2]);
            rest = &rest[open + 2..];
            continue;
        }
        let close = match rest[open..].find('}') {
            Some(c) => open + c,
            None => break,
        };
        out.push_str(&rest[..open + 1]);
        out.push_str(&replace_words(&rest[open + 1..close], mapping));
        out.push('}');
        rest = &rest[close + 1..];
    }
    out.push_str(rest);
    out
}

fn is_builtin(name: &str, language: Language) -> bool {
    const PY: &[&str] = &[
        "print", "len", "range", "int", "str", "float", "bool", "list", "dict", "set", "tuple",
        "iter", "next", "enumerate", "zip", "map", "filter", "sum", "min", "max", "abs", "sorted",
        "reversed", "open", "input", "isinstance", "issubclass", "hasattr", "getattr", "setattr",
        "super", "object", "type", "id", "hash", "repr", "chr", "ord", "divmod", "pow", "round",
        "all", "any", "format", "vars", "globals", "locals", "exec", "eval", "bytes", "bytearray",
        "frozenset", "slice", "staticmethod", "classmethod", "property", "Exception",
        "ValueError", "TypeError", "RuntimeError", "KeyError", "IndexError", "StopIteration",
        "ZeroDivisionError", "NotImplementedError", "OSError", "IOError", "ArithmeticError",
        "AttributeError", "BaseException", "self", "cls",
    ];
    const C: &[&str] = &[
        "main", "printf", "puts", "putchar", "getchar", "scanf", "fprintf", "sprintf", "snprintf",
        "fscanf", "sscanf", "malloc", "calloc", "realloc", "free", "memcpy", "memmove", "memset",
        "memcmp", "strlen", "strcpy", "strncpy", "strcmp", "strncmp", "strcat", "strncat",
        "strchr", "strrchr", "strstr", "strtol", "strtoul", "atoi", "atol", "abs", "labs", "exit",
        "abort", "assert", "fopen", "fclose", "fread", "fwrite", "fgets", "fputs", "fseek",
        "ftell", "rewind", "stdin", "stdout", "stderr", "NULL", "EOF", "size_t", "ssize_t",
        "FILE", "errno", "rand", "srand", "time", "clock", "qsort", "bsearch", "INT_MAX",
        "INT_MIN", "LONG_MAX", "LONG_MIN", "UINT_MAX", "ULONG_MAX", "CHAR_BIT", "int8_t",
        "int16_t", "int32_t", "int64_t", "uint8_t", "uint16_t", "uint32_t", "uint64_t",
        "intptr_t", "uintptr_t", "ptrdiff_t", "va_list", "va_start", "va_end", "va_arg",
    ];
    const CPP_EXTRA: &[&str] = &[
        "std", "cout", "cin", "cerr", "endl", "string", "vector", "map", "set", "pair",
        "make_pair", "swap", "sort", "begin", "end", "push_back", "pop_back", "size", "empty",
        "clear", "insert", "erase", "find", "first", "second", "nullptr_t",
    ];
    const SOL: &[&str] = &[
        "msg", "block", "tx", "abi", "sender", "value", "data", "origin", "gas", "timestamp",
        "number", "coinbase", "difficulty", "gaslimit", "require", "revert", "assert",
        "keccak256", "sha256", "ripemd160", "ecrecover", "addmod", "mulmod", "selfdestruct",
        "transfer", "send", "call", "delegatecall", "staticcall", "balance", "push", "pop",
        "length", "wei", "gwei", "ether", "seconds", "minutes", "hours", "days", "weeks",
        "encodePacked", "encode", "decode", "concat", "chainid", "basefee", "code", "codehash",
    ];
    // double-underscore names keep their protocol meaning
    if language == Language::Python && name.starts_with("__") && name.ends_with("__") {
        return true;
    }
    match language {
        Language::Python => PY.contains(&name),
        Language::C => C.contains(&name),
        Language::Cpp => C.contains(&name) || CPP_EXTRA.contains(&name),
        Language::Solidity => SOL.contains(&name),
    }
}

// ---------------------------------------------------------------------------
// declaration collection
// ---------------------------------------------------------------------------

fn collect_python(lexed: &Lexed) -> Result<(BTreeSet<String>, BTreeSet<String>), ObfuscateError> {
    let py = PySource::parse(&lexed.src)?;
    let mut declared = BTreeSet::new();
    let mut protected = BTreeSet::new();

    for logical in &py.logicals {
        let toks = py.tokens_of(logical);
        if toks.is_empty() {
            continue;
        }
        let text = |k: usize| py.token_text(toks[k]);
        let kind = |k: usize| py.token(toks[k]).kind;
        let n = toks.len();
        let head = text(0);

        // imports: every named piece is external
        if head == "import" || head == "from" {
            for k in 1..n {
                if kind(k) == TokenKind::Ident {
                    protected.insert(text(k).to_string());
                }
            }
            continue;
        }

        match head {
            "def" => {
                if n > 1 && kind(1) == TokenKind::Ident {
                    declared.insert(text(1).to_string());
                }
                collect_py_params(&py, &toks, 2, &mut declared);
            }
            "class" => {
                if n > 1 && kind(1) == TokenKind::Ident {
                    declared.insert(text(1).to_string());
                }
            }
            "global" | "nonlocal" => {
                for k in 1..n {
                    if kind(k) == TokenKind::Ident {
                        declared.insert(text(k).to_string());
                    }
                }
            }
            _ => {}
        }

        // statement-wide scans: for-targets, as-bindings, walrus, lambdas
        let mut depth = 0i32;
        for k in 0..n {
            match (kind(k), text(k)) {
                (TokenKind::Punct, "(") | (TokenKind::Punct, "[") | (TokenKind::Punct, "{") => depth += 1,
                (TokenKind::Punct, ")") | (TokenKind::Punct, "]") | (TokenKind::Punct, "}") => depth -= 1,
                (TokenKind::Keyword, "for") => {
                    let mut j = k + 1;
                    while j < n && text(j) != "in" {
                        if kind(j) == TokenKind::Ident {
                            declared.insert(text(j).to_string());
                        }
                        j += 1;
                    }
                }
                (TokenKind::Keyword, "as") => {
                    if k + 1 < n && kind(k + 1) == TokenKind::Ident && head != "import" && head != "from" {
                        declared.insert(text(k + 1).to_string());
                    }
                }
                (TokenKind::Keyword, "lambda") => {
                    let mut j = k + 1;
                    let mut expecting = true;
                    while j < n && text(j) != ":" {
                        match (kind(j), text(j)) {
                            (TokenKind::Ident, _) if expecting => {
                                declared.insert(text(j).to_string());
                                expecting = false;
                            }
                            (TokenKind::Punct, ",") => expecting = true,
                            (TokenKind::Punct, "=") => expecting = false,
                            _ => {}
                        }
                        j += 1;
                    }
                }
                (TokenKind::Punct, ":=") => {
                    if k >= 1 && kind(k - 1) == TokenKind::Ident {
                        declared.insert(text(k - 1).to_string());
                    }
                }
                _ => {}
            }
        }
        let _ = depth;

        // assignment targets on plain statements
        if !matches!(head, "def" | "class" | "import" | "from" | "if" | "elif" | "while" | "return" | "yield" | "assert" | "raise" | "del" | "print" | "with" | "for" | "try" | "except" | "finally" | "else" | "lambda" | "match" | "case" | "pass" | "break" | "continue" | "global" | "nonlocal") {
            collect_py_assign_targets(&py, &toks, &mut declared);
        }
    }

    Ok((declared, protected))
}

fn collect_py_params(py: &PySource, toks: &[usize], from: usize, declared: &mut BTreeSet<String>) {
    // tokens from `(` after the def name to its matching `)`
    let n = toks.len();
    let mut k = from;
    while k < n && py.token_text(toks[k]) != "(" {
        k += 1;
    }
    if k >= n {
        return;
    }
    let mut depth = 0i32;
    let mut expecting = true;
    while k < n {
        let t = py.token_text(toks[k]);
        match t {
            "(" | "[" | "{" => {
                depth += 1;
                if depth > 1 {
                    expecting = false;
                }
            }
            ")" | "]" | "}" => {
                depth -= 1;
                if depth == 0 {
                    return;
                }
            }
            "," if depth == 1 => expecting = true,
            ":" | "=" if depth == 1 => expecting = false,
            "*" | "**" if depth == 1 => expecting = true,
            _ => {
                if expecting && depth == 1 && py.token(toks[k]).kind == TokenKind::Ident {
                    declared.insert(t.to_string());
                    expecting = false;
                }
            }
        }
        k += 1;
    }
}

fn collect_py_assign_targets(py: &PySource, toks: &[usize], declared: &mut BTreeSet<String>) {
    let n = toks.len();
    // find first top-level `=` or augmented assignment
    let mut depth = 0i32;
    let mut eq_at = None;
    for k in 0..n {
        let t = py.token_text(toks[k]);
        match t {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            "=" | "+=" | "-=" | "*=" | "/=" | "//=" | "%=" | "**=" | "&=" | "|=" | "^=" | ">>=" | "<<="
                if depth == 0 =>
            {
                eq_at = Some(k);
                break;
            }
            _ => {}
        }
    }
    let Some(eq) = eq_at else { return };
    let mut depth = 0i32;
    for k in 0..eq {
        let t = py.token_text(toks[k]);
        match t {
            "(" | "[" | "{" => depth += 1,
            ")" | "]" | "}" => depth -= 1,
            _ => {
                if depth == 0 && py.token(toks[k]).kind == TokenKind::Ident {
                    let after_dot = k >= 1 && py.token_text(toks[k - 1]) == ".";
                    let before_access = k + 1 < n
                        && matches!(py.token_text(toks[k + 1]), "." | "[" | "(");
                    let after_colon = k >= 1 && py.token_text(toks[k - 1]) == ":";
                    if !after_dot && !before_access && !after_colon {
                        declared.insert(t.to_string());
                    }
                }
            }
        }
    }
}

const C_TYPE_WORDS: &[&str] = &[
    "void", "char", "short", "int", "long", "float", "double", "signed", "unsigned", "bool",
    "_Bool", "size_t", "ssize_t", "int8_t", "int16_t", "int32_t", "int64_t", "uint8_t",
    "uint16_t", "uint32_t", "uint64_t",
];

fn collect_c(lexed: &Lexed) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut declared = BTreeSet::new();
    let mut protected = BTreeSet::new();
    let mut typedefs: BTreeSet<String> = BTreeSet::new();
    let toks: Vec<usize> = (0..lexed.tokens.len())
        .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
        .collect();
    let text = |k: usize| lexed.text(&lexed.tokens[toks[k]]);
    let kind = |k: usize| lexed.tokens[toks[k]].kind;
    let n = toks.len();

    // #define names
    for i in 0..lexed.tokens.len() {
        let tok = &lexed.tokens[i];
        if tok.kind == TokenKind::Preproc {
            let t = lexed.text(tok);
            let body = t.trim_start_matches('#').trim_start();
            if let Some(rest) = body.strip_prefix("define") {
                let name: String = rest
                    .trim_start()
                    .chars()
                    .take_while(|c| c.is_ascii_alphanumeric() || *c == '_')
                    .collect();
                if !name.is_empty() {
                    declared.insert(name);
                }
            }
        }
    }

    let is_type_word = |k: usize, typedefs: &BTreeSet<String>| -> bool {
        (kind(k) == TokenKind::Keyword && C_TYPE_WORDS.contains(&text(k)))
            || (kind(k) == TokenKind::Ident
                && (C_TYPE_WORDS.contains(&text(k)) || typedefs.contains(text(k))))
    };

    let mut k = 0usize;
    while k < n {
        let t = text(k);
        // struct/enum/union tags
        if kind(k) == TokenKind::Keyword && matches!(t, "struct" | "enum" | "union") {
            if k + 1 < n && kind(k + 1) == TokenKind::Ident {
                declared.insert(text(k + 1).to_string());
                k += 2;
                continue;
            }
            k += 1;
            continue;
        }
        if kind(k) == TokenKind::Keyword && t == "typedef" {
            // declared name is the last ident before `;`
            let mut j = k + 1;
            let mut last_ident: Option<String> = None;
            while j < n && text(j) != ";" {
                if kind(j) == TokenKind::Ident {
                    last_ident = Some(text(j).to_string());
                }
                j += 1;
            }
            if let Some(name) = last_ident {
                typedefs.insert(name.clone());
                declared.insert(name);
            }
            k = j + 1;
            continue;
        }
        // declaration run: [extern|static|const ...]* type-words+ declarators
        if is_type_word(k, &typedefs)
            || (kind(k) == TokenKind::Keyword && matches!(t, "extern" | "static" | "const" | "register" | "volatile"))
        {
            let start = k;
            let mut is_extern = false;
            let mut saw_type = false;
            let mut j = k;
            while j < n {
                let tj = text(j);
                if kind(j) == TokenKind::Keyword
                    && matches!(tj, "extern" | "static" | "const" | "register" | "volatile" | "inline")
                {
                    if tj == "extern" {
                        is_extern = true;
                    }
                    j += 1;
                    continue;
                }
                if is_type_word(j, &typedefs) {
                    saw_type = true;
                    j += 1;
                    continue;
                }
                if kind(j) == TokenKind::Keyword && matches!(tj, "struct" | "enum" | "union") {
                    saw_type = true;
                    j += 1;
                    if j < n && kind(j) == TokenKind::Ident {
                        declared.insert(text(j).to_string());
                        j += 1;
                    }
                    continue;
                }
                break;
            }
            if saw_type {
                // declarators: *... name [={,;([)]
                loop {
                    while j < n && text(j) == "*" {
                        j += 1;
                    }
                    if j < n && kind(j) == TokenKind::Ident {
                        let follower = if j + 1 < n { text(j + 1) } else { ";" };
                        if matches!(follower, "=" | ";" | "," | "(" | "[" | ")") {
                            if is_extern {
                                protected.insert(text(j).to_string());
                            } else {
                                declared.insert(text(j).to_string());
                            }
                        }
                        j += 1;
                    }
                    // advance to next `,` at depth 0 of this declaration
                    let mut depth = 0i32;
                    let mut more = false;
                    while j < n {
                        match text(j) {
                            "(" | "[" | "{" => depth += 1,
                            ")" | "]" | "}" => {
                                if depth == 0 {
                                    break;
                                }
                                depth -= 1;
                            }
                            ";" if depth == 0 => break,
                            "," if depth == 0 => {
                                more = true;
                                j += 1;
                                break;
                            }
                            "=" if depth == 0 => {}
                            _ => {}
                        }
                        j += 1;
                    }
                    if !more {
                        break;
                    }
                }
            }
            k = (j.max(start + 1)).min(n);
            continue;
        }
        k += 1;
    }

    // function definition names and their parameters
    for f in cblock::find_functions(lexed) {
        let name = lexed.text(&lexed.tokens[f.name_tok]);
        declared.insert(name.to_string());
        let ptoks: Vec<usize> = (f.params_open + 1..f.params_close)
            .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
            .collect();
        let mut saw_type = false;
        for &i in &ptoks {
            let t = &lexed.tokens[i];
            let text = lexed.text(t);
            if t.kind == TokenKind::Keyword && C_TYPE_WORDS.contains(&text)
                || (t.kind == TokenKind::Ident && typedefs.contains(text))
                || matches!(text, "struct" | "enum" | "union" | "const")
            {
                saw_type = true;
                continue;
            }
            if text == "*" {
                continue;
            }
            if text == "," {
                saw_type = false;
                continue;
            }
            if saw_type && t.kind == TokenKind::Ident {
                declared.insert(text.to_string());
                saw_type = false;
            }
        }
    }

    (declared, protected)
}

fn collect_solidity(lexed: &Lexed) -> (BTreeSet<String>, BTreeSet<String>) {
    let mut declared = BTreeSet::new();
    let protected = BTreeSet::new();
    let toks: Vec<usize> = (0..lexed.tokens.len())
        .filter(|&i| lexed.tokens[i].kind != TokenKind::Comment)
        .collect();
    let text = |k: usize| lexed.text(&lexed.tokens[toks[k]]);
    let kind = |k: usize| lexed.tokens[toks[k]].kind;
    let n = toks.len();

    let mut user_types: BTreeSet<String> = BTreeSet::new();
    for k in 0..n {
        if kind(k) == TokenKind::Keyword
            && matches!(text(k), "contract" | "interface" | "library" | "struct" | "enum" | "event" | "modifier" | "error" | "function")
            && k + 1 < n
            && kind(k + 1) == TokenKind::Ident
        {
            declared.insert(text(k + 1).to_string());
            if matches!(text(k), "struct" | "enum" | "contract") {
                user_types.insert(text(k + 1).to_string());
            }
        }
    }

    let is_type = |k: usize, user_types: &BTreeSet<String>| -> bool {
        (kind(k) == TokenKind::Keyword
            && (crate::lang::is_solidity_elementary_type(text(k))
                || matches!(text(k), "address" | "bool" | "string" | "bytes")))
            || (kind(k) == TokenKind::Ident && user_types.contains(text(k)))
    };

    let mut k = 0usize;
    while k < n {
        if text(k) == "mapping" {
            // mapping(...) [visibility] name
            let mut j = k + 1;
            if j < n && text(j) == "(" {
                let mut depth = 0i32;
                while j < n {
                    match text(j) {
                        "(" => depth += 1,
                        ")" => {
                            depth -= 1;
                            if depth == 0 {
                                j += 1;
                                break;
                            }
                        }
                        _ => {}
                    }
                    j += 1;
                }
                while j < n && matches!(text(j), "public" | "private" | "internal" | "constant" | "immutable") {
                    j += 1;
                }
                if j < n && kind(j) == TokenKind::Ident {
                    declared.insert(text(j).to_string());
                }
                k = j + 1;
                continue;
            }
        }
        if is_type(k, &user_types) {
            let mut j = k + 1;
            // skip array suffix and modifiers
            while j < n
                && (matches!(text(j), "[" | "]" | "memory" | "storage" | "calldata" | "public" | "private" | "internal" | "external" | "constant" | "immutable" | "payable"))
            {
                j += 1;
            }
            if j < n && kind(j) == TokenKind::Ident {
                let follower = if j + 1 < n { text(j + 1) } else { ";" };
                if matches!(follower, "=" | ";" | "," | ")") {
                    declared.insert(text(j).to_string());
                }
                k = j + 1;
                continue;
            }
        }
        k += 1;
    }

    (declared, protected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn run(code: &str, language: Language, seed: u64) -> (String, u32) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let out = pass_with_seed(code, language, seed, &mut rng).unwrap();
        (out.code, out.sites)
    }

    fn ox_names(code: &str, language: Language) -> Vec<String> {
        let lexed = lang::lex(code, language).unwrap();
        lexed
            .tokens
            .iter()
            .filter(|t| t.kind == TokenKind::Ident)
            .map(|t| lexed.text(t).to_string())
            .filter(|t| t.starts_with("OX"))
            .collect()
    }

    #[test]
    fn python_rename_matches_format() {
        let code = "def is_admin(user_id):\n    limit = 10\n    return user_id < limit\n\nprint(is_admin(3))\n";
        let (out, sites) = run(code, Language::Python, 0);
        assert_eq!(sites, 3);
        assert!(!out.contains("is_admin"));
        assert!(!out.contains("user_id"));
        assert!(!out.contains("limit"));
        assert!(out.contains("print"));
        for name in ox_names(&out, Language::Python) {
            assert!(name.len() == 10 && name[2..].chars().all(|c| c.is_ascii_hexdigit() && !c.is_ascii_lowercase()), "{name}");
        }
    }

    #[test]
    fn distinct_names_get_distinct_replacements() {
        let code = "a = 1\nb = 2\nc = a + b\nprint(c)\n";
        let (out, _) = run(code, Language::Python, 42);
        let names: std::collections::BTreeSet<_> = ox_names(&out, Language::Python).into_iter().collect();
        assert_eq!(names.len(), 3);
    }

    #[test]
    fn builtin_only_code_unchanged() {
        let code = "print(len(\"abc\"))\n";
        let (out, sites) = run(code, Language::Python, 0);
        assert_eq!(out, code);
        assert_eq!(sites, 0);
    }

    #[test]
    fn imports_protected() {
        let code = "import math\nradius = 2\nprint(math.pi * radius)\n";
        let (out, _) = run(code, Language::Python, 0);
        assert!(out.contains("import math"));
        assert!(out.contains("math.pi"));
        assert!(!out.contains("radius"));
    }

    #[test]
    fn c_rename_keeps_libc_and_main() {
        let code = "#include <stdio.h>\nint total_sum(int first, int second) { return first + second; }\nint main(void) { printf(\"%d\\n\", total_sum(1, 2)); return 0; }\n";
        let (out, _) = run(code, Language::C, 7);
        assert!(out.contains("printf"));
        assert!(out.contains("int main"));
        assert!(!out.contains("total_sum"));
        assert!(!out.contains("first"));
    }

    #[test]
    fn c_macro_names_renamed_in_preproc() {
        let code = "#define LIMIT 10\nint f(int x) { return x + LIMIT; }\n";
        let (out, _) = run(code, Language::C, 3);
        assert!(!out.contains("LIMIT"));
        let lexed = lang::lex(&out, Language::C).unwrap();
        let pre: Vec<_> = lexed.tokens.iter().filter(|t| t.kind == TokenKind::Preproc).collect();
        assert!(lexed.text(pre[0]).contains("OX"));
    }

    #[test]
    fn solidity_rename() {
        let code = "contract Wallet {\n  uint256 balanceTotal;\n  function deposit(uint256 amount) public { balanceTotal = balanceTotal + amount; }\n}\n";
        let (out, _) = run(code, Language::Solidity, 9);
        assert!(!out.contains("balanceTotal"));
        assert!(!out.contains("deposit"));
        assert!(out.contains("function OX"));
    }

    #[test]
    fn deterministic_per_seed() {
        let code = "def f(a):\n    return a\n";
        assert_eq!(run(code, Language::Python, 5).0, run(code, Language::Python, 5).0);
        assert_ne!(run(code, Language::Python, 5).0, run(code, Language::Python, 6).0);
    }

    #[test]
    fn fstring_interpolations_follow_renames() {
        let code = "count = 3\nprint(f\"have {count} items\")\n";
        let (out, _) = run(code, Language::Python, 0);
        assert!(!out.contains("{count}"));
        assert!(out.contains("items"));
    }

    #[test]
    fn token_stream_preserved_modulo_injective_renaming() {
        let code = "def f(a, b):\n    return a * b\n";
        let (out, _) = run(code, Language::Python, 11);
        let before = lang::lex(code, Language::Python).unwrap();
        let after = lang::lex(&out, Language::Python).unwrap();
        let b: Vec<_> = before.lexical_tokens().map(|t| t.kind).collect();
        let a: Vec<_> = after.lexical_tokens().map(|t| t.kind).collect();
        assert_eq!(a, b);
    }
}
