//! Well-formedness and behavioral checks for obfuscated outputs.
//!
//! Parse checks use the language front end when one is installed (python3,
//! gcc, g++) and fall back to the internal lexer's structural validation.
//! Behavioral checks run original and variant in subprocesses with a
//! wall-clock timeout and compare captured standard output byte for byte.

use crate::error::EquivalenceError;
use crate::lang::{self, Language, TokenKind};
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

pub const DEFAULT_TIMEOUT_SECS: u64 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    Identical,
    Divergent,
    NotRunnable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EquivalenceVerdict {
    pub parse_ok: bool,
    pub behavior: Behavior,
    pub details: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseReport {
    pub ok: bool,
    pub diagnostics: String,
}

/// Execution recipe for a runnable fixture: extra argv entries and the stdin
/// payload; output is captured from standard output.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct HarnessSpec {
    #[serde(default)]
    pub args: Vec<String>,
    #[serde(default)]
    pub stdin: String,
    #[serde(default)]
    pub timeout_secs: Option<u64>,
}

fn tool_available(name: &str) -> bool {
    Command::new(name)
        .arg("--version")
        .stdout(Stdio::null())
        .stderr(Stdio::null())
        .status()
        .map(|s| s.success())
        .unwrap_or(false)
}

/// Structural validation with the internal lexer: clean lexing plus balanced
/// brackets. Reports the offending line on failure.
fn internal_parse_check(code: &str, language: Language) -> ParseReport {
    let lexed = match lang::lex(code, language) {
        Ok(l) => l,
        Err(e) => {
            return ParseReport { ok: false, diagnostics: format!("line {}: {}", e.line, e.message) }
        }
    };
    let mut stack: Vec<(&str, u32)> = Vec::new();
    for tok in lexed.lexical_tokens() {
        if tok.kind != TokenKind::Punct {
            continue;
        }
        let text = lexed.text(tok);
        match text {
            "(" | "[" | "{" => stack.push((text, tok.line)),
            ")" | "]" | "}" => {
                let expected = match text {
                    ")" => "(",
                    "]" => "[",
                    _ => "{",
                };
                match stack.pop() {
                    Some((open, _)) if open == expected => {}
                    Some((open, _line)) => {
                        return ParseReport {
                            ok: false,
                            diagnostics: format!("line {}: mismatched `{}` for `{}`", tok.line, text, open),
                        }
                    }
                    None => {
                        return ParseReport {
                            ok: false,
                            diagnostics: format!("line {}: unbalanced `{}`", tok.line, text),
                        }
                    }
                }
            }
            _ => {}
        }
    }
    if let Some((open, line)) = stack.pop() {
        return ParseReport { ok: false, diagnostics: format!("line {line}: unclosed `{open}`") };
    }
    ParseReport { ok: true, diagnostics: String::new() }
}

/// Checks that the language front end accepts the file.
pub fn parse_check(code: &str, language: Language) -> ParseReport {
    match language {
        Language::Python if tool_available("python3") => {
            let out = Command::new("python3")
                .args(["-c", "import ast, sys; ast.parse(sys.stdin.read())"])
                .stdin(Stdio::piped())
                .stdout(Stdio::null())
                .stderr(Stdio::piped())
                .spawn()
                .and_then(|mut child| {
                    child.stdin.take().unwrap().write_all(code.as_bytes())?;
                    child.wait_with_output()
                });
            match out {
                Ok(o) if o.status.success() => ParseReport { ok: true, diagnostics: String::new() },
                Ok(o) => ParseReport {
                    ok: false,
                    diagnostics: String::from_utf8_lossy(&o.stderr).trim().to_string(),
                },
                Err(_) => internal_parse_check(code, language),
            }
        }
        Language::C | Language::Cpp => {
            let (tool, std_flag, xlang) = if language == Language::C {
                ("gcc", "-std=c11", "c")
            } else {
                ("g++", "-std=c++17", "c++")
            };
            if !tool_available(tool) {
                let mut report = internal_parse_check(code, language);
                if report.ok {
                    report.diagnostics = "internal structural check only".into();
                }
                return report;
            }
            let out = Command::new(tool)
                .args(["-fsyntax-only", std_flag, "-x", xlang, "-"])
                .stdin(Stdio::piped())
                .stdout(Stdio::null())
                .stderr(Stdio::piped())
                .spawn()
                .and_then(|mut child| {
                    child.stdin.take().unwrap().write_all(code.as_bytes())?;
                    child.wait_with_output()
                });
            match out {
                Ok(o) if o.status.success() => ParseReport { ok: true, diagnostics: String::new() },
                Ok(o) => ParseReport {
                    ok: false,
                    diagnostics: String::from_utf8_lossy(&o.stderr).trim().to_string(),
                },
                Err(_) => internal_parse_check(code, language),
            }
        }
        _ => {
            // solidity (no compiler in scope) and python-without-python3
            let mut report = internal_parse_check(code, language);
            if report.ok {
                report.diagnostics = "internal structural check only".into();
            }
            report
        }
    }
}

struct RunResult {
    stdout: Vec<u8>,
    exit_code: i32,
}

fn run_with_timeout(mut cmd: Command, stdin_payload: &str, timeout: Duration) -> Result<RunResult, EquivalenceError> {
    cmd.stdin(Stdio::piped()).stdout(Stdio::piped()).stderr(Stdio::null());
    let mut child = cmd.spawn()?;
    if let Some(mut pipe) = child.stdin.take() {
        let _ = pipe.write_all(stdin_payload.as_bytes());
    }
    let start = Instant::now();
    loop {
        match child.try_wait()? {
            Some(status) => {
                let mut stdout = Vec::new();
                if let Some(mut out) = child.stdout.take() {
                    use std::io::Read;
                    let _ = out.read_to_end(&mut stdout);
                }
                return Ok(RunResult { stdout, exit_code: status.code().unwrap_or(-1) });
            }
            None => {
                if start.elapsed() > timeout {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(EquivalenceError::Timeout(timeout.as_secs()));
                }
                std::thread::sleep(Duration::from_millis(10));
            }
        }
    }
}

fn execute(code: &str, language: Language, harness: &HarnessSpec, dir: &std::path::Path) -> Result<RunResult, EquivalenceError> {
    let timeout = Duration::from_secs(harness.timeout_secs.unwrap_or(DEFAULT_TIMEOUT_SECS));
    match language {
        Language::Python => {
            if !tool_available("python3") {
                return Err(EquivalenceError::ExecutionEnvironmentMissing("python3".into()));
            }
            let file = dir.join("main.py");
            std::fs::write(&file, code)?;
            let mut cmd = Command::new("python3");
            cmd.arg(&file).args(&harness.args).current_dir(dir);
            run_with_timeout(cmd, &harness.stdin, timeout)
        }
        Language::C | Language::Cpp => {
            let (tool, std_flag, ext) = if language == Language::C {
                ("gcc", "-std=c11", "c")
            } else {
                ("g++", "-std=c++17", "cpp")
            };
            if !tool_available(tool) {
                return Err(EquivalenceError::ExecutionEnvironmentMissing(tool.into()));
            }
            let src = dir.join(format!("main.{ext}"));
            let bin = dir.join("main.bin");
            std::fs::write(&src, code)?;
            let compile = Command::new(tool)
                .arg(std_flag)
                .arg("-O0")
                .arg("-o")
                .arg(&bin)
                .arg(&src)
                .stdout(Stdio::null())
                .stderr(Stdio::piped())
                .output()?;
            if !compile.status.success() {
                // compilation failure surfaces as output divergence material
                return Ok(RunResult {
                    stdout: format!(
                        "<compile error> {}",
                        String::from_utf8_lossy(&compile.stderr)
                    )
                    .into_bytes(),
                    exit_code: 111,
                });
            }
            let mut cmd = Command::new(&bin);
            cmd.args(&harness.args).current_dir(dir);
            run_with_timeout(cmd, &harness.stdin, timeout)
        }
        Language::Solidity => Err(EquivalenceError::ExecutionEnvironmentMissing(
            "solidity chain environment".into(),
        )),
    }
}

/// Runs both versions under the harness and compares captured stdout.
/// Samples without a harness return `NotRunnable`.
pub fn behavioral_check(
    original: &str,
    obfuscated: &str,
    language: Language,
    harness: Option<&HarnessSpec>,
) -> Result<EquivalenceVerdict, EquivalenceError> {
    let parse = parse_check(obfuscated, language);
    let Some(harness) = harness else {
        return Ok(EquivalenceVerdict {
            parse_ok: parse.ok,
            behavior: Behavior::NotRunnable,
            details: "no harness spec".into(),
        });
    };
    if language == Language::Solidity {
        return Ok(EquivalenceVerdict {
            parse_ok: parse.ok,
            behavior: Behavior::NotRunnable,
            details: "solidity execution requires a chain environment".into(),
        });
    }
    if !parse.ok {
        return Ok(EquivalenceVerdict {
            parse_ok: false,
            behavior: Behavior::Divergent,
            details: format!("variant does not parse: {}", parse.diagnostics),
        });
    }

    let dir_a = tempdir("orig")?;
    let dir_b = tempdir("variant")?;
    let run = (|| -> Result<EquivalenceVerdict, EquivalenceError> {
        let a = match execute(original, language, harness, &dir_a) {
            Ok(r) => r,
            Err(EquivalenceError::ExecutionEnvironmentMissing(w)) => {
                return Ok(EquivalenceVerdict {
                    parse_ok: parse.ok,
                    behavior: Behavior::NotRunnable,
                    details: format!("toolchain missing: {w}"),
                })
            }
            Err(e) => return Err(e),
        };
        let b = execute(obfuscated, language, harness, &dir_b)?;
        let identical = a.stdout == b.stdout && a.exit_code == b.exit_code;
        Ok(EquivalenceVerdict {
            parse_ok: parse.ok,
            behavior: if identical { Behavior::Identical } else { Behavior::Divergent },
            details: if identical {
                format!("{} output bytes match", a.stdout.len())
            } else {
                format!(
                    "stdout {} vs {} bytes, exit {} vs {}",
                    a.stdout.len(),
                    b.stdout.len(),
                    a.exit_code,
                    b.exit_code
                )
            },
        })
    })();
    let _ = std::fs::remove_dir_all(&dir_a);
    let _ = std::fs::remove_dir_all(&dir_b);
    run
}

fn tempdir(tag: &str) -> Result<std::path::PathBuf, EquivalenceError> {
    use std::sync::atomic::{AtomicU64, Ordering};
    static COUNTER: AtomicU64 = AtomicU64::new(0);
    let n = COUNTER.fetch_add(1, Ordering::Relaxed);
    let dir = std::env::temp_dir().join(format!(
        "obfudge-eq-{}-{}-{}",
        std::process::id(),
        tag,
        n
    ));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn well_formed_python_parses() {
        let report = parse_check("def f():\n    return 1\n", Language::Python);
        assert!(report.ok, "{}", report.diagnostics);
    }

    #[test]
    fn truncated_file_fails_with_line() {
        let report = parse_check("x = 1\ny = 'abc\n", Language::Python);
        assert!(!report.ok);
        assert!(report.diagnostics.contains('2'), "{}", report.diagnostics);
    }

    #[test]
    fn solidity_uses_internal_check() {
        let ok = parse_check("contract A { function f() public {} }", Language::Solidity);
        assert!(ok.ok);
        let bad = parse_check("contract A { function f() public {", Language::Solidity);
        assert!(!bad.ok);
    }

    #[test]
    fn behavioral_identical_and_divergent() {
        if !tool_available("python3") {
            return;
        }
        let a = "print(1 + 1)\n";
        let b = "print(2)\n";
        let c = "print(3)\n";
        let harness = HarnessSpec::default();
        let same = behavioral_check(a, b, Language::Python, Some(&harness)).unwrap();
        assert_eq!(same.behavior, Behavior::Identical);
        let diff = behavioral_check(a, c, Language::Python, Some(&harness)).unwrap();
        assert_eq!(diff.behavior, Behavior::Divergent);
    }

    #[test]
    fn missing_harness_is_not_runnable() {
        let v = behavioral_check("print(1)\n", "print(1)\n", Language::Python, None).unwrap();
        assert_eq!(v.behavior, Behavior::NotRunnable);
    }

    #[test]
    fn verdict_symmetric_when_both_run() {
        if !tool_available("python3") {
            return;
        }
        let a = "print('x')\n";
        let b = "print('y')\n";
        let harness = HarnessSpec::default();
        let ab = behavioral_check(a, b, Language::Python, Some(&harness)).unwrap();
        let ba = behavioral_check(b, a, Language::Python, Some(&harness)).unwrap();
        assert_eq!(ab.behavior, ba.behavior);
    }

    #[test]
    fn timeout_enforced() {
        if !tool_available("python3") {
            return;
        }
        let spin = "while True:\n    pass\n";
        let harness = HarnessSpec { timeout_secs: Some(1), ..Default::default() };
        let err = behavioral_check("print(1)\n", spin, Language::Python, Some(&harness));
        assert!(matches!(err, Err(EquivalenceError::Timeout(_))));
    }
}
