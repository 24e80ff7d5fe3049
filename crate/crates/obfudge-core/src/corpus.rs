//! Dataset ingestion, filtering rules, and per-sample size/complexity attributes.

use crate::error::CorpusError;
use crate::lang::{self, Language, TokenKind};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const DEFAULT_MAX_LOC: u32 = 500;
pub const DEFAULT_MAX_PER_CWE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineRange {
    pub start: u32,
    pub end: u32,
}

impl LineRange {
    pub fn new(start: u32, end: u32) -> LineRange {
        LineRange { start, end }
    }

    /// Closed-interval overlap on 1-based line numbers.
    pub fn overlaps(&self, other: &LineRange) -> bool {
        self.start <= other.end && other.start <= self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VulnLabel {
    /// CWE id such as "CWE-787", or a named class such as "reentrancy".
    pub vuln_type: String,
    pub location: Option<LineRange>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SourceSample {
    pub id: String,
    pub dataset: String,
    pub language: Language,
    pub code: String,
    pub label: VulnLabel,
    /// Count of non-empty source lines.
    pub loc: u32,
    pub function_count: u32,
    pub complexity: u32,
}

/// Ingests one sample per manifest row. Manifest rows are UTF-8 lines with
/// tab-separated fields: path, language, vuln_type, optional location
/// "start-end". Paths are relative to `dataset_root` and start with the
/// dataset directory.
pub fn ingest(dataset_root: &Path, manifest: &Path) -> Result<Vec<SourceSample>, CorpusError> {
    let manifest_text = std::fs::read_to_string(manifest).map_err(|_| {
        CorpusError::MissingFile(manifest.to_path_buf())
    })?;
    let mut samples = Vec::new();
    let mut dataset_language: BTreeMap<String, Language> = BTreeMap::new();
    let mut seen_ids: BTreeMap<String, usize> = BTreeMap::new();

    for (idx, raw_line) in manifest_text.lines().enumerate() {
        let line_no = idx + 1;
        let row = raw_line.trim_end();
        if row.is_empty() || row.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() < 3 || fields.len() > 4 {
            return Err(CorpusError::MalformedManifest {
                line: line_no,
                message: format!("expected 3 or 4 tab-separated fields, got {}", fields.len()),
            });
        }
        let rel_path = fields[0];
        let language = Language::from_name(fields[1])
            .ok_or_else(|| CorpusError::UnsupportedLanguage(fields[1].to_string()))?;
        let vuln_type = fields[2].trim();
        if vuln_type.is_empty() {
            return Err(CorpusError::MalformedManifest {
                line: line_no,
                message: "empty vuln_type".into(),
            });
        }
        let location = match fields.get(3) {
            None | Some(&"") => None,
            Some(spec) => Some(parse_location(spec, line_no)?),
        };

        let mut parts = rel_path.split('/');
        let dataset = parts.next().unwrap_or_default().to_string();
        if dataset.is_empty() || parts.next().is_none() {
            return Err(CorpusError::MalformedManifest {
                line: line_no,
                message: format!("path `{rel_path}` must be <dataset>/<file>"),
            });
        }
        if let Some(prev) = dataset_language.insert(dataset.clone(), language) {
            if prev != language {
                return Err(CorpusError::MalformedManifest {
                    line: line_no,
                    message: format!("dataset `{dataset}` declares both {prev} and {language}"),
                });
            }
        }

        let full = dataset_root.join(rel_path);
        let code = std::fs::read_to_string(&full).map_err(|_| CorpusError::MissingFile(full.clone()))?;
        if code.trim().is_empty() {
            return Err(CorpusError::ParseFailure(format!("{}: empty file", full.display())));
        }

        let id = Path::new(rel_path)
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or(rel_path)
            .to_string();
        if let Some(first) = seen_ids.insert(id.clone(), line_no) {
            return Err(CorpusError::MalformedManifest {
                line: line_no,
                message: format!("duplicate sample id `{id}` (first at line {first})"),
            });
        }

        let loc = lang::count_loc(&code);
        if let Some(range) = &location {
            if !(1 <= range.start && range.start <= range.end && range.end <= loc) {
                return Err(CorpusError::MalformedManifest {
                    line: line_no,
                    message: format!(
                        "location {}-{} out of bounds for {} non-empty lines",
                        range.start, range.end, loc
                    ),
                });
            }
        }
        let complexity = complexity(&code, language)
            .map_err(|e| CorpusError::ParseFailure(format!("{}: {e}", full.display())))?;
        let function_count = function_count(&code, language)
            .map_err(|e| CorpusError::ParseFailure(format!("{}: {e}", full.display())))?;

        samples.push(SourceSample {
            id,
            dataset,
            language,
            code,
            label: VulnLabel { vuln_type: vuln_type.to_string(), location },
            loc,
            function_count,
            complexity,
        });
    }
    Ok(samples)
}

fn parse_location(spec: &str, line_no: usize) -> Result<LineRange, CorpusError> {
    let bad = || CorpusError::MalformedManifest {
        line: line_no,
        message: format!("location `{spec}` is not start-end"),
    };
    let (a, b) = spec.split_once('-').ok_or_else(bad)?;
    let start: u32 = a.trim().parse().map_err(|_| bad())?;
    let end: u32 = b.trim().parse().map_err(|_| bad())?;
    Ok(LineRange { start, end })
}

/// Applies the corpus filtering rules: drop samples above `max_loc` non-empty
/// lines, then cap each (language, vuln_type) group of the C/C++/Python
/// datasets at `max_per_cwe` samples, keeping lexicographically lowest ids.
/// Solidity is exempt from the per-CWE cap. Input order is preserved.
pub fn filter_corpus(
    samples: &[SourceSample],
    max_loc: u32,
    max_per_cwe: usize,
) -> Vec<SourceSample> {
    let within_loc: Vec<&SourceSample> = samples.iter().filter(|s| s.loc <= max_loc).collect();

    // decide the keep-set per (language, vuln_type) by lexicographic id
    let mut groups: BTreeMap<(Language, String), Vec<&str>> = BTreeMap::new();
    for s in &within_loc {
        if s.language != Language::Solidity {
            groups
                .entry((s.language, s.label.vuln_type.clone()))
                .or_default()
                .push(&s.id);
        }
    }
    let mut kept: std::collections::BTreeSet<String> = std::collections::BTreeSet::new();
    for ids in groups.values_mut() {
        ids.sort_unstable();
        for id in ids.iter().take(max_per_cwe) {
            kept.insert((*id).to_string());
        }
    }

    within_loc
        .into_iter()
        .filter(|s| s.language == Language::Solidity || kept.contains(&s.id))
        .cloned()
        .collect()
}

pub fn filter_corpus_default(samples: &[SourceSample]) -> Vec<SourceSample> {
    filter_corpus(samples, DEFAULT_MAX_LOC, DEFAULT_MAX_PER_CWE)
}

/// Corpus aggregate; exact sums retained, means rounded to nearest for display.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub count: u64,
    pub loc_sum: u64,
    pub function_sum: u64,
}

impl CorpusStats {
    pub fn avg_loc(&self) -> u32 {
        round_div(self.loc_sum, self.count)
    }

    pub fn avg_function_count(&self) -> u32 {
        round_div(self.function_sum, self.count)
    }
}

fn round_div(sum: u64, count: u64) -> u32 {
    ((2 * sum + count) / (2 * count)) as u32
}

pub fn corpus_stats(samples: &[SourceSample]) -> Result<CorpusStats, CorpusError> {
    if samples.is_empty() {
        return Err(CorpusError::EmptyCorpus);
    }
    Ok(CorpusStats {
        count: samples.len() as u64,
        loc_sum: samples.iter().map(|s| s.loc as u64).sum(),
        function_sum: samples.iter().map(|s| s.function_count as u64).sum(),
    })
}

/// File-level cyclomatic-style decision-point count: 1 plus the number of
/// branch keywords (if/else-if, loop heads, case labels) and boolean
/// short-circuit operators. Invariant under comments and whitespace.
pub fn complexity(code: &str, language: Language) -> Result<u32, CorpusError> {
    let lexed = lang::lex(code, language).map_err(|e| CorpusError::ParseFailure(e.to_string()))?;
    let mut count: u32 = 1;
    for tok in lexed.lexical_tokens() {
        let text = lexed.text(tok);
        let hit = match language {
            Language::Python => {
                tok.kind == TokenKind::Keyword
                    && matches!(text, "if" | "elif" | "while" | "for" | "and" | "or" | "case")
            }
            _ => {
                (tok.kind == TokenKind::Keyword && matches!(text, "if" | "while" | "for" | "case"))
                    || (tok.kind == TokenKind::Punct && matches!(text, "&&" | "||"))
            }
        };
        if hit {
            count += 1;
        }
    }
    Ok(count)
}

/// Number of function definitions in the file.
pub fn function_count(code: &str, language: Language) -> Result<u32, CorpusError> {
    let lexed = lang::lex(code, language).map_err(|e| CorpusError::ParseFailure(e.to_string()))?;
    let toks: Vec<_> = lexed.lexical_tokens().collect();
    let mut count = 0u32;
    match language {
        Language::Python => {
            for t in &toks {
                if t.kind == TokenKind::Keyword && lexed.text(t) == "def" {
                    count += 1;
                }
            }
        }
        Language::Solidity => {
            for t in &toks {
                if t.kind == TokenKind::Keyword
                    && matches!(lexed.text(t), "function" | "constructor")
                {
                    count += 1;
                }
            }
        }
        Language::C | Language::Cpp => {
            // ident '(' ... ')' '{' where ident is not a control keyword
            let mut i = 0usize;
            while i < toks.len() {
                if toks[i].kind == TokenKind::Ident
                    && i + 1 < toks.len()
                    && lexed.text(toks[i + 1]) == "("
                {
                    let mut depth = 0i32;
                    let mut j = i + 1;
                    while j < toks.len() {
                        match lexed.text(toks[j]) {
                            "(" => depth += 1,
                            ")" => {
                                depth -= 1;
                                if depth == 0 {
                                    break;
                                }
                            }
                            _ => {}
                        }
                        j += 1;
                    }
                    if j + 1 < toks.len() && lexed.text(toks[j + 1]) == "{" {
                        count += 1;
                        i = j + 2;
                        continue;
                    }
                }
                i += 1;
            }
        }
    }
    Ok(count)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(id: &str, language: Language, vuln: &str, loc: u32) -> SourceSample {
        SourceSample {
            id: id.to_string(),
            dataset: "ds".to_string(),
            language,
            code: "x".to_string(),
            label: VulnLabel { vuln_type: vuln.to_string(), location: None },
            loc,
            function_count: 1,
            complexity: 1,
        }
    }

    #[test]
    fn loc_boundary_at_500() {
        let samples = vec![
            sample("a", Language::C, "CWE-1", 499),
            sample("b", Language::C, "CWE-1", 500),
            sample("c", Language::C, "CWE-1", 501),
        ];
        let kept = filter_corpus_default(&samples);
        let ids: Vec<_> = kept.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, vec!["a", "b"]);
    }

    #[test]
    fn per_cwe_cap_keeps_five_lowest_ids() {
        let mut samples: Vec<_> = (0..7)
            .map(|i| sample(&format!("s{i}"), Language::C, "CWE-125", 10))
            .collect();
        samples.reverse(); // input order differs from id order
        let kept = filter_corpus_default(&samples);
        assert_eq!(kept.len(), 5);
        // order preserved from input (reversed), keep-set is lowest ids s0..s4
        let ids: Vec<_> = kept.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, vec!["s4", "s3", "s2", "s1", "s0"]);
    }

    #[test]
    fn solidity_exempt_from_cap() {
        let samples: Vec<_> = (0..7)
            .map(|i| sample(&format!("s{i}"), Language::Solidity, "reentrancy", 10))
            .collect();
        assert_eq!(filter_corpus_default(&samples).len(), 7);
    }

    #[test]
    fn filter_is_idempotent_and_subset() {
        let samples: Vec<_> = (0..9)
            .map(|i| sample(&format!("s{i}"), Language::Python, "CWE-78", 100 * (i as u32 + 1)))
            .collect();
        let once = filter_corpus_default(&samples);
        let twice = filter_corpus_default(&once);
        let once_ids: Vec<_> = once.iter().map(|s| &s.id).collect();
        let twice_ids: Vec<_> = twice.iter().map(|s| &s.id).collect();
        assert_eq!(once_ids, twice_ids);
        assert!(once.len() <= samples.len());
    }

    #[test]
    fn empty_input_filters_to_empty() {
        assert!(filter_corpus_default(&[]).is_empty());
    }

    #[test]
    fn stats_means() {
        let samples = vec![sample("a", Language::C, "x", 10), sample("b", Language::C, "x", 20)];
        let stats = corpus_stats(&samples).unwrap();
        assert_eq!(stats.avg_loc(), 15);
        let one = corpus_stats(&samples[..1]).unwrap();
        assert_eq!(one.avg_loc(), 10);
        assert!(matches!(corpus_stats(&[]), Err(CorpusError::EmptyCorpus)));
    }

    #[test]
    fn stats_round_to_nearest_on_fixture() {
        // hand computation: loc 3, 4, 4, 6 -> mean 4.25 -> 4; funcs 1,2,2,2 -> 1.75 -> 2
        let mut samples: Vec<_> = [(3, 1), (4, 2), (4, 2), (6, 2)]
            .iter()
            .enumerate()
            .map(|(i, (loc, funcs))| {
                let mut s = sample(&format!("s{i}"), Language::C, "x", *loc);
                s.function_count = *funcs;
                s
            })
            .collect();
        samples[0].function_count = 1;
        let stats = corpus_stats(&samples).unwrap();
        assert_eq!(stats.avg_loc(), 4);
        assert_eq!(stats.avg_function_count(), 2);
    }

    #[test]
    fn complexity_counts_decision_points() {
        // straight-line
        assert_eq!(complexity("def f():\n    return 1\n", Language::Python).unwrap(), 1);
        // one if plus one while -> 3
        let code = "def f(x):\n    if x:\n        pass\n    while x:\n        x -= 1\n";
        assert_eq!(complexity(code, Language::Python).unwrap(), 3);
        // 2 && in conditions and 1 if -> 4
        let c = "int f(int a, int b) { if (a && b && a > b) { return 1; } return 0; }";
        assert_eq!(complexity(c, Language::C).unwrap(), 4);
    }

    #[test]
    fn complexity_ignores_comments_and_strings() {
        let a = "int f(void) { return 0; } // if for while\n";
        let b = "int f(void)\n{\n    return 0;\n}\n";
        let c = "int f(void) { char* s = \"if && while\"; return 0; }";
        assert_eq!(complexity(a, Language::C).unwrap(), complexity(b, Language::C).unwrap());
        assert_eq!(complexity(c, Language::C).unwrap(), 1);
    }

    #[test]
    fn function_counts() {
        assert_eq!(function_count("def a():\n    pass\ndef b():\n    pass\n", Language::Python).unwrap(), 2);
        assert_eq!(
            function_count("int main(void) { return helper(); }\nint helper(void) { return 1; }", Language::C).unwrap(),
            2
        );
        assert_eq!(
            function_count("contract A { function f() public {} constructor() {} }", Language::Solidity).unwrap(),
            2
        );
    }

    #[test]
    fn ingest_errors() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::create_dir_all(root.join("ds")).unwrap();
        std::fs::write(root.join("ds/ok.py"), "x = 1\nprint(x)\n").unwrap();

        let manifest = root.join("manifest.tsv");
        std::fs::write(&manifest, "ds/ok.py\tpython\tCWE-78\t1-2\n").unwrap();
        let samples = ingest(root, &manifest).unwrap();
        assert_eq!(samples.len(), 1);
        assert_eq!(samples[0].loc, 2);
        assert_eq!(samples[0].dataset, "ds");

        std::fs::write(&manifest, "ds/gone.py\tpython\tCWE-78\n").unwrap();
        match ingest(root, &manifest) {
            Err(CorpusError::MissingFile(p)) => assert!(p.ends_with("ds/gone.py")),
            other => panic!("expected MissingFile, got {other:?}"),
        }

        std::fs::write(&manifest, "ds/ok.py\tcobol\tCWE-78\n").unwrap();
        assert!(matches!(ingest(root, &manifest), Err(CorpusError::UnsupportedLanguage(_))));

        std::fs::write(&manifest, "ds/ok.py\tpython\n").unwrap();
        assert!(matches!(ingest(root, &manifest), Err(CorpusError::MalformedManifest { .. })));
    }

    #[test]
    fn ingest_counts_nonempty_lines() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path();
        std::fs::create_dir_all(root.join("ds")).unwrap();
        // 35 non-empty lines with blanks interleaved
        let mut code = String::new();
        for i in 0..35 {
            code.push_str(&format!("x{i} = {i}\n"));
            if i % 5 == 0 {
                code.push('\n');
            }
        }
        std::fs::write(root.join("ds/f.py"), &code).unwrap();
        let manifest = root.join("m.tsv");
        std::fs::write(&manifest, "ds/f.py\tpython\tCWE-1\n").unwrap();
        let samples = ingest(root, &manifest).unwrap();
        assert_eq!(samples[0].loc, 35);
    }
}
