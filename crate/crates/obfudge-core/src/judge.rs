//! Grading of detection reports on the 1-4 scale.
//!
//! Score 1: no findings. Score 2: findings but none match the ground truth.
//! Score 3: exactly the true vulnerability. Score 4: the true vulnerability
//! among others. The deterministic matcher is the default judge; an LLM
//! judge with the same rubric is available behind the detector client.

use crate::corpus::VulnLabel;
use crate::detector::{DetectionReport, Finding};
use crate::error::JudgeError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Score {
    One,
    Two,
    Three,
    Four,
}

impl Score {
    pub fn value(self) -> u8 {
        match self {
            Score::One => 1,
            Score::Two => 2,
            Score::Three => 3,
            Score::Four => 4,
        }
    }

    pub fn from_value(v: u8) -> Option<Score> {
        match v {
            1 => Some(Score::One),
            2 => Some(Score::Two),
            3 => Some(Score::Three),
            4 => Some(Score::Four),
            _ => None,
        }
    }

    pub fn all() -> [Score; 4] {
        [Score::One, Score::Two, Score::Three, Score::Four]
    }
}

impl From<Score> for u8 {
    fn from(s: Score) -> u8 {
        s.value()
    }
}

impl TryFrom<u8> for Score {
    type Error = String;
    fn try_from(v: u8) -> Result<Score, String> {
        Score::from_value(v).ok_or_else(|| format!("score {v} outside 1-4"))
    }
}

impl std::fmt::Display for Score {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.value())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvaluationMode {
    /// Positives are scores 3 and 4: type and existence both correct.
    TypeEval,
    /// Positives are scores 2, 3, and 4: only score 1 is negative.
    ExistenceEval,
}

impl EvaluationMode {
    pub fn name(self) -> &'static str {
        match self {
            EvaluationMode::TypeEval => "type_eval",
            EvaluationMode::ExistenceEval => "existence_eval",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Positive,
    Negative,
}

pub fn classify_outcome(score: Score, mode: EvaluationMode) -> Outcome {
    let positive = match mode {
        EvaluationMode::TypeEval => matches!(score, Score::Three | Score::Four),
        EvaluationMode::ExistenceEval => !matches!(score, Score::One),
    };
    if positive {
        Outcome::Positive
    } else {
        Outcome::Negative
    }
}

// ---------------------------------------------------------------------------
// type normalization and matching
// ---------------------------------------------------------------------------

/// Named Solidity vulnerability classes and their common aliases.
const SYNONYMS: &[(&str, &[&str])] = &[
    ("reentrancy", &["reentrancy", "re-entrancy", "reentrant call", "recursive call attack"]),
    ("access_control", &["access control", "unprotected function", "missing access control", "authorization", "improper access control"]),
    ("arithmetic", &["arithmetic", "integer overflow", "integer underflow", "overflow", "underflow", "integer overflow/underflow"]),
    ("unchecked_low_level_calls", &["unchecked low level calls", "unchecked low-level call", "unchecked call", "unchecked return value", "unchecked send", "unchecked external call"]),
    ("denial_of_service", &["denial of service", "dos", "denial-of-service"]),
    ("time_manipulation", &["time manipulation", "timestamp dependence", "block timestamp", "timestamp dependency"]),
    ("bad_randomness", &["bad randomness", "weak randomness", "predictable randomness", "insecure randomness", "weak prng"]),
    ("front_running", &["front running", "front-running", "transaction ordering dependence", "race condition (transaction ordering)"]),
    ("short_addresses", &["short addresses", "short address", "short address attack"]),
];

fn fold(text: &str) -> String {
    text.trim()
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c == '-' || c == '_' { ' ' } else { c })
        .collect::<String>()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
}

/// Normalizes a vulnerability type: CWE ids map to `cwe-<number>` with zero
/// padding dropped; named classes map through the synonym table; anything
/// else folds case and separators.
pub fn normalize_type(raw: &str) -> String {
    let folded = fold(raw);
    if let Some(rest) = folded.strip_prefix("cwe") {
        let digits: String = rest
            .trim_start_matches([' ', '-'])
            .chars()
            .take_while(|c| c.is_ascii_digit())
            .collect();
        if !digits.is_empty() {
            let n: u64 = digits.parse().unwrap_or(0);
            return format!("cwe-{n}");
        }
    }
    for (canonical, aliases) in SYNONYMS {
        if aliases.iter().any(|a| fold(a) == folded) {
            return (*canonical).to_string();
        }
    }
    folded
}

/// True when the finding names the labeled vulnerability: normalized types
/// equal and, when both sides carry a location, the closed line intervals
/// overlap. A missing location on either side defers to the type match.
pub fn match_finding(finding: &Finding, label: &VulnLabel) -> bool {
    if normalize_type(&finding.vuln_type) != normalize_type(&label.vuln_type) {
        return false;
    }
    match (&finding.location, &label.location) {
        (Some(a), Some(b)) => a.overlaps(b),
        _ => true,
    }
}

// ---------------------------------------------------------------------------
// scoring
// ---------------------------------------------------------------------------

/// Deterministic rubric over the findings set.
pub fn score_report(report: &DetectionReport, label: &VulnLabel) -> Score {
    let n = report.findings.len();
    let hit = report.findings.iter().any(|f| match_finding(f, label));
    match (n, hit) {
        (0, _) => Score::One,
        (_, false) => Score::Two,
        (1, true) => Score::Three,
        (_, true) => Score::Four,
    }
}

/// Rubric text for the LLM judge; its digest is recorded in run metadata.
pub const JUDGE_RUBRIC: &str = "You are grading a vulnerability detection report against a known ground truth.\n\
Scale:\n\
1 = the report lists no vulnerabilities.\n\
2 = the report lists vulnerabilities but none matches the ground-truth type (and location, when both are given).\n\
3 = the report lists exactly one vulnerability and it matches the ground truth.\n\
4 = the report lists the ground-truth vulnerability among other findings.\n\
Reply with a single line: SCORE: <1|2|3|4>";

pub fn judge_rubric_digest() -> String {
    use sha2::{Digest, Sha256};
    let mut hasher = Sha256::new();
    hasher.update(JUDGE_RUBRIC.as_bytes());
    let digest = hasher.finalize();
    format!("{:02x}{:02x}{:02x}{:02x}{:02x}{:02x}{:02x}{:02x}",
        digest[0], digest[1], digest[2], digest[3], digest[4], digest[5], digest[6], digest[7])
}

/// Builds the judge prompt for a report/label pair.
pub fn build_judge_prompt(report: &DetectionReport, label: &VulnLabel) -> crate::obfuscate::PromptPair {
    let location = label
        .location
        .map(|r| format!(" at lines {}-{}", r.start, r.end))
        .unwrap_or_default();
    crate::obfuscate::PromptPair {
        system: JUDGE_RUBRIC.to_string(),
        user: format!(
            "Ground truth: {}{}\n\nDetection report:\n{}\n",
            label.vuln_type, location, report.raw
        ),
    }
}

/// LLM-judge scoring through a chat completion function: the closure gets
/// (system, user) and returns the raw reply, which must carry a 1-4 grade.
pub fn score_report_llm<F>(
    report: &DetectionReport,
    label: &VulnLabel,
    complete: F,
) -> Result<Score, JudgeError>
where
    F: FnOnce(&str, &str) -> Result<String, crate::error::DetectError>,
{
    let prompt = build_judge_prompt(report, label);
    let raw = complete(&prompt.system, &prompt.user)?;
    parse_judge_reply(&raw)
}

/// Validates an LLM judge reply into a Score.
pub fn parse_judge_reply(reply: &str) -> Result<Score, JudgeError> {
    for line in reply.lines().rev() {
        let line = line.trim().to_ascii_uppercase();
        if let Some(rest) = line.strip_prefix("SCORE:") {
            let digit = rest.trim().chars().next();
            if let Some(d) = digit.and_then(|c| c.to_digit(10)) {
                return Score::from_value(d as u8)
                    .ok_or_else(|| JudgeError::JudgeReplyUnparseable(reply.to_string()));
            }
        }
    }
    // tolerate a bare digit reply
    let bare = reply.trim();
    if bare.len() == 1 {
        if let Some(d) = bare.chars().next().and_then(|c| c.to_digit(10)) {
            if let Some(s) = Score::from_value(d as u8) {
                return Ok(s);
            }
        }
    }
    Err(JudgeError::JudgeReplyUnparseable(reply.chars().take(200).collect()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::LineRange;

    fn report_with(findings: Vec<Finding>) -> DetectionReport {
        DetectionReport {
            raw: String::new(),
            findings,
            model: "m".into(),
            sample_id: "s".into(),
            combo_id: "original".into(),
            fallback_parse: false,
        }
    }

    fn finding(t: &str) -> Finding {
        Finding { vuln_type: t.into(), location: None, description: String::new() }
    }

    fn label(t: &str) -> VulnLabel {
        VulnLabel { vuln_type: t.into(), location: None }
    }

    #[test]
    fn rubric_examples() {
        let l = label("CWE-125");
        assert_eq!(score_report(&report_with(vec![]), &l), Score::One);
        assert_eq!(
            score_report(&report_with(vec![finding("CWE-79"), finding("CWE-89")]), &l),
            Score::Two
        );
        assert_eq!(score_report(&report_with(vec![finding("CWE-125")]), &l), Score::Three);
        assert_eq!(
            score_report(
                &report_with(vec![finding("CWE-125"), finding("CWE-79"), finding("CWE-89")]),
                &l
            ),
            Score::Four
        );
    }

    #[test]
    fn cwe_zero_padding_normalizes() {
        assert!(match_finding(&finding("CWE-0787"), &label("CWE-787")));
        assert_eq!(normalize_type("CWE-0787"), normalize_type("cwe 787"));
    }

    #[test]
    fn named_class_case_folds() {
        assert!(match_finding(&finding("reentrancy"), &label("Reentrancy")));
        assert!(match_finding(&finding("Re-entrancy"), &label("reentrancy")));
        assert!(match_finding(&finding("Integer Overflow"), &label("arithmetic")));
    }

    #[test]
    fn disjoint_ranges_fail_even_with_type_match() {
        let f = Finding {
            vuln_type: "CWE-125".into(),
            location: Some(LineRange::new(1, 5)),
            description: String::new(),
        };
        let l = VulnLabel {
            vuln_type: "CWE-125".into(),
            location: Some(LineRange::new(40, 42)),
        };
        assert!(!match_finding(&f, &l));
        let overlapping = VulnLabel {
            vuln_type: "CWE-125".into(),
            location: Some(LineRange::new(5, 9)),
        };
        assert!(match_finding(&f, &overlapping));
    }

    #[test]
    fn missing_location_defers_to_type() {
        let f = Finding {
            vuln_type: "CWE-125".into(),
            location: Some(LineRange::new(1, 5)),
            description: String::new(),
        };
        assert!(match_finding(&f, &label("CWE-125")));
    }

    #[test]
    fn outcome_classification() {
        assert_eq!(classify_outcome(Score::Two, EvaluationMode::TypeEval), Outcome::Negative);
        assert_eq!(classify_outcome(Score::Two, EvaluationMode::ExistenceEval), Outcome::Positive);
        assert_eq!(classify_outcome(Score::One, EvaluationMode::ExistenceEval), Outcome::Negative);
        assert_eq!(classify_outcome(Score::Four, EvaluationMode::TypeEval), Outcome::Positive);
    }

    #[test]
    fn existence_is_a_relaxation_of_type() {
        for s in Score::all() {
            if classify_outcome(s, EvaluationMode::TypeEval) == Outcome::Positive {
                assert_eq!(classify_outcome(s, EvaluationMode::ExistenceEval), Outcome::Positive);
            }
        }
    }

    #[test]
    fn judge_reply_parsing() {
        assert_eq!(parse_judge_reply("Thinking...\nSCORE: 3").unwrap(), Score::Three);
        assert_eq!(parse_judge_reply("2").unwrap(), Score::Two);
        assert!(parse_judge_reply("SCORE: 9").is_err());
        assert!(parse_judge_reply("no score here").is_err());
    }
}
