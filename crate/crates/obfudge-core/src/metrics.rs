//! Detection success rates, downgrade/upgrade transitions, and grouped
//! breakdown distributions.

use crate::detector::ModelFamily;
use crate::error::MetricsError;
use crate::judge::{classify_outcome, EvaluationMode, Outcome, Score};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Transition {
    Downgrade,
    Upgrade,
    Stable,
}

/// One (sample, model, combo) observation with the attributes every
/// breakdown dimension draws from.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TransitionRecord {
    pub sample_id: String,
    pub model: String,
    pub combo_id: String,
    pub score_original: Score,
    pub score_obfuscated: Score,
    pub dataset: String,
    pub language: String,
    pub vuln_type: String,
    pub loc: u32,
    pub complexity: u32,
    pub loc_after: u32,
    pub complexity_after: u32,
    pub family: ModelFamily,
    pub param_count: Option<u32>,
    pub reasoning: bool,
}

impl TransitionRecord {
    pub fn loc_diff(&self) -> i64 {
        self.loc_after as i64 - self.loc as i64
    }

    pub fn complexity_diff(&self) -> i64 {
        self.complexity_after as i64 - self.complexity as i64
    }

    pub fn transition(&self) -> Transition {
        transition(self.score_original, self.score_obfuscated)
    }
}

/// Downgrade: a score of 3/4 on the original falls to 1/2 on the obfuscated
/// version; upgrade is the reverse; everything else is stable.
pub fn transition(score_original: Score, score_obfuscated: Score) -> Transition {
    let orig_pos = matches!(score_original, Score::Three | Score::Four);
    let obf_pos = matches!(score_obfuscated, Score::Three | Score::Four);
    match (orig_pos, obf_pos) {
        (true, false) => Transition::Downgrade,
        (false, true) => Transition::Upgrade,
        _ => Transition::Stable,
    }
}

/// Fraction of scores classified positive under the evaluation mode.
pub fn detection_success_rate(scores: &[Score], mode: EvaluationMode) -> Result<f64, MetricsError> {
    if scores.is_empty() {
        return Err(MetricsError::EmptyInput);
    }
    let positives = scores
        .iter()
        .filter(|s| classify_outcome(**s, mode) == Outcome::Positive)
        .count();
    Ok(positives as f64 / scores.len() as f64)
}

// ---------------------------------------------------------------------------
// size buckets
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeBucket {
    Lt8b,
    Ge8b,
    Unknown,
}

impl SizeBucket {
    pub fn label(self) -> &'static str {
        match self {
            SizeBucket::Lt8b => "lt_8b",
            SizeBucket::Ge8b => "ge_8b",
            SizeBucket::Unknown => "unknown",
        }
    }
}

/// The 8B boundary itself lands in `ge_8b`; undisclosed counts are `unknown`.
pub fn size_bucket(param_count: Option<u32>) -> SizeBucket {
    match param_count {
        Some(p) if p < 8 => SizeBucket::Lt8b,
        Some(_) => SizeBucket::Ge8b,
        None => SizeBucket::Unknown,
    }
}

// ---------------------------------------------------------------------------
// grouped transition rates
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Combo,
    Model,
    Family,
    SizeBucket,
    Reasoning,
    VulnType,
    Dataset,
    LocBucket,
    ComplexityBucket,
    LocDiffBucket,
    ComplexityDiffBucket,
}

impl Dimension {
    pub fn all() -> [Dimension; 11] {
        [
            Dimension::Combo,
            Dimension::Model,
            Dimension::Family,
            Dimension::SizeBucket,
            Dimension::Reasoning,
            Dimension::VulnType,
            Dimension::Dataset,
            Dimension::LocBucket,
            Dimension::ComplexityBucket,
            Dimension::LocDiffBucket,
            Dimension::ComplexityDiffBucket,
        ]
    }

    pub fn name(self) -> &'static str {
        match self {
            Dimension::Combo => "combo",
            Dimension::Model => "model",
            Dimension::Family => "family",
            Dimension::SizeBucket => "size_bucket",
            Dimension::Reasoning => "reasoning",
            Dimension::VulnType => "vuln_type",
            Dimension::Dataset => "dataset",
            Dimension::LocBucket => "loc_bucket",
            Dimension::ComplexityBucket => "complexity_bucket",
            Dimension::LocDiffBucket => "loc_diff_bucket",
            Dimension::ComplexityDiffBucket => "complexity_diff_bucket",
        }
    }

    pub fn parse(name: &str) -> Result<Dimension, MetricsError> {
        Dimension::all()
            .into_iter()
            .find(|d| d.name() == name)
            .ok_or_else(|| MetricsError::UnknownDimension(name.to_string()))
    }
}

pub const BUCKET_COUNT: usize = 5;

/// Quantile edges over the run's own distribution: values at the 1/5 .. 4/5
/// positions of the sorted data. Recorded in run metadata so breakdowns are
/// reproducible.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct BucketEdges {
    pub loc: Vec<i64>,
    pub complexity: Vec<i64>,
    pub loc_diff: Vec<i64>,
    pub complexity_diff: Vec<i64>,
}

fn quantile_edges(mut values: Vec<i64>) -> Vec<i64> {
    if values.is_empty() {
        return Vec::new();
    }
    values.sort_unstable();
    let n = values.len();
    let mut edges = Vec::with_capacity(BUCKET_COUNT - 1);
    for k in 1..BUCKET_COUNT {
        let idx = (n * k / BUCKET_COUNT).min(n - 1);
        edges.push(values[idx]);
    }
    edges.dedup();
    edges
}

/// Edges computed from the original-code distribution (loc/complexity over
/// distinct samples; diffs over all records).
pub fn bucket_edges(records: &[TransitionRecord]) -> BucketEdges {
    let mut seen: BTreeMap<&str, (i64, i64)> = BTreeMap::new();
    for r in records {
        seen.entry(&r.sample_id).or_insert((r.loc as i64, r.complexity as i64));
    }
    BucketEdges {
        loc: quantile_edges(seen.values().map(|v| v.0).collect()),
        complexity: quantile_edges(seen.values().map(|v| v.1).collect()),
        loc_diff: quantile_edges(records.iter().map(|r| r.loc_diff()).collect()),
        complexity_diff: quantile_edges(records.iter().map(|r| r.complexity_diff()).collect()),
    }
}

fn bucket_label(value: i64, edges: &[i64]) -> String {
    for (i, e) in edges.iter().enumerate() {
        if value <= *e {
            return format!("b{}_le_{}", i + 1, e);
        }
    }
    format!("b{}_gt_{}", edges.len() + 1, edges.last().copied().unwrap_or(0))
}

pub fn group_of(record: &TransitionRecord, dimension: Dimension, edges: &BucketEdges) -> String {
    match dimension {
        Dimension::Combo => record.combo_id.clone(),
        Dimension::Model => record.model.clone(),
        Dimension::Family => record.family.to_string(),
        Dimension::SizeBucket => size_bucket(record.param_count).label().to_string(),
        Dimension::Reasoning => if record.reasoning { "reasoning" } else { "non_reasoning" }.to_string(),
        Dimension::VulnType => crate::judge::normalize_type(&record.vuln_type),
        Dimension::Dataset => record.dataset.clone(),
        Dimension::LocBucket => bucket_label(record.loc as i64, &edges.loc),
        Dimension::ComplexityBucket => bucket_label(record.complexity as i64, &edges.complexity),
        Dimension::LocDiffBucket => bucket_label(record.loc_diff(), &edges.loc_diff),
        Dimension::ComplexityDiffBucket => bucket_label(record.complexity_diff(), &edges.complexity_diff),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub group: String,
    pub count: u64,
    pub downgrade_count: u64,
    pub upgrade_count: u64,
    /// Transitions over all group records.
    pub downgrade_rate: f64,
    pub upgrade_rate: f64,
    /// Conditional variants: downgrades over originally-detected records
    /// (score 3/4 on the original) and upgrades over originally-missed
    /// records. Both denominators are reported alongside.
    pub originally_detected: u64,
    pub originally_missed: u64,
    pub downgrade_rate_of_detected: f64,
    pub upgrade_rate_of_missed: f64,
}

/// Transition rates per group of the chosen dimension, in sorted group order.
pub fn transition_rates(
    records: &[TransitionRecord],
    dimension: Dimension,
    edges: &BucketEdges,
) -> Vec<GroupRates> {
    #[derive(Default)]
    struct Tally {
        count: u64,
        down: u64,
        up: u64,
        detected: u64,
        missed: u64,
    }
    let mut groups: BTreeMap<String, Tally> = BTreeMap::new();
    for r in records {
        let key = group_of(r, dimension, edges);
        let slot = groups.entry(key).or_default();
        slot.count += 1;
        if matches!(r.score_original, Score::Three | Score::Four) {
            slot.detected += 1;
        } else {
            slot.missed += 1;
        }
        match r.transition() {
            Transition::Downgrade => slot.down += 1,
            Transition::Upgrade => slot.up += 1,
            Transition::Stable => {}
        }
    }
    let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    groups
        .into_iter()
        .map(|(group, t)| GroupRates {
            group,
            count: t.count,
            downgrade_count: t.down,
            upgrade_count: t.up,
            downgrade_rate: ratio(t.down, t.count),
            upgrade_rate: ratio(t.up, t.count),
            originally_detected: t.detected,
            originally_missed: t.missed,
            downgrade_rate_of_detected: ratio(t.down, t.detected),
            upgrade_rate_of_missed: ratio(t.up, t.missed),
        })
        .collect()
}

pub fn transition_rates_by_name(
    records: &[TransitionRecord],
    dimension: &str,
    edges: &BucketEdges,
) -> Result<Vec<GroupRates>, MetricsError> {
    Ok(transition_rates(records, Dimension::parse(dimension)?, edges))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn record(
        sample: &str,
        model: &str,
        combo: &str,
        orig: Score,
        obf: Score,
    ) -> TransitionRecord {
        TransitionRecord {
            sample_id: sample.into(),
            model: model.into(),
            combo_id: combo.into(),
            score_original: orig,
            score_obfuscated: obf,
            dataset: "ds".into(),
            language: "python".into(),
            vuln_type: "CWE-1".into(),
            loc: 10,
            complexity: 2,
            loc_after: 12,
            complexity_after: 3,
            family: ModelFamily::Qwen,
            param_count: Some(7),
            reasoning: false,
        }
    }

    #[test]
    fn transition_definitions() {
        assert_eq!(transition(Score::Four, Score::Two), Transition::Downgrade);
        assert_eq!(transition(Score::Two, Score::Three), Transition::Upgrade);
        assert_eq!(transition(Score::Three, Score::Four), Transition::Stable);
        assert_eq!(transition(Score::One, Score::Two), Transition::Stable);
    }

    #[test]
    fn transition_exhaustive_over_all_pairs() {
        let mut counts = (0u32, 0u32, 0u32);
        for a in Score::all() {
            for b in Score::all() {
                match transition(a, b) {
                    Transition::Downgrade => counts.0 += 1,
                    Transition::Upgrade => counts.1 += 1,
                    Transition::Stable => counts.2 += 1,
                }
            }
        }
        assert_eq!(counts, (4, 4, 8));
    }

    #[test]
    fn success_rate_examples() {
        let scores: Vec<Score> = std::iter::repeat_n(Score::Three, 83)
            .chain(std::iter::repeat_n(Score::One, 17))
            .collect();
        assert!((detection_success_rate(&scores, EvaluationMode::TypeEval).unwrap() - 0.83).abs() < 1e-12);
        let all_one = vec![Score::One; 5];
        assert_eq!(detection_success_rate(&all_one, EvaluationMode::TypeEval).unwrap(), 0.0);
        let mixed = vec![Score::Three, Score::Four, Score::Two, Score::One];
        assert_eq!(detection_success_rate(&mixed, EvaluationMode::TypeEval).unwrap(), 0.5);
        assert!(detection_success_rate(&[], EvaluationMode::TypeEval).is_err());
    }

    #[test]
    fn size_buckets() {
        assert_eq!(size_bucket(Some(7)), SizeBucket::Lt8b);
        assert_eq!(size_bucket(Some(8)), SizeBucket::Ge8b);
        assert_eq!(size_bucket(Some(70)), SizeBucket::Ge8b);
        assert_eq!(size_bucket(None), SizeBucket::Unknown);
    }

    #[test]
    fn grouped_rates_match_hand_tally() {
        // 8 records over two combos: L1 has 1 downgrade of 4, C3 has 2
        // downgrades and 1 upgrade of 4
        let records = vec![
            record("s1", "m", "L1", Score::Three, Score::One),
            record("s2", "m", "L1", Score::Three, Score::Three),
            record("s3", "m", "L1", Score::One, Score::One),
            record("s4", "m", "L1", Score::Two, Score::Two),
            record("s1", "m", "C3", Score::Three, Score::Two),
            record("s2", "m", "C3", Score::Four, Score::One),
            record("s3", "m", "C3", Score::One, Score::Four),
            record("s4", "m", "C3", Score::One, Score::One),
        ];
        let edges = bucket_edges(&records);
        let rates = transition_rates(&records, Dimension::Combo, &edges);
        assert_eq!(rates.len(), 2);
        let c3 = rates.iter().find(|g| g.group == "C3").unwrap();
        assert_eq!(c3.count, 4);
        assert_eq!(c3.downgrade_count, 2);
        assert_eq!(c3.upgrade_count, 1);
        assert!((c3.downgrade_rate - 0.5).abs() < 1e-12);
        let l1 = rates.iter().find(|g| g.group == "L1").unwrap();
        assert_eq!(l1.downgrade_count, 1);
        assert_eq!(l1.upgrade_count, 0);
    }

    #[test]
    fn conditional_rates_use_their_own_denominators() {
        // 3 originally detected (2 downgrade), 1 originally missed (1 upgrade)
        let records = vec![
            record("s1", "m", "C3", Score::Three, Score::One),
            record("s2", "m", "C3", Score::Four, Score::Two),
            record("s3", "m", "C3", Score::Three, Score::Three),
            record("s4", "m", "C3", Score::One, Score::Four),
        ];
        let edges = bucket_edges(&records);
        let rates = transition_rates(&records, Dimension::Combo, &edges);
        let g = &rates[0];
        assert_eq!(g.originally_detected, 3);
        assert_eq!(g.originally_missed, 1);
        assert!((g.downgrade_rate - 0.5).abs() < 1e-12);
        assert!((g.downgrade_rate_of_detected - 2.0 / 3.0).abs() < 1e-12);
        assert!((g.upgrade_rate_of_missed - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_transition_group_rates_are_zero() {
        let records = vec![record("s1", "m", "L2", Score::One, Score::One)];
        let edges = bucket_edges(&records);
        let rates = transition_rates(&records, Dimension::Combo, &edges);
        assert_eq!(rates[0].downgrade_rate, 0.0);
        assert_eq!(rates[0].upgrade_rate, 0.0);
    }

    #[test]
    fn counts_partition_totals() {
        let records: Vec<TransitionRecord> = (0..40)
            .map(|i| {
                let orig = Score::from_value((i % 4) as u8 + 1).unwrap();
                let obf = Score::from_value(((i / 4) % 4) as u8 + 1).unwrap();
                record(&format!("s{i}"), "m", "L1", orig, obf)
            })
            .collect();
        let (mut down, mut up, mut stable) = (0, 0, 0);
        for r in &records {
            match r.transition() {
                Transition::Downgrade => down += 1,
                Transition::Upgrade => up += 1,
                Transition::Stable => stable += 1,
            }
        }
        assert_eq!(down + up + stable, records.len());
    }

    #[test]
    fn unknown_dimension_rejected() {
        let err = Dimension::parse("loc_bucketz");
        assert!(matches!(err, Err(MetricsError::UnknownDimension(_))));
        assert!(Dimension::parse("complexity_diff_bucket").is_ok());
    }

    #[test]
    fn weighted_group_rates_recover_ungrouped_rate() {
        let records = vec![
            record("s1", "m1", "L1", Score::Three, Score::One),
            record("s2", "m1", "C3", Score::Three, Score::One),
            record("s3", "m1", "C3", Score::Three, Score::Three),
            record("s4", "m2", "L1", Score::One, Score::One),
        ];
        let edges = bucket_edges(&records);
        let rates = transition_rates(&records, Dimension::Combo, &edges);
        let weighted: f64 = rates
            .iter()
            .map(|g| g.downgrade_rate * g.count as f64)
            .sum::<f64>()
            / records.len() as f64;
        let direct = records
            .iter()
            .filter(|r| r.transition() == Transition::Downgrade)
            .count() as f64
            / records.len() as f64;
        assert!((weighted - direct).abs() < 1e-12);
    }
}
