use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AnnotationRecord, QcType};
use crate::error::Error;

pub const QC_ITEMS_PER_HIT: usize = 10;
const PASS_MARK: usize = 7;

/// Grading cutoffs: random pairs must score below `low`, repeats above `high`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcThresholds {
    pub low: u8,
    pub high: u8,
}

impl Default for QcThresholds {
    fn default() -> Self {
        QcThresholds { low: 25, high: 75 }
    }
}

impl QcThresholds {
    pub fn new(low: u8, high: u8) -> Result<Self, Error> {
        if low >= high || high > 100 {
            return Err(Error::invalid(format!("thresholds need 0 <= low < high <= 100, got {low}/{high}")));
        }
        Ok(QcThresholds { low, high })
    }
}

/// All judgments one worker made in one HIT.
#[derive(Debug, Clone, PartialEq)]
pub struct HitBundle {
    pub hit_id: String,
    pub worker_id: String,
    pub records: Vec<AnnotationRecord>,
}

impl HitBundle {
    pub fn qc_items(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.records.iter().filter(|r| r.is_qc())
    }

    pub fn scored_items(&self) -> impl Iterator<Item = &AnnotationRecord> {
        self.records.iter().filter(|r| !r.is_qc())
    }
}

/// Groups records by (hit, worker), ordered by those keys. Record order
/// within a bundle follows the input.
pub fn group_hits(records: &[AnnotationRecord]) -> Vec<HitBundle> {
    let mut groups: BTreeMap<(&str, &str), Vec<AnnotationRecord>> = BTreeMap::new();
    for r in records {
        groups.entry((&r.hit_id, &r.worker_id)).or_default().push(r.clone());
    }
    groups
        .into_iter()
        .map(|((hit, worker), records)| HitBundle {
            hit_id: hit.to_string(),
            worker_id: worker.to_string(),
            records,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QcOutcome {
    pub correct: usize,
    pub total: usize,
    /// False when the HIT does not carry exactly ten QC items.
    pub complete: bool,
    pub passed: bool,
}

/// Counts QC items on the expected side of the thresholds. A complete HIT
/// passes with at least 7 of 10; an incomplete one needs 70% of what it has.
pub fn qc_score(hit: &HitBundle, thresholds: QcThresholds) -> QcOutcome {
    let (low, high) = (f64::from(thresholds.low), f64::from(thresholds.high));
    let mut correct = 0;
    let mut total = 0;
    for item in hit.qc_items() {
        total += 1;
        let ok = match item.qc_type {
            QcType::RandomPair => item.raw_score < low,
            QcType::Repeat => item.raw_score > high,
            QcType::None => unreachable!("filtered by qc_items"),
        };
        correct += usize::from(ok);
    }
    let complete = total == QC_ITEMS_PER_HIT;
    let passed = if complete {
        correct >= PASS_MARK
    } else {
        total > 0 && correct * QC_ITEMS_PER_HIT >= PASS_MARK * total
    };
    QcOutcome {
        correct,
        total,
        complete,
        passed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metaeval::{Criterion, System};
    use crate::textnorm::LangCode;

    fn record(hit: &str, worker: &str, score: f64, qc: QcType) -> AnnotationRecord {
        AnnotationRecord {
            lang: LangCode::En,
            doc_id: "d".into(),
            system: Some(System::Bert),
            criterion: Criterion::Focus,
            hit_id: hit.into(),
            worker_id: worker.into(),
            raw_score: score,
            qc_type: qc,
        }
    }

    fn hit(random: &[f64], repeats: &[f64]) -> HitBundle {
        let mut records: Vec<_> = random.iter().map(|&s| record("h", "w", s, QcType::RandomPair)).collect();
        records.extend(repeats.iter().map(|&s| record("h", "w", s, QcType::Repeat)));
        records.push(record("h", "w", 50.0, QcType::None));
        HitBundle {
            hit_id: "h".into(),
            worker_id: "w".into(),
            records,
        }
    }

    #[test]
    fn worked_example() {
        let h = hit(&[3.0, 10.0, 2.0, 40.0, 5.0], &[95.0, 99.0, 60.0, 88.0, 91.0]);
        let out = qc_score(&h, QcThresholds::default());
        assert_eq!((out.correct, out.total, out.complete, out.passed), (8, 10, true, true));
    }

    #[test]
    fn extremes() {
        let all = qc_score(&hit(&[0.0; 5], &[100.0; 5]), QcThresholds::default());
        assert_eq!((all.correct, all.passed), (10, true));
        let none = qc_score(&hit(&[100.0; 5], &[0.0; 5]), QcThresholds::default());
        assert_eq!((none.correct, none.passed), (0, false));
    }

    #[test]
    fn boundary_is_strict() {
        let out = qc_score(&hit(&[25.0; 5], &[75.0; 5]), QcThresholds::default());
        assert_eq!(out.correct, 0);
    }

    #[test]
    fn partial_hit_uses_proportion() {
        let h = hit(&[0.0, 0.0, 90.0], &[100.0, 100.0]);
        let out = qc_score(&h, QcThresholds::default());
        assert_eq!((out.correct, out.total, out.complete, out.passed), (4, 5, false, true));
        let h = hit(&[0.0, 90.0, 90.0], &[100.0]);
        assert!(!qc_score(&h, QcThresholds::default()).passed);
        assert!(!qc_score(&hit(&[], &[]), QcThresholds::default()).passed);
    }

    #[test]
    fn threshold_validation() {
        assert!(QcThresholds::new(50, 50).is_err());
        assert!(QcThresholds::new(10, 101).is_err());
        assert_eq!(QcThresholds::new(25, 75).unwrap(), QcThresholds::default());
    }

    #[test]
    fn grouping_is_keyed_by_hit_and_worker() {
        let records = vec![
            record("h2", "a", 1.0, QcType::None),
            record("h1", "b", 2.0, QcType::None),
            record("h1", "a", 3.0, QcType::None),
            record("h1", "a", 4.0, QcType::None),
        ];
        let hits = group_hits(&records);
        let keys: Vec<_> = hits.iter().map(|h| (h.hit_id.as_str(), h.worker_id.as_str(), h.records.len())).collect();
        assert_eq!(keys, vec![("h1", "a", 2), ("h1", "b", 1), ("h2", "a", 1)]);
    }

    proptest::proptest! {
        #[test]
        fn raising_a_repeat_never_lowers_score(
            random in proptest::collection::vec(0.0f64..=100.0, 5),
            repeats in proptest::collection::vec(0.0f64..=100.0, 5),
            idx in 0usize..5,
            bump in 0.0f64..=100.0,
        ) {
            let before = qc_score(&hit(&random, &repeats), QcThresholds::default());
            let mut raised = repeats.clone();
            raised[idx] = (raised[idx] + bump).min(100.0);
            let after = qc_score(&hit(&random, &raised), QcThresholds::default());
            proptest::prop_assert!(after.correct >= before.correct);
        }
    }
}
