use serde::{Deserialize, Serialize};

/// Precision/recall/F1 triple.
///
/// Precision is the system-summary-facing value (compared against focus
/// judgments) and recall the reference-facing value (coverage).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl MetricScore {
    pub const ZERO: MetricScore = MetricScore {
        precision: 0.0,
        recall: 0.0,
        f1: 0.0,
    };

    pub fn from_pr(precision: f64, recall: f64) -> Self {
        let sum = precision + recall;
        let f1 = if sum > 0.0 {
            2.0 * precision * recall / sum
        } else {
            0.0
        };
        MetricScore {
            precision,
            recall,
            f1,
        }
    }

    /// Single-valued metrics repeat the value in all three slots.
    pub fn uniform(value: f64) -> Self {
        MetricScore {
            precision: value,
            recall: value,
            f1: value,
        }
    }

    /// Precision = overlap / candidate count, recall = overlap / reference
    /// count; an empty side yields 0.
    pub(crate) fn from_counts(overlap: usize, reference: usize, candidate: usize) -> Self {
        let ratio = |den: usize| {
            if den == 0 {
                0.0
            } else {
                overlap as f64 / den as f64
            }
        };
        MetricScore::from_pr(ratio(candidate), ratio(reference))
    }
}
