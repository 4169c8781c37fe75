//! Meta-evaluation: crowd annotation ingestion, quality control, z-score
//! normalization, human agreement, and metric-human correlation tables.

mod agreement;
mod correlate;
mod judgments;
mod qc;
mod report;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize};

pub use agreement::{agreement_table, focus_coverage_correlation, one_vs_rest, AgreementEstimate, AgreementRow, Correlation};
pub use correlate::{correlate_metrics, CorrelationCell, CorrelationReport, Grouping};
pub use judgments::{aggregate, build_matrix, zscore_hit, CellKey, CellJudgments, JudgmentMatrix, MatrixBuild};
pub use qc::{group_hits, qc_score, HitBundle, QcOutcome, QcThresholds, QC_ITEMS_PER_HIT};
pub use report::{format_value, parse_long_tsv, write_agreement_tsv, write_long_tsv, write_table_tsv, Statistic};

use crate::error::Error;
use crate::textnorm::LangCode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    PointerGenerator,
    Bert,
}

impl System {
    pub const ALL: [System; 2] = [System::PointerGenerator, System::Bert];

    pub fn as_str(self) -> &'static str {
        match self {
            System::PointerGenerator => "pointer_generator",
            System::Bert => "bert",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "pointer_generator" | "pg" => Ok(System::PointerGenerator),
            "bert" => Ok(System::Bert),
            other => Err(Error::invalid(format!("unknown system {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    /// Scored against metric precision.
    Focus,
    /// Scored against metric recall.
    Coverage,
}

impl Criterion {
    pub const ALL: [Criterion; 2] = [Criterion::Focus, Criterion::Coverage];

    pub fn as_str(self) -> &'static str {
        match self {
            Criterion::Focus => "focus",
            Criterion::Coverage => "coverage",
        }
    }
}

impl fmt::Display for Criterion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Criterion {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s.to_ascii_lowercase().as_str() {
            "focus" => Ok(Criterion::Focus),
            "coverage" => Ok(Criterion::Coverage),
            other => Err(Error::invalid(format!("unknown criterion {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QcType {
    #[default]
    None,
    /// Unrelated text pair; should be scored near 0.
    RandomPair,
    /// Lightly edited copy; should be scored near 100.
    Repeat,
}

/// One slider judgment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub lang: LangCode,
    #[serde(deserialize_with = "string_or_number")]
    pub doc_id: String,
    /// Absent only on quality-control items.
    #[serde(default)]
    pub system: Option<System>,
    pub criterion: Criterion,
    #[serde(deserialize_with = "string_or_number")]
    pub hit_id: String,
    #[serde(deserialize_with = "string_or_number")]
    pub worker_id: String,
    pub raw_score: f64,
    #[serde(default)]
    pub qc_type: QcType,
}

impl AnnotationRecord {
    pub fn is_qc(&self) -> bool {
        self.qc_type != QcType::None
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(0.0..=100.0).contains(&self.raw_score) {
            return Err(format!("raw_score {} outside 0-100", self.raw_score));
        }
        if !self.is_qc() && self.system.is_none() {
            return Err("system is required on non-QC items".into());
        }
        if self.doc_id.is_empty() {
            return Err("doc_id is empty".into());
        }
        Ok(())
    }
}

fn string_or_number<'de, D: Deserializer<'de>>(de: D) -> Result<String, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        S(String),
        I(i64),
        U(u64),
    }
    Ok(match Raw::deserialize(de)? {
        Raw::S(s) => s,
        Raw::I(i) => i.to_string(),
        Raw::U(u) => u.to_string(),
    })
}

/// Reads and validates an annotations JSONL file.
pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<AnnotationRecord>, Error> {
    let path = path.as_ref();
    let records: Vec<AnnotationRecord> = crate::textnorm::read_jsonl(path)?;
    for (i, record) in records.iter().enumerate() {
        record
            .validate()
            .map_err(|msg| Error::invalid(format!("{}: record {}: {msg}", path.display(), i + 1)))?;
    }
    Ok(records)
}
