use std::collections::BTreeMap;

use serde::Serialize;

use super::qc::{group_hits, qc_score, HitBundle, QcOutcome, QcThresholds};
use super::{AnnotationRecord, Criterion, System};
use crate::error::Error;
use crate::stats::{self, SdConvention};
use crate::textnorm::LangCode;

/// Judgments per cell below which the cell is flagged.
const MIN_JUDGMENTS: usize = 3;

/// Standardizes one HIT's scores.
pub fn zscore_hit(scores: &[f64], convention: SdConvention) -> Result<Vec<f64>, Error> {
    Ok(stats::zscore(scores, convention)?)
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CellKey {
    pub lang: LangCode,
    pub criterion: Criterion,
    pub system: System,
    pub doc_id: String,
}

impl CellKey {
    /// Summary id used to join metric scores: `{lang}/{system}/{doc_id}`.
    pub fn item_id(&self) -> String {
        format!("{}/{}/{}", self.lang, self.system, self.doc_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellJudgments {
    /// z-scores in ascending order.
    pub judgments: Vec<f64>,
    pub mean: f64,
    pub low_coverage: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct JudgmentMatrix {
    pub cells: BTreeMap<CellKey, CellJudgments>,
    /// HITs dropped because they had fewer than two scored items.
    pub skipped_hits: usize,
}

impl JudgmentMatrix {
    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn langs(&self) -> Vec<LangCode> {
        let mut langs: Vec<LangCode> = self.cells.keys().map(|k| k.lang.clone()).collect();
        langs.dedup();
        langs
    }

    pub fn select<'a>(
        &'a self,
        lang: &'a LangCode,
        criterion: Criterion,
        system: Option<System>,
    ) -> impl Iterator<Item = (&'a CellKey, &'a CellJudgments)> + 'a {
        self.cells
            .iter()
            .filter(move |(k, _)| &k.lang == lang && k.criterion == criterion && system.is_none_or(|s| s == k.system))
    }

    /// Keeps only cells for the given languages.
    pub fn retain_langs(&mut self, langs: &[LangCode]) {
        self.cells.retain(|k, _| langs.contains(&k.lang));
    }
}

/// Z-scores the scored items of each HIT and averages them per cell. QC
/// items neither enter the normalization nor the cells.
pub fn aggregate(hits: &[HitBundle], convention: SdConvention) -> Result<JudgmentMatrix, Error> {
    if hits.is_empty() {
        return Err(Error::invalid("no HITs to aggregate"));
    }
    let mut raw: BTreeMap<CellKey, Vec<f64>> = BTreeMap::new();
    let mut skipped_hits = 0;
    for hit in hits {
        // Sorting fixes the summation order, so record order cannot change
        // a single bit of the output.
        let mut items: Vec<(CellKey, f64)> = hit
            .scored_items()
            .map(|item| {
                let key = CellKey {
                    lang: item.lang.clone(),
                    criterion: item.criterion,
                    system: item.system.expect("validated: scored items carry a system"),
                    doc_id: item.doc_id.clone(),
                };
                (key, item.raw_score)
            })
            .collect();
        if items.len() < 2 {
            skipped_hits += 1;
            continue;
        }
        items.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)));
        let scores: Vec<f64> = items.iter().map(|(_, s)| *s).collect();
        let z = zscore_hit(&scores, convention)?;
        for ((key, _), z) in items.into_iter().zip(z) {
            raw.entry(key).or_default().push(z);
        }
    }
    if raw.is_empty() {
        return Err(Error::invalid("no HIT had enough scored items"));
    }
    let cells = raw
        .into_iter()
        .map(|(key, mut judgments)| {
            judgments.sort_by(f64::total_cmp);
            let cell = CellJudgments {
                mean: stats::mean(&judgments),
                low_coverage: judgments.len() < MIN_JUDGMENTS,
                judgments,
            };
            (key, cell)
        })
        .collect();
    Ok(JudgmentMatrix { cells, skipped_hits })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixBuild {
    pub matrix: JudgmentMatrix,
    /// QC outcome of every (hit, worker) bundle, in key order.
    pub outcomes: Vec<(String, String, LangCode, QcOutcome)>,
}

impl MatrixBuild {
    /// Mean QC score of passing HITs as a percentage, per language.
    pub fn quality(&self) -> BTreeMap<LangCode, f64> {
        let mut acc: BTreeMap<LangCode, Vec<f64>> = BTreeMap::new();
        for (_, _, lang, o) in &self.outcomes {
            if o.passed {
                acc.entry(lang.clone())
                    .or_default()
                    .push(100.0 * o.correct as f64 / o.total as f64);
            }
        }
        acc.into_iter().map(|(lang, v)| (lang, stats::mean(&v))).collect()
    }

    pub fn passed(&self) -> usize {
        self.outcomes.iter().filter(|o| o.3.passed).count()
    }
}

/// Groups records into HITs, applies QC, and aggregates the passing HITs.
pub fn build_matrix(
    records: &[AnnotationRecord],
    thresholds: QcThresholds,
    convention: SdConvention,
) -> Result<MatrixBuild, Error> {
    if records.is_empty() {
        return Err(Error::invalid("no annotation records"));
    }
    let hits = group_hits(records);
    let mut passing = Vec::new();
    let mut outcomes = Vec::with_capacity(hits.len());
    for hit in hits {
        let outcome = qc_score(&hit, thresholds);
        let lang = hit.records[0].lang.clone();
        outcomes.push((hit.hit_id.clone(), hit.worker_id.clone(), lang, outcome));
        if outcome.passed {
            passing.push(hit);
        }
    }
    if passing.is_empty() {
        return Err(Error::invalid("no HIT passed quality control"));
    }
    let matrix = aggregate(&passing, convention)?;
    Ok(MatrixBuild { matrix, outcomes })
}
