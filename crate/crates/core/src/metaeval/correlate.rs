use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use super::agreement::Correlation;
use super::judgments::JudgmentMatrix;
use super::{Criterion, System};
use crate::batch::MetricRow;
use crate::error::Error;
use crate::stats::{self, StatsError};
use crate::textnorm::LangCode;

/// Which system outputs enter a correlation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub enum Grouping {
    Combined,
    System(System),
}

impl Grouping {
    pub fn system(self) -> Option<System> {
        match self {
            Grouping::Combined => None,
            Grouping::System(s) => Some(s),
        }
    }

    pub fn per_system() -> [Grouping; 2] {
        [Grouping::System(System::PointerGenerator), Grouping::System(System::Bert)]
    }
}

impl fmt::Display for Grouping {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Grouping::Combined => f.write_str("combined"),
            Grouping::System(s) => f.write_str(s.as_str()),
        }
    }
}

impl FromStr for Grouping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        if s.eq_ignore_ascii_case("combined") {
            Ok(Grouping::Combined)
        } else {
            s.parse().map(Grouping::System)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationCell {
    pub lang: LangCode,
    pub metric: String,
    pub criterion: Criterion,
    pub grouping: Grouping,
    /// Pearson; NaN when undefined.
    pub r: f64,
    /// Spearman; NaN when undefined.
    pub rho: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct CorrelationReport {
    pub cells: Vec<CorrelationCell>,
}

impl CorrelationReport {
    /// Metric names in first-seen order.
    pub fn metrics(&self) -> Vec<&str> {
        let mut seen = BTreeSet::new();
        self.cells
            .iter()
            .map(|c| c.metric.as_str())
            .filter(|m| seen.insert(*m))
            .collect()
    }

    pub fn langs(&self) -> Vec<LangCode> {
        let set: BTreeSet<&LangCode> = self.cells.iter().map(|c| &c.lang).collect();
        set.into_iter().cloned().collect()
    }

    pub fn get(&self, lang: &LangCode, metric: &str, criterion: Criterion, grouping: Grouping) -> Option<&CorrelationCell> {
        self.cells
            .iter()
            .find(|c| &c.lang == lang && c.metric == metric && c.criterion == criterion && c.grouping == grouping)
    }

    /// Unweighted mean of the defined Pearson values across languages.
    pub fn average(&self, metric: &str, criterion: Criterion, grouping: Grouping) -> f64 {
        let rs: Vec<f64> = self
            .cells
            .iter()
            .filter(|c| c.metric == metric && c.criterion == criterion && c.grouping == grouping && !c.r.is_nan())
            .map(|c| c.r)
            .collect();
        if rs.is_empty() {
            f64::NAN
        } else {
            rs.iter().sum::<f64>() / rs.len() as f64
        }
    }
}

fn spearman_or_nan(x: &[f64], y: &[f64]) -> Result<f64, Error> {
    match stats::spearman(x, y) {
        Ok(r) => Ok(r),
        Err(StatsError::ZeroVariance | StatsError::TooFewSamples { .. }) => Ok(f64::NAN),
        Err(e) => Err(e.into()),
    }
}

/// Correlates each metric with the human means for every language, criterion
/// and grouping in the matrix. Focus is compared with metric precision and
/// coverage with metric recall.
pub fn correlate_metrics(
    rows: &[MetricRow],
    matrix: &JudgmentMatrix,
    groupings: &[Grouping],
) -> Result<CorrelationReport, Error> {
    let mut metrics: Vec<String> = Vec::new();
    let mut index: HashMap<(String, &str), &MetricRow> = HashMap::new();
    for row in rows {
        let key = row.key();
        if !metrics.contains(&key) {
            metrics.push(key.clone());
        }
        index.insert((key, row.id.as_str()), row);
    }
    if metrics.is_empty() {
        return Err(Error::invalid("no metric scores"));
    }

    let mut missing: BTreeSet<String> = BTreeSet::new();
    let mut cells = Vec::new();
    for metric in &metrics {
        for lang in matrix.langs() {
            for criterion in Criterion::ALL {
                for &grouping in groupings {
                    let (mut human, mut auto) = (Vec::new(), Vec::new());
                    for (key, cell) in matrix.select(&lang, criterion, grouping.system()) {
                        let id = key.item_id();
                        match index.get(&(metric.clone(), id.as_str())) {
                            Some(row) => {
                                human.push(cell.mean);
                                auto.push(match criterion {
                                    Criterion::Focus => row.precision,
                                    Criterion::Coverage => row.recall,
                                });
                            }
                            None => {
                                missing.insert(format!("{metric}:{id}"));
                            }
                        }
                    }
                    if human.is_empty() {
                        continue;
                    }
                    let r = Correlation::pearson(&auto, &human)?.r;
                    let rho = spearman_or_nan(&auto, &human)?;
                    cells.push(CorrelationCell {
                        lang: lang.clone(),
                        metric: metric.clone(),
                        criterion,
                        grouping,
                        r,
                        rho,
                        n: human.len(),
                    });
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingScores(missing.into_iter().collect()));
    }
    Ok(CorrelationReport { cells })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    use crate::metaeval::judgments::{CellJudgments, CellKey};

    fn matrix() -> JudgmentMatrix {
        let mut m = JudgmentMatrix::default();
        for (i, doc) in ["1", "2", "3", "4"].iter().enumerate() {
            for system in System::ALL {
                for criterion in Criterion::ALL {
                    let v = i as f64 * 0.5 - if system == System::Bert { 0.3 } else { 0.0 }
                        + if criterion == Criterion::Coverage { (i as f64).powi(2) } else { 0.0 };
                    m.cells.insert(
                        CellKey {
                            lang: LangCode::En,
                            criterion,
                            system,
                            doc_id: doc.to_string(),
                        },
                        CellJudgments {
                            judgments: vec![v],
                            mean: v,
                            low_coverage: true,
                        },
                    );
                }
            }
        }
        m
    }

    fn oracle_rows(m: &JudgmentMatrix) -> Vec<MetricRow> {
        // precision mirrors focus, recall mirrors coverage
        let mut rows: BTreeMap<String, MetricRow> = BTreeMap::new();
        for (k, c) in &m.cells {
            let row = rows.entry(k.item_id()).or_insert_with(|| MetricRow::new(k.item_id(), "oracle", 0.0, 0.0, 0.0));
            match k.criterion {
                Criterion::Focus => row.precision = c.mean,
                Criterion::Coverage => row.recall = c.mean,
            }
        }
        rows.into_values().collect()
    }

    #[test]
    fn oracle_metric_correlates_perfectly() {
        let m = matrix();
        let groupings = [Grouping::Combined, Grouping::System(System::Bert)];
        let report = correlate_metrics(&oracle_rows(&m), &m, &groupings).unwrap();
        assert_eq!(report.cells.len(), 4);
        for cell in &report.cells {
            assert!((cell.r - 1.0).abs() < 1e-12, "{cell:?}");
            assert!((cell.rho - 1.0).abs() < 1e-12);
        }
        let combined = report.get(&LangCode::En, "oracle", Criterion::Focus, Grouping::Combined).unwrap();
        assert_eq!(combined.n, 8);
        assert!((report.average("oracle", Criterion::Coverage, Grouping::Combined) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn missing_rows_are_listed() {
        let m = matrix();
        let mut rows = oracle_rows(&m);
        rows.retain(|r| r.id != "en/bert/3");
        match correlate_metrics(&rows, &m, &[Grouping::Combined]) {
            Err(Error::MissingScores(ids)) => assert_eq!(ids, vec!["oracle:en/bert/3".to_string()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn constant_metric_is_nan() {
        let m = matrix();
        let rows: Vec<MetricRow> = oracle_rows(&m)
            .into_iter()
            .map(|r| MetricRow::new(r.id, "flat", 0.5, 0.5, 0.5))
            .collect();
        let report = correlate_metrics(&rows, &m, &[Grouping::Combined]).unwrap();
        assert!(report.cells.iter().all(|c| c.r.is_nan() && c.rho.is_nan()));
        assert!(report.average("flat", Criterion::Focus, Grouping::Combined).is_nan());
    }

    #[test]
    fn grouping_names() {
        assert_eq!("combined".parse::<Grouping>().unwrap(), Grouping::Combined);
        assert_eq!("bert".parse::<Grouping>().unwrap(), Grouping::System(System::Bert));
        assert_eq!(Grouping::System(System::PointerGenerator).to_string(), "pointer_generator");
    }
}
