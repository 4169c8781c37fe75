use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::judgments::{JudgmentMatrix, MatrixBuild};
use super::{Criterion, System};
use crate::error::Error;
use crate::stats::{self, StatsError};
use crate::textnorm::LangCode;

/// A correlation that may be undefined (NaN) together with its sample size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    pub r: f64,
    pub n: usize,
}

impl Correlation {
    pub fn is_defined(&self) -> bool {
        !self.r.is_nan()
    }

    /// Pearson r, NaN when a side has zero variance or there are fewer than
    /// three samples.
    pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, Error> {
        let r = match stats::pearson(x, y) {
            Ok(r) => r,
            Err(StatsError::ZeroVariance | StatsError::TooFewSamples { .. }) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        Ok(Correlation { r, n: x.len() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AgreementEstimate {
    /// Mean r over the trials that had a defined correlation.
    pub r: f64,
    pub trials: usize,
    /// Trials dropped for zero variance.
    pub skipped: usize,
    pub cells: usize,
}

/// One-vs-rest agreement: each trial holds out one randomly chosen judgment
/// per cell and correlates it with the mean of the remaining judgments.
pub fn one_vs_rest(cells: &[Vec<f64>], trials: usize, seed: u64) -> Result<AgreementEstimate, Error> {
    if trials == 0 {
        return Err(Error::invalid("trials must be at least 1"));
    }
    if cells.len() < 3 {
        return Err(StatsError::TooFewSamples { n: cells.len(), min: 3 }.into());
    }
    if let Some(i) = cells.iter().position(|c| c.len() < 2) {
        return Err(Error::invalid(format!("cell {i} has fewer than 2 judgments")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut held = vec![0.0; cells.len()];
    let mut rest = vec![0.0; cells.len()];
    let mut scratch = Vec::new();
    let mut sum = 0.0;
    let mut used = 0;
    for _ in 0..trials {
        for (i, cell) in cells.iter().enumerate() {
            let pick = rng.random_range(0..cell.len());
            held[i] = cell[pick];
            scratch.clear();
            scratch.extend(cell.iter().enumerate().filter(|&(j, _)| j != pick).map(|(_, &v)| v));
            rest[i] = stats::mean(&scratch);
        }
        match stats::pearson(&held, &rest) {
            Ok(r) => {
                sum += r;
                used += 1;
            }
            Err(StatsError::ZeroVariance) => {}
            Err(e) => return Err(e.into()),
        }
    }
    let r = if used == 0 { f64::NAN } else { sum / used as f64 };
    Ok(AgreementEstimate {
        r,
        trials,
        skipped: trials - used,
        cells: cells.len(),
    })
}

/// Pearson r between focus and coverage means over the (doc, system) items
/// that carry both, per language.
pub fn focus_coverage_correlation(matrix: &JudgmentMatrix) -> Result<BTreeMap<LangCode, Correlation>, Error> {
    let mut out = BTreeMap::new();
    for lang in matrix.langs() {
        let coverage: BTreeMap<(System, &str), f64> = matrix
            .select(&lang, Criterion::Coverage, None)
            .map(|(k, c)| ((k.system, k.doc_id.as_str()), c.mean))
            .collect();
        let (mut f, mut c) = (Vec::new(), Vec::new());
        for (k, cell) in matrix.select(&lang, Criterion::Focus, None) {
            if let Some(&cov) = coverage.get(&(k.system, k.doc_id.as_str())) {
                f.push(cell.mean);
                c.push(cov);
            }
        }
        let corr = Correlation::pearson(&f, &c)?;
        out.insert(lang, corr);
    }
    Ok(out)
}

/// One line of the annotation summary table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AgreementRow {
    pub lang: LangCode,
    /// Mean QC score of passing HITs, in percent.
    pub quality: f64,
    pub focus: AgreementEstimate,
    pub coverage: AgreementEstimate,
    pub focus_coverage: Correlation,
}

/// Quality, agreement per criterion, and focus-coverage correlation for
/// every language. Cells with fewer than two judgments are left out of the
/// agreement estimate. Each (language, criterion) draws from its own
/// generator seeded from `seed`, so rows do not depend on which other
/// languages are present.
pub fn agreement_table(build: &MatrixBuild, trials: usize, seed: u64) -> Result<Vec<AgreementRow>, Error> {
    let quality = build.quality();
    let fc = focus_coverage_correlation(&build.matrix)?;
    let mut rows = Vec::new();
    for lang in build.matrix.langs() {
        let estimate = |criterion: Criterion| -> Result<AgreementEstimate, Error> {
            let cells: Vec<Vec<f64>> = build
                .matrix
                .select(&lang, criterion, None)
                .filter(|(_, c)| c.judgments.len() >= 2)
                .map(|(_, c)| c.judgments.clone())
                .collect();
            one_vs_rest(&cells, trials, derive_seed(seed, &lang, criterion))
                .map_err(|e| Error::invalid(format!("{lang} {criterion}: {e}")))
        };
        rows.push(AgreementRow {
            quality: quality.get(&lang).copied().unwrap_or(f64::NAN),
            focus: estimate(Criterion::Focus)?,
            coverage: estimate(Criterion::Coverage)?,
            focus_coverage: fc[&lang],
            lang,
        });
    }
    Ok(rows)
}

/// FNV-1a over the language code and criterion, mixed into the base seed.
fn derive_seed(seed: u64, lang: &LangCode, criterion: Criterion) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in lang.as_str().bytes().chain([0]).chain(criterion.as_str().bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    seed ^ h
}
