use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::metaeval::Criterion;
use crate::stats::{self, StatsError};

/// Metric values for one sample set, keyed by encoder layer.
pub type LayerScores = BTreeMap<u16, Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSweepResult {
    pub criterion: Criterion,
    /// Pearson r per layer; NaN where undefined.
    pub correlations: BTreeMap<u16, f64>,
    pub selected_layer: u16,
    /// Number of groups averaged (1 for a plain sweep).
    pub groups: usize,
}

/// One language x system slice for the universal-layer mode.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepGroup {
    pub name: String,
    pub scores: LayerScores,
    pub human: Vec<f64>,
}

fn select(correlations: &BTreeMap<u16, f64>) -> Option<u16> {
    let mut best: Option<(u16, f64)> = None;
    for (&layer, &r) in correlations {
        if r.is_nan() {
            continue;
        }
        // strict > keeps the lowest layer on ties
        if best.is_none_or(|(_, b)| r > b) {
            best = Some((layer, r));
        }
    }
    best.map(|(layer, _)| layer)
}

fn layer_correlations(scores: &LayerScores, human: &[f64]) -> Result<BTreeMap<u16, f64>, Error> {
    if scores.is_empty() {
        return Err(Error::invalid("no layers to sweep"));
    }
    if human.len() < 3 {
        return Err(StatsError::TooFewSamples { n: human.len(), min: 3 }.into());
    }
    let mut out = BTreeMap::new();
    for (&layer, values) in scores {
        let r = match stats::pearson(values, human) {
            Ok(r) => r,
            Err(StatsError::ZeroVariance) => f64::NAN,
            Err(e) => return Err(e.into()),
        };
        out.insert(layer, r);
    }
    Ok(out)
}

/// Pearson correlation of every layer against human scores and the argmax
/// layer (lowest index on ties).
pub fn layer_sweep(scores: &LayerScores, human: &[f64], criterion: Criterion) -> Result<LayerSweepResult, Error> {
    let correlations = layer_correlations(scores, human)?;
    let selected_layer = select(&correlations).ok_or_else(|| Error::invalid("correlation undefined for every layer"))?;
    Ok(LayerSweepResult {
        criterion,
        correlations,
        selected_layer,
        groups: 1,
    })
}

/// Averages per-layer correlations over groups before taking the argmax.
/// Every group must cover the same layers; undefined group correlations are
/// left out of that layer's average.
pub fn layer_sweep_grouped(groups: &[SweepGroup], criterion: Criterion) -> Result<LayerSweepResult, Error> {
    let first = groups.first().ok_or_else(|| Error::invalid("no groups to sweep"))?;
    let layers: Vec<u16> = first.scores.keys().copied().collect();
    let mut sums: BTreeMap<u16, (f64, usize)> = layers.iter().map(|&l| (l, (0.0, 0))).collect();
    for group in groups {
        if !group.scores.keys().copied().eq(layers.iter().copied()) {
            return Err(Error::invalid(format!("group {} covers different layers", group.name)));
        }
        let rs = layer_correlations(&group.scores, &group.human)
            .map_err(|e| Error::invalid(format!("group {}: {e}", group.name)))?;
        for (layer, r) in rs {
            if !r.is_nan() {
                let slot = sums.get_mut(&layer).expect("layer sets checked above");
                slot.0 += r;
                slot.1 += 1;
            }
        }
    }
    let correlations: BTreeMap<u16, f64> = sums
        .into_iter()
        .map(|(layer, (sum, n))| (layer, if n == 0 { f64::NAN } else { sum / n as f64 }))
        .collect();
    let selected_layer = select(&correlations).ok_or_else(|| Error::invalid("correlation undefined for every layer"))?;
    Ok(LayerSweepResult {
        criterion,
        correlations,
        selected_layer,
        groups: groups.len(),
    })
}
