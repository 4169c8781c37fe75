//! Embedding-based metrics: BERTScore soft matching, MoverScore transport
//! distance, and encoder layer selection.

mod layers;
mod moverscore;
pub mod transport;

pub use layers::{layer_sweep, layer_sweep_grouped, LayerScores, LayerSweepResult, SweepGroup};
pub use moverscore::{moverscore, MoverScoreConfig, ScoreTransform, Solver};
pub use transport::{emd_exact, sinkhorn, SinkhornOutput, SinkhornParams, TransportPlan, TransportProblem};

use crate::embedding::{EmbeddedText, IdfTable};
use crate::error::Error;
use crate::score::MetricScore;

/// Cosine similarities between reference tokens (rows) and candidate tokens
/// (columns) at one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub rows: usize,
    pub cols: usize,
    pub values: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols + j]
    }

    pub fn compute(reference: &EmbeddedText, candidate: &EmbeddedText, layer: u16) -> Result<Self, Error> {
        check_pair(reference, candidate)?;
        let dim = reference.hidden_dim;
        let ref_vecs = reference.layer(layer)?;
        let cand_vecs = candidate.layer(layer)?;
        let ref_norms = norms(ref_vecs, dim);
        let cand_norms = norms(cand_vecs, dim);
        let (rows, cols) = (reference.len(), candidate.len());
        let mut values = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            let a = &ref_vecs[i * dim..(i + 1) * dim];
            for j in 0..cols {
                let b = &cand_vecs[j * dim..(j + 1) * dim];
                values.push(cosine(a, b, ref_norms[i], cand_norms[j]));
            }
        }
        Ok(SimilarityMatrix { rows, cols, values })
    }
}

pub(crate) fn check_pair(reference: &EmbeddedText, candidate: &EmbeddedText) -> Result<(), Error> {
    if reference.is_empty() || candidate.is_empty() {
        return Err(Error::invalid("embedded text has no tokens"));
    }
    if reference.hidden_dim != candidate.hidden_dim {
        return Err(Error::invalid(format!(
            "hidden dims differ: {} vs {}",
            reference.hidden_dim, candidate.hidden_dim
        )));
    }
    Ok(())
}

fn norms(vectors: &[f32], dim: usize) -> Vec<f64> {
    vectors
        .chunks_exact(dim.max(1))
        .map(|v| v.iter().map(|&x| f64::from(x) * f64::from(x)).sum::<f64>().sqrt())
        .collect()
}

/// Cosine similarity; 0 when either vector is zero.
fn cosine(a: &[f32], b: &[f32], norm_a: f64, norm_b: f64) -> f64 {
    if norm_a == 0.0 || norm_b == 0.0 {
        return 0.0;
    }
    let dot: f64 = a.iter().zip(b).map(|(&x, &y)| f64::from(x) * f64::from(y)).sum();
    (dot / (norm_a * norm_b)).clamp(-1.0, 1.0)
}

/// Per-token weights; uniform when no table is given or every weight is 0.
pub(crate) fn token_weights(tokens: &[String], idf: Option<&IdfTable>) -> Vec<f64> {
    if let Some(idf) = idf {
        let weights: Vec<f64> = tokens.iter().map(|t| idf.get(t)).collect();
        if weights.iter().sum::<f64>() > 0.0 {
            return weights;
        }
    }
    vec![1.0; tokens.len()]
}

fn weighted_mean(values: impl Iterator<Item = f64>, weights: &[f64]) -> f64 {
    let total: f64 = weights.iter().sum();
    let sum: f64 = values.zip(weights).map(|(v, w)| v * w).sum();
    sum / total
}

/// Greedy soft matching. Recall averages, over reference tokens, the best
/// cosine against any candidate token; precision does the same from the
/// candidate side. Negative similarities are kept.
pub fn bertscore(
    reference: &EmbeddedText,
    candidate: &EmbeddedText,
    layer: u16,
    idf: Option<&IdfTable>,
) -> Result<MetricScore, Error> {
    let sim = SimilarityMatrix::compute(reference, candidate, layer)?;
    let ref_weights = token_weights(&reference.tokens, idf);
    let cand_weights = token_weights(&candidate.tokens, idf);

    let row_max = (0..sim.rows).map(|i| (0..sim.cols).map(|j| sim.get(i, j)).fold(f64::NEG_INFINITY, f64::max));
    let col_max = (0..sim.cols).map(|j| (0..sim.rows).map(|i| sim.get(i, j)).fold(f64::NEG_INFINITY, f64::max));
    let recall = weighted_mean(row_max, &ref_weights);
    let precision = weighted_mean(col_max, &cand_weights);
    Ok(MetricScore::from_pr(precision, recall))
}
