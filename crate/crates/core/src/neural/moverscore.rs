use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::transport::{emd_exact, sinkhorn, SinkhornParams, TransportProblem};
use super::{check_pair, token_weights};
use crate::embedding::{EmbeddedText, IdfTable};
use crate::error::Error;

/// Largest `|ref| * |cand|` solved exactly under [`Solver::Auto`].
pub const EXACT_CELL_LIMIT: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Solver {
    #[default]
    Auto,
    Exact,
    Sinkhorn(SinkhornParams),
}

/// Maps a transport distance to a larger-is-better score.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoreTransform {
    /// `1 / (1 + d)`
    #[default]
    Reciprocal,
    /// `-d`
    Negative,
    /// `exp(-d)`
    Exp,
}

impl ScoreTransform {
    pub fn apply(self, distance: f64) -> f64 {
        match self {
            ScoreTransform::Reciprocal => 1.0 / (1.0 + distance),
            ScoreTransform::Negative => -distance,
            ScoreTransform::Exp => (-distance).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MoverScoreConfig {
    /// `None` selects the last layer stored with the embeddings.
    pub layer: Option<u16>,
    pub use_idf: bool,
    pub solver: Solver,
    pub transform: ScoreTransform,
}

impl MoverScoreConfig {
    pub fn new() -> Self {
        MoverScoreConfig {
            use_idf: true,
            ..Default::default()
        }
    }
}

/// Orders texts by content so that both argument orders build the same
/// transport problem.
fn content_order(a: &EmbeddedText, b: &EmbeddedText) -> Ordering {
    a.tokens
        .cmp(&b.tokens)
        .then_with(|| a.vectors.len().cmp(&b.vectors.len()))
        .then_with(|| {
            a.vectors
                .iter()
                .zip(&b.vectors)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Word mover's distance between the two texts, mapped through the
/// configured transform. Token masses are proportional to IDF weights.
pub fn moverscore(
    reference: &EmbeddedText,
    candidate: &EmbeddedText,
    idf: &IdfTable,
    config: &MoverScoreConfig,
) -> Result<f64, Error> {
    check_pair(reference, candidate)?;
    let layer = match config.layer {
        Some(layer) => layer,
        None => *reference
            .layer_indices
            .last()
            .ok_or_else(|| Error::invalid("embedded text has no layers"))?,
    };
    let (a, b) = match content_order(reference, candidate) {
        Ordering::Greater => (candidate, reference),
        _ => (reference, candidate),
    };
    let dim = a.hidden_dim;
    let va = a.layer(layer)?;
    let vb = b.layer(layer)?;

    let mut cost = Vec::with_capacity(a.len() * b.len());
    for x in va.chunks_exact(dim) {
        for y in vb.chunks_exact(dim) {
            let sq: f64 = x
                .iter()
                .zip(y)
                .map(|(&p, &q)| {
                    let d = f64::from(p) - f64::from(q);
                    d * d
                })
                .sum();
            cost.push(sq.sqrt());
        }
    }
    let table = config.use_idf.then_some(idf);
    let problem = TransportProblem::normalized(token_weights(&a.tokens, table), token_weights(&b.tokens, table), cost)?;

    let exact = match config.solver {
        Solver::Exact => true,
        Solver::Sinkhorn(_) => false,
        Solver::Auto => a.len() * b.len() <= EXACT_CELL_LIMIT,
    };
    let distance = if exact {
        emd_exact(&problem)?.distance
    } else {
        let params = match config.solver {
            Solver::Sinkhorn(params) => params,
            _ => SinkhornParams::default(),
        };
        sinkhorn(&problem, &params)?.distance
    };
    Ok(config.transform.apply(distance))
}
