use serde::{Deserialize, Serialize};

use super::{clipped_overlap, counts};
use crate::score::MetricScore;
use crate::textnorm::TokenSequence;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeConfig {
    /// Exponent of the run-length weight `k^alpha` used by ROUGE-W.
    pub wlcs_weight: f64,
    /// Maximum number of tokens allowed between the two halves of a
    /// skip-bigram; `None` means unlimited.
    pub skip_distance: Option<usize>,
}

impl Default for RougeConfig {
    fn default() -> Self {
        RougeConfig {
            wlcs_weight: 1.2,
            skip_distance: None,
        }
    }
}

fn ngrams(tokens: &[String], n: usize) -> impl Iterator<Item = &[String]> {
    tokens.windows(n)
}

/// Clipped n-gram overlap. A side shorter than `n` has no n-grams and its
/// ratio is 0.
pub fn rouge_n(n: usize, reference: &TokenSequence, candidate: &TokenSequence) -> MetricScore {
    assert!(n >= 1, "rouge_n requires n >= 1");
    let (overlap, ref_total, cand_total) = ngram_counts(n, reference, candidate);
    MetricScore::from_counts(overlap, ref_total, cand_total)
}

fn ngram_counts(n: usize, reference: &TokenSequence, candidate: &TokenSequence) -> (usize, usize, usize) {
    let ref_counts = counts(ngrams(reference.tokens(), n));
    let cand_counts = counts(ngrams(candidate.tokens(), n));
    let ref_total = reference.len().saturating_sub(n - 1);
    let cand_total = candidate.len().saturating_sub(n - 1);
    (clipped_overlap(&ref_counts, &cand_counts), ref_total, cand_total)
}

/// Length of the longest common subsequence.
pub(crate) fn lcs_len(a: &[String], b: &[String]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y {
                prev[j] + 1
            } else {
                cur[j].max(prev[j + 1])
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Sequence-level LCS over the whole summary.
pub fn rouge_l(reference: &TokenSequence, candidate: &TokenSequence) -> MetricScore {
    let lcs = lcs_len(reference.tokens(), candidate.tokens());
    MetricScore::from_counts(lcs, reference.len(), candidate.len())
}

/// Maximum over all common subsequences of `sum f(run)` where runs are the
/// maximal stretches that are consecutive in both sequences and
/// `f(k) = k^alpha`.
///
/// `here` is the best weight of an alignment whose last match is `(i, j)`;
/// `within[i][j]` is the best weight of any alignment inside the `i x j`
/// prefix box. A run of length `k` ending at `(i, j)` must not be preceded by
/// a match at `(i-k, j-k)`, otherwise it would be longer.
pub(crate) fn weighted_lcs(a: &[String], b: &[String], alpha: f64) -> f64 {
    let weight = |k: usize| (k as f64).powf(alpha);
    let (n, m) = (a.len(), b.len());
    if n == 0 || m == 0 {
        return 0.0;
    }
    let w = m + 1;
    // diag[i][j]: length of the common run ending at (i, j), 1-based.
    let mut diag = vec![0usize; (n + 1) * w];
    let mut within = vec![0f64; (n + 1) * w];
    let box_best = |within: &[f64], i: isize, j: isize| -> f64 {
        if i <= 0 || j <= 0 {
            0.0
        } else {
            within[i as usize * w + j as usize]
        }
    };

    for i in 1..=n {
        for j in 1..=m {
            let mut here = f64::NEG_INFINITY;
            if a[i - 1] == b[j - 1] {
                let run = diag[(i - 1) * w + (j - 1)] + 1;
                diag[i * w + j] = run;
                for k in 1..=run {
                    let (si, sj) = ((i - k + 1) as isize, (j - k + 1) as isize);
                    let before = box_best(&within, si - 2, sj - 1).max(box_best(&within, si - 1, sj - 2));
                    here = here.max(before + weight(k));
                }
            }
            within[i * w + j] = within[(i - 1) * w + j].max(within[i * w + j - 1]).max(here);
        }
    }
    within[n * w + m]
}

/// Weighted LCS with `f(k) = k^alpha`; ratios are mapped back through
/// `f^-1(x) = x^(1/alpha)`.
pub fn rouge_w(reference: &TokenSequence, candidate: &TokenSequence, cfg: &RougeConfig) -> MetricScore {
    let alpha = cfg.wlcs_weight;
    assert!(alpha >= 1.0, "ROUGE-W weight must be >= 1");
    let wlcs = weighted_lcs(reference.tokens(), candidate.tokens(), alpha);
    let ratio = |len: usize| {
        if len == 0 || wlcs == 0.0 {
            return 0.0;
        }
        let x = wlcs / (len as f64).powf(alpha);
        if alpha == 1.0 {
            x
        } else {
            x.powf(1.0 / alpha)
        }
    };
    MetricScore::from_pr(ratio(candidate.len()), ratio(reference.len()))
}

fn skip_bigrams(tokens: &[String], max_gap: Option<usize>) -> (std::collections::HashMap<(&str, &str), usize>, usize) {
    let mut total = 0;
    let pairs = tokens.iter().enumerate().flat_map(|(i, first)| {
        let end = match max_gap {
            Some(gap) => (i + gap + 2).min(tokens.len()),
            None => tokens.len(),
        };
        tokens[i + 1..end]
            .iter()
            .map(move |second| (first.as_str(), second.as_str()))
    });
    let map = counts(pairs.inspect(|_| total += 1));
    (map, total)
}

fn skip_bigram_counts(
    reference: &TokenSequence,
    candidate: &TokenSequence,
    cfg: &RougeConfig,
) -> (usize, usize, usize) {
    let (ref_pairs, ref_total) = skip_bigrams(reference.tokens(), cfg.skip_distance);
    let (cand_pairs, cand_total) = skip_bigrams(candidate.tokens(), cfg.skip_distance);
    (clipped_overlap(&ref_pairs, &cand_pairs), ref_total, cand_total)
}

/// Skip-bigram overlap.
pub fn rouge_s(reference: &TokenSequence, candidate: &TokenSequence, cfg: &RougeConfig) -> MetricScore {
    let (overlap, ref_total, cand_total) = skip_bigram_counts(reference, candidate, cfg);
    MetricScore::from_counts(overlap, ref_total, cand_total)
}

/// Skip-bigram plus unigram: counts of both units are summed.
pub fn rouge_su(reference: &TokenSequence, candidate: &TokenSequence, cfg: &RougeConfig) -> MetricScore {
    let (s_overlap, s_ref, s_cand) = skip_bigram_counts(reference, candidate, cfg);
    let (u_overlap, u_ref, u_cand) = ngram_counts(1, reference, candidate);
    MetricScore::from_counts(s_overlap + u_overlap, s_ref + u_ref, s_cand + u_cand)
}
