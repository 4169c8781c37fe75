use std::collections::HashMap;

use super::counts;
use crate::textnorm::TokenSequence;

const MAX_ORDER: usize = 4;

/// Sentence-level BLEU-4 in [0, 1], following SacreBLEU's sentence scorer:
/// effective order, exponential smoothing of zero matches, closest reference
/// length (shorter wins ties) for the brevity penalty.
///
/// Panics if `references` is empty.
pub fn bleu4(references: &[TokenSequence], candidate: &TokenSequence) -> f64 {
    assert!(!references.is_empty(), "bleu4 needs at least one reference");
    let sys_len = candidate.len();
    if sys_len == 0 {
        return 0.0;
    }
    let ref_len = references
        .iter()
        .map(TokenSequence::len)
        .min_by_key(|&len| (len.abs_diff(sys_len), len))
        .unwrap_or(0);

    let mut max_ref_counts: Vec<HashMap<&[String], usize>> = vec![HashMap::new(); MAX_ORDER];
    for reference in references {
        for (order, slot) in max_ref_counts.iter_mut().enumerate() {
            for (gram, n) in counts(reference.tokens().windows(order + 1)) {
                let entry = slot.entry(gram).or_insert(0);
                *entry = (*entry).max(n);
            }
        }
    }

    let mut log_sum = 0.0;
    let mut effective_order = 0;
    let mut smooth = 1.0;
    for (order, ref_counts) in max_ref_counts.iter().enumerate() {
        let n = order + 1;
        let total = sys_len.saturating_sub(n - 1);
        if total == 0 {
            break;
        }
        effective_order = n;
        let correct: usize = counts(candidate.tokens().windows(n))
            .into_iter()
            .map(|(gram, c)| ref_counts.get(gram).map_or(0, |&r| c.min(r)))
            .sum();
        let precision = if correct == 0 {
            smooth *= 2.0;
            1.0 / (smooth * total as f64)
        } else {
            correct as f64 / total as f64
        };
        log_sum += precision.ln();
    }

    let brevity = if sys_len < ref_len {
        (1.0 - ref_len as f64 / sys_len as f64).exp()
    } else {
        1.0
    };
    brevity * (log_sum / effective_order as f64).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::textnorm::LangCode;

    fn seq(text: &str) -> TokenSequence {
        TokenSequence::new(text.split(' '), LangCode::En)
    }

    // Expected values produced by sacrebleu 2.6.0 `sentence_bleu(...).score / 100`.
    #[test]
    fn matches_sacrebleu() {
        let cases = [
            ("the cat on the mat", vec!["the cat sat on the mat"], 0.40936537653899085),
            ("the cat", vec!["the cat sat down"], 0.3678794411714425),
            ("a b c d e f", vec!["a b c d x f g"], 0.45480190470279064),
            ("a b c x", vec!["a b c d", "q b c x"], 0.8408964152537145),
        ];
        for (cand, refs, expected) in cases {
            let refs: Vec<_> = refs.into_iter().map(seq).collect();
            let got = bleu4(&refs, &seq(cand));
            assert!((got - expected).abs() < 1e-12, "{cand}: {got} vs {expected}");
        }
    }

    #[test]
    fn identity_is_one() {
        let r = seq("a b c d e");
        assert!((bleu4(std::slice::from_ref(&r), &r) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn brevity_penalty_only() {
        let got = bleu4(&[seq("a b c d")], &seq("a b"));
        assert!((got - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn empty_candidate_is_zero() {
        let empty = TokenSequence::new(Vec::<String>::new(), LangCode::En);
        assert_eq!(bleu4(&[seq("a b")], &empty), 0.0);
    }
}
