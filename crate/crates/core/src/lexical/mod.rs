//! String-overlap metrics: the ROUGE family, sentence BLEU-4 and METEOR.

mod bleu;
mod meteor;
mod rouge;

pub use bleu::bleu4;
pub use meteor::{meteor, MatchStage, MeteorParams, Stemmer};
pub use rouge::{rouge_l, rouge_n, rouge_s, rouge_su, rouge_w, RougeConfig};

use std::collections::HashMap;
use std::hash::Hash;

/// Counts occurrences of each item.
pub(crate) fn counts<T: Eq + Hash, I: IntoIterator<Item = T>>(items: I) -> HashMap<T, usize> {
    let mut map = HashMap::new();
    for item in items {
        *map.entry(item).or_insert(0) += 1;
    }
    map
}

/// Size of the clipped multiset intersection.
pub(crate) fn clipped_overlap<T: Eq + Hash>(a: &HashMap<T, usize>, b: &HashMap<T, usize>) -> usize {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    small
        .iter()
        .map(|(k, &n)| large.get(k).map_or(0, |&m| n.min(m)))
        .sum()
}
