use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use crate::textnorm::TokenSequence;

/// Maps a token to its stem for the optional second matching stage.
pub trait Stemmer: Send + Sync {
    fn stem(&self, token: &str) -> String;
}

/// One matching stage. Later stages only see tokens left unmatched by
/// earlier ones.
#[derive(Clone)]
pub enum MatchStage {
    Exact,
    Stem(Arc<dyn Stemmer>),
}

impl MatchStage {
    fn key(&self, token: &str) -> String {
        match self {
            MatchStage::Exact => token.to_owned(),
            MatchStage::Stem(stemmer) => stemmer.stem(token),
        }
    }
}

impl fmt::Debug for MatchStage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MatchStage::Exact => f.write_str("Exact"),
            MatchStage::Stem(_) => f.write_str("Stem(..)"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct MeteorParams {
    /// F-mean weighting: `P*R / (alpha*P + (1-alpha)*R)`. 0.9 weights recall
    /// nine times precision.
    pub alpha: f64,
    pub penalty_beta: f64,
    pub penalty_gamma: f64,
    pub stages: Vec<MatchStage>,
    /// Node limit for the chunk-minimizing alignment search. The search is
    /// exact whenever it finishes within the limit.
    pub search_budget: usize,
}

impl Default for MeteorParams {
    fn default() -> Self {
        MeteorParams {
            alpha: 0.9,
            penalty_beta: 3.0,
            penalty_gamma: 0.5,
            stages: vec![MatchStage::Exact],
            search_budget: 200_000,
        }
    }
}

/// Unigram alignment: `links[j]` is the reference position matched to
/// candidate position `j`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Alignment {
    pub links: Vec<Option<usize>>,
}

impl Alignment {
    pub fn matches(&self) -> usize {
        self.links.iter().flatten().count()
    }

    /// Number of runs that are contiguous and in the same order on both sides.
    pub fn chunks(&self) -> usize {
        chunk_count(&self.links)
    }
}

fn chunk_count(links: &[Option<usize>]) -> usize {
    let mut chunks = 0;
    let mut prev: Option<usize> = None;
    for &link in links {
        if let Some(i) = link {
            if !continues(prev, i) {
                chunks += 1;
            }
        }
        prev = link;
    }
    chunks
}

fn continues(prev: Option<usize>, i: usize) -> bool {
    matches!(prev, Some(p) if p + 1 == i)
}

pub fn meteor(reference: &TokenSequence, candidate: &TokenSequence, params: &MeteorParams) -> f64 {
    let alignment = align(reference.tokens(), candidate.tokens(), params);
    let matches = alignment.matches();
    if matches == 0 {
        return 0.0;
    }
    let precision = matches as f64 / candidate.len() as f64;
    let recall = matches as f64 / reference.len() as f64;
    let fmean = precision * recall / (params.alpha * precision + (1.0 - params.alpha) * recall);
    let fragmentation = alignment.chunks() as f64 / matches as f64;
    let penalty = params.penalty_gamma * fragmentation.powf(params.penalty_beta);
    fmean * (1.0 - penalty)
}

pub(crate) fn align(reference: &[String], candidate: &[String], params: &MeteorParams) -> Alignment {
    let mut links = vec![None; candidate.len()];
    let mut ref_free = vec![true; reference.len()];
    for stage in &params.stages {
        let mut interner: HashMap<String, u32> = HashMap::new();
        let mut intern = |tok: &str| {
            let next = interner.len() as u32;
            *interner.entry(stage.key(tok)).or_insert(next)
        };
        let ref_keys: Vec<u32> = reference.iter().map(|t| intern(t)).collect();
        let cand_keys: Vec<u32> = candidate.iter().map(|t| intern(t)).collect();
        let key_count = interner.len();
        let mut search = StageSearch::new(&ref_keys, &cand_keys, key_count, &links, &ref_free, params.search_budget);
        search.run();
        for (j, link) in search.best.iter().enumerate() {
            if let Some(i) = *link {
                links[j] = Some(i);
                ref_free[i] = false;
            }
        }
    }
    Alignment { links }
}

/// Depth-first branch and bound over candidate positions. Every stage must
/// reach the maximum number of matches for its keys; among those alignments
/// the one with the fewest chunks wins.
struct StageSearch<'a> {
    ref_keys: &'a [u32],
    cand_keys: &'a [u32],
    fixed: &'a [Option<usize>],
    ref_free: Vec<bool>,
    refs_by_key: Vec<Vec<usize>>,
    need: Vec<usize>,
    cand_left: Vec<usize>,
    linkable_suffix: Vec<usize>,
    current: Vec<Option<usize>>,
    best: Vec<Option<usize>>,
    best_chunks: usize,
    found: bool,
    nodes: usize,
    budget: usize,
}

impl<'a> StageSearch<'a> {
    fn new(
        ref_keys: &'a [u32],
        cand_keys: &'a [u32],
        key_count: usize,
        fixed: &'a [Option<usize>],
        ref_free: &[bool],
        budget: usize,
    ) -> Self {
        let mut refs_by_key = vec![Vec::new(); key_count];
        for (i, &k) in ref_keys.iter().enumerate() {
            if ref_free[i] {
                refs_by_key[k as usize].push(i);
            }
        }
        let mut cand_left = vec![0usize; key_count];
        for (j, &k) in cand_keys.iter().enumerate() {
            if fixed[j].is_none() {
                cand_left[k as usize] += 1;
            }
        }
        let need: Vec<usize> = (0..key_count)
            .map(|k| cand_left[k].min(refs_by_key[k].len()))
            .collect();

        let mut search = StageSearch {
            ref_keys,
            cand_keys,
            fixed,
            ref_free: ref_free.to_vec(),
            refs_by_key,
            need,
            cand_left,
            linkable_suffix: vec![0; cand_keys.len() + 1],
            current: fixed.to_vec(),
            best: fixed.to_vec(),
            best_chunks: usize::MAX,
            found: false,
            nodes: 0,
            budget,
        };
        for j in (0..cand_keys.len()).rev() {
            let linkable = search.fixed[j].is_none()
                && search.need[cand_keys[j] as usize] > 0
                && j > 0
                && search.refs_by_key[cand_keys[j] as usize]
                    .iter()
                    .any(|&i| i > 0 && search.compatible(j - 1, i - 1));
            search.linkable_suffix[j] = search.linkable_suffix[j + 1] + usize::from(linkable);
        }
        search
    }

    /// Whether candidate `j` could be linked to reference `i` in this stage.
    fn compatible(&self, j: usize, i: usize) -> bool {
        match self.fixed[j] {
            Some(fixed) => fixed == i,
            None => self.ref_free[i] && self.ref_keys[i] == self.cand_keys[j],
        }
    }

    fn run_length(&self, j: usize, i: usize) -> usize {
        let mut len = 0;
        while j + len < self.cand_keys.len() && i + len < self.ref_keys.len() && self.compatible(j + len, i + len) {
            len += 1;
        }
        len
    }

    fn run(&mut self) {
        let need_total = self.need.iter().sum();
        self.dfs(0, 0, need_total);
    }

    fn dfs(&mut self, j: usize, chunks: usize, need_total: usize) {
        if self.found && self.nodes >= self.budget {
            return;
        }
        self.nodes += 1;
        if j == self.cand_keys.len() {
            if chunks < self.best_chunks {
                self.best_chunks = chunks;
                self.best.clone_from(&self.current);
                self.found = true;
            }
            return;
        }
        let bound = chunks + need_total.saturating_sub(self.linkable_suffix[j]);
        if bound >= self.best_chunks {
            return;
        }
        let prev = if j > 0 { self.current[j - 1] } else { None };
        let step = |i: usize| usize::from(!continues(prev, i));

        if let Some(i) = self.fixed[j] {
            self.dfs(j + 1, chunks + step(i), need_total);
            return;
        }

        let key = self.cand_keys[j] as usize;
        self.cand_left[key] -= 1;
        if self.need[key] > 0 {
            let mut options: Vec<(usize, usize)> = self.refs_by_key[key]
                .iter()
                .copied()
                .filter(|&i| self.ref_free[i])
                .map(|i| {
                    let priority = if continues(prev, i) { usize::MAX } else { self.run_length(j, i) };
                    (priority, i)
                })
                .collect();
            options.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            for (_, i) in options {
                self.ref_free[i] = false;
                self.need[key] -= 1;
                self.current[j] = Some(i);
                self.dfs(j + 1, chunks + step(i), need_total - 1);
                self.current[j] = None;
                self.need[key] += 1;
                self.ref_free[i] = true;
            }
            if self.cand_left[key] >= self.need[key] {
                self.dfs(j + 1, chunks, need_total);
            }
        } else {
            self.dfs(j + 1, chunks, need_total);
        }
        self.cand_left[key] += 1;
    }
}
