//! Pairing, parallel scoring, and the metric TSV format.

use std::collections::HashMap;
use std::fmt;
use std::io::{self, Write};
use std::str::FromStr;

use rayon::prelude::*;

use crate::embedding::{EmbeddedText, IdfTable};
use crate::error::Error;
use crate::lexical::{bleu4, meteor, rouge_l, rouge_n, rouge_s, rouge_su, rouge_w, MeteorParams, RougeConfig};
use crate::metaeval::format_value;
use crate::neural::{bertscore, moverscore, MoverScoreConfig};
use crate::score::MetricScore;
use crate::textnorm::{SummaryRecord, TokenSequence, TokenizeOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Metric {
    Rouge1,
    Rouge2,
    Rouge3,
    RougeL,
    RougeW,
    RougeS,
    RougeSU,
    Bleu4,
    Meteor,
    BertScore,
    MoverScore,
}

impl Metric {
    pub const LEXICAL: [Metric; 9] = [
        Metric::Rouge1,
        Metric::Rouge2,
        Metric::Rouge3,
        Metric::RougeL,
        Metric::RougeS,
        Metric::RougeSU,
        Metric::RougeW,
        Metric::Meteor,
        Metric::Bleu4,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Rouge1 => "rouge1",
            Metric::Rouge2 => "rouge2",
            Metric::Rouge3 => "rouge3",
            Metric::RougeL => "rougeL",
            Metric::RougeW => "rougeW",
            Metric::RougeS => "rougeS",
            Metric::RougeSU => "rougeSU",
            Metric::Bleu4 => "bleu4",
            Metric::Meteor => "meteor",
            Metric::BertScore => "bertscore",
            Metric::MoverScore => "moverscore",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, Metric::BertScore | Metric::MoverScore)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        let key = s.trim().to_ascii_lowercase().replace(['-', '_'], "");
        Ok(match key.as_str() {
            "rouge1" => Metric::Rouge1,
            "rouge2" => Metric::Rouge2,
            "rouge3" => Metric::Rouge3,
            "rougel" => Metric::RougeL,
            "rougew" => Metric::RougeW,
            "rouges" => Metric::RougeS,
            "rougesu" => Metric::RougeSU,
            "bleu" | "bleu4" => Metric::Bleu4,
            "meteor" => Metric::Meteor,
            "bertscore" => Metric::BertScore,
            "moverscore" => Metric::MoverScore,
            _ => return Err(Error::invalid(format!("unknown metric {s:?}"))),
        })
    }
}

/// Parses a comma-separated metric list, keeping order and dropping repeats.
pub fn parse_metric_list(s: &str) -> Result<Vec<Metric>, Error> {
    let mut out = Vec::new();
    for part in s.split(',').filter(|p| !p.trim().is_empty()) {
        let m: Metric = part.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::invalid("empty metric list"));
    }
    Ok(out)
}

/// One line of the metric TSV.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub id: String,
    pub metric: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub layer: Option<u16>,
}

impl MetricRow {
    pub fn new(id: impl Into<String>, metric: impl Into<String>, precision: f64, recall: f64, f1: f64) -> Self {
        MetricRow {
            id: id.into(),
            metric: metric.into(),
            precision,
            recall,
            f1,
            layer: None,
        }
    }

    pub fn from_score(id: impl Into<String>, metric: impl Into<String>, score: MetricScore) -> Self {
        MetricRow::new(id, metric, score.precision, score.recall, score.f1)
    }

    /// Metric name, suffixed with `@layer` when a layer is set.
    pub fn key(&self) -> String {
        match self.layer {
            Some(l) => format!("{}@{l}", self.metric),
            None => self.metric.clone(),
        }
    }
}

/// Writes the TSV header and rows. A `layer` column is added when any row
/// carries a layer.
pub fn write_metric_tsv<W: Write>(mut w: W, rows: &[MetricRow]) -> io::Result<()> {
    let layered = rows.iter().any(|r| r.layer.is_some());
    write!(w, "id\tmetric\tprecision\trecall\tf1")?;
    if layered {
        write!(w, "\tlayer")?;
    }
    writeln!(w)?;
    for r in rows {
        write!(
            w,
            "{}\t{}\t{}\t{}\t{}",
            r.id,
            r.metric,
            format_value(r.precision),
            format_value(r.recall),
            format_value(r.f1)
        )?;
        if layered {
            match r.layer {
                Some(l) => write!(w, "\t{l}")?,
                None => write!(w, "\t")?,
            }
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Parses metric TSV text. Comment lines (`#`) and the header are skipped.
pub fn parse_metric_tsv(text: &str) -> Result<Vec<MetricRow>, Error> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() || line.starts_with("id\tmetric\t") {
            continue;
        }
        let fail = |msg: String| Error::invalid(format!("metric tsv line {}: {msg}", i + 1));
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 && f.len() != 6 {
            return Err(fail(format!("expected 5 or 6 columns, got {}", f.len())));
        }
        let num = |s: &str, name: &str| -> Result<f64, Error> {
            if s == "NA" {
                return Ok(f64::NAN);
            }
            s.parse().map_err(|_| fail(format!("{name} is not a number: {s:?}")))
        };
        let layer = match f.get(5) {
            Some(s) if !s.is_empty() => Some(s.parse().map_err(|_| fail(format!("bad layer {s:?}")))?),
            _ => None,
        };
        rows.push(MetricRow {
            id: f[0].to_string(),
            metric: f[1].to_string(),
            precision: num(f[2], "precision")?,
            recall: num(f[3], "recall")?,
            f1: num(f[4], "f1")?,
            layer,
        });
    }
    Ok(rows)
}

/// Reference id for a system id without an explicit pairing: the same id if
/// present, else the id with its middle segment dropped (`lang/system/doc`
/// pairs with `lang/doc`).
pub fn resolve_reference(sys_id: &str, has_ref: impl Fn(&str) -> bool) -> Option<String> {
    if has_ref(sys_id) {
        return Some(sys_id.to_string());
    }
    let parts: Vec<&str> = sys_id.split('/').collect();
    if parts.len() == 3 {
        let short = format!("{}/{}", parts[0], parts[2]);
        if has_ref(&short) {
            return Some(short);
        }
    }
    None
}

/// Finds the reference for each system summary: an explicit `ref_id`, else
/// [`resolve_reference`]. Returns `(system, reference)` index pairs in
/// system order.
pub fn pair_summaries(refs: &[SummaryRecord], sys: &[SummaryRecord]) -> Result<Vec<(usize, usize)>, Error> {
    let by_id: HashMap<&str, usize> = refs.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let mut pairs = Vec::with_capacity(sys.len());
    let mut missing = Vec::new();
    for (si, s) in sys.iter().enumerate() {
        let found = match &s.ref_id {
            Some(rid) => by_id.get(rid.as_str()).copied(),
            None => resolve_reference(&s.id, |id| by_id.contains_key(id)).map(|id| by_id[id.as_str()]),
        };
        match found {
            Some(ri) => pairs.push((si, ri)),
            None => missing.push(s.id.clone()),
        }
    }
    if !missing.is_empty() {
        return Err(Error::invalid(format!("no reference for: {}", missing.join(", "))));
    }
    Ok(pairs)
}

/// Settings for the lexical metrics.
#[derive(Debug, Clone, Default)]
pub struct LexicalConfig {
    pub tokenize: TokenizeOptions,
    pub rouge: RougeConfig,
    pub meteor: MeteorParams,
}

pub fn lexical_score(metric: Metric, reference: &TokenSequence, candidate: &TokenSequence, cfg: &LexicalConfig) -> MetricScore {
    match metric {
        Metric::Rouge1 => rouge_n(1, reference, candidate),
        Metric::Rouge2 => rouge_n(2, reference, candidate),
        Metric::Rouge3 => rouge_n(3, reference, candidate),
        Metric::RougeL => rouge_l(reference, candidate),
        Metric::RougeW => rouge_w(reference, candidate, &cfg.rouge),
        Metric::RougeS => rouge_s(reference, candidate, &cfg.rouge),
        Metric::RougeSU => rouge_su(reference, candidate, &cfg.rouge),
        Metric::Bleu4 => MetricScore::uniform(bleu4(std::slice::from_ref(reference), candidate)),
        Metric::Meteor => MetricScore::uniform(meteor(reference, candidate, &cfg.meteor)),
        Metric::BertScore | Metric::MoverScore => panic!("{metric} is not a lexical metric"),
    }
}

/// Scores every paired system summary with every lexical metric, in
/// parallel. Rows come back grouped by summary in input order, metrics in
/// the order given.
pub fn score_lexical(
    refs: &[SummaryRecord],
    sys: &[SummaryRecord],
    metrics: &[Metric],
    cfg: &LexicalConfig,
) -> Result<Vec<MetricRow>, Error> {
    if let Some(m) = metrics.iter().find(|m| m.is_neural()) {
        return Err(Error::invalid(format!("{m} needs embeddings")));
    }
    let pairs = pair_summaries(refs, sys)?;
    let rows: Vec<Vec<MetricRow>> = pairs
        .par_iter()
        .map(|&(si, ri)| {
            let reference = refs[ri].tokenize(cfg.tokenize);
            let candidate = sys[si].tokenize(cfg.tokenize);
            metrics
                .iter()
                .map(|&m| MetricRow::from_score(sys[si].id.clone(), m.name(), lexical_score(m, &reference, &candidate, cfg)))
                .collect()
        })
        .collect();
    Ok(rows.into_iter().flatten().collect())
}

/// Settings for the embedding metrics.
#[derive(Debug, Clone)]
pub struct NeuralConfig {
    /// BERTScore layer; `None` uses the last stored layer.
    pub bert_layer: Option<u16>,
    pub bert_idf: bool,
    pub mover: MoverScoreConfig,
}

impl Default for NeuralConfig {
    fn default() -> Self {
        NeuralConfig {
            bert_layer: None,
            bert_idf: false,
            mover: MoverScoreConfig::new(),
        }
    }
}

/// Scores `(reference, candidate)` embedding pairs with the neural metrics,
/// in parallel and in input order. Row ids are the candidate text ids.
pub fn score_neural(
    pairs: &[(&EmbeddedText, &EmbeddedText)],
    metrics: &[Metric],
    idf: &IdfTable,
    cfg: &NeuralConfig,
) -> Result<Vec<MetricRow>, Error> {
    let rows: Result<Vec<Vec<MetricRow>>, Error> = pairs
        .par_iter()
        .map(|&(r, c)| {
            let mut out = Vec::new();
            for &m in metrics {
                match m {
                    Metric::BertScore => {
                        let layer = match cfg.bert_layer {
                            Some(l) => l,
                            None => *r.layer_indices.last().ok_or_else(|| Error::invalid("no layers"))?,
                        };
                        let score = bertscore(r, c, layer, cfg.bert_idf.then_some(idf))?;
                        let mut row = MetricRow::from_score(c.text_id.clone(), m.name(), score);
                        row.layer = Some(layer);
                        out.push(row);
                    }
                    Metric::MoverScore => {
                        let v = moverscore(r, c, idf, &cfg.mover)?;
                        let mut row = MetricRow::from_score(c.text_id.clone(), m.name(), MetricScore::uniform(v));
                        row.layer = cfg.mover.layer.or_else(|| r.layer_indices.last().copied());
                        out.push(row);
                    }
                    _ => return Err(Error::invalid(format!("{m} is not an embedding metric"))),
                }
            }
            Ok(out)
        })
        .collect();
    Ok(rows?.into_iter().flatten().collect())
}
