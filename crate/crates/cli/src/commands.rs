use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde_json::{json, Value};

use summetrics::batch::{
    pair_summaries, parse_metric_list, parse_metric_tsv, resolve_reference, score_lexical, score_neural,
    write_metric_tsv, LexicalConfig, Metric, MetricRow, NeuralConfig,
};
use summetrics::embedding::{compute_idf, read_embeddings, EmbeddedText, IdfTable};
use summetrics::lexical::RougeConfig;
use summetrics::metaeval::{
    agreement_table, build_matrix, correlate_metrics, parse_long_tsv, read_annotations, write_agreement_tsv,
    write_long_tsv, write_table_tsv, Criterion, Grouping, MatrixBuild, QcThresholds, Statistic, System,
};
use summetrics::neural::{
    bertscore, layer_sweep, layer_sweep_grouped, moverscore, LayerScores, LayerSweepResult, MoverScoreConfig,
    ScoreTransform, Solver, SweepGroup,
};
use summetrics::stats::SdConvention;
use summetrics::textnorm::{read_summaries, TokenizeOptions};
use summetrics::LangCode;

use crate::args::{
    AgreementArgs, JudgmentArgs, LayerSweepArgs, MetaArgs, ReportArgs, ScoreArgs, SdArg, SolverArg, TransformArg,
};
use crate::header::RunHeader;

/// Finished output and where it goes (`None` is stdout).
pub struct Output {
    pub bytes: Vec<u8>,
    pub path: Option<PathBuf>,
}

/// Fails with a NotFound I/O error for the first missing input.
pub fn require_files<'a>(paths: impl IntoIterator<Item = &'a Path>) -> Result<()> {
    for p in paths {
        if !p.is_file() {
            let err = std::io::Error::new(std::io::ErrorKind::NotFound, "no such file");
            return Err(anyhow::Error::new(err).context(format!("input {}", p.display())));
        }
    }
    Ok(())
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn tsv_output(header: &RunHeader, path: Option<PathBuf>, body: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<Output> {
    let mut bytes = Vec::new();
    header.write_comment(&mut bytes)?;
    body(&mut bytes)?;
    Ok(Output { bytes, path })
}

fn parse_langs(spec: &Option<String>) -> Option<Vec<LangCode>> {
    spec.as_ref()
        .map(|s| s.split(',').filter(|p| !p.trim().is_empty()).map(LangCode::from).collect())
}

fn parse_list<T>(spec: &str, what: &str) -> Result<Vec<T>>
where
    T: std::str::FromStr<Err = summetrics::Error> + PartialEq,
{
    let mut out = Vec::new();
    for part in spec.split(',').filter(|p| !p.trim().is_empty()) {
        let v: T = part.trim().parse()?;
        if !out.contains(&v) {
            out.push(v);
        }
    }
    if out.is_empty() {
        bail!("empty {what} list");
    }
    Ok(out)
}

fn parse_groupings(spec: &str) -> Result<Vec<Grouping>> {
    if spec.trim().eq_ignore_ascii_case("all") {
        let mut all = vec![Grouping::Combined];
        all.extend(Grouping::per_system());
        return Ok(all);
    }
    parse_list(spec, "grouping")
}

fn parse_criteria(spec: &str) -> Result<Vec<Criterion>> {
    if spec.trim().eq_ignore_ascii_case("both") {
        return Ok(Criterion::ALL.to_vec());
    }
    parse_list(spec, "criterion")
}

fn sd_convention(arg: SdArg) -> SdConvention {
    match arg {
        SdArg::Sample => SdConvention::Sample,
        SdArg::Population => SdConvention::Population,
    }
}

/// Reads annotations, applies QC, and builds the judgment matrix, recording
/// the settings in `header`.
fn load_judgments(args: &JudgmentArgs, header: &mut RunHeader) -> Result<MatrixBuild> {
    let thresholds = QcThresholds::new(args.qc_low, args.qc_high)?;
    let sd = sd_convention(args.sd);
    header
        .input("annotations", &args.annotations)?
        .set("qc_low", args.qc_low)
        .set("qc_high", args.qc_high)
        .set("sd", serde_json::to_value(sd)?);
    let records = read_annotations(&args.annotations)?;
    let mut build = build_matrix(&records, thresholds, sd)?;
    if let Some(langs) = parse_langs(&args.lang) {
        header.set("langs", langs.iter().map(|l| l.to_string()).collect::<Vec<_>>());
        build.matrix.retain_langs(&langs);
        build.outcomes.retain(|o| langs.contains(&o.2));
        if build.matrix.is_empty() {
            bail!("no judgments left for languages {}", args.lang.as_deref().unwrap_or_default());
        }
    }
    Ok(build)
}

pub fn score(args: &ScoreArgs, seed: u64) -> Result<Output> {
    require_files([args.refs.as_path(), args.sys.as_path()])?;
    require_files(args.ref_emb.iter().chain(&args.sys_emb).map(PathBuf::as_path))?;
    let metrics = parse_metric_list(&args.metric)?;
    let (neural, lexical): (Vec<Metric>, Vec<Metric>) = metrics.iter().partition(|m| m.is_neural());

    let cfg = LexicalConfig {
        tokenize: TokenizeOptions {
            lowercase: !args.no_lowercase,
            drop_punctuation: args.drop_punctuation,
        },
        rouge: RougeConfig {
            skip_distance: args.skip_distance,
            ..RougeConfig::default()
        },
        ..LexicalConfig::default()
    };
    let solver = match args.solver {
        SolverArg::Auto => Solver::Auto,
        SolverArg::Exact => Solver::Exact,
        SolverArg::Sinkhorn => Solver::Sinkhorn(Default::default()),
    };
    let transform = match args.transform {
        TransformArg::Reciprocal => ScoreTransform::Reciprocal,
        TransformArg::Negative => ScoreTransform::Negative,
        TransformArg::Exp => ScoreTransform::Exp,
    };
    let ncfg = NeuralConfig {
        bert_layer: args.bert_layer,
        bert_idf: args.bert_idf,
        mover: MoverScoreConfig {
            layer: args.mover_layer,
            use_idf: !args.mover_no_idf,
            solver,
            transform,
        },
    };

    let mut header = RunHeader::new("score", seed);
    header
        .input("refs", &args.refs)?
        .input("sys", &args.sys)?
        .set("metrics", metrics.iter().map(|m| m.name()).collect::<Vec<_>>())
        .set("lang", args.lang.clone())
        .set("lowercase", cfg.tokenize.lowercase)
        .set("drop_punctuation", cfg.tokenize.drop_punctuation)
        .set("skip_distance", args.skip_distance);
    if !neural.is_empty() {
        header
            .set("bert_layer", args.bert_layer)
            .set("bert_idf", args.bert_idf)
            .set("mover_layer", args.mover_layer)
            .set("mover_idf", !args.mover_no_idf)
            .set("solver", format!("{solver:?}"))
            .set("transform", format!("{transform:?}"));
    }

    let mut refs = read_summaries(&args.refs)?;
    let mut sys = read_summaries(&args.sys)?;
    if let Some(lang) = &args.lang {
        let lang = LangCode::from(lang.as_str());
        refs.retain(|r| r.lang == lang);
        sys.retain(|s| s.lang == lang);
    }
    if sys.is_empty() {
        bail!("no system summaries to score");
    }
    let pairs = pair_summaries(&refs, &sys)?;

    let lex_rows = if lexical.is_empty() {
        Vec::new()
    } else {
        score_lexical(&refs, &sys, &lexical, &cfg)?
    };
    let neural_rows = if neural.is_empty() {
        Vec::new()
    } else {
        let (Some(ref_path), Some(sys_path)) = (&args.ref_emb, &args.sys_emb) else {
            bail!("{} needs --ref-emb and --sys-emb", neural[0]);
        };
        header.input("ref_emb", ref_path)?.input("sys_emb", sys_path)?;
        let ref_file = read_embeddings(ref_path)?;
        let sys_file = read_embeddings(sys_path)?;
        let (ref_by, sys_by) = (ref_file.by_id(), sys_file.by_id());
        let mut emb_pairs = Vec::with_capacity(pairs.len());
        let mut missing = BTreeSet::new();
        for &(si, ri) in &pairs {
            let r = ref_by.get(refs[ri].id.as_str());
            let c = sys_by.get(sys[si].id.as_str());
            match (r, c) {
                (Some(&r), Some(&c)) => emb_pairs.push((r, c)),
                _ => {
                    if r.is_none() {
                        missing.insert(refs[ri].id.clone());
                    }
                    if c.is_none() {
                        missing.insert(sys[si].id.clone());
                    }
                }
            }
        }
        if !missing.is_empty() {
            bail!("no embeddings for: {}", missing.into_iter().collect::<Vec<_>>().join(", "));
        }
        let idf = reference_idf(&emb_pairs)?;
        score_neural(&emb_pairs, &neural, &idf, &ncfg)?
    };

    // interleave back into the requested metric order, pair by pair
    let mut lex = lex_rows.into_iter();
    let mut neu = neural_rows.into_iter();
    let mut rows: Vec<MetricRow> = Vec::with_capacity(pairs.len() * metrics.len());
    for _ in &pairs {
        let lex_chunk: Vec<MetricRow> = lex.by_ref().take(lexical.len()).collect();
        let neu_chunk: Vec<MetricRow> = neu.by_ref().take(neural.len()).collect();
        let (mut l, mut n) = (lex_chunk.into_iter(), neu_chunk.into_iter());
        for m in &metrics {
            let next = if m.is_neural() { n.next() } else { l.next() };
            rows.push(next.ok_or_else(|| anyhow!("missing {m} row"))?);
        }
    }
    tsv_output(&header, args.out.clone(), |w| write_metric_tsv(w, &rows))
}

/// IDF over the distinct references of the scored pairs.
fn reference_idf(pairs: &[(&EmbeddedText, &EmbeddedText)]) -> Result<IdfTable> {
    let mut seen = BTreeSet::new();
    let corpus: Vec<&[String]> = pairs
        .iter()
        .filter(|(r, _)| seen.insert(r.text_id.as_str()))
        .map(|(r, _)| r.tokens.as_slice())
        .collect();
    Ok(compute_idf(&corpus)?)
}

pub fn meta(args: &MetaArgs, seed: u64) -> Result<Output> {
    require_files(std::iter::once(args.judgments.annotations.as_path()).chain(args.scores.iter().map(PathBuf::as_path)))?;
    let stats: Vec<Statistic> = parse_list(&args.corr, "statistic")?;
    let groupings = parse_groupings(&args.grouping)?;
    let mut header = RunHeader::new("meta", seed);
    let build = load_judgments(&args.judgments, &mut header)?;
    header
        .set("corr", stats.iter().map(|s| s.to_string()).collect::<Vec<_>>())
        .set("groupings", groupings.iter().map(|g| g.to_string()).collect::<Vec<_>>());
    let mut rows = Vec::new();
    for (i, path) in args.scores.iter().enumerate() {
        header.input(&format!("scores_{i}"), path)?;
        rows.extend(parse_metric_tsv(&read_text(path)?).with_context(|| format!("in {}", path.display()))?);
    }
    let report = correlate_metrics(&rows, &build.matrix, &groupings)?;
    tsv_output(&header, args.out.clone(), |w| write_long_tsv(w, &report, &stats))
}

pub fn agreement(args: &AgreementArgs, seed: u64) -> Result<Output> {
    require_files([args.judgments.annotations.as_path()])?;
    let mut header = RunHeader::new("agreement", seed);
    let build = load_judgments(&args.judgments, &mut header)?;
    header.set("trials", args.trials);
    let rows = agreement_table(&build, args.trials, seed)?;
    tsv_output(&header, args.out.clone(), |w| write_agreement_tsv(w, &rows))
}

/// One scored system summary joined to its reference and judgments.
struct SweepItem<'a> {
    reference: &'a EmbeddedText,
    candidate: &'a EmbeddedText,
    lang: LangCode,
    system: System,
    human: BTreeMap<Criterion, f64>,
}

pub fn layer_sweep_cmd(args: &LayerSweepArgs, seed: u64) -> Result<Output> {
    let ref_path = args.emb_dir.join("refs.semb");
    let sys_path = args.emb_dir.join("sys.semb");
    require_files([args.judgments.annotations.as_path(), ref_path.as_path(), sys_path.as_path()])?;
    let metric: Metric = args.metric.parse()?;
    if !metric.is_neural() {
        bail!("layer-sweep needs an embedding metric, got {metric}");
    }
    let criteria = parse_criteria(&args.criterion)?;

    let mut header = RunHeader::new("layer-sweep", seed);
    let build = load_judgments(&args.judgments, &mut header)?;
    header
        .input("ref_emb", &ref_path)?
        .input("sys_emb", &sys_path)?
        .set("metric", metric.name())
        .set("criteria", criteria.iter().map(|c| c.as_str()).collect::<Vec<_>>())
        .set("universal", args.universal)
        .set("idf", args.idf);

    let ref_file = read_embeddings(&ref_path)?;
    let sys_file = read_embeddings(&sys_path)?;
    if ref_file.layer_indices != sys_file.layer_indices {
        bail!(
            "reference layers {:?} differ from system layers {:?}",
            ref_file.layer_indices,
            sys_file.layer_indices
        );
    }
    let layers = ref_file.layer_indices.clone();

    let mut human: HashMap<String, (LangCode, System, BTreeMap<Criterion, f64>)> = HashMap::new();
    for (key, cell) in &build.matrix.cells {
        human
            .entry(key.item_id())
            .or_insert_with(|| (key.lang.clone(), key.system, BTreeMap::new()))
            .2
            .insert(key.criterion, cell.mean);
    }
    let ref_by = ref_file.by_id();
    let mut items = Vec::new();
    let mut unmatched = 0usize;
    for c in &sys_file.entries {
        let Some((lang, system, scores)) = human.get(&c.text_id) else {
            unmatched += 1;
            continue;
        };
        let Some(rid) = resolve_reference(&c.text_id, |id| ref_by.contains_key(id)) else {
            bail!("no reference embedding for {}", c.text_id);
        };
        items.push(SweepItem {
            reference: ref_by[rid.as_str()],
            candidate: c,
            lang: lang.clone(),
            system: *system,
            human: scores.clone(),
        });
    }
    if items.is_empty() {
        bail!("no embedded system summary has judgments");
    }

    let pairs: Vec<(&EmbeddedText, &EmbeddedText)> = items.iter().map(|i| (i.reference, i.candidate)).collect();
    let idf = reference_idf(&pairs)?;
    // (precision, recall) per item for every layer
    let per_layer: Vec<Vec<(f64, f64)>> = layers
        .iter()
        .map(|&layer| {
            items
                .par_iter()
                .map(|it| match metric {
                    Metric::BertScore => {
                        let s = bertscore(it.reference, it.candidate, layer, args.idf.then_some(&idf))?;
                        Ok((s.precision, s.recall))
                    }
                    _ => {
                        let cfg = MoverScoreConfig {
                            layer: Some(layer),
                            use_idf: args.idf,
                            ..MoverScoreConfig::new()
                        };
                        let v = moverscore(it.reference, it.candidate, &idf, &cfg)?;
                        Ok((v, v))
                    }
                })
                .collect::<Result<Vec<_>, summetrics::Error>>()
        })
        .collect::<Result<_, _>>()?;

    // focus pairs with precision, coverage with recall
    let slice = |criterion: Criterion, keep: &dyn Fn(&SweepItem) -> bool| -> (LayerScores, Vec<f64>) {
        let chosen: Vec<usize> = (0..items.len())
            .filter(|&i| keep(&items[i]) && items[i].human.contains_key(&criterion))
            .collect();
        let scores = layers
            .iter()
            .zip(&per_layer)
            .map(|(&layer, vals)| {
                let column = chosen
                    .iter()
                    .map(|&i| match criterion {
                        Criterion::Focus => vals[i].0,
                        Criterion::Coverage => vals[i].1,
                    })
                    .collect();
                (layer, column)
            })
            .collect();
        (scores, chosen.iter().map(|&i| items[i].human[&criterion]).collect())
    };

    let mut sweeps = Vec::new();
    for &criterion in &criteria {
        if args.universal {
            let mut groups = Vec::new();
            for lang in build.matrix.langs() {
                for system in System::ALL {
                    let (scores, human) = slice(criterion, &|it| it.lang == lang && it.system == system);
                    if !human.is_empty() {
                        groups.push(SweepGroup {
                            name: format!("{lang}/{system}"),
                            scores,
                            human,
                        });
                    }
                }
            }
            let result = layer_sweep_grouped(&groups, criterion)?;
            sweeps.push(sweep_json("all", &result));
        } else {
            for lang in build.matrix.langs() {
                let (scores, human) = slice(criterion, &|it| it.lang == lang);
                if human.is_empty() {
                    continue;
                }
                let result = layer_sweep(&scores, &human, criterion).with_context(|| format!("{lang} {criterion}"))?;
                sweeps.push(sweep_json(lang.as_str(), &result));
            }
        }
    }

    let doc = json!({
        "meta": header.to_json(),
        "metric": metric.name(),
        "items": items.len(),
        "unmatched": unmatched,
        "sweeps": sweeps,
    });
    let mut bytes = serde_json::to_vec_pretty(&doc)?;
    bytes.push(b'\n');
    Ok(Output {
        bytes,
        path: args.out.clone(),
    })
}

fn round4(v: f64) -> Value {
    if v.is_nan() {
        Value::Null
    } else {
        let r = (v * 1e4).round() / 1e4;
        json!(if r == 0.0 { 0.0 } else { r })
    }
}

fn sweep_json(scope: &str, result: &LayerSweepResult) -> Value {
    let correlations: serde_json::Map<String, Value> =
        result.correlations.iter().map(|(l, r)| (l.to_string(), round4(*r))).collect();
    json!({
        "scope": scope,
        "criterion": result.criterion,
        "selected_layer": result.selected_layer,
        "groups": result.groups,
        "correlations": correlations,
    })
}

pub fn report(args: &ReportArgs, seed: u64) -> Result<Output> {
    require_files(args.inputs.iter().map(PathBuf::as_path))?;
    let grouping: Grouping = args.grouping.parse()?;
    let stat: Statistic = args.stat.parse()?;
    let mut header = RunHeader::new("report", seed);
    header.set("grouping", grouping.to_string()).set("stat", stat.to_string());
    let mut merged = summetrics::metaeval::CorrelationReport::default();
    let mut seen = BTreeSet::new();
    for (i, path) in args.inputs.iter().enumerate() {
        header.input(&format!("report_{i}"), path)?;
        let part = parse_long_tsv(&read_text(path)?).with_context(|| format!("in {}", path.display()))?;
        for cell in part.cells {
            let key = (cell.lang.clone(), cell.metric.clone(), cell.criterion, cell.grouping);
            if !seen.insert(key) {
                bail!(
                    "{} repeats {} {} {} {}",
                    path.display(),
                    cell.lang,
                    cell.metric,
                    cell.criterion,
                    cell.grouping
                );
            }
            merged.cells.push(cell);
        }
    }
    if !merged.cells.iter().any(|c| c.grouping == grouping) {
        bail!("no cells for grouping {grouping}");
    }
    tsv_output(&header, args.out.clone(), |w| write_table_tsv(w, &merged, grouping, stat))
}
