//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails on the data it needs.
//!
//! The reproduction check reads the released annotation data from
//! `$SUMMETRICS_DATA_DIR` (default `data/multi_summeval` at the workspace
//! root), which must hold `annotations.jsonl`, `refs.jsonl` and `sys.jsonl`.
//! Without that data it still prints FAIL, marked unattainable, but does not
//! set the exit status.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use summetrics::batch::{score_lexical, LexicalConfig, Metric};
use summetrics::embedding::{compute_idf, read_embeddings, write_embeddings, EmbeddedText, EmbeddingFile};
use summetrics::lexical::{rouge_l, rouge_n, rouge_s, rouge_su, rouge_w, RougeConfig};
use summetrics::metaeval::{
    agreement_table, build_matrix, correlate_metrics, one_vs_rest, read_annotations, zscore_hit, Criterion, Grouping,
    QcThresholds,
};
use summetrics::neural::{
    bertscore, emd_exact, moverscore, sinkhorn, MoverScoreConfig, SinkhornParams, Solver, TransportProblem,
};
use summetrics::stats::{fractional_ranks, mean, pearson, spearman, std_dev, SdConvention};
use summetrics::textnorm::read_summaries;
use summetrics::{LangCode, TokenSequence};

type Outcome = Result<String, String>;
type Check = (&'static str, fn() -> Outcome);

/// Prefix for failures caused by absent inputs rather than wrong results.
const UNATTAINABLE: &str = "unattainable: ";

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn seq(tokens: &[String]) -> TokenSequence {
    TokenSequence::new(tokens.iter().map(String::as_str), LangCode::En)
}

fn random_tokens(rng: &mut ChaCha8Rng, vocab: &[&str], min: usize, max: usize) -> Vec<String> {
    let len = rng.random_range(min..=max);
    (0..len).map(|_| vocab.choose(rng).unwrap().to_string()).collect()
}

// ---------------------------------------------------------------------------
// oracles

/// Longest common subsequence by trying every subset of `a`.
fn lcs_brute(a: &[String], b: &[String]) -> usize {
    let mut best = 0;
    for mask in 0u32..(1 << a.len()) {
        let picked: Vec<&String> = (0..a.len()).filter(|i| mask & (1 << i) != 0).map(|i| &a[i]).collect();
        if picked.len() <= best {
            continue;
        }
        let mut it = b.iter();
        if picked.iter().all(|p| it.any(|x| x == *p)) {
            best = picked.len();
        }
    }
    best
}

/// Best run-weighted common subsequence: every subset of `a` positions, every
/// increasing placement into `b`.
fn wlcs_brute(a: &[String], b: &[String], alpha: f64) -> f64 {
    fn place(a: &[String], b: &[String], picked: &[usize], from: usize, links: &mut Vec<usize>, alpha: f64, best: &mut f64) {
        if links.len() == picked.len() {
            let mut total = 0.0;
            let mut run = 0usize;
            for t in 0..links.len() {
                let extends = t > 0 && picked[t] == picked[t - 1] + 1 && links[t] == links[t - 1] + 1;
                if extends {
                    run += 1;
                } else {
                    if run > 0 {
                        total += (run as f64).powf(alpha);
                    }
                    run = 1;
                }
            }
            if run > 0 {
                total += (run as f64).powf(alpha);
            }
            if total > *best {
                *best = total;
            }
            return;
        }
        let want = &a[picked[links.len()]];
        for j in from..b.len() {
            if &b[j] == want {
                links.push(j);
                place(a, b, picked, j + 1, links, alpha, best);
                links.pop();
            }
        }
    }
    let mut best = 0.0;
    for mask in 0u32..(1 << a.len()) {
        let picked: Vec<usize> = (0..a.len()).filter(|i| mask & (1 << i) != 0).collect();
        place(a, b, &picked, 0, &mut Vec::new(), alpha, &mut best);
    }
    best
}

fn wlcs_ratio(w: f64, len: usize, alpha: f64) -> f64 {
    if len == 0 || w == 0.0 {
        0.0
    } else {
        (w / (len as f64).powf(alpha)).powf(1.0 / alpha)
    }
}

/// Minimum-cost transport by enumerating basic solutions of the equality
/// system (row sums, and all but one column sum).
fn emd_vertex_enumeration(a: &[f64], b: &[f64], cost: &[f64]) -> f64 {
    let (n, m) = (a.len(), b.len());
    let vars = n * m;
    let rows = n + m - 1;
    let mut eq = DMatrix::<f64>::zeros(rows, vars);
    let mut rhs = DVector::<f64>::zeros(rows);
    for i in 0..n {
        for j in 0..m {
            eq[(i, i * m + j)] = 1.0;
        }
        rhs[i] = a[i];
    }
    for j in 0..m - 1 {
        for i in 0..n {
            eq[(n + j, i * m + j)] = 1.0;
        }
        rhs[n + j] = b[j];
    }
    let mut best = f64::INFINITY;
    let mut basis = Vec::with_capacity(rows);
    fn subsets(start: usize, vars: usize, k: usize, basis: &mut Vec<usize>, visit: &mut dyn FnMut(&[usize])) {
        if basis.len() == k {
            visit(basis);
            return;
        }
        for v in start..vars {
            basis.push(v);
            subsets(v + 1, vars, k, basis, visit);
            basis.pop();
        }
    }
    subsets(0, vars, rows, &mut basis, &mut |cols: &[usize]| {
        let sub = DMatrix::from_fn(rows, rows, |r, c| eq[(r, cols[c])]);
        let Some(x) = sub.clone().lu().solve(&rhs) else {
            return;
        };
        if sub.determinant().abs() < 1e-12 || x.iter().any(|&v| v < -1e-12) {
            return;
        }
        let total: f64 = cols.iter().zip(x.iter()).map(|(&v, &f)| f.max(0.0) * cost[v]).sum();
        best = best.min(total);
    });
    best
}

fn random_masses(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.05..1.0)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|v| v / total).collect()
}

// ---------------------------------------------------------------------------
// criteria

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
    let vocab = ["a", "b", "c", "d"];
    let cfg = RougeConfig::default();
    for case in 0..500 {
        let a = random_tokens(&mut rng, &vocab, 0, 8);
        let b = random_tokens(&mut rng, &vocab, 0, 8);
        let (ra, rb) = (seq(&a), seq(&b));

        let lcs = lcs_brute(&a, &b);
        let l = rouge_l(&ra, &rb);
        let p = if b.is_empty() { 0.0 } else { lcs as f64 / b.len() as f64 };
        let r = if a.is_empty() { 0.0 } else { lcs as f64 / a.len() as f64 };
        check(l.precision == p && l.recall == r, || format!("rouge_l case {case}: {a:?} / {b:?}"))?;

        let w = wlcs_brute(&a, &b, cfg.wlcs_weight);
        let s = rouge_w(&ra, &rb, &cfg);
        check(
            s.precision == wlcs_ratio(w, b.len(), cfg.wlcs_weight) && s.recall == wlcs_ratio(w, a.len(), cfg.wlcs_weight),
            || format!("rouge_w case {case}: {a:?} / {b:?} oracle weight {w}, got {s:?}"),
        )?;
    }

    let mut worst_exact = 0.0f64;
    let mut worst_sinkhorn = 0.0f64;
    let params = SinkhornParams {
        epsilon: 0.001,
        ..SinkhornParams::default()
    };
    for case in 0..200 {
        let a = random_masses(&mut rng, 3);
        let b = random_masses(&mut rng, 3);
        let cost: Vec<f64> = (0..9).map(|_| rng.random_range(0.0..1.0)).collect();
        let oracle = emd_vertex_enumeration(&a, &b, &cost);
        let problem = TransportProblem::normalized(a, b, cost).map_err(|e| e.to_string())?;
        let exact = emd_exact(&problem).map_err(|e| e.to_string())?.distance;
        let approx = sinkhorn(&problem, &params).map_err(|e| e.to_string())?.distance;
        worst_exact = worst_exact.max((exact - oracle).abs());
        worst_sinkhorn = worst_sinkhorn.max((approx - exact).abs());
        check((exact - oracle).abs() <= 1e-6, || format!("emd case {case}: {exact} vs oracle {oracle}"))?;
        check((approx - exact).abs() <= 1e-3, || format!("sinkhorn case {case}: {approx} vs {exact}"))?;
    }
    let elapsed = start.elapsed();
    check(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "500 ROUGE-L/W pairs exact; 200 EMD problems max |exact-oracle| {worst_exact:.1e}, max |sinkhorn-exact| {worst_sinkhorn:.1e}; {:.1}s",
        elapsed.as_secs_f64()
    ))
}

fn random_embedded(rng: &mut ChaCha8Rng, id: String, vocab: &[&str], layers: &[u16], dim: usize) -> EmbeddedText {
    let tokens = random_tokens(rng, vocab, 1, 10);
    let count = layers.len() * tokens.len() * dim;
    let vectors = (0..count).map(|_| rng.random_range(-1.0f32..1.0)).collect();
    EmbeddedText::new(id, tokens, layers.to_vec(), dim, vectors).unwrap()
}

fn dualities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let vocab = ["the", "cat", "sat", "on", "mat", "a", "dog"];
    let cfg = RougeConfig::default();
    let gapped = RougeConfig {
        skip_distance: Some(2),
        ..cfg
    };
    for case in 0..1000 {
        let a = seq(&random_tokens(&mut rng, &vocab, 0, 12));
        let b = seq(&random_tokens(&mut rng, &vocab, 0, 12));
        let scores = [
            ("rouge1", rouge_n(1, &a, &b), rouge_n(1, &b, &a)),
            ("rouge2", rouge_n(2, &a, &b), rouge_n(2, &b, &a)),
            ("rouge3", rouge_n(3, &a, &b), rouge_n(3, &b, &a)),
            ("rougeL", rouge_l(&a, &b), rouge_l(&b, &a)),
            ("rougeW", rouge_w(&a, &b, &cfg), rouge_w(&b, &a, &cfg)),
            ("rougeS", rouge_s(&a, &b, &cfg), rouge_s(&b, &a, &cfg)),
            ("rougeS4", rouge_s(&a, &b, &gapped), rouge_s(&b, &a, &gapped)),
            ("rougeSU", rouge_su(&a, &b, &cfg), rouge_su(&b, &a, &cfg)),
        ];
        for (name, ab, ba) in scores {
            check(ab.precision == ba.recall && ab.recall == ba.precision, || {
                format!("{name} case {case}: {ab:?} vs swapped {ba:?}")
            })?;
        }
    }

    let layers = [1u16, 2, 3];
    let entries: Vec<EmbeddedText> = (0..2000)
        .map(|i| random_embedded(&mut rng, format!("t{i}"), &vocab, &layers, 8))
        .collect();
    let file = EmbeddingFile {
        model_name: "synthetic".into(),
        layer_indices: layers.to_vec(),
        hidden_dim: 8,
        entries,
    };
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let path = dir.path().join("synthetic.semb");
    write_embeddings(&path, &file).map_err(|e| e.to_string())?;
    let loaded = read_embeddings(&path).map_err(|e| e.to_string())?;
    check(loaded == file, || "embedding file did not round-trip".into())?;

    let corpus: Vec<&[String]> = loaded.entries.iter().map(|e| e.tokens.as_slice()).collect();
    let idf = compute_idf(&corpus).map_err(|e| e.to_string())?;
    let mover = MoverScoreConfig {
        solver: Solver::Exact,
        ..MoverScoreConfig::new()
    };
    let sinkhorn_mover = MoverScoreConfig {
        solver: Solver::Sinkhorn(SinkhornParams::default()),
        ..MoverScoreConfig::new()
    };
    for (case, pair) in loaded.entries.chunks_exact(2).enumerate() {
        let (a, b) = (&pair[0], &pair[1]);
        let layer = layers[case % layers.len()];
        for table in [None, Some(&idf)] {
            let ab = bertscore(a, b, layer, table).map_err(|e| e.to_string())?;
            let ba = bertscore(b, a, layer, table).map_err(|e| e.to_string())?;
            check(ab.precision == ba.recall && ab.recall == ba.precision, || {
                format!("bertscore case {case}: {ab:?} vs swapped {ba:?}")
            })?;
        }
        let config = if case % 10 == 0 { &sinkhorn_mover } else { &mover };
        let ab = moverscore(a, b, &idf, config).map_err(|e| e.to_string())?;
        let ba = moverscore(b, a, &idf, config).map_err(|e| e.to_string())?;
        check(ab.to_bits() == ba.to_bits(), || format!("moverscore case {case}: {ab} vs {ba}"))?;
    }
    Ok("1000 pairs: P/R duality exact for 8 ROUGE configurations and BERTScore (with and without IDF); MoverScore symmetric bit-for-bit".into())
}

fn statistics_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut worst_affine = 0.0f64;
    for case in 0..1000 {
        let n = rng.random_range(3..40);
        let x: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(0..8) as f64).collect();
        let direct = spearman(&x, &y);
        let via_ranks = pearson(&fractional_ranks(&x), &fractional_ranks(&y));
        check(direct == via_ranks, || format!("spearman case {case}: {direct:?} vs {via_ranks:?}"))?;

        let u: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let (scale, shift) = (rng.random_range(0.01..100.0), rng.random_range(-100.0..100.0));
        let moved: Vec<f64> = u.iter().map(|t| scale * t + shift).collect();
        let (r0, r1) = (pearson(&u, &v).unwrap(), pearson(&moved, &v).unwrap());
        worst_affine = worst_affine.max((r0 - r1).abs());
        check((r0 - r1).abs() < 1e-12, || format!("affine case {case}: {r0} vs {r1}"))?;

        let scores: Vec<f64> = (0..rng.random_range(2..100)).map(|_| rng.random_range(0..=100) as f64).collect();
        let z = zscore_hit(&scores, SdConvention::Sample).map_err(|e| e.to_string())?;
        if scores.windows(2).any(|w| w[0] != w[1]) {
            let (m, sd) = (mean(&z), std_dev(&z, SdConvention::Sample));
            check(m.abs() < 1e-12 && (sd - 1.0).abs() < 1e-12, || format!("zscore case {case}: mean {m}, sd {sd}"))?;
        }
    }

    let cells: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.37).sin(); 3]).collect();
    let identical = one_vs_rest(&cells, 1000, 13).map_err(|e| e.to_string())?;
    check(identical.r == 1.0, || format!("identical workers gave {}", identical.r))?;

    let noisy: Vec<Vec<f64>> = (0..50)
        .map(|_| (0..3).map(|_| rng.random_range(-2.0..2.0)).collect())
        .collect();
    let first = one_vs_rest(&noisy, 1000, 13).map_err(|e| e.to_string())?;
    let second = one_vs_rest(&noisy, 1000, 13).map_err(|e| e.to_string())?;
    check(first.r.to_bits() == second.r.to_bits(), || "one_vs_rest not deterministic".into())?;
    Ok(format!(
        "1000 tied vectors spearman == pearson of ranks; max affine |dr| {worst_affine:.1e}; z-score moments hold; one_vs_rest identical workers = 1, seeded rerun bit-identical"
    ))
}

// Reference combined-system Pearson values, focus then coverage, languages in
// the order EN ID FR TR ZH RU DE ES.
const CORRELATION_TARGETS: [(Metric, [f64; 8], [f64; 8]); 9] = [
    (Metric::Rouge1, [0.61, 0.69, 0.68, 0.81, 0.80, 0.47, 0.88, 0.53], [0.62, 0.72, 0.67, 0.83, 0.79, 0.58, 0.89, 0.67]),
    (Metric::Rouge2, [0.57, 0.63, 0.67, 0.80, 0.76, 0.48, 0.87, 0.61], [0.56, 0.66, 0.71, 0.79, 0.75, 0.59, 0.89, 0.67]),
    (Metric::Rouge3, [0.46, 0.53, 0.59, 0.76, 0.67, 0.31, 0.85, 0.54], [0.48, 0.57, 0.63, 0.74, 0.66, 0.46, 0.88, 0.58]),
    (Metric::RougeL, [0.60, 0.69, 0.68, 0.81, 0.79, 0.46, 0.87, 0.54], [0.61, 0.72, 0.67, 0.83, 0.79, 0.59, 0.89, 0.67]),
    (Metric::RougeS, [0.59, 0.65, 0.60, 0.78, 0.70, 0.46, 0.85, 0.51], [0.60, 0.69, 0.67, 0.78, 0.73, 0.53, 0.89, 0.64]),
    (Metric::RougeSU, [0.59, 0.66, 0.61, 0.78, 0.72, 0.43, 0.85, 0.50], [0.60, 0.70, 0.68, 0.78, 0.75, 0.56, 0.89, 0.65]),
    (Metric::RougeW, [0.60, 0.67, 0.67, 0.81, 0.78, 0.44, 0.87, 0.53], [0.58, 0.69, 0.67, 0.81, 0.78, 0.59, 0.89, 0.66]),
    (Metric::Meteor, [0.47, 0.67, 0.64, 0.74, 0.81, 0.55, 0.83, 0.60], [0.63, 0.71, 0.64, 0.80, 0.78, 0.58, 0.89, 0.69]),
    (Metric::Bleu4, [0.46, 0.56, 0.64, 0.70, 0.70, 0.39, 0.85, 0.50], [0.48, 0.58, 0.59, 0.67, 0.69, 0.31, 0.85, 0.54]),
];

// Per language: agreement focus, agreement coverage, focus-coverage r.
const AGREEMENT_TARGETS: [[f64; 3]; 8] = [
    [0.47, 0.46, 0.58],
    [0.64, 0.63, 0.80],
    [0.63, 0.65, 0.71],
    [0.74, 0.79, 0.74],
    [0.61, 0.60, 0.78],
    [0.60, 0.64, 0.78],
    [0.78, 0.83, 0.89],
    [0.60, 0.61, 0.76],
];

const CORRELATION_TOL: f64 = 0.03;
const FOCUS_COVERAGE_TOL: f64 = 0.02;
const AGREEMENT_TOL: f64 = 0.03;

/// False for NaN, so an undefined correlation never counts as a match.
fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= tol
}

fn data_dir() -> PathBuf {
    match std::env::var_os("SUMMETRICS_DATA_DIR") {
        Some(dir) => PathBuf::from(dir),
        None => Path::new(env!("CARGO_MANIFEST_DIR"))
            .ancestors()
            .nth(2)
            .unwrap_or(Path::new("."))
            .join("data/multi_summeval"),
    }
}

fn reference_reproduction() -> Outcome {
    let dir = data_dir();
    let files = ["annotations.jsonl", "refs.jsonl", "sys.jsonl"].map(|f| dir.join(f));
    if let Some(absent) = files.iter().find(|f| !f.is_file()) {
        return Err(format!(
            "{UNATTAINABLE}released annotation data not found ({} missing); set SUMMETRICS_DATA_DIR",
            absent.display()
        ));
    }
    let start = Instant::now();
    let err = |e: summetrics::Error| e.to_string();
    let records = read_annotations(&files[0]).map_err(err)?;
    let refs = read_summaries(&files[1]).map_err(err)?;
    let sys = read_summaries(&files[2]).map_err(err)?;

    let build = build_matrix(&records, QcThresholds::default(), SdConvention::Sample).map_err(err)?;
    let agreement = agreement_table(&build, 1000, 13).map_err(err)?;
    let rows = score_lexical(&refs, &sys, &Metric::LEXICAL, &LexicalConfig::default()).map_err(err)?;
    let report = correlate_metrics(&rows, &build.matrix, &[Grouping::Combined]).map_err(err)?;

    let mut failures = Vec::new();
    let mut checked = 0;
    for (li, lang) in LangCode::BUILTIN.iter().enumerate() {
        let Some(row) = agreement.iter().find(|r| &r.lang == lang) else {
            failures.push(format!("{lang}: no annotations"));
            continue;
        };
        let [focus, coverage, fc] = AGREEMENT_TARGETS[li];
        for (what, got, want, tol) in [
            ("agreement focus", row.focus.r, focus, AGREEMENT_TOL),
            ("agreement coverage", row.coverage.r, coverage, AGREEMENT_TOL),
            ("focus-coverage", row.focus_coverage.r, fc, FOCUS_COVERAGE_TOL),
        ] {
            checked += 1;
            if !within(got, want, tol) {
                failures.push(format!("{lang} {what} {got:.3} vs {want:.2}"));
            }
        }
        for (metric, focus, coverage) in &CORRELATION_TARGETS {
            for (criterion, want) in [(Criterion::Focus, focus[li]), (Criterion::Coverage, coverage[li])] {
                checked += 1;
                let got = report
                    .get(lang, metric.name(), criterion, Grouping::Combined)
                    .map_or(f64::NAN, |c| c.r);
                if !within(got, want, CORRELATION_TOL) {
                    failures.push(format!("{lang} {metric} {criterion} {got:.3} vs {want:.2}"));
                }
            }
        }
    }
    let elapsed = start.elapsed();
    if elapsed >= Duration::from_secs(300) {
        failures.push(format!("run took {elapsed:?}"));
    }
    if failures.is_empty() {
        Ok(format!("{checked} table cells within tolerance; {:.1}s", elapsed.as_secs_f64()))
    } else {
        Err(format!("{} of {checked} checks off: {}", failures.len(), failures.join("; ")))
    }
}

fn main() {
    let criteria: [Check; 4] = [
        ("oracle equivalence", oracle_equivalence),
        ("metric dualities and symmetry", dualities),
        ("statistics suite", statistics_suite),
        ("reference results, traditional metrics", reference_reproduction),
    ];
    let (mut failed, mut blocked) = (0, 0);
    for (name, run) in criteria {
        match run() {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                if detail.starts_with(UNATTAINABLE) {
                    blocked += 1;
                }
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed ({blocked} unattainable without their inputs)",
        criteria.len() - failed
    );
    if failed > blocked {
        std::process::exit(1);
    }
}
