use proptest::prelude::*;

use summetrics::embedding::{compute_idf, EmbeddedText, EmbeddingFile};
use summetrics::neural::{bertscore, emd_exact, moverscore, MoverScoreConfig, ScoreTransform, Solver, TransportProblem};

const LAYERS: [u16; 2] = [4, 9];

fn text_strategy(dim: usize) -> impl Strategy<Value = EmbeddedText> {
    (1usize..6).prop_flat_map(move |len| {
        (
            "[a-z]{1,6}",
            prop::collection::vec("[a-zé中]{1,4}", len),
            prop::collection::vec(-4.0f32..4.0, LAYERS.len() * len * dim),
        )
            .prop_map(move |(id, tokens, vectors)| EmbeddedText::new(id, tokens, LAYERS.to_vec(), dim, vectors).unwrap())
    })
}

fn scaled(text: &EmbeddedText, factor: f32) -> EmbeddedText {
    let mut out = text.clone();
    out.vectors.iter_mut().for_each(|v| *v *= factor);
    out
}

fn euclidean_cost(points: &[(f64, f64)]) -> Vec<f64> {
    points
        .iter()
        .flat_map(|a| points.iter().map(move |b| ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()))
        .collect()
}

fn normalize(raw: &[f64]) -> Vec<f64> {
    let total: f64 = raw.iter().sum();
    raw.iter().map(|v| v / total).collect()
}

fn emd(p: &[f64], q: &[f64], cost: &[f64]) -> f64 {
    emd_exact(&TransportProblem::normalized(p.to_vec(), q.to_vec(), cost.to_vec()).unwrap())
        .unwrap()
        .distance
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn embedding_bytes_round_trip(entries in prop::collection::vec(text_strategy(3), 0..5), name in ".{0,12}") {
        let file = EmbeddingFile {
            model_name: name,
            layer_indices: LAYERS.to_vec(),
            hidden_dim: 3,
            entries,
        };
        let bytes = file.to_bytes().unwrap();
        let back = EmbeddingFile::from_bytes(&bytes).unwrap();
        prop_assert_eq!(&back, &file);
        prop_assert_eq!(back.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn truncated_files_are_rejected(text in text_strategy(2), cut in 1usize..40) {
        let file = EmbeddingFile {
            model_name: "m".into(),
            layer_indices: LAYERS.to_vec(),
            hidden_dim: 2,
            entries: vec![text],
        };
        let bytes = file.to_bytes().unwrap();
        let cut = cut.min(bytes.len());
        prop_assert!(EmbeddingFile::from_bytes(&bytes[..bytes.len() - cut]).is_err());
    }

    #[test]
    fn bertscore_ignores_positive_scaling(a in text_strategy(4), b in text_strategy(4), k in -3i32..4) {
        // powers of two scale exactly in floating point
        let factor = 2f32.powi(k);
        let plain = bertscore(&a, &b, 9, None).unwrap();
        let rescaled = bertscore(&scaled(&a, factor), &scaled(&b, factor), 9, None).unwrap();
        prop_assert_eq!(plain, rescaled);
    }

    #[test]
    fn bertscore_is_bounded(a in text_strategy(4), b in text_strategy(4)) {
        let s = bertscore(&a, &b, 4, None).unwrap();
        prop_assert!((-1.0..=1.0).contains(&s.precision));
        prop_assert!((-1.0..=1.0).contains(&s.recall));
    }

    #[test]
    fn transport_distance_scales_with_embeddings(a in text_strategy(3), b in text_strategy(3), k in -2i32..3) {
        let factor = 2f32.powi(k);
        let corpus = [a.tokens.clone(), b.tokens.clone()];
        let idf = compute_idf(&corpus).unwrap();
        let config = MoverScoreConfig { transform: ScoreTransform::Negative, solver: Solver::Exact, ..MoverScoreConfig::new() };
        let d = -moverscore(&a, &b, &idf, &config).unwrap();
        let ds = -moverscore(&scaled(&a, factor), &scaled(&b, factor), &idf, &config).unwrap();
        prop_assert!((ds - d * f64::from(factor)).abs() <= 1e-9 * (1.0 + ds.abs()));
    }

    #[test]
    fn moverscore_identity_and_symmetry(a in text_strategy(3), b in text_strategy(3)) {
        let corpus = [a.tokens.clone(), b.tokens.clone()];
        let idf = compute_idf(&corpus).unwrap();
        let config = MoverScoreConfig::new();
        prop_assert_eq!(moverscore(&a, &a, &idf, &config).unwrap(), 1.0);
        let ab = moverscore(&a, &b, &idf, &config).unwrap();
        prop_assert_eq!(ab.to_bits(), moverscore(&b, &a, &idf, &config).unwrap().to_bits());
        prop_assert!(ab > 0.0 && ab <= 1.0);
    }

    #[test]
    fn emd_is_a_metric_on_a_shared_support(
        points in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 2..6),
        seeds in prop::collection::vec(prop::collection::vec(0.01f64..1.0, 6), 3),
    ) {
        let k = points.len();
        let cost = euclidean_cost(&points);
        let p = normalize(&seeds[0][..k]);
        let q = normalize(&seeds[1][..k]);
        let r = normalize(&seeds[2][..k]);
        let (pq, qp) = (emd(&p, &q, &cost), emd(&q, &p, &cost));
        prop_assert!((pq - qp).abs() <= 1e-9);
        prop_assert!(emd(&p, &p, &cost).abs() <= 1e-12);
        prop_assert!(emd(&p, &r, &cost) <= pq + emd(&q, &r, &cost) + 1e-6);
    }
}

#[test]
fn emd_positive_for_distinct_distributions() {
    let cost = euclidean_cost(&[(0.0, 0.0), (1.0, 0.0), (0.0, 2.0)]);
    assert!(emd(&[0.5, 0.5, 0.0], &[0.5, 0.0, 0.5], &cost) > 0.0);
}
