mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use sdgtag::classifier::{biased_similarity, center, log_length_scale, threshold_rank};
use sdgtag::embeddings::dense_cosine;
use sdgtag::metrics::{self, LabelSet};
use sdgtag::preprocess::{Preprocessor, ProcessedDocument};
use sdgtag::similarity::{self, compute_r, TopicWeight};
use sdgtag::tfidf::{sparse_cosine, SparseVector, TfIdfModel};
use sdgtag::{SdgId, CORPUS_SIZE, NUM_SDGS};

fn word() -> impl Strategy<Value = String> {
    prop_oneof![
        "[a-zA-Z]{1,10}",
        Just("SDG".to_string()),
        Just("sdg 7".to_string()),
        Just("Sustainable Development Goals".to_string()),
        Just("third".to_string()),
        Just("12th".to_string()),
        Just("the".to_string()),
        Just("don't".to_string()),
        Just("well-being".to_string()),
        "[0-9]{1,3}",
        "[.,;:!?()\"-]",
    ]
}

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(word(), 0..20).prop_map(|w| w.join(" "))
}

fn label_set() -> impl Strategy<Value = LabelSet> {
    prop::collection::btree_set(1u32..=17, 0..4)
        .prop_map(|s| s.into_iter().map(|i| SdgId::new(i).unwrap()).collect())
}

fn goal_scores() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0f64..3.0, NUM_SDGS)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn normalize_is_idempotent(t in text()) {
        let pp = Preprocessor::shared();
        let once = pp.normalize(&t);
        prop_assert_eq!(pp.normalize(&once), once.clone());
    }

    #[test]
    fn processed_tokens_have_no_stop_words(t in text()) {
        let pp = Preprocessor::shared();
        for tok in pp.process(&t).tokens() {
            prop_assert!(!pp.is_stop_word(tok), "stop word {tok:?} survived");
            prop_assert!(tok.chars().any(char::is_alphanumeric), "punctuation {tok:?} survived");
            prop_assert_eq!(tok.to_lowercase(), tok.clone());
        }
    }

    #[test]
    fn dense_cosine_is_bounded(
        a in prop::collection::vec(-1e3f64..1e3, 4),
        b in prop::collection::vec(-1e3f64..1e3, 4),
    ) {
        let c = dense_cosine(&a, &b).unwrap();
        prop_assert!(c.is_finite() && (-1.0..=1.0).contains(&c));
        prop_assert_eq!(c, dense_cosine(&b, &a).unwrap());
    }

    #[test]
    fn sparse_cosine_is_bounded_and_scale_invariant(
        a in prop::collection::btree_map(0usize..12, 0.0f64..5.0, 0..8),
        b in prop::collection::btree_map(0usize..12, 0.0f64..5.0, 0..8),
        k in 0.01f64..100.0,
    ) {
        let va = SparseVector::from_entries(a.clone());
        let vb = SparseVector::from_entries(b);
        let c = sparse_cosine(&va, &vb);
        prop_assert!((0.0..=1.0).contains(&c));
        let scaled = SparseVector::from_entries(a.into_iter().map(|(i, x)| (i, x * k)));
        prop_assert!((sparse_cosine(&scaled, &vb) - c).abs() < 1e-12);
    }

    #[test]
    fn tfidf_f_is_bounded(
        docs in prop::collection::vec(prop::collection::vec("[a-e]", 1..6), 1..6),
        query in prop::collection::vec("[a-g]", 0..6),
    ) {
        let processed: Vec<ProcessedDocument> = docs.iter().map(|d| ProcessedDocument::from_tokens(d.clone())).collect();
        let model = TfIdfModel::fit(processed.iter()).unwrap();
        for f in similarity::compute_f(&model, &ProcessedDocument::from_tokens(query)) {
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }

    #[test]
    fn r_is_nonnegative_and_bounded(g in prop::collection::vec(-1.0f64..=1.0, CORPUS_SIZE)) {
        for w in [TopicWeight::SquareOfMean, TopicWeight::MeanOfSquares] {
            let r = compute_r(&g, w);
            prop_assert!((0.0..=1.0).contains(&r));
        }
        prop_assert!(compute_r(&g, TopicWeight::SquareOfMean) <= compute_r(&g, TopicWeight::MeanOfSquares) + 1e-12);
    }

    #[test]
    fn centering_sums_to_zero(w in prop::collection::vec(-5.0f64..5.0, CORPUS_SIZE)) {
        let (b, m) = center(&biased_similarity(&w));
        prop_assert!(b.iter().sum::<f64>().abs() < 1e-9);
        prop_assert!(m.is_finite());
    }

    #[test]
    fn threshold_is_monotone(b in goal_scores(), t1 in -3.0f64..3.0, dt in 0.0f64..3.0) {
        let lo: BTreeSet<SdgId> = threshold_rank(&b, t1).label_ids().into_iter().collect();
        let hi: BTreeSet<SdgId> = threshold_rank(&b, t1 + dt).label_ids().into_iter().collect();
        prop_assert!(hi.is_subset(&lo));
    }

    #[test]
    fn ranking_is_sorted_and_strict(b in goal_scores(), t in -3.0f64..3.0) {
        let r = threshold_rank(&b, t);
        prop_assert_eq!(r.is_unrelated, r.labels.is_empty());
        for l in &r.labels {
            prop_assert!(l.score > t);
        }
        for pair in r.labels.windows(2) {
            prop_assert!(pair[0].score > pair[1].score || (pair[0].score == pair[1].score && pair[0].sdg < pair[1].sdg));
        }
    }

    #[test]
    fn positive_length_scaling_keeps_ranking(c in prop::collection::vec(-2.0f64..2.0, CORPUS_SIZE), n in 1usize..500) {
        let (b1, _) = center(&biased_similarity(&c));
        let (b2, _) = center(&biased_similarity(&log_length_scale(&c, n)));
        let order = |b: &[f64]| threshold_rank(b, f64::NEG_INFINITY).label_ids();
        prop_assert_eq!(order(&b1), order(&b2));
    }

    #[test]
    fn lrap_ignores_monotone_transforms(
        rows in prop::collection::vec((label_set(), goal_scores()), 1..8),
        k in 0.1f64..10.0,
        shift in -5.0f64..5.0,
    ) {
        let truth: Vec<LabelSet> = rows.iter().map(|(t, _)| t.clone()).collect();
        let scores: Vec<Vec<f64>> = rows.iter().map(|(_, s)| s.clone()).collect();
        let moved: Vec<Vec<f64>> = scores.iter().map(|s| s.iter().map(|x| (x * k + shift).exp()).collect()).collect();
        match (metrics::lrap(&truth, &scores), metrics::lrap(&truth, &moved)) {
            (Ok(a), Ok(b)) => {
                prop_assert!((a.value - b.value).abs() < 1e-9);
                prop_assert!((0.0..=1.0).contains(&a.value));
            }
            (Err(_), Err(_)) => prop_assert!(truth.iter().all(|t| t.is_empty())),
            _ => prop_assert!(false, "lrap availability changed under transform"),
        }
    }

    #[test]
    fn weighted_f1_is_bounded_and_perfect_on_truth(
        pairs in prop::collection::vec((label_set(), label_set()), 1..10),
    ) {
        let truth: Vec<LabelSet> = pairs.iter().map(|(t, _)| t.clone()).collect();
        let pred: Vec<LabelSet> = pairs.iter().map(|(_, p)| p.clone()).collect();
        let f = metrics::weighted_f1(&truth, &pred).unwrap();
        prop_assert!((0.0..=1.0).contains(&f));
        prop_assert!((metrics::weighted_f1(&truth, &truth).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weighted_f1_equals_macro_under_equal_supports(
        preds in prop::collection::vec(1u32..=4, 8),
    ) {
        // each of goals 1..=4 appears exactly twice in the truth
        let truth: Vec<LabelSet> = (0..8u32).map(|i| BTreeSet::from([SdgId::new(1 + i % 4).unwrap()])).collect();
        let pred: Vec<LabelSet> = preds.iter().map(|&p| BTreeSet::from([SdgId::new(p).unwrap()])).collect();
        let weighted = metrics::weighted_f1(&truth, &pred).unwrap();
        let macro_f1 = (1..=4u32)
            .map(|g| {
                let id = SdgId::new(g).unwrap();
                let tp = truth.iter().zip(&pred).filter(|(t, p)| t.contains(&id) && p.contains(&id)).count();
                let fp = truth.iter().zip(&pred).filter(|(t, p)| !t.contains(&id) && p.contains(&id)).count();
                let fn_ = truth.iter().zip(&pred).filter(|(t, p)| t.contains(&id) && !p.contains(&id)).count();
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            })
            .sum::<f64>()
            / 4.0;
        prop_assert!((weighted - macro_f1).abs() < 1e-12);
    }

    #[test]
    fn br_statistics_are_seed_stable_and_bounded(
        rows in prop::collection::vec((label_set(), goal_scores()), 1..8),
        seed in any::<u64>(),
    ) {
        let truth: Vec<LabelSet> = rows.iter().map(|(t, _)| t.clone()).collect();
        let ranked: Vec<Vec<SdgId>> = rows.iter().map(|(_, s)| threshold_rank(s, 0.5).label_ids()).collect();
        let a = metrics::br_statistics(&truth, &ranked, seed).unwrap();
        let b = metrics::br_statistics(&truth, &ranked, seed).unwrap();
        prop_assert_eq!(a, b);
        prop_assert!((0.0..=1.0).contains(&a.accuracy));
        prop_assert!((0.0..=1.0).contains(&a.weighted_f1));
    }

    #[test]
    fn class_distribution_sums_to_one(truth in prop::collection::vec(label_set(), 1..30)) {
        let d = metrics::class_distribution(&truth).unwrap();
        prop_assert!((d.no_sdg + d.sdg16 + d.sdg17 + d.remaining - 1.0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn g_is_bounded_for_any_query(q in text()) {
        let texts = common::corpus_texts();
        let table = common::random_table(texts.iter().map(String::as_str), 5, 1);
        let g = similarity::compute_g(&table, texts.iter().map(String::as_str), &q, Preprocessor::shared());
        prop_assert_eq!(g.len(), CORPUS_SIZE);
        for x in g {
            prop_assert!((-1.0..=1.0).contains(&x));
        }
    }
}
