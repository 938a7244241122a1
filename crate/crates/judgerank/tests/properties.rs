//! Property-based invariants over the data layer and the likelihood.

use proptest::prelude::*;

use judgerank::data::{
    aggregate, canonicalize, check_connectivity, ComparisonRecord, Dataset, TripleStats,
};
use judgerank::model::{
    grad_log_likelihood, log_likelihood, normalize_raw, predict_prob, sigmoid, Params,
};

const N: usize = 6;
const K: usize = 3;

fn arb_outcome() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.0), Just(0.5), Just(1.0)]
}

fn arb_record() -> impl Strategy<Value = (usize, usize, usize, f64)> {
    (0..N, 0..N, 0..K, arb_outcome()).prop_filter("no self-comparison", |(i, j, _, _)| i != j)
}

fn arb_records() -> impl Strategy<Value = Vec<(usize, usize, usize, f64)>> {
    prop::collection::vec(arb_record(), 1..120)
}

fn build_dataset(raw: &[(usize, usize, usize, f64)]) -> Dataset {
    let records: Vec<ComparisonRecord> = raw
        .iter()
        .map(|&(i, j, k, y)| canonicalize(i, j, k, y).unwrap())
        .collect();
    Dataset::new(N, K, records).unwrap()
}

fn arb_params() -> impl Strategy<Value = Params> {
    (
        prop::collection::vec(-2.0..2.0f64, N),
        prop::collection::vec(0.2..4.0f64, K),
    )
        .prop_map(|(s, gamma)| normalize_raw(&s, &gamma).unwrap())
}

proptest! {
    #[test]
    fn canonicalization_orders_pair_and_preserves_outcome_semantics(
        (i, j, k, y) in arb_record()
    ) {
        let r = canonicalize(i, j, k, y).unwrap();
        prop_assert!(r.i < r.j);
        // The probability that the originally-first candidate wins is the
        // same whether we ask before or after canonicalization.
        let orig_first_won = if i < j { r.y } else { 1.0 - r.y };
        prop_assert_eq!(orig_first_won, y);
        // Canonicalizing a canonical record is the identity.
        let again = canonicalize(r.i, r.j, r.k, r.y).unwrap();
        prop_assert_eq!(again, r);
    }

    #[test]
    fn aggregation_conserves_counts_and_outcome_mass(raw in arb_records()) {
        let dataset = build_dataset(&raw);
        let triples = aggregate(&dataset);
        let total: u64 = triples.iter().map(|t| t.n).sum();
        prop_assert_eq!(total as usize, dataset.len());
        let mass: f64 = triples.iter().map(|t| t.n as f64 * t.y_bar).sum();
        let raw_mass: f64 = dataset.records.iter().map(|r| r.y).sum();
        prop_assert!((mass - raw_mass).abs() < 1e-9);
        // Sorted by (i, j, k) with no duplicate triples.
        for w in triples.windows(2) {
            prop_assert!((w[0].i, w[0].j, w[0].k) < (w[1].i, w[1].j, w[1].k));
        }
    }

    #[test]
    fn connectivity_is_invariant_under_record_order(raw in arb_records()) {
        let dataset = build_dataset(&raw);
        let mut reversed = dataset.clone();
        reversed.records.reverse();
        let a = check_connectivity(&dataset);
        let b = check_connectivity(&reversed);
        prop_assert_eq!(a.connected, b.connected);
        prop_assert_eq!(a.components.len(), b.components.len());
    }

    #[test]
    fn connectivity_is_invariant_under_candidate_relabeling(
        raw in arb_records(),
        shift in 1..N
    ) {
        let dataset = build_dataset(&raw);
        // Relabel candidates by a cyclic shift (a permutation).
        let relabeled: Vec<ComparisonRecord> = dataset
            .records
            .iter()
            .map(|r| canonicalize((r.i + shift) % N, (r.j + shift) % N, r.k, r.y).unwrap())
            .collect();
        let relabeled = Dataset::new(N, K, relabeled).unwrap();
        let a = check_connectivity(&dataset);
        let b = check_connectivity(&relabeled);
        prop_assert_eq!(a.connected, b.connected);
        prop_assert_eq!(a.components.len(), b.components.len());
    }

    #[test]
    fn sigmoid_symmetry_and_range(z in -100.0..100.0f64) {
        let p = sigmoid(z);
        // At |z| around 37 the far tail underflows past f64 resolution, so
        // only the near side of the strict bound survives there.
        prop_assert!((0.0..=1.0).contains(&p));
        if z.abs() < 30.0 {
            prop_assert!(p > 0.0 && p < 1.0);
        }
        prop_assert!((sigmoid(z) + sigmoid(-z) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn predicted_probabilities_are_complementary(params in arb_params(), k in 0..K) {
        let p_ij = predict_prob(&params, 0, 1, k).unwrap();
        let p_ji = predict_prob(&params, 1, 0, k).unwrap();
        prop_assert!((p_ij + p_ji - 1.0).abs() < 1e-12);
    }

    #[test]
    fn loglik_is_invariant_under_gauge_rescaling(
        raw in arb_records(),
        params in arb_params(),
        a in 0.25..4.0f64
    ) {
        let dataset = build_dataset(&raw);
        let triples = aggregate(&dataset);
        let base = log_likelihood(&params, &triples).unwrap();
        // Rescale scores by `a` and divide every discrimination by `a`:
        // the products gamma_k * (s_i - s_j) are unchanged.
        let scaled = Params {
            s: params.s.iter().map(|v| v * a).collect(),
            alpha: params.alpha.iter().map(|v| v - a.ln()).collect(),
        };
        let transformed = log_likelihood(&scaled, &triples).unwrap();
        prop_assert!((base - transformed).abs() < 1e-8 * (1.0 + base.abs()));
    }

    #[test]
    fn loglik_is_maximal_nowhere_above_its_gradient_direction(
        raw in arb_records(),
        params in arb_params()
    ) {
        // First-order check: moving a small step along the gradient does not
        // decrease the log-likelihood.
        let dataset = build_dataset(&raw);
        let triples = aggregate(&dataset);
        let base = log_likelihood(&params, &triples).unwrap();
        let grad = grad_log_likelihood(&params, &triples).unwrap();
        let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        prop_assume!(norm > 1e-8);
        let step = 1e-7 / norm;
        let flat = params.to_flat();
        let moved: Vec<f64> = flat
            .iter()
            .zip(&grad)
            .map(|(p, g)| p + step * g)
            .collect();
        let moved = Params::from_flat(&moved, N);
        let up = log_likelihood(&moved, &triples).unwrap();
        prop_assert!(up >= base - 1e-12 * (1.0 + base.abs()));
    }

    #[test]
    fn aggregated_loglik_matches_per_record_loglik(
        raw in arb_records(),
        params in arb_params()
    ) {
        let dataset = build_dataset(&raw);
        let triples = aggregate(&dataset);
        let agg = log_likelihood(&params, &triples).unwrap();
        let singles: Vec<TripleStats> = dataset
            .records
            .iter()
            .map(|r| TripleStats { i: r.i, j: r.j, k: r.k, n: 1, y_bar: r.y })
            .collect();
        let per_record = log_likelihood(&params, &singles).unwrap();
        prop_assert!((agg - per_record).abs() < 1e-8 * (1.0 + agg.abs()));
    }
}
