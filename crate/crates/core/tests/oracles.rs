mod common;

use common::*;
use fairwalk::crosswalk;
use fairwalk::graph::partition_by;
use fairwalk::metrics;
use fairwalk::propagation::{build_propagation_graph, propagate, Bandwidth};
use fairwalk::walk::transition_distribution;
use fairwalk::weights::OutWeights;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn node2vec_fixtures_and_sampling() {
    check_transitions(100_000).unwrap();
}

#[test]
fn reweighting_over_grid() {
    check_reweight_grid(100, 1).unwrap();
}

#[test]
fn sgns_gradients_match_finite_differences() {
    check_gradients(100, 2).unwrap();
}

#[test]
fn harmonic_path() {
    check_harmonic_path().unwrap();
}

#[test]
fn metrics_match_exact_recomputation() {
    check_metrics(50, 3).unwrap();
}

fn arb_rows() -> impl Strategy<Value = OutWeights> {
    (3usize..12).prop_flat_map(|n| {
        proptest::collection::vec(proptest::collection::vec((0..n, 0.1f64..5.0), 0..n), n).prop_map(move |raw| {
            let rows = raw
                .into_iter()
                .enumerate()
                .map(|(v, row)| {
                    let mut seen = std::collections::BTreeMap::new();
                    for (x, w) in row {
                        if x != v {
                            seen.insert(x, w);
                        }
                    }
                    seen.into_iter().collect()
                })
                .collect();
            OutWeights::from_rows(rows).unwrap()
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn transition_is_a_distribution(w in arb_rows(), p in 0.05f64..20.0, q in 0.05f64..20.0, cur_seed in 0usize..100, prev_seed in 0usize..100) {
        let n = w.node_count();
        let cur = cur_seed % n;
        let row = w.row(cur);
        let prev = if row.is_empty() { None } else { Some(prev_seed % n) };
        let d = transition_distribution(&w, prev, cur, p, q);
        prop_assert_eq!(d.len(), row.len());
        if !d.is_empty() {
            let total: f64 = d.iter().map(|x| x.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(d.iter().all(|x| x.1 > 0.0));
        }
        if p == 1.0 && q == 1.0 {
            let unbiased = transition_distribution(&w, None, cur, 1.0, 1.0);
            prop_assert_eq!(d, unbiased);
        }
    }

    #[test]
    fn reweighted_rows_are_stochastic(seed in 0u64..10_000, alpha in 0.001f64..0.999, beta in 0.0f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_graph(&mut rng);
        let part = partition_by(&g, "location").unwrap();
        let m = crosswalk::estimate_closeness(&g, &part, 10, 5, seed).unwrap();
        let biased = crosswalk::reweight(&g, &part, &m, alpha, beta).unwrap();
        for v in 0..g.node_count() {
            let row = biased.weights.row(v);
            prop_assert_eq!(row.len(), g.degree(v));
            if !row.is_empty() {
                let total: f64 = row.iter().map(|r| r.1).sum();
                prop_assert!((total - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn propagation_reaches_a_fixed_point(points in proptest::collection::vec(-5.0f64..5.0, 20..60), labels in proptest::collection::vec(proptest::option::weighted(0.4, 0usize..3), 10..30)) {
        let dim = 2;
        let n = points.len() / dim;
        let pts = &points[..n * dim];
        let mut seeds: Vec<Option<usize>> = (0..n).map(|i| labels[i % labels.len()]).collect();
        seeds[0] = Some(0);
        let g = build_propagation_graph(pts, dim, 3, Bandwidth::Auto).unwrap();
        let out = propagate(&g, &seeds, 3, 5000, 1e-10).unwrap();
        prop_assume!(out.converged);
        for v in 0..n {
            let row = out.distribution(v);
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            if let Some(c) = seeds[v] {
                prop_assert_eq!(row[c], 1.0);
                continue;
            }
            let nbrs = &g.neighbors[v];
            let deg: f64 = nbrs.iter().map(|x| x.1).sum();
            if deg == 0.0 {
                continue;
            }
            for c in 0..3 {
                let avg: f64 = nbrs.iter().map(|&(u, w)| w * out.distribution(u)[c]).sum::<f64>() / deg;
                prop_assert!((avg - row[c]).abs() < 1e-6, "node {} class {}: {} vs {}", v, c, avg, row[c]);
            }
        }
    }

    #[test]
    fn group_metrics_ignore_order(mut q in proptest::collection::vec(0.0f64..1.0, 2..8), shift in 0usize..8) {
        let a = metrics::awareness(&q);
        let d = metrics::disparity(&q);
        let p = metrics::performance(&q);
        let len = q.len();
        q.rotate_left(shift % len);
        q.reverse();
        prop_assert_eq!(a, metrics::awareness(&q));
        prop_assert!((d - metrics::disparity(&q)).abs() < 1e-12);
        prop_assert!((p - metrics::performance(&q)).abs() < 1e-12);
        prop_assert!(d >= 0.0);
        prop_assert!(a >= p);
    }

    #[test]
    fn f1_of_constant_predictor(n_truth in proptest::collection::vec(0usize..3, 3..40), j in 0usize..3) {
        let n = n_truth.len();
        let predicted = vec![j; n];
        let eval: Vec<usize> = (0..n).collect();
        let scores = metrics::per_group_f1("g", &predicted, &n_truth, 3, &eval);
        let nj = n_truth.iter().filter(|&&t| t == j).count() as f64;
        prop_assert!((scores.scores[j] - 2.0 * nj / (n as f64 + nj)).abs() < 1e-12);
        for i in 0..3 {
            if i != j {
                prop_assert_eq!(scores.scores[i], 0.0);
            }
        }
    }
}
