mod common;

use common::{arb_connected, arb_graph, arb_graph_and_perm, path};
use proptest::prelude::*;
use smae_core::nn::{grad_check, MessagePassing};
use smae_core::oracle;
use smae_core::rng::{stream, Role};
use smae_core::scoring::{
    betweenness_scores, closeness_scores, degree_scores, init_scorer, learnable_scores, pagerank, predefined_scores, score_graph,
    ScorerConfig, DEFAULT_DAMPING, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};
use smae_core::tensor::Tape;
use smae_core::{Graph, LayerKind, Metric, ParamStore, Tensor};

fn linf(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn scorer(kind: LayerKind, alpha: f64, d: usize, seed: u64) -> (ParamStore, ScorerConfig) {
    let cfg = ScorerConfig { layer_type: kind, alpha, hidden: 4 };
    let mut store = ParamStore::new();
    init_scorer(&mut store, &cfg, d, &mut stream(seed, Role::ParamInit, 0, 0));
    if kind == LayerKind::Gin {
        store.set("scorer.gnn.eps", Tensor::scalar(0.3)).unwrap();
    }
    (store, cfg)
}

fn featured(g: &Graph, d: usize, seed: u64) -> Graph {
    use rand::Rng;
    let mut rng = stream(seed, Role::Synthetic, 9, 9);
    let data = (0..g.node_count() * d).map(|_| rng.gen_range(-1.0..1.0)).collect();
    g.clone().with_features(Tensor::from_vec(g.node_count(), d, data).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn pagerank_matches_dense_power_iteration(g in arb_connected(1, 200)) {
        let pr = pagerank(&g, DEFAULT_DAMPING, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER).unwrap();
        let dense = oracle::pagerank_dense(&g, DEFAULT_DAMPING, 1e-12, 1000);
        prop_assert!(pr.converged);
        prop_assert!(linf(pr.scores.values(), &dense) < 1e-8);
        prop_assert!((pr.scores.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn betweenness_matches_path_counting_exactly(g in arb_graph(12)) {
        let fast = betweenness_scores(&g);
        let naive = oracle::betweenness_naive(&g);
        prop_assert_eq!(fast.values(), naive.as_slice());
    }

    #[test]
    fn closeness_matches_distance_matrix(g in arb_graph(14)) {
        prop_assert!(linf(closeness_scores(&g).values(), &oracle::closeness_direct(&g)) <= 1e-12);
    }

    #[test]
    fn predefined_scores_are_permutation_equivariant((g, perm) in arb_graph_and_perm(10)) {
        let h = g.permuted(&perm).unwrap();
        for metric in [Metric::Pagerank, Metric::Degree, Metric::Closeness, Metric::Betweenness] {
            let a = predefined_scores(&g, metric).unwrap();
            let b = predefined_scores(&h, metric).unwrap();
            for i in 0..g.node_count() {
                prop_assert!((a.values()[i] - b.values()[perm[i]]).abs() < 1e-12, "{metric} node {i}");
            }
        }
    }

    #[test]
    fn learnable_scores_are_equivariant_probabilities((g, perm) in arb_graph_and_perm(10), seed in 0u64..1000) {
        let g = featured(&g, 3, seed);
        let h = g.permuted(&perm).unwrap();
        for kind in [LayerKind::Gin, LayerKind::Gcn] {
            let (store, cfg) = scorer(kind, 0.7, 3, seed);
            let a = score_graph(&store, &cfg, &g).unwrap();
            let b = score_graph(&store, &cfg, &h).unwrap();
            for i in 0..g.node_count() {
                prop_assert!(a.values()[i] > 0.0 && a.values()[i] < 1.0);
                prop_assert!((a.values()[i] - b.values()[perm[i]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn degree_order_is_scale_invariant(g in arb_graph(12), c in 0.001f64..1000.0) {
        let d = degree_scores(&g);
        let scaled: Vec<f64> = d.values().iter().map(|v| v * c).collect();
        let order = |v: &[f64]| {
            let mut idx: Vec<usize> = (0..v.len()).collect();
            idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]).then(a.cmp(&b)));
            idx
        };
        prop_assert_eq!(order(d.values()), order(&scaled));
    }
}

#[test]
fn pagerank_on_p3_matches_oracle() {
    let g = path(3);
    let pr = pagerank(&g, 0.85, 1e-12, 1000).unwrap();
    let dense = oracle::pagerank_dense(&g, 0.85, 1e-12, 1000);
    assert!(linf(pr.scores.values(), &dense) < 1e-10);
    let s = pr.scores.values();
    assert!((s[0] - s[2]).abs() < 1e-15 && s[1] > s[0]);
}

#[test]
fn learnable_scores_match_hand_arithmetic_on_p3() {
    let x = vec![vec![1.0, 0.0], vec![0.5, -1.0], vec![2.0, 1.0]];
    let g = path(3).with_features(Tensor::from_rows(&x).unwrap()).unwrap();
    let (store, cfg) = scorer(LayerKind::Gin, 0.7, 2, 11);
    let p = |n: &str| store.get(n).unwrap().to_rows();
    let (eps, wg, bg) = (0.3, p("scorer.gnn.weight"), p("scorer.gnn.bias"));
    let (w1, b1, w2, b2) = (p("scorer.mlp.lin1.weight"), p("scorer.mlp.lin1.bias"), p("scorer.mlp.lin2.weight"), p("scorer.mlp.lin2.bias"));
    let nbrs: [&[usize]; 3] = [&[1], &[0, 2], &[1]];
    for i in 0..3 {
        let agg: Vec<f64> = (0..2).map(|c| (1.0 + eps) * x[i][c] + nbrs[i].iter().map(|&j| x[j][c]).sum::<f64>()).collect();
        let z_gnn = bg[0][0] + agg[0] * wg[0][0] + agg[1] * wg[1][0];
        let hidden: Vec<f64> = (0..4).map(|h| (b1[0][h] + x[i][0] * w1[0][h] + x[i][1] * w1[1][h]).max(0.0)).collect();
        let z_mlp = b2[0][0] + (0..4).map(|h| hidden[h] * w2[h][0]).sum::<f64>();
        let expected = 1.0 / (1.0 + (-(z_gnn + 0.7 * z_mlp)).exp());
        let got = score_graph(&store, &cfg, &g).unwrap().values()[i];
        assert!((got - expected).abs() < 1e-14, "node {i}: {got} vs {expected}");
    }
}

#[test]
fn learnable_scorer_gradient_matches_finite_differences() {
    let g = featured(&small_graph(), 3, 4);
    for kind in [LayerKind::Gin, LayerKind::Gcn] {
        let (mut store, cfg) = scorer(kind, 0.7, 3, 4);
        store.insert("x", g.features().clone());
        let mp = MessagePassing::new(&g);
        let report = grad_check(
            &store,
            |tape: &mut Tape, s: &ParamStore| {
                let x = s.bind(tape, "x")?;
                let scores = learnable_scores(tape, s, &cfg, &mp, x)?;
                let m = tape.row_scale(x, scores)?;
                tape.sum_squares(m)
            },
            1e-5,
            0,
            0,
        )
        .unwrap();
        assert!(report.max_rel_error < 1e-4, "{kind:?}: {:?}", report.worst());
        assert!(report.checks.iter().any(|c| c.name == "x"));
    }
}

fn small_graph() -> Graph {
    Graph::structure(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (1, 4), (4, 5)]).unwrap()
}
