mod common;

use std::path::Path;

use common::{arb_graph, with_random_features};
use proptest::prelude::*;
use smae_core::graph::{degree_onehot, generate_synthetic_corpus, parse_corpus, write_corpus, FeaturizationMeta, Motif, SynthSpec};
use smae_core::oracle;
use smae_core::{Featurization, Graph, GraphCorpus};

fn edge_set(g: &Graph) -> std::collections::BTreeSet<(usize, usize)> {
    g.edges().iter().map(|&(a, b)| (a.min(b), a.max(b))).collect()
}

fn arb_corpus() -> impl Strategy<Value = GraphCorpus> {
    let graph = (arb_graph(9), proptest::collection::vec(-1e6f64..1e6, 1..8), proptest::option::of(0usize..3));
    proptest::collection::vec(graph, 1..6).prop_map(|parts| {
        let graphs = parts
            .into_iter()
            .map(|(g, vals, label)| {
                let g = with_random_features(g, 3, &vals);
                let x = g.features().clone();
                let edges = g.edges().to_vec();
                Graph::new(g.node_count(), &edges, x, label).unwrap()
            })
            .collect();
        GraphCorpus::new(graphs, FeaturizationMeta { featurization: Featurization::Raw, feature_dim: 3 }).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn corpus_round_trips_through_the_line_format(corpus in arb_corpus()) {
        let mut buf = Vec::new();
        write_corpus(&corpus, &mut buf).unwrap();
        let back = parse_corpus(buf.as_slice(), Path::new("mem"), Featurization::Raw).unwrap();
        prop_assert_eq!(back.len(), corpus.len());
        prop_assert_eq!(back.feature_dim(), corpus.feature_dim());
        for (a, b) in corpus.graphs().iter().zip(back.graphs()) {
            prop_assert_eq!(a.node_count(), b.node_count());
            prop_assert_eq!(edge_set(a), edge_set(b));
            prop_assert_eq!(a.label(), b.label());
            let bits = |g: &Graph| g.features().data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
            prop_assert_eq!(bits(a), bits(b));
        }
    }

    #[test]
    fn degree_onehot_rows_pick_the_clamped_degree(g in arb_graph(12), d_max in 0usize..6) {
        let x = degree_onehot(&g, d_max);
        prop_assert_eq!(x.cols(), d_max + 1);
        for i in 0..g.node_count() {
            prop_assert_eq!(x.row(i).iter().sum::<f64>(), 1.0);
            prop_assert_eq!(x.get(i, g.degree(i).min(d_max)), 1.0);
        }
    }

    #[test]
    fn neighbor_lists_are_sorted_and_symmetric(g in arb_graph(12)) {
        let n = g.node_count();
        for i in 0..n {
            let nb = g.neighbors(i).unwrap();
            prop_assert!(nb.windows(2).all(|w| w[0] < w[1]));
            prop_assert!(!nb.contains(&i));
            for &j in nb {
                prop_assert!(g.neighbors(j).unwrap().contains(&i));
            }
        }
        prop_assert!(g.neighbors(n).is_err());
    }
}

#[test]
fn planted_motifs_are_found_by_exhaustive_search() {
    let spec = SynthSpec { graphs_per_class: 10, base_size: 12, motifs: vec![Motif::Cycle, Motif::Clique], ..SynthSpec::default() };
    let corpus = generate_synthetic_corpus(&spec, 7).unwrap();
    assert_eq!(corpus, generate_synthetic_corpus(&spec, 7).unwrap());
    for g in corpus.graphs() {
        match g.label() {
            Some(0) => {
                assert!(oracle::contains_cycle(g, 5));
                assert!(!oracle::contains_clique(g, 5));
            }
            Some(1) => assert!(oracle::contains_clique(g, 5)),
            other => panic!("unexpected label {other:?}"),
        }
    }
}

#[test]
fn synthetic_graphs_are_connected() {
    let corpus = generate_synthetic_corpus(&SynthSpec::default(), 3).unwrap();
    assert_eq!(corpus.len(), 200);
    for g in corpus.graphs() {
        let d = oracle::floyd_warshall(g);
        assert!(d[0].iter().all(|&x| x < g.node_count()));
    }
}
