#![allow(dead_code)]

use proptest::prelude::*;
use smae_core::{Graph, Tensor};

/// Random simple graph on `1..=max_n` nodes, each pair joined with
/// probability 1/2 before `sparsity` thins it.
pub fn arb_graph(max_n: usize) -> impl Strategy<Value = Graph> {
    (1..=max_n).prop_flat_map(|n| {
        let pairs = n * (n - 1) / 2;
        (Just(n), proptest::collection::vec(any::<bool>(), pairs), proptest::collection::vec(any::<bool>(), pairs)).prop_map(|(n, a, b)| {
            let mut edges = Vec::new();
            let mut k = 0;
            for i in 0..n {
                for j in i + 1..n {
                    if a[k] && b[k] {
                        edges.push((i, j));
                    }
                    k += 1;
                }
            }
            Graph::structure(n, &edges).unwrap()
        })
    })
}

/// Random connected graph: a random recursive tree plus up to `n` extra
/// edges.
pub fn arb_connected(min_n: usize, max_n: usize) -> impl Strategy<Value = Graph> {
    (min_n..=max_n).prop_flat_map(|n| {
        (
            Just(n),
            proptest::collection::vec(any::<prop::sample::Index>(), n.saturating_sub(1)),
            proptest::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 0..=n),
        )
            .prop_map(|(n, parents, extra)| {
                let mut set = std::collections::BTreeSet::new();
                for (i, p) in parents.iter().enumerate() {
                    let child = i + 1;
                    set.insert((p.index(child), child));
                }
                for (a, b) in extra {
                    let (a, b) = (a.index(n), b.index(n));
                    if a != b {
                        set.insert((a.min(b), a.max(b)));
                    }
                }
                Graph::structure(n, &set.into_iter().collect::<Vec<_>>()).unwrap()
            })
    })
}

pub fn with_random_features(g: Graph, d: usize, values: &[f64]) -> Graph {
    let n = g.node_count();
    let data: Vec<f64> = (0..n * d).map(|k| values[k % values.len()]).collect();
    g.with_features(Tensor::from_vec(n, d, data).unwrap()).unwrap()
}

/// A graph together with a random relabeling of its nodes.
pub fn arb_graph_and_perm(max_n: usize) -> impl Strategy<Value = (Graph, Vec<usize>)> {
    arb_graph(max_n).prop_flat_map(|g| {
        let n = g.node_count();
        (Just(g), Just((0..n).collect::<Vec<_>>()).prop_shuffle())
    })
}

pub fn path(n: usize) -> Graph {
    let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
    Graph::structure(n, &edges).unwrap()
}
