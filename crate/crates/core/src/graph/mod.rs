//! Graphs, corpora and featurization.

mod io;
mod synth;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Propagation, Tensor};

pub use io::{load_corpus, parse_corpus, write_corpus};
pub use synth::{generate_synthetic_corpus, Motif, SynthSpec};

/// Default degree clamp for degree one-hot features.
pub const DEFAULT_MAX_DEGREE: usize = 64;

/// A simple undirected graph with node features and an optional class label.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
    features: Tensor,
    label: Option<usize>,
    node_labels: Option<Vec<usize>>,
}

impl Graph {
    /// Validates and builds a graph. Edges may be given in either
    /// orientation; self-loops, duplicates and out-of-range endpoints are
    /// rejected.
    pub fn new(n: usize, edges: &[(usize, usize)], features: Tensor, label: Option<usize>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGraph("graph must have at least one node".into()));
        }
        if features.rows() != n {
            return Err(Error::InvalidGraph(format!("feature matrix has {} rows for {n} nodes", features.rows())));
        }
        let mut adjacency = vec![Vec::new(); n];
        let mut normalized = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            if a >= n || b >= n {
                return Err(Error::InvalidGraph(format!("edge ({a}, {b}) has endpoint outside [0, {n})")));
            }
            if a == b {
                return Err(Error::InvalidGraph(format!("self-loop on node {a}")));
            }
            normalized.push((a.min(b), a.max(b)));
            adjacency[a].push(b);
            adjacency[b].push(a);
        }
        normalized.sort_unstable();
        if let Some(w) = normalized.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({}, {})", w[0].0, w[0].1)));
        }
        for nbrs in &mut adjacency {
            nbrs.sort_unstable();
        }
        Ok(Graph { n, edges: normalized, adjacency, features, label, node_labels: None })
    }

    /// Structure-only graph with an empty (n×0) feature matrix.
    pub fn structure(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        Self::new(n, edges, Tensor::zeros(n, 0), None)
    }

    pub fn with_node_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::InvalidGraph(format!("{} node labels for {} nodes", labels.len(), self.n)));
        }
        self.node_labels = Some(labels);
        Ok(self)
    }

    pub fn with_features(mut self, features: Tensor) -> Result<Self> {
        if features.rows() != self.n {
            return Err(Error::InvalidGraph(format!("feature matrix has {} rows for {} nodes", features.rows(), self.n)));
        }
        self.features = features;
        Ok(self)
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    /// Undirected edges as `(i, j)` with `i < j`, sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn features(&self) -> &Tensor {
        &self.features
    }

    pub fn label(&self) -> Option<usize> {
        self.label
    }

    pub fn node_labels(&self) -> Option<&[usize]> {
        self.node_labels.as_deref()
    }

    /// Neighbors of `i`, ascending.
    pub fn neighbors(&self, i: usize) -> Result<&[usize]> {
        self.adjacency.get(i).map(Vec::as_slice).ok_or_else(|| Error::InvalidArgument(format!("node {i} out of range [0, {})", self.n)))
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.adjacency.iter().map(Vec::len).collect()
    }

    /// `out_i = Σ_{j ∈ N(i)} in_j`.
    pub fn sum_aggregator(&self) -> Arc<Propagation> {
        let rows = self.adjacency.iter().map(|nb| nb.iter().map(|&j| (j, 1.0)).collect()).collect();
        Arc::new(Propagation::new(self.n, rows).expect("adjacency is in range"))
    }

    /// Symmetric-normalized propagation with self-loops:
    /// `D̃^{-1/2} (A + I) D̃^{-1/2}`.
    pub fn gcn_propagation(&self) -> Arc<Propagation> {
        let inv_sqrt: Vec<f64> = self.adjacency.iter().map(|nb| 1.0 / ((nb.len() + 1) as f64).sqrt()).collect();
        let rows = (0..self.n)
            .map(|i| {
                let mut r: Vec<(usize, f64)> = self.adjacency[i].iter().map(|&j| (j, inv_sqrt[i] * inv_sqrt[j])).collect();
                r.push((i, inv_sqrt[i] * inv_sqrt[i]));
                r
            })
            .collect();
        Arc::new(Propagation::new(self.n, rows).expect("adjacency is in range"))
    }

    /// Relabels nodes: node `i` of `self` becomes node `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Graph> {
        if perm.len() != self.n {
            return Err(Error::shape("Graph::permuted", self.n, perm.len()));
        }
        let mut seen = vec![false; self.n];
        for &p in perm {
            if p >= self.n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::InvalidArgument("not a permutation".into()));
            }
        }
        let edges: Vec<_> = self.edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
        let mut feats = Tensor::zeros(self.n, self.features.cols());
        for i in 0..self.n {
            feats.row_mut(perm[i]).copy_from_slice(self.features.row(i));
        }
        let mut g = Graph::new(self.n, &edges, feats, self.label)?;
        if let Some(nl) = &self.node_labels {
            let mut out = vec![0; self.n];
            for i in 0..self.n {
                out[perm[i]] = nl[i];
            }
            g.node_labels = Some(out);
        }
        Ok(g)
    }

    /// Block-diagonal union of several graphs, with row offsets of each part.
    pub fn disjoint_union(parts: &[&Graph]) -> Result<(Graph, Vec<usize>)> {
        let mut offsets = Vec::with_capacity(parts.len());
        let mut edges = Vec::new();
        let mut n = 0;
        for g in parts {
            offsets.push(n);
            edges.extend(g.edges.iter().map(|&(a, b)| (a + n, b + n)));
            n += g.n;
        }
        let feats = Tensor::vstack(&parts.iter().map(|g| &g.features).collect::<Vec<_>>())?;
        Ok((Graph::new(n, &edges, feats, None)?, offsets))
    }
}

/// How node features were produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Featurization {
    /// Use the stored `features` rows.
    Raw,
    /// One-hot of each node's integer label.
    LabelOnehot,
    /// One-hot of `min(degree, max_degree)`, `max_degree + 1` buckets.
    DegreeOnehot { max_degree: usize },
}

impl Featurization {
    pub fn degree_default() -> Self {
        Featurization::DegreeOnehot { max_degree: DEFAULT_MAX_DEGREE }
    }

    /// Parses `raw`, `label_onehot`, `degree_onehot` or `degree_onehot:<D>`
    /// (hyphens accepted in place of underscores).
    pub fn parse(s: &str) -> Result<Self> {
        let norm = s.trim().replace('-', "_");
        let (head, arg) = match norm.split_once(':') {
            Some((h, a)) => (h.to_string(), Some(a.to_string())),
            None => (norm.clone(), None),
        };
        match (head.as_str(), arg) {
            ("raw", None) => Ok(Featurization::Raw),
            ("label_onehot", None) => Ok(Featurization::LabelOnehot),
            ("degree_onehot", None) => Ok(Self::degree_default()),
            ("degree_onehot", Some(a)) => a
                .parse()
                .map(|max_degree| Featurization::DegreeOnehot { max_degree })
                .map_err(|_| Error::InvalidArgument(format!("bad degree clamp '{a}'"))),
            _ => Err(Error::InvalidArgument(format!("unknown featurization '{s}'"))),
        }
    }
}

/// Record of the featurization applied to a corpus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeaturizationMeta {
    pub featurization: Featurization,
    pub feature_dim: usize,
}

/// An ordered collection of graphs sharing a feature width.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphCorpus {
    graphs: Vec<Graph>,
    feature_dim: usize,
    class_count: usize,
    meta: FeaturizationMeta,
}

impl GraphCorpus {
    pub fn new(graphs: Vec<Graph>, meta: FeaturizationMeta) -> Result<Self> {
        let feature_dim = meta.feature_dim;
        for (k, g) in graphs.iter().enumerate() {
            if g.features.cols() != feature_dim {
                return Err(Error::InvalidGraph(format!(
                    "graph {k} has feature width {}, corpus width is {feature_dim}",
                    g.features.cols()
                )));
            }
        }
        let class_count = graphs.iter().filter_map(|g| g.label).max().map_or(0, |m| m + 1);
        Ok(GraphCorpus { graphs, feature_dim, class_count, meta })
    }

    pub fn graphs(&self) -> &[Graph] {
        &self.graphs
    }

    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn meta(&self) -> FeaturizationMeta {
        self.meta
    }

    pub fn labels(&self) -> Option<Vec<usize>> {
        self.graphs.iter().map(Graph::label).collect()
    }
}

/// One-hot rows for the given indices.
pub(crate) fn one_hot(indices: impl Iterator<Item = usize>, width: usize) -> Tensor {
    let idx: Vec<usize> = indices.collect();
    let mut t = Tensor::zeros(idx.len(), width);
    for (i, &k) in idx.iter().enumerate() {
        t.set(i, k, 1.0);
    }
    t
}

/// Degree one-hot features with bucket `min(degree, max_degree)`.
pub fn degree_onehot(graph: &Graph, max_degree: usize) -> Tensor {
    one_hot(graph.degrees().into_iter().map(|d| d.min(max_degree)), max_degree + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::structure(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn neighbors_examples() {
        let p3 = path3();
        assert_eq!(p3.neighbors(1).unwrap(), &[0, 2]);
        let iso = Graph::structure(1, &[]).unwrap();
        assert!(iso.neighbors(0).unwrap().is_empty());
        let k4 = Graph::structure(4, &[(2, 3), (0, 1), (3, 0), (1, 2), (0, 2), (1, 3)]).unwrap();
        assert_eq!(k4.neighbors(2).unwrap(), &[0, 1, 3]);
        assert!(p3.neighbors(3).is_err());
    }

    #[test]
    fn rejects_malformed_edges() {
        assert!(Graph::structure(2, &[(0, 0)]).is_err());
        assert!(Graph::structure(2, &[(0, 1), (1, 0)]).is_err());
        assert!(Graph::structure(2, &[(0, 2)]).is_err());
        assert!(Graph::structure(0, &[]).is_err());
    }

    #[test]
    fn degree_buckets_clamp() {
        let star = Graph::structure(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]).unwrap();
        let f = degree_onehot(&star, 3);
        assert_eq!(f.row(0), &[0.0, 0.0, 0.0, 1.0]);
        assert_eq!(f.row(1), &[0.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn featurization_parsing() {
        assert_eq!(Featurization::parse("raw").unwrap(), Featurization::Raw);
        assert_eq!(Featurization::parse("label-onehot").unwrap(), Featurization::LabelOnehot);
        assert_eq!(Featurization::parse("degree_onehot:8").unwrap(), Featurization::DegreeOnehot { max_degree: 8 });
        assert!(Featurization::parse("spectral").is_err());
    }

    #[test]
    fn gcn_propagation_rows_on_regular_graph() {
        let k2 = Graph::structure(2, &[(0, 1)]).unwrap();
        let p = k2.gcn_propagation().to_dense();
        assert!((p.get(0, 0) - 0.5).abs() < 1e-15 && (p.get(0, 1) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn union_offsets() {
        let (u, off) = Graph::disjoint_union(&[&path3(), &path3()]).unwrap();
        assert_eq!(off, vec![0, 3]);
        assert_eq!(u.node_count(), 6);
        assert_eq!(u.neighbors(4).unwrap(), &[3, 5]);
    }
}
