//! Planted-motif corpora for controlled experiments.
//!
//! Each graph is a uniformly random recursive tree ("backbone") with one
//! motif attached by a single edge; the class label is the index of the
//! motif. Node ids are shuffled so the motif position carries no signal.

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{degree_onehot, Featurization, FeaturizationMeta, Graph, GraphCorpus};
use crate::error::{Error, Result};
use crate::rng::{stream, Role};

pub const MOTIF_SIZE: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motif {
    /// A 5-cycle.
    Cycle,
    /// A 5-clique.
    Clique,
}

impl Motif {
    fn edges(self, offset: usize) -> Vec<(usize, usize)> {
        match self {
            Motif::Cycle => (0..MOTIF_SIZE).map(|i| (offset + i, offset + (i + 1) % MOTIF_SIZE)).collect(),
            Motif::Clique => (0..MOTIF_SIZE).flat_map(|i| (i + 1..MOTIF_SIZE).map(move |j| (offset + i, offset + j))).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub graphs_per_class: usize,
    /// Backbone tree size; every graph has `base_size + 5` nodes.
    pub base_size: usize,
    /// One class per motif, labeled by position.
    pub motifs: Vec<Motif>,
    /// Degree clamp for the degree one-hot features.
    pub max_degree: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec { graphs_per_class: 100, base_size: 12, motifs: vec![Motif::Cycle, Motif::Clique], max_degree: 8 }
    }
}

pub fn generate_synthetic_corpus(spec: &SynthSpec, seed: u64) -> Result<GraphCorpus> {
    if spec.graphs_per_class < 1 {
        return Err(Error::InvalidArgument("graphs_per_class must be at least 1".into()));
    }
    if spec.base_size < 6 {
        return Err(Error::InvalidArgument(format!("base_size must be at least 6, got {}", spec.base_size)));
    }
    if spec.motifs.is_empty() {
        return Err(Error::InvalidArgument("at least one motif is required".into()));
    }
    let n = spec.base_size + MOTIF_SIZE;
    let mut graphs = Vec::with_capacity(spec.graphs_per_class * spec.motifs.len());
    for k in 0..spec.graphs_per_class {
        for (class, &motif) in spec.motifs.iter().enumerate() {
            let mut rng = stream(seed, Role::Synthetic, class as u64, k as u64);
            let mut edges: Vec<(usize, usize)> = (1..spec.base_size).map(|v| (rng.gen_range(0..v), v)).collect();
            edges.extend(motif.edges(spec.base_size));
            edges.push((rng.gen_range(0..spec.base_size), spec.base_size + rng.gen_range(0..MOTIF_SIZE)));

            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let edges: Vec<_> = edges.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
            let g = Graph::structure(n, &edges)?;
            let x = degree_onehot(&g, spec.max_degree);
            graphs.push(Graph { features: x, label: Some(class), ..g });
        }
    }
    GraphCorpus::new(
        graphs,
        FeaturizationMeta { featurization: Featurization::DegreeOnehot { max_degree: spec.max_degree }, feature_dim: spec.max_degree + 1 },
    )
}
