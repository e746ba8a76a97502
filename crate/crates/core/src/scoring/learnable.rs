//! Trainable node scorer and score-based feature modulation.
//!
//! `s = sigmoid(z_gnn + α·z_mlp)` where `z_gnn` is one message-passing layer
//! mapping `d → 1` (no activation) and `z_mlp` a per-node perceptron
//! `Linear → ReLU → Linear`.

use serde::{Deserialize, Serialize};

use super::{Metric, ScoreVector};
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::layers::{gin_combine, init_linear, linear};
use crate::nn::{LayerKind, MessagePassing, ParamStore};
use crate::rng::Rng;
use crate::tensor::{Tape, Tensor, Var};

pub const SCORER_PREFIX: &str = "scorer";
pub const DEFAULT_SCORER_HIDDEN: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScorerConfig {
    pub layer_type: LayerKind,
    pub alpha: f64,
    pub hidden: usize,
}

impl Default for ScorerConfig {
    fn default() -> Self {
        Self { layer_type: LayerKind::Gin, alpha: 1.0, hidden: DEFAULT_SCORER_HIDDEN }
    }
}

impl ScorerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("scorer alpha must be finite and >= 0, got {}", self.alpha)));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidArgument("scorer hidden size must be >= 1".into()));
        }
        Ok(())
    }
}

pub fn init_scorer(store: &mut ParamStore, cfg: &ScorerConfig, fan_in: usize, rng: &mut Rng) {
    let p = SCORER_PREFIX;
    if cfg.layer_type == LayerKind::Gin {
        store.insert(format!("{p}.gnn.eps"), Tensor::scalar(0.0));
    }
    init_linear(store, &format!("{p}.gnn"), fan_in, 1, true, rng);
    init_linear(store, &format!("{p}.mlp.lin1"), fan_in, cfg.hidden, true, rng);
    init_linear(store, &format!("{p}.mlp.lin2"), cfg.hidden, 1, true, rng);
}

/// Records the scorer on the tape and returns the `n × 1` score column.
pub fn learnable_scores(tape: &mut Tape, store: &ParamStore, cfg: &ScorerConfig, mp: &MessagePassing, x: Var) -> Result<Var> {
    let p = SCORER_PREFIX;
    let z_gnn = match cfg.layer_type {
        LayerKind::Gin => {
            let agg = gin_combine(tape, store, &format!("{p}.gnn"), &mp.sum, x)?;
            linear(tape, store, &format!("{p}.gnn"), agg)?
        }
        LayerKind::Gcn => {
            let xw = linear(tape, store, &format!("{p}.gnn"), x)?;
            tape.propagate(xw, &mp.gcn)?
        }
    };
    // With α = 0 the MLP term adds exact zeros, leaving the GNN logits intact.
    let h = linear(tape, store, &format!("{p}.mlp.lin1"), x)?;
    let h = tape.relu(h)?;
    let z_mlp = linear(tape, store, &format!("{p}.mlp.lin2"), h)?;
    let z_mlp = tape.scale(z_mlp, cfg.alpha)?;
    let logits = tape.add(z_gnn, z_mlp)?;
    tape.sigmoid(logits)
}

/// Row `i` of the result is `s_i · x_i`.
pub fn modulate_features(tape: &mut Tape, x: Var, scores: Var) -> Result<Var> {
    tape.row_scale(x, scores)
}

/// Evaluates the scorer on one graph's own features.
pub fn score_graph(store: &ParamStore, cfg: &ScorerConfig, graph: &Graph) -> Result<ScoreVector> {
    let mut tape = Tape::new();
    let x = tape.constant(graph.features().clone())?;
    let s = learnable_scores(&mut tape, store, cfg, &MessagePassing::new(graph), x)?;
    ScoreVector::new(tape.value(s).data().to_vec(), Metric::Learnable)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Role};

    fn p3() -> Graph {
        let x = Tensor::from_rows(&[vec![1.0, 0.0], vec![0.5, -1.0], vec![2.0, 1.0]]).unwrap();
        Graph::structure(3, &[(0, 1), (1, 2)]).unwrap().with_features(x).unwrap()
    }

    fn scorer(kind: LayerKind, alpha: f64) -> (ParamStore, ScorerConfig) {
        let cfg = ScorerConfig { layer_type: kind, alpha, hidden: 3 };
        let mut store = ParamStore::new();
        init_scorer(&mut store, &cfg, 2, &mut stream(5, Role::ParamInit, 0, 0));
        (store, cfg)
    }

    #[test]
    fn zero_weights_give_one_half() {
        let (mut store, cfg) = scorer(LayerKind::Gin, 1.0);
        let names: Vec<String> = store.names().map(str::to_string).collect();
        for name in names {
            let t = store.get(&name).unwrap();
            let z = Tensor::zeros(t.rows(), t.cols());
            store.set(&name, z).unwrap();
        }
        assert_eq!(score_graph(&store, &cfg, &p3()).unwrap().values(), &[0.5; 3]);
    }

    #[test]
    fn alpha_zero_is_gnn_only() {
        let (store, cfg) = scorer(LayerKind::Gin, 0.0);
        let (_, with_mlp) = scorer(LayerKind::Gin, 0.7);
        let g = p3();
        let w = store.get("scorer.gnn.weight").unwrap();
        let b = store.get("scorer.gnn.bias").unwrap().get(0, 0);
        let x = g.features();
        let expected: Vec<f64> = (0..3)
            .map(|i| {
                let mut agg = x.row(i).to_vec();
                for &j in g.neighbors(i).unwrap() {
                    agg.iter_mut().zip(x.row(j)).for_each(|(a, v)| *a += v);
                }
                crate::tensor::sigmoid(agg[0] * w.get(0, 0) + agg[1] * w.get(1, 0) + b)
            })
            .collect();
        let got = score_graph(&store, &cfg, &g).unwrap();
        assert_eq!(got.values(), expected.as_slice());
        assert_ne!(score_graph(&store, &with_mlp, &g).unwrap().values(), expected.as_slice());
    }

    #[test]
    fn modulation_examples() {
        let mut tape = Tape::new();
        let x = tape.constant(Tensor::from_rows(&[vec![2.0, 4.0], vec![1.0, 1.0]]).unwrap()).unwrap();
        let s = tape.constant(Tensor::column_vector(&[0.5, 0.0])).unwrap();
        let y = modulate_features(&mut tape, x, s).unwrap();
        assert_eq!(tape.value(y).data(), &[1.0, 2.0, 0.0, 0.0]);
        let ones = tape.constant(Tensor::column_vector(&[1.0, 1.0])).unwrap();
        let y = modulate_features(&mut tape, x, ones).unwrap();
        assert_eq!(tape.value(y), tape.value(x));
        let short = tape.constant(Tensor::column_vector(&[1.0])).unwrap();
        assert!(modulate_features(&mut tape, x, short).is_err());
    }

    #[test]
    fn gcn_scorer_outputs_are_probabilities() {
        let (store, cfg) = scorer(LayerKind::Gcn, 10.0);
        let s = score_graph(&store, &cfg, &p3()).unwrap();
        assert!(s.values().iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
