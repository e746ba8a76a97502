//! Layer zoo: linear, batch norm, GIN and GCN message passing.
//!
//! Each layer is a pair of functions: `init_*` registers its tensors in a
//! [`ParamStore`] under a name prefix, and the forward function records the
//! computation on a [`Tape`].

use std::sync::Arc;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::ParamStore;
use crate::error::Result;
use crate::rng::Rng;
use crate::tensor::{BatchStats, Propagation, Tape, Tensor, Var};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;
pub const PRELU_INIT: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Gin,
    Gcn,
}

/// Propagation operators of one graph, built once and shared by every
/// layer that runs over it.
#[derive(Debug, Clone)]
pub struct MessagePassing {
    pub sum: Arc<Propagation>,
    pub gcn: Arc<Propagation>,
}

impl MessagePassing {
    pub fn new(graph: &crate::graph::Graph) -> Self {
        Self { sum: graph.sum_aggregator(), gcn: graph.gcn_propagation() }
    }
}

/// Whether batch norm uses batch statistics (and records them) or the
/// stored running averages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Uniform Glorot initialization.
pub fn glorot(rows: usize, cols: usize, rng: &mut Rng) -> Tensor {
    let limit = (6.0 / (rows + cols) as f64).sqrt();
    let data = (0..rows * cols).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::from_vec(rows, cols, data).expect("sized")
}

pub fn init_linear(store: &mut ParamStore, prefix: &str, fan_in: usize, fan_out: usize, bias: bool, rng: &mut Rng) {
    store.insert(format!("{prefix}.weight"), glorot(fan_in, fan_out, rng));
    if bias {
        store.insert(format!("{prefix}.bias"), Tensor::zeros(1, fan_out));
    }
}

pub fn linear(tape: &mut Tape, store: &ParamStore, prefix: &str, x: Var) -> Result<Var> {
    let w = store.bind(tape, &format!("{prefix}.weight"))?;
    let y = tape.matmul(x, w)?;
    let bias = format!("{prefix}.bias");
    if store.contains(&bias) {
        let b = store.bind(tape, &bias)?;
        tape.add_row(y, b)
    } else {
        Ok(y)
    }
}

pub fn init_batchnorm(store: &mut ParamStore, prefix: &str, dim: usize) {
    store.insert(format!("{prefix}.gamma"), Tensor::filled(1, dim, 1.0));
    store.insert(format!("{prefix}.beta"), Tensor::zeros(1, dim));
    store.insert_buffer(format!("{prefix}.running_mean"), Tensor::zeros(1, dim));
    store.insert_buffer(format!("{prefix}.running_var"), Tensor::filled(1, dim, 1.0));
}

/// Per-column standardization with learnable scale and shift. In train
/// mode the batch statistics are recorded on the tape for the caller to
/// fold into the running averages.
pub fn batchnorm(tape: &mut Tape, store: &ParamStore, prefix: &str, x: Var, mode: Mode) -> Result<Var> {
    let gamma = store.bind(tape, &format!("{prefix}.gamma"))?;
    let beta = store.bind(tape, &format!("{prefix}.beta"))?;
    match mode {
        Mode::Train => {
            let (y, mean, var) = tape.batch_norm_train(x, gamma, beta, BN_EPS)?;
            tape.record_batch_stats(BatchStats { prefix: prefix.to_string(), mean, var });
            Ok(y)
        }
        Mode::Eval => {
            let mean = store.get(&format!("{prefix}.running_mean"))?.row(0).to_vec();
            let var = store.get(&format!("{prefix}.running_var"))?.row(0).to_vec();
            tape.batch_norm_eval(x, gamma, beta, &mean, &var, BN_EPS)
        }
    }
}

pub fn init_prelu(store: &mut ParamStore, prefix: &str) {
    store.insert(format!("{prefix}.slope"), Tensor::scalar(PRELU_INIT));
}

pub fn prelu(tape: &mut Tape, store: &ParamStore, prefix: &str, x: Var) -> Result<Var> {
    let k = store.bind(tape, &format!("{prefix}.slope"))?;
    tape.prelu(x, k)
}

pub fn init_gin(store: &mut ParamStore, prefix: &str, fan_in: usize, mlp_hidden: usize, fan_out: usize, rng: &mut Rng) {
    store.insert(format!("{prefix}.eps"), Tensor::scalar(0.0));
    init_linear(store, &format!("{prefix}.mlp.lin1"), fan_in, mlp_hidden, true, rng);
    init_batchnorm(store, &format!("{prefix}.mlp.bn"), mlp_hidden);
    init_linear(store, &format!("{prefix}.mlp.lin2"), mlp_hidden, fan_out, true, rng);
}

/// `(1 + ε)·H + Σ_{j∈N(i)} H_j` followed by Linear → BatchNorm → ReLU → Linear.
pub fn gin_layer(tape: &mut Tape, store: &ParamStore, prefix: &str, aggregator: &Arc<Propagation>, h: Var, mode: Mode) -> Result<Var> {
    let combined = gin_combine(tape, store, prefix, aggregator, h)?;
    let z = linear(tape, store, &format!("{prefix}.mlp.lin1"), combined)?;
    let z = batchnorm(tape, store, &format!("{prefix}.mlp.bn"), z, mode)?;
    let z = tape.relu(z)?;
    linear(tape, store, &format!("{prefix}.mlp.lin2"), z)
}

/// The aggregation half of a GIN layer: `(1 + ε)·H + A·H`.
pub fn gin_combine(tape: &mut Tape, store: &ParamStore, prefix: &str, aggregator: &Arc<Propagation>, h: Var) -> Result<Var> {
    let eps = store.bind(tape, &format!("{prefix}.eps"))?;
    let scaled = tape.scale_by(h, eps)?;
    let own = tape.add(h, scaled)?;
    let agg = tape.propagate(h, aggregator)?;
    tape.add(own, agg)
}

pub fn init_gcn(store: &mut ParamStore, prefix: &str, fan_in: usize, fan_out: usize, rng: &mut Rng) {
    init_linear(store, prefix, fan_in, fan_out, false, rng);
}

/// `D̃^{-1/2}(A + I)D̃^{-1/2} · H · W`, optionally followed by ReLU.
pub fn gcn_layer(tape: &mut Tape, store: &ParamStore, prefix: &str, propagation: &Arc<Propagation>, h: Var, activate: bool) -> Result<Var> {
    let hw = linear(tape, store, prefix, h)?;
    let out = tape.propagate(hw, propagation)?;
    if activate {
        tape.relu(out)
    } else {
        Ok(out)
    }
}
