//! Named hyperparameter presets for the seven unsupervised benchmarks.
//!
//! Architecture, mask ratio, learning rate, batch size, pooling, `β` and
//! `α` are the published per-dataset settings. Epoch counts and the SCE
//! exponent are not published with them and follow the GraphMAE defaults
//! for the same datasets.

use smae_core::gmae::{DecoderConfig, EncoderConfig};
use smae_core::graph::DEFAULT_MAX_DEGREE;
use smae_core::masking::MaskSchedule;
use smae_core::scoring::ScorerConfig;
use smae_core::{Featurization, LayerKind, Metric, ModelConfig, Pooling, Variant};

struct Row {
    name: &'static str,
    p: [f64; 2],
    hidden: usize,
    layer: LayerKind,
    layers: [usize; 2],
    lr: f64,
    batch: usize,
    pooling: Pooling,
    beta: [f64; 2],
    alpha: f64,
    epochs: usize,
    sce_gamma: f64,
    node_labels: bool,
}

use LayerKind::{Gcn, Gin};
use Pooling::{Max, Mean, Sum};

// Columns indexed [P, L] where the two variants differ.
const ROWS: [Row; 7] = [
    Row {
        name: "imdb-b",
        p: [0.5, 0.5],
        hidden: 512,
        layer: Gin,
        layers: [2, 2],
        lr: 0.00015,
        batch: 32,
        pooling: Mean,
        beta: [0.25, 0.75],
        alpha: 0.1,
        epochs: 60,
        sce_gamma: 1.0,
        node_labels: false,
    },
    Row {
        name: "imdb-m",
        p: [0.25, 0.25],
        hidden: 512,
        layer: Gin,
        layers: [2, 3],
        lr: 0.005,
        batch: 32,
        pooling: Mean,
        beta: [0.85, 0.75],
        alpha: 0.1,
        epochs: 50,
        sce_gamma: 1.0,
        node_labels: false,
    },
    Row {
        name: "proteins",
        p: [0.25, 0.25],
        hidden: 512,
        layer: Gin,
        layers: [3, 3],
        lr: 0.00015,
        batch: 32,
        pooling: Max,
        beta: [0.5, 0.85],
        alpha: 100.0,
        epochs: 100,
        sce_gamma: 1.0,
        node_labels: true,
    },
    Row {
        name: "collab",
        p: [0.75, 0.5],
        hidden: 256,
        layer: Gin,
        layers: [2, 2],
        lr: 0.00015,
        batch: 32,
        pooling: Max,
        beta: [0.5, 0.5],
        alpha: 100.0,
        epochs: 20,
        sce_gamma: 1.0,
        node_labels: false,
    },
    Row {
        name: "mutag",
        p: [0.9, 0.3],
        hidden: 32,
        layer: Gin,
        layers: [5, 5],
        lr: 0.0005,
        batch: 64,
        pooling: Sum,
        beta: [0.85, 0.25],
        alpha: 10.0,
        epochs: 20,
        sce_gamma: 2.0,
        node_labels: true,
    },
    Row {
        name: "reddit-b",
        p: [0.75, 0.75],
        hidden: 512,
        layer: Gcn,
        layers: [2, 2],
        lr: 0.005,
        batch: 8,
        pooling: Max,
        beta: [0.25, 0.25],
        alpha: 0.1,
        epochs: 100,
        sce_gamma: 2.0,
        node_labels: false,
    },
    Row {
        name: "nci1",
        p: [0.3, 0.25],
        hidden: 512,
        layer: Gin,
        layers: [3, 3],
        lr: 0.005,
        batch: 16,
        pooling: Sum,
        beta: [0.25, 0.85],
        alpha: 10.0,
        epochs: 300,
        sce_gamma: 2.0,
        node_labels: true,
    },
];

pub const NAMES: [&str; 7] = ["imdb-b", "imdb-m", "proteins", "collab", "mutag", "reddit-b", "nci1"];

/// A preset: the model config plus the node featurization it expects.
#[derive(Debug, Clone, PartialEq)]
pub struct Preset {
    pub name: &'static str,
    pub config: ModelConfig,
    pub featurization: Featurization,
}

/// Looks up `name` (case-insensitive, `_` and `-` interchangeable) for the
/// given variant.
pub fn preset(name: &str, variant: Variant) -> Option<Preset> {
    let key = name.trim().to_ascii_lowercase().replace('_', "-");
    let row = ROWS.iter().find(|r| r.name == key)?;
    let v = match variant {
        Variant::P => 0,
        Variant::L => 1,
    };
    let config = ModelConfig {
        variant,
        encoder: EncoderConfig { layer_type: row.layer, num_layers: row.layers[v], hidden: row.hidden },
        decoder: DecoderConfig { layer_type: row.layer, num_layers: 1 },
        sce_gamma: row.sce_gamma,
        schedule: MaskSchedule {
            p: row.p[v],
            beta: row.beta[v],
            epochs: row.epochs,
            warmup_ratio: if variant == Variant::L && row.name == "proteins" { 0.2 } else { 0.0 },
            ..MaskSchedule::default()
        },
        scorer_metric: Metric::Pagerank,
        scorer: ScorerConfig { layer_type: if row.name == "mutag" { Gcn } else { Gin }, alpha: row.alpha, ..ScorerConfig::default() },
        pooling: row.pooling,
        lr: row.lr,
        weight_decay: 0.0,
        batch_size: row.batch,
        seed: 0,
    };
    let featurization =
        if row.node_labels { Featurization::LabelOnehot } else { Featurization::DegreeOnehot { max_degree: DEFAULT_MAX_DEGREE } };
    Some(Preset { name: row.name, config, featurization })
}
