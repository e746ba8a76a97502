//! Masked graph autoencoder pretraining with structure-guided masking.
//!
//! Nodes are ranked by structural importance (a fixed centrality or a
//! learned scorer), and a curriculum gradually pushes the most important
//! ones into the mask set. A GIN/GCN encoder-decoder learns to reconstruct
//! masked node features under a scaled cosine error; frozen embeddings are
//! then judged by a cross-validated linear probe.
//!
//! Module map:
//!
//! - [`graph`]: graphs, corpora, the JSON-lines format, synthetic corpora
//! - [`scoring`]: centralities and the learnable scorer
//! - [`masking`]: curriculum schedule, priorities and mask selection
//! - [`tensor`], [`nn`]: numerics, autograd, layers, Adam, checkpoints
//! - [`gmae`]: the autoencoder and its training loop
//! - [`eval`]: readout, linear probe, retrieval
//! - [`oracle`]: slow reference implementations for cross-checks

pub mod error;
pub mod eval;
pub mod gmae;
pub mod graph;
pub mod masking;
pub mod nn;
pub mod oracle;
pub mod rng;
pub mod scoring;
pub mod tensor;

pub use error::{Error, Result};
pub use eval::{embed_corpus, linear_probe_cv, nearest_neighbors, CVReport, EmbeddingMatrix, Pooling, ProbeSettings};
pub use gmae::{pretrain, ModelCheckpoint, ModelConfig, Variant};
pub use graph::{load_corpus, Featurization, Graph, GraphCorpus};
pub use masking::{MaskPlan, MaskSchedule, Strategy};
pub use nn::{LayerKind, ParamStore};
pub use scoring::{Metric, ScoreVector};
pub use tensor::Tensor;
