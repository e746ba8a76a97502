//! The masked graph autoencoder and its pretraining loop.

mod checkpoint;
mod config;
pub mod model;
mod train;

pub use checkpoint::{ModelCheckpoint, FORMAT_VERSION};
pub use config::{DecoderConfig, EncoderConfig, ModelConfig, Variant};
pub use model::{decode, embed_nodes, encode, init_model, masked_objective, reconstruction_loss, remask};
pub use train::{batch_mask, batch_node_scores, pretrain, pretrain_with, score_cache, Batch, StepInfo};
