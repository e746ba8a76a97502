use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{embed_nodes, init_model};
use super::ModelConfig;
use crate::error::{Error, Result};
use crate::graph::{FeaturizationMeta, Graph};
use crate::nn::checkpoint::{read_container, write_container};
use crate::nn::{MessagePassing, ParamStore};
use crate::tensor::Tensor;

pub const FORMAT_VERSION: u32 = 1;

/// A trained model: parameters, the config that produced them and the
/// per-epoch mean loss.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub store: ParamStore,
    pub config: ModelConfig,
    pub input_dim: usize,
    pub loss_log: Vec<f64>,
    pub featurization: Option<FeaturizationMeta>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Meta {
    format_version: u32,
    config: ModelConfig,
    input_dim: usize,
    loss_log: Vec<f64>,
    featurization: Option<FeaturizationMeta>,
}

impl ModelCheckpoint {
    pub fn write_to(&self, out: impl Write) -> Result<()> {
        let meta = Meta {
            format_version: FORMAT_VERSION,
            config: self.config.clone(),
            input_dim: self.input_dim,
            loss_log: self.loss_log.clone(),
            featurization: self.featurization,
        };
        write_container(&self.store, serde_json::to_value(meta)?, out)
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        Ok(buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    /// Reads a checkpoint and checks that its tensors are exactly the ones
    /// its config declares.
    pub fn read_from(input: impl std::io::Read) -> Result<Self> {
        let (store, meta) = read_container(input)?;
        let meta: Meta = serde_json::from_value(meta)?;
        if meta.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!("unsupported format version {}", meta.format_version)));
        }
        let expected = init_model(&meta.config, meta.input_dim)?;
        for (name, e) in expected.iter() {
            let got = store.entry(name).map_err(|_| Error::Checkpoint(format!("missing tensor {name}")))?;
            if got.value.shape() != e.value.shape() {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, config implies {:?}",
                    got.value.shape(),
                    e.value.shape()
                )));
            }
        }
        if let Some(extra) = store.names().find(|n| !expected.contains(n)) {
            return Err(Error::Checkpoint(format!("unexpected tensor {extra}")));
        }
        Ok(Self { store, config: meta.config, input_dim: meta.input_dim, loss_log: meta.loss_log, featurization: meta.featurization })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(BufReader::new(File::open(path)?))
    }

    /// Unmasked node embeddings of one graph in inference mode.
    pub fn encode_graph(&self, graph: &Graph, modulate: bool) -> Result<Tensor> {
        if graph.features().cols() != self.input_dim {
            return Err(Error::shape("encode_graph", self.input_dim, graph.features().cols()));
        }
        embed_nodes(&self.store, &self.config, &MessagePassing::new(graph), graph.features(), modulate)
    }
}
