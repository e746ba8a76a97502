use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::Pooling;
use crate::masking::MaskSchedule;
use crate::nn::LayerKind;
use crate::scoring::{Metric, ScorerConfig};

/// `P` ranks nodes with a fixed centrality metric; `L` learns the scores
/// jointly with the autoencoder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    P,
    L,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncoderConfig {
    pub layer_type: LayerKind,
    pub num_layers: usize,
    pub hidden: usize,
}

impl Default for EncoderConfig {
    fn default() -> Self {
        Self { layer_type: LayerKind::Gin, num_layers: 2, hidden: 32 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DecoderConfig {
    pub layer_type: LayerKind,
    pub num_layers: usize,
}

impl Default for DecoderConfig {
    fn default() -> Self {
        Self { layer_type: LayerKind::Gin, num_layers: 1 }
    }
}

/// Every pretraining hyperparameter. Missing keys take the defaults below;
/// unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub variant: Variant,
    pub encoder: EncoderConfig,
    pub decoder: DecoderConfig,
    pub sce_gamma: f64,
    pub schedule: MaskSchedule,
    /// Ranking metric for variant P.
    pub scorer_metric: Metric,
    /// Scorer network for variant L.
    pub scorer: ScorerConfig,
    pub pooling: Pooling,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            variant: Variant::P,
            encoder: EncoderConfig::default(),
            decoder: DecoderConfig::default(),
            sce_gamma: 2.0,
            schedule: MaskSchedule::default(),
            scorer_metric: Metric::Pagerank,
            scorer: ScorerConfig::default(),
            pooling: Pooling::Mean,
            lr: 0.001,
            weight_decay: 0.0,
            batch_size: 32,
            seed: 0,
        }
    }
}

impl ModelConfig {
    pub fn epochs(&self) -> usize {
        self.schedule.epochs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.encoder.num_layers == 0 || self.decoder.num_layers == 0 {
            return bad("encoder and decoder need at least one layer".into());
        }
        if self.encoder.hidden == 0 {
            return bad("hidden size must be >= 1".into());
        }
        if !(self.sce_gamma >= 1.0 && self.sce_gamma.is_finite()) {
            return bad(format!("sce_gamma must be >= 1, got {}", self.sce_gamma));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay must be >= 0, got {}", self.weight_decay));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if self.variant == Variant::P && self.scorer_metric == Metric::Learnable {
            return bad("variant P needs a predefined scorer_metric".into());
        }
        self.schedule.validate()?;
        self.scorer.validate()
    }
}
