//! Downstream evaluation of frozen graph embeddings.

mod probe;
mod retrieval;

use std::io::{BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use probe::{fit_logistic, linear_probe_cv, stratified_folds, CVReport, LogisticModel, ProbeSettings, Standardizer};
pub use retrieval::nearest_neighbors;

use crate::error::{Error, Result};
use crate::gmae::ModelCheckpoint;
use crate::graph::GraphCorpus;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    Mean,
    Max,
    Sum,
}

impl std::str::FromStr for Pooling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean" => Ok(Pooling::Mean),
            "max" => Ok(Pooling::Max),
            "sum" => Ok(Pooling::Sum),
            _ => Err(Error::InvalidArgument(format!("unknown pooling '{s}'"))),
        }
    }
}

/// Column-wise reduction of node embeddings to one graph vector.
pub fn readout(h: &Tensor, pooling: Pooling) -> Vec<f64> {
    let mut out = match pooling {
        Pooling::Max => vec![f64::NEG_INFINITY; h.cols()],
        _ => vec![0.0; h.cols()],
    };
    for i in 0..h.rows() {
        for (o, &v) in out.iter_mut().zip(h.row(i)) {
            match pooling {
                Pooling::Max => *o = o.max(v),
                _ => *o += v,
            }
        }
    }
    if pooling == Pooling::Mean && h.rows() > 0 {
        out.iter_mut().for_each(|o| *o /= h.rows() as f64);
    }
    if h.rows() == 0 {
        out.iter_mut().for_each(|o| *o = 0.0);
    }
    out
}

/// One embedding per graph, with optional class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    pub rows: Vec<Vec<f64>>,
    pub labels: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EmbeddingLine {
    i: usize,
    v: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    y: Option<usize>,
}

impl EmbeddingMatrix {
    pub fn new(rows: Vec<Vec<f64>>, labels: Option<Vec<usize>>) -> Result<Self> {
        if let Some(l) = &labels {
            if l.len() != rows.len() {
                return Err(Error::shape("EmbeddingMatrix", rows.len(), l.len()));
            }
        }
        if let Some(w) = rows.first().map(Vec::len) {
            if let Some(k) = rows.iter().position(|r| r.len() != w) {
                return Err(Error::InvalidArgument(format!("embedding row {k} has width {}, expected {w}", rows[k].len())));
            }
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("embedding matrix".into()));
        }
        Ok(Self { rows, labels })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    /// JSON lines `{"i": index, "v": [..], "y": label}`.
    pub fn write_jsonl(&self, mut out: impl Write) -> Result<()> {
        for (i, v) in self.rows.iter().enumerate() {
            let line = EmbeddingLine { i, v: v.clone(), y: self.labels.as_ref().map(|l| l[i]) };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl(input: impl BufRead, origin: &std::path::Path) -> Result<Self> {
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for (k, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse { path: origin.to_path_buf(), line: k + 1, message };
            let rec: EmbeddingLine = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
            if rec.i != rows.len() {
                return Err(parse_err(format!("expected index {}, found {}", rows.len(), rec.i)));
            }
            rows.push(rec.v);
            labels.push(rec.y);
        }
        let labels =
            if labels.iter().all(Option::is_some) && !labels.is_empty() { Some(labels.into_iter().flatten().collect()) } else { None };
        Self::new(rows, labels)
    }
}

/// Embeds every graph with the encoder in inference mode (no masking) and
/// pools per the checkpoint's config. `modulate` applies the learned score
/// modulation to the input features for variant L models.
pub fn embed_corpus(ckpt: &ModelCheckpoint, corpus: &GraphCorpus, modulate: bool) -> Result<EmbeddingMatrix> {
    if corpus.feature_dim() != ckpt.input_dim {
        return Err(Error::shape("embed_corpus", ckpt.input_dim, corpus.feature_dim()));
    }
    let rows = corpus
        .graphs()
        .par_iter()
        .map(|g| ckpt.encode_graph(g, modulate).map(|h| readout(&h, ckpt.config.pooling)))
        .collect::<Result<Vec<_>>>()?;
    EmbeddingMatrix::new(rows, corpus.labels())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn readout_examples() {
        let h = Tensor::from_rows(&[vec![1.0, -2.0], vec![1.0, -2.0]]).unwrap();
        assert_eq!(readout(&h, Pooling::Mean), vec![1.0, -2.0]);
        assert_eq!(readout(&h, Pooling::Sum), vec![2.0, -4.0]);
        let h = Tensor::from_rows(&[vec![1.0, -2.0], vec![3.0, -5.0]]).unwrap();
        assert_eq!(readout(&h, Pooling::Max), vec![3.0, -2.0]);
    }

    #[test]
    fn jsonl_round_trip() {
        let m = EmbeddingMatrix::new(vec![vec![0.1, 2.0], vec![-3.5, 1e-300]], Some(vec![1, 0])).unwrap();
        let mut buf = Vec::new();
        m.write_jsonl(&mut buf).unwrap();
        let back = EmbeddingMatrix::read_jsonl(buf.as_slice(), std::path::Path::new("mem")).unwrap();
        assert_eq!(back, m);
        assert!(EmbeddingMatrix::read_jsonl(&b"{\"i\":1,\"v\":[1]}\n"[..], std::path::Path::new("mem")).is_err());
    }

    #[test]
    fn rejects_ragged_rows() {
        assert!(EmbeddingMatrix::new(vec![vec![1.0], vec![1.0, 2.0]], None).is_err());
    }
}
