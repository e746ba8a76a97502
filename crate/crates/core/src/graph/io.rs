//! Line-delimited JSON corpus format.
//!
//! One graph per line:
//!
//! ```text
//! {"n": 3, "edges": [[0,1],[1,2]], "node_labels": [0,1,0], "features": [[..],..], "label": 1}
//! ```
//!
//! `node_labels`, `features` and `label` are optional; which ones are
//! required depends on the requested featurization. Blank lines are skipped.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{degree_onehot, one_hot, Featurization, FeaturizationMeta, Graph, GraphCorpus};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    n: usize,
    edges: Vec<[usize; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    node_labels: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<usize>,
}

pub fn load_corpus(path: impl AsRef<Path>, featurization: Featurization) -> Result<GraphCorpus> {
    let path = path.as_ref();
    let file = File::open(path)?;
    parse_corpus(BufReader::new(file), path, featurization)
}

/// Parses a corpus from any reader; `origin` is used in error messages.
pub fn parse_corpus(reader: impl BufRead, origin: &Path, featurization: Featurization) -> Result<GraphCorpus> {
    let parse_err = |line: usize, message: String| Error::Parse { path: origin.to_path_buf(), line, message };

    let mut staged: Vec<(usize, Graph, Option<Vec<Vec<f64>>>)> = Vec::new();
    for (k, line) in reader.lines().enumerate() {
        let lineno = k + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| parse_err(lineno, e.to_string()))?;
        let edges: Vec<(usize, usize)> = rec.edges.iter().map(|e| (e[0], e[1])).collect();
        let graph = Graph::structure(rec.n, &edges).map_err(|e| parse_err(lineno, e.to_string()))?;
        let mut graph = Graph { label: rec.label, ..graph };
        if let Some(nl) = rec.node_labels {
            graph = graph.with_node_labels(nl).map_err(|e| parse_err(lineno, e.to_string()))?;
        }
        staged.push((lineno, graph, rec.features));
    }

    let (graphs, feature_dim) = match featurization {
        Featurization::Raw => {
            let mut width = None;
            let mut out = Vec::with_capacity(staged.len());
            for (lineno, g, feats) in staged {
                let rows = feats.ok_or_else(|| parse_err(lineno, "raw featurization needs a 'features' field".into()))?;
                let x = Tensor::from_rows(&rows).map_err(|e| parse_err(lineno, format!("inconsistent feature width: {e}")))?;
                let w = if rows.is_empty() { 0 } else { x.cols() };
                match width {
                    None => width = Some(w),
                    Some(prev) if prev != w => {
                        return Err(parse_err(lineno, format!("inconsistent feature width: {w} vs {prev}")));
                    }
                    _ => {}
                }
                out.push(g.with_features(x).map_err(|e| parse_err(lineno, e.to_string()))?);
            }
            (out, width.unwrap_or(0))
        }
        Featurization::LabelOnehot => {
            let mut max_label = 0;
            for (lineno, g, _) in &staged {
                let nl = g.node_labels().ok_or_else(|| parse_err(*lineno, "label_onehot featurization needs 'node_labels'".into()))?;
                max_label = max_label.max(nl.iter().copied().max().unwrap_or(0));
            }
            let width = max_label + 1;
            let out = staged
                .into_iter()
                .map(|(_, g, _)| {
                    let x = one_hot(g.node_labels().unwrap().iter().copied(), width);
                    Graph { features: x, ..g }
                })
                .collect();
            (out, width)
        }
        Featurization::DegreeOnehot { max_degree } => {
            let out = staged
                .into_iter()
                .map(|(_, g, _)| {
                    let x = degree_onehot(&g, max_degree);
                    Graph { features: x, ..g }
                })
                .collect();
            (out, max_degree + 1)
        }
    };

    GraphCorpus::new(graphs, FeaturizationMeta { featurization, feature_dim })
}

/// Writes a corpus in the line format, always including the feature rows so
/// the result reloads under [`Featurization::Raw`].
pub fn write_corpus(corpus: &GraphCorpus, mut out: impl Write) -> Result<()> {
    for g in corpus.graphs() {
        let rec = Record {
            n: g.node_count(),
            edges: g.edges().iter().map(|&(a, b)| [a, b]).collect(),
            node_labels: g.node_labels().map(<[usize]>::to_vec),
            features: Some(g.features().to_rows()),
            label: g.label(),
        };
        serde_json::to_writer(&mut out, &rec)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
