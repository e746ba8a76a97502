//! Structural importance scores for nodes.

mod centrality;
mod learnable;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use centrality::{
    betweenness_scores, closeness_scores, degree_scores, pagerank, PageRank, DEFAULT_DAMPING, DEFAULT_MAX_ITER, DEFAULT_TOLERANCE,
};
pub use learnable::{init_scorer, learnable_scores, modulate_features, score_graph, ScorerConfig, DEFAULT_SCORER_HIDDEN, SCORER_PREFIX};

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Pagerank,
    Degree,
    Closeness,
    Betweenness,
    Learnable,
}

impl Metric {
    pub const PREDEFINED: [Metric; 4] = [Metric::Pagerank, Metric::Degree, Metric::Closeness, Metric::Betweenness];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Pagerank => "pagerank",
            Metric::Degree => "degree",
            Metric::Closeness => "closeness",
            Metric::Betweenness => "betweenness",
            Metric::Learnable => "learnable",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [Metric::Pagerank, Metric::Degree, Metric::Closeness, Metric::Betweenness, Metric::Learnable]
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown metric '{s}'")))
    }
}

/// One nonnegative score per node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreVector {
    values: Vec<f64>,
    metric: Metric,
}

impl ScoreVector {
    pub fn new(values: Vec<f64>, metric: Metric) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidArgument(format!("{metric} score {i} is {v}; scores must be finite and nonnegative")));
        }
        Ok(Self { values, metric })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Scores a graph with one of the parameter-free metrics. PageRank uses the
/// default damping, tolerance and iteration cap.
pub fn predefined_scores(graph: &Graph, metric: Metric) -> Result<ScoreVector> {
    match metric {
        Metric::Pagerank => Ok(pagerank(graph, DEFAULT_DAMPING, DEFAULT_TOLERANCE, DEFAULT_MAX_ITER)?.scores),
        Metric::Degree => Ok(degree_scores(graph)),
        Metric::Closeness => Ok(closeness_scores(graph)),
        Metric::Betweenness => Ok(betweenness_scores(graph)),
        Metric::Learnable => Err(Error::InvalidArgument("learnable scores need a trained scorer".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn metric_names_round_trip() {
        for m in [Metric::Pagerank, Metric::Degree, Metric::Closeness, Metric::Betweenness, Metric::Learnable] {
            assert_eq!(m.as_str().parse::<Metric>().unwrap(), m);
            assert_eq!(serde_json::to_string(&m).unwrap(), format!("\"{m}\""));
        }
        assert!("eigenvector".parse::<Metric>().is_err());
    }

    #[test]
    fn score_vector_rejects_negative_and_nan() {
        assert!(ScoreVector::new(vec![0.0, 1.0], Metric::Degree).is_ok());
        assert!(ScoreVector::new(vec![-1.0], Metric::Degree).is_err());
        assert!(ScoreVector::new(vec![f64::NAN], Metric::Degree).is_err());
    }

    #[test]
    fn learnable_is_not_predefined() {
        let g = Graph::structure(2, &[(0, 1)]).unwrap();
        assert!(predefined_scores(&g, Metric::Learnable).is_err());
    }
}
