//! Homophily scores and the deviant range.

use serde::{Deserialize, Serialize};

use crate::data::{Graph, NodeDataset};
use crate::tensor::cosine_similarity;

/// Mean cosine similarity of raw input features over the edge list.
/// An edgeless graph scores 1: triggers add edges, so "no edges" is treated
/// as maximally normal.
pub fn graph_homophily(g: &Graph) -> f64 {
    if g.edges.is_empty() {
        return 1.0;
    }
    let total: f64 = g
        .edges
        .iter()
        .map(|&(i, j)| cosine_similarity(g.feature_row(i), g.feature_row(j)))
        .sum();
    total / g.edges.len() as f64
}

/// Pseudo-label homophily of one node: the fraction of its 2-hop ego-graph
/// neighbors sharing its pseudo-label (one-hot cosine similarity equals the
/// agreement indicator). Isolated nodes score 1.
pub fn node_homophily(v: usize, graph: &Graph, pseudo_labels: &[usize]) -> f64 {
    let neighbors = graph.k_hop_neighbors(v, 2);
    if neighbors.is_empty() {
        return 1.0;
    }
    let same = neighbors
        .iter()
        .filter(|&&u| pseudo_labels[u] == pseudo_labels[v])
        .count();
    same as f64 / neighbors.len() as f64
}

/// Per-sample scores with their training-split mean and (population) std.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HomophilyStats {
    /// (sample id, score), ascending by id.
    pub scores: Vec<(usize, f64)>,
    pub mean: f64,
    pub std: f64,
}

impl HomophilyStats {
    pub fn from_scores(mut scores: Vec<(usize, f64)>) -> Self {
        scores.sort_by_key(|&(id, _)| id);
        let n = scores.len().max(1) as f64;
        let mean = scores.iter().map(|&(_, s)| s).sum::<f64>() / n;
        let var = scores.iter().map(|&(_, s)| (s - mean) * (s - mean)).sum::<f64>() / n;
        HomophilyStats {
            scores,
            mean,
            std: var.sqrt(),
        }
    }

    /// Graph-task stats over the train split.
    pub fn from_graph_dataset(ds: &crate::data::GraphDataset) -> Self {
        let scores = ds
            .train_idx
            .iter()
            .map(|&i| (i, graph_homophily(&ds.graphs[i])))
            .collect();
        Self::from_scores(scores)
    }

    /// Node-task stats over train nodes, from warm-up pseudo-labels.
    pub fn from_node_dataset(ds: &NodeDataset, pseudo_labels: &[usize]) -> Self {
        let scores = ds
            .train_idx
            .iter()
            .map(|&v| (v, node_homophily(v, &ds.graph, pseudo_labels)))
            .collect();
        Self::from_scores(scores)
    }

    pub fn score_of(&self, id: usize) -> Option<f64> {
        self.scores
            .binary_search_by_key(&id, |&(i, _)| i)
            .ok()
            .map(|pos| self.scores[pos].1)
    }

    /// Absolute deviation from the mean, for ranking flagged samples.
    pub fn deviance(&self, id: usize) -> f64 {
        self.score_of(id).map(|s| (s - self.mean).abs()).unwrap_or(0.0)
    }
}

/// Ids whose score falls outside `[mean - std, mean + std]`. With identical
/// scores (std = 0) nothing is flagged.
pub fn deviant_range_select(stats: &HomophilyStats) -> Vec<usize> {
    stats
        .scores
        .iter()
        .filter(|&&(_, s)| s < stats.mean - stats.std || s > stats.mean + stats.std)
        .map(|&(id, _)| id)
        .collect()
}
