//! Natural scores, clean-node selection, and edge-mask construction.
//!
//! A node's natural score is the mean cosine similarity of its projected
//! embedding to its 1-hop neighbors' projections. The top-beta scoring
//! nodes form the clean set; edges between two clean nodes keep their
//! adjacency weight, every other edge is soft-masked by the clamped
//! projection similarity, and a non-clean node's self-loop takes its mean
//! incident edge mask.

use crate::data::Graph;
use crate::error::Result;
use crate::gnn::{GnnModel, LayerMasks, MaskMode, MaskSet};

/// Per-node mean of incident edge values; isolated nodes default to 1
/// (no edge evidence against them).
pub fn natural_scores_from_edge_values(
    edge_values: &[f64],
    edges: &[(usize, usize)],
    n: usize,
) -> Vec<f64> {
    debug_assert_eq!(edge_values.len(), edges.len());
    let mut sums = vec![0.0; n];
    let mut counts = vec![0usize; n];
    for (e, &(i, j)) in edges.iter().enumerate() {
        sums[i] += edge_values[e];
        counts[i] += 1;
        sums[j] += edge_values[e];
        counts[j] += 1;
    }
    (0..n)
        .map(|i| if counts[i] == 0 { 1.0 } else { sums[i] / counts[i] as f64 })
        .collect()
}

/// Natural scores for given per-node projections: mean neighbor cosine
/// similarity over the graph's edges.
pub fn natural_scores(projections: &[f64], proj_dim: usize, graph: &Graph) -> Vec<f64> {
    let cos: Vec<f64> = graph
        .edges
        .iter()
        .map(|&(i, j)| {
            crate::tensor::cosine_similarity(
                &projections[i * proj_dim..(i + 1) * proj_dim],
                &projections[j * proj_dim..(j + 1) * proj_dim],
            )
        })
        .collect();
    natural_scores_from_edge_values(&cos, &graph.edges, graph.n)
}

/// Top `ceil(beta * n)` nodes by score, ties broken by node index.
pub fn select_clean_nodes(scores: &[f64], beta: f64) -> Vec<usize> {
    let n = scores.len();
    let take = ((beta * n as f64).ceil() as usize).min(n);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut out: Vec<usize> = order.into_iter().take(take).collect();
    out.sort_unstable();
    out
}

/// Full per-layer mask computation for one graph under the model's current
/// parameters, as used at inference time. Runs the adaptive forward on a
/// throwaway tape and returns the recorded masks.
pub fn compute_edge_masks(model: &GnnModel, graph: &Graph) -> Result<MaskSet> {
    let (_, masks) = crate::gnn::graph_logits(model, graph, MaskMode::Adaptive)?;
    Ok(masks.expect("adaptive forward returns masks"))
}

/// Binary node-task masks from a fixed clean-node set: an edge survives only
/// when both endpoints are clean, and a suspect node's whole row (self-loop
/// included) is zeroed. Identical across layers.
pub fn node_masks_from_clean_set(graph: &Graph, clean: &[bool], layers: usize) -> MaskSet {
    let edge_masks: Vec<f64> = graph
        .edges
        .iter()
        .map(|&(i, j)| if clean[i] && clean[j] { 1.0 } else { 0.0 })
        .collect();
    let self_masks: Vec<f64> = clean.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    let layer = LayerMasks {
        edge_masks,
        self_masks,
        scores: clean.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect(),
        v_clean: (0..graph.n).filter(|&i| clean[i]).collect(),
    };
    MaskSet {
        layers: vec![layer; layers],
    }
}
