//! GNN layers with mask-weighted aggregation, projection heads, readout, and
//! full forward passes.

mod config;
mod forward;
mod model;

pub use config::{Arch, ModelConfig};
pub use forward::{
    argmax, forward_graph_on_tape, forward_graph_with_features, forward_node_on_tape, gcn_layer,
    graph_logits, node_logits, readout, register_params, sage_layer, MaskMode,
};
pub use model::GnnModel;

use serde::{Deserialize, Serialize};

/// Masks for one message-passing layer, aligned with a specific graph.
///
/// `edge_masks[e]` weights the graph's `e`-th stored edge (both directions);
/// `self_masks[i]` weights node i's self-loop. Scores and the clean-node set
/// document how the masks were derived.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerMasks {
    pub edge_masks: Vec<f64>,
    pub self_masks: Vec<f64>,
    pub scores: Vec<f64>,
    pub v_clean: Vec<usize>,
}

impl LayerMasks {
    /// All-ones masks: every edge and self-loop passes unweighted.
    pub fn all_ones(num_edges: usize, n: usize) -> Self {
        LayerMasks {
            edge_masks: vec![1.0; num_edges],
            self_masks: vec![1.0; n],
            scores: vec![1.0; n],
            v_clean: (0..n).collect(),
        }
    }

    pub fn in_range(&self) -> bool {
        self.edge_masks
            .iter()
            .chain(&self.self_masks)
            .all(|&m| (0.0..=1.0).contains(&m))
    }
}

/// Per-layer mask sets for one sample, serializable for audit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskSet {
    pub layers: Vec<LayerMasks>,
}

impl MaskSet {
    pub fn all_ones(layers: usize, num_edges: usize, n: usize) -> Self {
        MaskSet {
            layers: (0..layers).map(|_| LayerMasks::all_ones(num_edges, n)).collect(),
        }
    }
}
