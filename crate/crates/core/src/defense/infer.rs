//! Inference with per-sample mask computation.

use crate::data::Graph;
use crate::error::Result;
use crate::gnn::{argmax, graph_logits, node_logits, GnnModel, MaskMode, MaskSet};

use super::masks::node_masks_from_clean_set;

/// Graph-task inference: per-layer masks are recomputed from the current
/// parameters, aggregation is mask-weighted, and the argmax class is
/// returned together with the masks for audit.
pub fn infer_made(model: &GnnModel, graph: &Graph) -> Result<(usize, MaskSet)> {
    let (logits, masks) = graph_logits(model, graph, MaskMode::Adaptive)?;
    Ok((argmax(&logits), masks.expect("adaptive forward returns masks")))
}

/// Binary masks for a (possibly grown) node graph from the clean flags
/// fixed at isolation time: any node beyond the flagged range — e.g. a
/// trigger appended after isolation — is suspect.
pub fn node_task_masks(graph: &Graph, clean_nodes: &[bool], layers: usize) -> MaskSet {
    let mut clean = vec![false; graph.n];
    for (i, flag) in clean.iter_mut().enumerate() {
        *flag = clean_nodes.get(i).copied().unwrap_or(false);
    }
    node_masks_from_clean_set(graph, &clean, layers)
}

/// Node-task inference for one node of an evaluation graph.
pub fn infer_made_node(
    model: &GnnModel,
    graph: &Graph,
    clean_nodes: &[bool],
    node: usize,
) -> Result<usize> {
    let masks = node_task_masks(graph, clean_nodes, model.config.layers());
    let (logits, _) = node_logits(model, graph, MaskMode::Fixed(&masks))?;
    let c = model.config.num_classes;
    Ok(argmax(&logits[node * c..(node + 1) * c]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{Arch, ModelConfig};

    #[test]
    fn inference_is_deterministic() {
        let model = GnnModel::init(
            ModelConfig {
                arch: Arch::Gcn,
                feature_dim: 3,
                hidden_dims: vec![4, 4],
                num_classes: 2,
                beta: 0.8,
                lambda: 5.0,
            },
            7,
        )
        .unwrap();
        let mut g = Graph::new(0, 4, 3, 0);
        g.set_feature_row(0, &[1.0, 0.0, 0.2]);
        g.set_feature_row(1, &[0.9, 0.1, 0.2]);
        g.set_feature_row(2, &[0.0, 1.0, 0.2]);
        g.set_feature_row(3, &[0.1, 0.9, 0.2]);
        for &(a, b) in &[(0, 1), (1, 2), (2, 3)] {
            g.add_edge(a, b).unwrap();
        }
        let (p1, m1) = infer_made(&model, &g).unwrap();
        let (p2, m2) = infer_made(&model, &g).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(m1, m2);
        assert!(m1.layers.iter().all(|l| l.in_range()));
    }

    #[test]
    fn appended_nodes_are_suspect_by_default() {
        let mut g = Graph::new(0, 3, 1, 0);
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 2).unwrap();
        // clean flags were fixed when the graph had 2 nodes
        let masks = node_task_masks(&g, &[true, true], 1);
        let l = &masks.layers[0];
        assert_eq!(l.edge_masks, vec![1.0, 0.0]);
        assert_eq!(l.self_masks, vec![1.0, 1.0, 0.0]);
    }
}
