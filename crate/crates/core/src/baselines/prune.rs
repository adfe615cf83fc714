//! Static similarity-based edge pruning: drop every edge whose endpoint
//! features are less similar than a floor, then train vanilla on the result.
//! Binary features use Jaccard similarity, continuous features use cosine.

use crate::data::{Graph, GraphDataset};
use crate::error::{Error, Result};
use crate::tensor::cosine_similarity;

fn is_binary(values: &[f64]) -> bool {
    values.iter().all(|&x| x == 0.0 || x == 1.0)
}

fn jaccard(u: &[f64], v: &[f64]) -> f64 {
    let mut inter = 0usize;
    let mut union = 0usize;
    for (a, b) in u.iter().zip(v) {
        let (a, b) = (*a != 0.0, *b != 0.0);
        if a && b {
            inter += 1;
        }
        if a || b {
            union += 1;
        }
    }
    if union == 0 {
        1.0
    } else {
        inter as f64 / union as f64
    }
}

/// Endpoint similarity used for pruning.
pub(crate) fn edge_similarity(g: &Graph, i: usize, j: usize, binary: bool) -> f64 {
    if binary {
        jaccard(g.feature_row(i), g.feature_row(j))
    } else {
        cosine_similarity(g.feature_row(i), g.feature_row(j))
    }
}

/// Drops every edge with endpoint similarity below `tau`.
pub fn prune_graph(g: &Graph, tau: f64, binary: bool) -> Graph {
    let mut out = g.clone();
    out.edges = g
        .edges
        .iter()
        .copied()
        .filter(|&(i, j)| edge_similarity(g, i, j, binary) >= tau)
        .collect();
    out
}

/// Prunes every graph of the dataset. Purely structural preprocessing;
/// training proceeds vanilla on the result.
pub fn similarity_prune(ds: &GraphDataset, tau: f64) -> Result<GraphDataset> {
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::invalid("similarity_prune", "tau outside [0, 1]"));
    }
    let binary = ds.graphs.iter().all(|g| is_binary(&g.features));
    let mut out = ds.clone();
    for g in &mut out.graphs {
        *g = prune_graph(g, tau, binary);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureProvenance;

    fn toy_ds() -> GraphDataset {
        let mut g = Graph::new(0, 3, 2, 0);
        g.set_feature_row(0, &[1.0, 0.0]);
        g.set_feature_row(1, &[1.0, 0.0]);
        g.set_feature_row(2, &[0.0, 1.0]);
        g.add_edge(0, 1).unwrap(); // identical features
        g.add_edge(1, 2).unwrap(); // disjoint features
        GraphDataset {
            name: "toy".into(),
            graphs: vec![g],
            num_classes: 2,
            feature_dim: 2,
            train_idx: vec![0],
            test_idx: vec![],
            provenance: FeatureProvenance::Synthetic,
        }
    }

    #[test]
    fn tau_zero_prunes_nothing_tau_one_keeps_identical_only() {
        let ds = toy_ds();
        let none = similarity_prune(&ds, 0.0).unwrap();
        assert_eq!(none.graphs[0].edges.len(), 2);
        let strict = similarity_prune(&ds, 1.0).unwrap();
        assert_eq!(strict.graphs[0].edges, vec![(0, 1)]);
    }

    #[test]
    fn pruning_is_idempotent() {
        let ds = toy_ds();
        let once = similarity_prune(&ds, 0.5).unwrap();
        let twice = similarity_prune(&once, 0.5).unwrap();
        for (a, b) in once.graphs.iter().zip(&twice.graphs) {
            assert_eq!(a.edges, b.edges);
        }
    }

    #[test]
    fn binary_features_use_jaccard() {
        // rows [1,0] vs [1,0]: jaccard 1; [1,0] vs [0,1]: jaccard 0
        let ds = toy_ds();
        let pruned = similarity_prune(&ds, 0.5).unwrap();
        assert_eq!(pruned.graphs[0].edges, vec![(0, 1)]);
    }
}
