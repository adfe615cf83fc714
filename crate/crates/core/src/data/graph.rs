//! Core sample types: a single graph, a graph-classification corpus, and a
//! node-classification dataset.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An undirected attributed graph with a class label.
///
/// Edges are stored once in canonical `(i, j)` form with `i < j`; no
/// self-loops are stored (self-loop handling belongs to the model).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Graph {
    /// Stable sample identifier within its dataset.
    pub id: usize,
    pub n: usize,
    pub edges: Vec<(usize, usize)>,
    /// Row-major `n x feature_dim`.
    pub features: Vec<f64>,
    pub feature_dim: usize,
    pub label: usize,
}

impl Graph {
    pub fn new(id: usize, n: usize, feature_dim: usize, label: usize) -> Self {
        Graph {
            id,
            n,
            edges: Vec::new(),
            features: vec![0.0; n * feature_dim],
            feature_dim,
            label,
        }
    }

    /// Adds an undirected edge, canonicalizing and deduplicating. Self-loops
    /// are rejected.
    pub fn add_edge(&mut self, a: usize, b: usize) -> Result<bool> {
        if a == b {
            return Err(Error::invalid("add_edge", format!("self-loop at node {a}")));
        }
        if a >= self.n || b >= self.n {
            return Err(Error::invalid(
                "add_edge",
                format!("edge ({a},{b}) out of range for {} nodes", self.n),
            ));
        }
        let e = (a.min(b), a.max(b));
        if self.edges.contains(&e) {
            return Ok(false);
        }
        self.edges.push(e);
        Ok(true)
    }

    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.feature_dim..(i + 1) * self.feature_dim]
    }

    pub fn set_feature_row(&mut self, i: usize, row: &[f64]) {
        debug_assert_eq!(row.len(), self.feature_dim);
        self.features[i * self.feature_dim..(i + 1) * self.feature_dim].copy_from_slice(row);
    }

    /// Neighbor lists (both directions of each stored edge).
    pub fn adjacency_lists(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(i, j) in &self.edges {
            adj[i].push(j);
            adj[j].push(i);
        }
        adj
    }

    pub fn degree(&self, v: usize) -> usize {
        self.edges
            .iter()
            .filter(|&&(i, j)| i == v || j == v)
            .count()
    }

    /// Sorts edges for canonical comparison/serialization order.
    pub fn sort_edges(&mut self) {
        self.edges.sort_unstable();
    }

    /// All nodes within `hops` of `v`, excluding `v` itself.
    pub fn k_hop_neighbors(&self, v: usize, hops: usize) -> Vec<usize> {
        let adj = self.adjacency_lists();
        let mut dist = vec![usize::MAX; self.n];
        dist[v] = 0;
        let mut queue = std::collections::VecDeque::from([v]);
        let mut out = Vec::new();
        while let Some(u) = queue.pop_front() {
            if dist[u] == hops {
                continue;
            }
            for &w in &adj[u] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[u] + 1;
                    out.push(w);
                    queue.push_back(w);
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// How a parsed dataset's feature rows were constructed; kept so the
/// TU-format serializer can reproduce the source files.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum FeatureProvenance {
    /// One-hot over the node-label vocabulary (stored original label values).
    OneHotLabels { vocab: Vec<i64> },
    /// Raw attribute rows.
    Attributes,
    /// `[attributes | one-hot labels]` concatenation.
    AttributesAndLabels { vocab: Vec<i64>, attr_dim: usize },
    /// Constant scalar 1 (dataset had neither labels nor attributes).
    ConstantOne,
    /// Generated in memory.
    Synthetic,
}

impl FeatureProvenance {
    /// Offset and width of the one-hot label block, when present.
    pub fn onehot_block(&self) -> Option<(usize, usize)> {
        match self {
            FeatureProvenance::OneHotLabels { vocab } => Some((0, vocab.len())),
            FeatureProvenance::AttributesAndLabels { vocab, attr_dim } => {
                Some((*attr_dim, vocab.len()))
            }
            _ => None,
        }
    }
}

/// A graph-classification corpus with train/test index splits.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphDataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    pub provenance: FeatureProvenance,
}

impl GraphDataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn train_graphs(&self) -> impl Iterator<Item = &Graph> {
        self.train_idx.iter().map(|&i| &self.graphs[i])
    }

    pub fn validate(&self) -> Result<()> {
        for g in &self.graphs {
            if g.feature_dim != self.feature_dim {
                return Err(Error::invalid(
                    "dataset",
                    format!("graph {} has feature dim {}", g.id, g.feature_dim),
                ));
            }
            if g.label >= self.num_classes {
                return Err(Error::invalid(
                    "dataset",
                    format!("graph {} label {} >= {}", g.id, g.label, self.num_classes),
                ));
            }
            if g.features.len() != g.n * g.feature_dim {
                return Err(Error::invalid("dataset", "feature buffer size mismatch"));
            }
            for &(i, j) in &g.edges {
                if i >= j || j >= g.n {
                    return Err(Error::invalid(
                        "dataset",
                        format!("graph {} has non-canonical edge ({i},{j})", g.id),
                    ));
                }
            }
        }
        let mut seen = vec![false; self.graphs.len()];
        for &i in self.train_idx.iter().chain(&self.test_idx) {
            if i >= self.graphs.len() || seen[i] {
                return Err(Error::invalid("dataset", "split indices overlap or overflow"));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

/// A node-classification dataset: one large graph, per-node labels, and
/// train/validation/test node sets.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NodeDataset {
    pub graph: Graph,
    pub labels: Vec<usize>,
    pub num_classes: usize,
    pub train_idx: Vec<usize>,
    pub val_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
}

impl NodeDataset {
    pub fn validate(&self) -> Result<()> {
        if self.labels.len() != self.graph.n {
            return Err(Error::invalid("node_dataset", "labels must cover all nodes"));
        }
        if let Some(&l) = self.labels.iter().find(|&&l| l >= self.num_classes) {
            return Err(Error::invalid(
                "node_dataset",
                format!("label {l} >= {}", self.num_classes),
            ));
        }
        let mut seen = vec![false; self.graph.n];
        for &i in self
            .train_idx
            .iter()
            .chain(&self.val_idx)
            .chain(&self.test_idx)
        {
            if i >= self.graph.n || seen[i] {
                return Err(Error::invalid("node_dataset", "split node sets must be disjoint"));
            }
            seen[i] = true;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edges_canonicalize_and_dedupe() {
        let mut g = Graph::new(0, 3, 1, 0);
        assert!(g.add_edge(2, 0).unwrap());
        assert!(!g.add_edge(0, 2).unwrap());
        assert_eq!(g.edges, vec![(0, 2)]);
        assert!(g.add_edge(1, 1).is_err());
        assert!(g.add_edge(0, 3).is_err());
    }

    #[test]
    fn k_hop_neighbors_on_a_path() {
        // 0 - 1 - 2 - 3
        let mut g = Graph::new(0, 4, 1, 0);
        g.add_edge(0, 1).unwrap();
        g.add_edge(1, 2).unwrap();
        g.add_edge(2, 3).unwrap();
        assert_eq!(g.k_hop_neighbors(0, 2), vec![1, 2]);
        assert_eq!(g.k_hop_neighbors(1, 1), vec![0, 2]);
        assert_eq!(g.k_hop_neighbors(0, 3), vec![1, 2, 3]);
    }
}
