//! Plain-text ingestion for node-classification data: an edge list plus
//! headerless feature/label CSVs, one row per node, ids dense `0..n-1`.

use std::fs;
use std::path::Path;

use super::graph::{Graph, NodeDataset};
use crate::error::{Error, Result};

/// Parses `edges` ("i j" per line), `features.csv` (comma-separated floats,
/// one row per node) and `labels.csv` (one integer per node). Splits are
/// left empty; assign them with [`super::split_node_dataset`].
pub fn parse_node_dataset(
    edge_path: impl AsRef<Path>,
    feature_path: impl AsRef<Path>,
    label_path: impl AsRef<Path>,
) -> Result<NodeDataset> {
    let feature_path = feature_path.as_ref();
    let label_path = label_path.as_ref();
    let edge_path = edge_path.as_ref();

    let feat_name = feature_path.display().to_string();
    let feat_text = fs::read_to_string(feature_path)
        .map_err(|_| Error::MissingFile(feat_name.clone()))?;
    let mut features: Vec<f64> = Vec::new();
    let mut dim = None;
    let mut n = 0usize;
    for (ln, line) in feat_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::parse(&feat_name, ln + 1, format!("bad float '{t}'")))
            })
            .collect::<Result<_>>()?;
        match dim {
            None => dim = Some(row.len()),
            Some(d) if d != row.len() => {
                return Err(Error::parse(&feat_name, ln + 1, "ragged feature row"))
            }
            _ => {}
        }
        features.extend(row);
        n += 1;
    }
    let dim = dim.ok_or_else(|| Error::parse(&feat_name, 1, "no feature rows"))?;

    let lbl_name = label_path.display().to_string();
    let lbl_text =
        fs::read_to_string(label_path).map_err(|_| Error::MissingFile(lbl_name.clone()))?;
    let mut raw_labels = Vec::with_capacity(n);
    for (ln, line) in lbl_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let v: i64 = line
            .parse()
            .map_err(|_| Error::parse(&lbl_name, ln + 1, format!("bad label '{line}'")))?;
        raw_labels.push(v);
    }
    if raw_labels.len() != n {
        return Err(Error::parse(
            &lbl_name,
            raw_labels.len() + 1,
            format!("{} labels for {n} nodes", raw_labels.len()),
        ));
    }
    let mut vocab = raw_labels.clone();
    vocab.sort_unstable();
    vocab.dedup();
    let labels: Vec<usize> = raw_labels
        .iter()
        .map(|v| vocab.binary_search(v).unwrap())
        .collect();

    let mut graph = Graph::new(0, n, dim, 0);
    graph.features = features;

    let edge_name = edge_path.display().to_string();
    let edge_text =
        fs::read_to_string(edge_path).map_err(|_| Error::MissingFile(edge_name.clone()))?;
    for (ln, line) in edge_text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (a, b) = match (parts.next(), parts.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::parse(&edge_name, ln + 1, "expected 'i j'")),
        };
        let a: usize = a
            .parse()
            .map_err(|_| Error::parse(&edge_name, ln + 1, format!("bad node id '{a}'")))?;
        let b: usize = b
            .parse()
            .map_err(|_| Error::parse(&edge_name, ln + 1, format!("bad node id '{b}'")))?;
        if a >= n || b >= n {
            return Err(Error::parse(
                &edge_name,
                ln + 1,
                format!("dangling edge endpoint ({a}, {b}) with {n} nodes"),
            ));
        }
        if a == b {
            continue;
        }
        graph.add_edge(a, b)?;
    }
    graph.sort_edges();

    let ds = NodeDataset {
        graph,
        labels,
        num_classes: vocab.len(),
        train_idx: Vec::new(),
        val_idx: Vec::new(),
        test_idx: Vec::new(),
    };
    ds.validate()?;
    Ok(ds)
}
