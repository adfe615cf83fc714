//! Deterministic train/test splitting, stratified by class when possible.

use crate::error::{Error, Result};
use crate::rng::{rng, shuffle, Stream};

use super::graph::{GraphDataset, NodeDataset};

/// What the splitter did; `warning` is set when stratification fell back.
#[derive(Clone, Debug, Default)]
pub struct SplitReport {
    pub stratified: bool,
    pub warning: Option<String>,
}

fn stratified_indices(
    labels: &[usize],
    num_classes: usize,
    train_fraction: f64,
    seed: u64,
) -> (Vec<usize>, Vec<usize>, SplitReport) {
    let n = labels.len();
    let target_train = (train_fraction * n as f64).round() as usize;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }

    let mut r = rng(seed, Stream::Split);
    let degenerate = by_class.iter().any(|c| c.len() < 2);
    let mut report = SplitReport {
        stratified: !degenerate,
        warning: degenerate.then(|| "a class has < 2 samples; split is unstratified".to_string()),
    };

    if degenerate {
        let mut idx: Vec<usize> = (0..n).collect();
        shuffle(&mut idx, &mut r);
        let train = idx[..target_train.min(n)].to_vec();
        let test = idx[target_train.min(n)..].to_vec();
        return (train, test, report);
    }

    let mut train = Vec::with_capacity(target_train);
    let mut test = Vec::new();
    let mut takes: Vec<usize> = by_class
        .iter()
        .map(|c| (train_fraction * c.len() as f64).round() as usize)
        .collect();
    // Adjust per-class takes so the total matches round(f * N) exactly.
    let mut total: usize = takes.iter().sum();
    let mut c = 0usize;
    while total != target_train {
        if total < target_train && takes[c] < by_class[c].len() {
            takes[c] += 1;
            total += 1;
        } else if total > target_train && takes[c] > 0 {
            takes[c] -= 1;
            total -= 1;
        }
        c = (c + 1) % num_classes;
    }
    for (cls, members) in by_class.iter().enumerate() {
        let mut members = members.clone();
        shuffle(&mut members, &mut r);
        train.extend_from_slice(&members[..takes[cls]]);
        test.extend_from_slice(&members[takes[cls]..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    report.stratified = true;
    (train, test, report)
}

/// Assigns train/test splits on a graph-classification dataset.
pub fn split_dataset(
    ds: &mut GraphDataset,
    train_fraction: f64,
    seed: u64,
) -> Result<SplitReport> {
    if !(0.0 < train_fraction && train_fraction < 1.0) {
        return Err(Error::invalid(
            "split_dataset",
            format!("train_fraction {train_fraction} outside (0, 1)"),
        ));
    }
    let labels: Vec<usize> = ds.graphs.iter().map(|g| g.label).collect();
    let (train, test, report) = stratified_indices(&labels, ds.num_classes, train_fraction, seed);
    ds.train_idx = train;
    ds.test_idx = test;
    Ok(report)
}

/// Assigns train/val/test node sets on a node-classification dataset.
pub fn split_node_dataset(
    ds: &mut NodeDataset,
    train_fraction: f64,
    val_fraction: f64,
    seed: u64,
) -> Result<SplitReport> {
    if train_fraction <= 0.0 || val_fraction < 0.0 || train_fraction + val_fraction >= 1.0 {
        return Err(Error::invalid(
            "split_node_dataset",
            "fractions must satisfy 0 < train, 0 <= val, train + val < 1",
        ));
    }
    let (train, rest, report) =
        stratified_indices(&ds.labels, ds.num_classes, train_fraction, seed);
    // Second stratified cut of the remainder into val/test.
    let rest_labels: Vec<usize> = rest.iter().map(|&i| ds.labels[i]).collect();
    let val_of_rest = val_fraction / (1.0 - train_fraction);
    let (val_pos, test_pos, _) = if val_fraction > 0.0 {
        stratified_indices(&rest_labels, ds.num_classes, val_of_rest, seed ^ 0xA5A5)
    } else {
        (Vec::new(), (0..rest.len()).collect(), SplitReport::default())
    };
    ds.train_idx = train;
    ds.val_idx = val_pos.iter().map(|&p| rest[p]).collect();
    ds.test_idx = test_pos.iter().map(|&p| rest[p]).collect();
    ds.val_idx.sort_unstable();
    ds.test_idx.sort_unstable();
    Ok(report)
}
