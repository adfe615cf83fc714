//! Attack success rate and clean accuracy.

use crate::attack::{apply_node_trigger_for_eval, apply_trigger_for_eval, TriggerSpec};
use crate::data::{Graph, GraphDataset, NodeDataset};
use crate::error::{Error, Result};

/// Fraction of triggered copies of non-target test graphs that the
/// predictor maps to the target label. Each eligible test graph gets one
/// independently attached trigger copy.
pub fn compute_asr<P>(
    mut predict: P,
    ds: &GraphDataset,
    spec: &TriggerSpec,
    seed: u64,
) -> Result<f64>
where
    P: FnMut(&Graph) -> Result<usize>,
{
    let eligible: Vec<usize> = ds
        .test_idx
        .iter()
        .copied()
        .filter(|&i| ds.graphs[i].label != spec.target_label)
        .collect();
    if eligible.is_empty() {
        return Err(Error::invalid(
            "compute_asr",
            "no test samples outside the target class",
        ));
    }
    let mut hits = 0usize;
    for (k, &i) in eligible.iter().enumerate() {
        let (triggered, _) = apply_trigger_for_eval(&ds.graphs[i], spec, seed, k as u64);
        if predict(&triggered)? == spec.target_label {
            hits += 1;
        }
    }
    Ok(hits as f64 / eligible.len() as f64)
}

/// Top-1 accuracy on the untriggered test split.
pub fn compute_acc<P>(mut predict: P, ds: &GraphDataset) -> Result<f64>
where
    P: FnMut(&Graph) -> Result<usize>,
{
    if ds.test_idx.is_empty() {
        return Err(Error::invalid("compute_acc", "empty test split"));
    }
    let mut hits = 0usize;
    for &i in &ds.test_idx {
        if predict(&ds.graphs[i])? == ds.graphs[i].label {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.test_idx.len() as f64)
}

/// Node-task ASR: each eligible test node gets a private trigger copy
/// attached inside the evaluation graph, and the predictor is asked for
/// that node's class.
pub fn compute_asr_node<P>(
    mut predict: P,
    ds: &NodeDataset,
    spec: &TriggerSpec,
    seed: u64,
) -> Result<f64>
where
    P: FnMut(&NodeDataset, usize) -> Result<usize>,
{
    let eligible: Vec<usize> = ds
        .test_idx
        .iter()
        .copied()
        .filter(|&v| ds.labels[v] != spec.target_label)
        .collect();
    if eligible.is_empty() {
        return Err(Error::invalid(
            "compute_asr_node",
            "no test nodes outside the target class",
        ));
    }
    let mut hits = 0usize;
    for &v in &eligible {
        let (triggered, _) = apply_node_trigger_for_eval(ds, v, spec, seed);
        if predict(&triggered, v)? == spec.target_label {
            hits += 1;
        }
    }
    Ok(hits as f64 / eligible.len() as f64)
}

/// Node-task accuracy on the untriggered test nodes.
pub fn compute_acc_node<P>(mut predict: P, ds: &NodeDataset) -> Result<f64>
where
    P: FnMut(&NodeDataset, usize) -> Result<usize>,
{
    if ds.test_idx.is_empty() {
        return Err(Error::invalid("compute_acc_node", "empty test split"));
    }
    let mut hits = 0usize;
    for &v in &ds.test_idx {
        if predict(ds, v)? == ds.labels[v] {
            hits += 1;
        }
    }
    Ok(hits as f64 / ds.test_idx.len() as f64)
}
