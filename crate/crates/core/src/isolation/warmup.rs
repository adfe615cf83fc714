//! Warm-up training: plain cross-entropy for a few epochs, yielding
//! per-sample losses (and pseudo-labels for the node task) under the frozen
//! post-warm-up parameters.

use crate::data::{GraphDataset, NodeDataset};
use crate::error::{Error, Result};
use crate::gnn::{argmax, forward_graph_on_tape, forward_node_on_tape, GnnModel, MaskMode};
use crate::rng::{rng_indexed, shuffle, Stream};
use crate::tensor::{AdamState, Tape};

fn check_finite(loss: f64, epoch: usize) -> Result<()> {
    if !loss.is_finite() {
        return Err(Error::Diverged {
            epoch,
            reason: "non-finite warm-up loss".into(),
        });
    }
    Ok(())
}

/// Per-sample warm-up on the train split of a graph corpus. Returns
/// `(graph id, CE loss)` for every train graph, evaluated after the final
/// epoch with frozen parameters (comparable across samples). With zero
/// epochs this is just the untrained model's losses.
pub fn warmup_train_graph(
    model: &mut GnnModel,
    ds: &GraphDataset,
    epochs: usize,
    adam: &mut AdamState,
    seed: u64,
) -> Result<Vec<(usize, f64)>> {
    for epoch in 0..epochs {
        let mut order = ds.train_idx.clone();
        shuffle(&mut order, &mut rng_indexed(seed, Stream::Shuffle, epoch as u64));
        for &id in &order {
            let g = &ds.graphs[id];
            let mut tape = Tape::new();
            let ids = crate::gnn::register_params(&mut tape, model);
            let (logits, _) =
                forward_graph_on_tape(&mut tape, model, &ids, g, MaskMode::Unmasked, None)?;
            let loss = tape.softmax_cross_entropy(logits, &[(0, g.label)])?;
            check_finite(tape.scalar(loss), epoch)?;
            tape.backward(loss)?;
            tape.harvest_grads(&mut model.params);
            adam.step(&mut model.params)?;
        }
    }
    // frozen evaluation pass
    let mut losses = Vec::with_capacity(ds.train_idx.len());
    for &id in &ds.train_idx {
        let g = &ds.graphs[id];
        let mut tape = Tape::new();
        let ids = crate::gnn::register_params(&mut tape, model);
        let (logits, _) =
            forward_graph_on_tape(&mut tape, model, &ids, g, MaskMode::Unmasked, None)?;
        let loss = tape.softmax_cross_entropy(logits, &[(0, g.label)])?;
        losses.push((id, tape.scalar(loss)));
    }
    Ok(losses)
}

/// Warm-up artifacts for the node task.
pub struct NodeWarmup {
    /// `(node id, CE loss)` per train node.
    pub losses: Vec<(usize, f64)>,
    /// Argmax prediction for every node of the graph.
    pub pseudo_labels: Vec<usize>,
}

/// Full-batch warm-up on a node dataset: one update per epoch on the mean
/// train-node cross-entropy.
pub fn warmup_train_node(
    model: &mut GnnModel,
    ds: &NodeDataset,
    epochs: usize,
    adam: &mut AdamState,
) -> Result<NodeWarmup> {
    let pairs: Vec<(usize, usize)> = ds.train_idx.iter().map(|&v| (v, ds.labels[v])).collect();
    if pairs.is_empty() {
        return Err(Error::invalid("warmup_train_node", "empty train split"));
    }
    for epoch in 0..epochs {
        let mut tape = Tape::new();
        let ids = crate::gnn::register_params(&mut tape, model);
        let (logits, _) = forward_node_on_tape(&mut tape, model, &ids, &ds.graph, MaskMode::Unmasked)?;
        let loss = tape.softmax_cross_entropy(logits, &pairs)?;
        check_finite(tape.scalar(loss), epoch)?;
        tape.backward(loss)?;
        tape.harvest_grads(&mut model.params);
        adam.step(&mut model.params)?;
    }
    // frozen evaluation: per-node losses and pseudo-labels
    let mut tape = Tape::new();
    let ids = crate::gnn::register_params(&mut tape, model);
    let (logits, _) = forward_node_on_tape(&mut tape, model, &ids, &ds.graph, MaskMode::Unmasked)?;
    let vals = tape.values(logits);
    let classes = ds.num_classes;
    let mut losses = Vec::with_capacity(pairs.len());
    for &(v, y) in &pairs {
        let row = &vals[v * classes..(v + 1) * classes];
        let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = row.iter().map(|&x| (x - m).exp()).sum::<f64>().ln() + m;
        losses.push((v, lse - row[y]));
    }
    let pseudo_labels: Vec<usize> = (0..ds.graph.n)
        .map(|v| argmax(&vals[v * classes..(v + 1) * classes]))
        .collect();
    Ok(NodeWarmup {
        losses,
        pseudo_labels,
    })
}
