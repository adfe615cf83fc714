//! Plain cross-entropy training, edge dropout, and clean-subset finetuning.

use rand::Rng;

use crate::data::{Graph, GraphDataset, NodeDataset};
use crate::defense::TrainSchedule;
use crate::error::{Error, Result};
use crate::gnn::{
    forward_graph_on_tape, forward_node_on_tape, register_params, GnnModel, MaskMode, ModelConfig,
};
use crate::rng::{rng_indexed, shuffle, Stream};
use crate::tensor::{AdamState, Tape};

/// Per-sample CE epochs over `pool`; `dropout_p > 0` resamples surviving
/// edges per sample per epoch from an isolated RNG stream, so `p = 0`
/// reproduces the vanilla trajectory exactly.
pub(crate) fn ce_epochs_graph(
    model: &mut GnnModel,
    ds: &GraphDataset,
    pool: &[usize],
    epochs: usize,
    schedule: &TrainSchedule,
    adam: &mut AdamState,
    seed: u64,
    dropout_p: f64,
) -> Result<()> {
    for epoch in 0..epochs {
        adam.learning_rate = schedule.lr_at(epoch);
        let mut order = pool.to_vec();
        shuffle(&mut order, &mut rng_indexed(seed, Stream::Shuffle, epoch as u64));
        for &id in &order {
            let g = &ds.graphs[id];
            let dropped;
            let g = if dropout_p > 0.0 {
                let mut r =
                    rng_indexed(seed, Stream::Dropout, ((epoch as u64) << 32) | id as u64);
                let mut copy = Graph::new(g.id, g.n, g.feature_dim, g.label);
                copy.features = g.features.clone();
                copy.edges = g
                    .edges
                    .iter()
                    .copied()
                    .filter(|_| r.gen_range(0.0..1.0) >= dropout_p)
                    .collect();
                dropped = copy;
                &dropped
            } else {
                g
            };
            let mut tape = Tape::new();
            let ids = register_params(&mut tape, model);
            let (logits, _) =
                forward_graph_on_tape(&mut tape, model, &ids, g, MaskMode::Unmasked, None)?;
            let loss = tape.softmax_cross_entropy(logits, &[(0, g.label)])?;
            if !tape.scalar(loss).is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    reason: "non-finite training loss".into(),
                });
            }
            tape.backward(loss)?;
            tape.harvest_grads(&mut model.params);
            adam.step(&mut model.params)?;
        }
    }
    Ok(())
}

/// Plain CE training on the full (possibly poisoned) train split.
pub fn train_vanilla(
    ds: &GraphDataset,
    config: ModelConfig,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<GnnModel> {
    config.validate()?;
    schedule.validate()?;
    let mut model = GnnModel::init(config, seed)?;
    let mut adam = AdamState::with_defaults(&model.params);
    let pool = ds.train_idx.clone();
    ce_epochs_graph(
        &mut model,
        ds,
        &pool,
        schedule.epoch_train,
        schedule,
        &mut adam,
        seed,
        0.0,
    )?;
    Ok(model)
}

/// Each epoch, each edge is independently dropped with probability `p`
/// before the forward pass.
pub fn edge_dropout_train(
    ds: &GraphDataset,
    config: ModelConfig,
    schedule: &TrainSchedule,
    p: f64,
    seed: u64,
) -> Result<GnnModel> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::invalid("edge_dropout_train", "p outside [0, 1]"));
    }
    config.validate()?;
    schedule.validate()?;
    let mut model = GnnModel::init(config, seed)?;
    let mut adam = AdamState::with_defaults(&model.params);
    let pool = ds.train_idx.clone();
    ce_epochs_graph(
        &mut model,
        ds,
        &pool,
        schedule.epoch_train,
        schedule,
        &mut adam,
        seed,
        p,
    )?;
    Ok(model)
}

/// Continues CE training on the isolated clean subset only, at a tenth of
/// the base learning rate.
pub fn finetune_defense(
    mut model: GnnModel,
    ds: &GraphDataset,
    d_clean: &[usize],
    epochs: usize,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<GnnModel> {
    if d_clean.is_empty() {
        return Err(Error::invalid("finetune_defense", "empty clean subset"));
    }
    let reduced = TrainSchedule {
        learning_rate: schedule.learning_rate * 0.1,
        ..schedule.clone()
    };
    let mut adam = AdamState::with_defaults(&model.params);
    ce_epochs_graph(
        &mut model,
        ds,
        d_clean,
        epochs,
        &reduced,
        &mut adam,
        seed ^ 0xF1E7,
        0.0,
    )?;
    Ok(model)
}

/// Full-batch CE training for the node task.
pub fn train_vanilla_node(
    ds: &NodeDataset,
    config: ModelConfig,
    schedule: &TrainSchedule,
    seed: u64,
) -> Result<GnnModel> {
    config.validate()?;
    schedule.validate()?;
    let mut model = GnnModel::init(config, seed)?;
    let mut adam = AdamState::with_defaults(&model.params);
    let pairs: Vec<(usize, usize)> = ds.train_idx.iter().map(|&v| (v, ds.labels[v])).collect();
    if pairs.is_empty() {
        return Err(Error::invalid("train_vanilla_node", "empty train split"));
    }
    for epoch in 0..schedule.epoch_train {
        adam.learning_rate = schedule.lr_at(epoch);
        let mut tape = Tape::new();
        let ids = register_params(&mut tape, &model);
        let (logits, _) =
            forward_node_on_tape(&mut tape, &model, &ids, &ds.graph, MaskMode::Unmasked)?;
        let loss = tape.softmax_cross_entropy(logits, &pairs)?;
        if !tape.scalar(loss).is_finite() {
            return Err(Error::Diverged {
                epoch,
                reason: "non-finite training loss".into(),
            });
        }
        tape.backward(loss)?;
        tape.harvest_grads(&mut model.params);
        adam.step(&mut model.params)?;
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_graph_corpus, split_dataset, GraphCorpusSpec};

    fn corpus(n: usize, seed: u64) -> GraphDataset {
        let spec = GraphCorpusSpec {
            num_graphs: n,
            ..GraphCorpusSpec::aids_like()
        };
        let mut ds = generate_graph_corpus(&spec, seed).unwrap();
        split_dataset(&mut ds, 0.8, seed).unwrap();
        ds
    }

    fn small_cfg(ds: &GraphDataset) -> ModelConfig {
        ModelConfig {
            hidden_dims: vec![16, 16],
            ..ModelConfig::gcn_default(ds.feature_dim, ds.num_classes)
        }
    }

    fn short_schedule(epochs: usize) -> TrainSchedule {
        TrainSchedule {
            epoch_warm: 0,
            epoch_train: epochs,
            ..TrainSchedule::default()
        }
    }

    #[test]
    fn dropout_zero_matches_vanilla_trajectory() {
        let ds = corpus(24, 5);
        let cfg = small_cfg(&ds);
        let schedule = short_schedule(2);
        let a = train_vanilla(&ds, cfg.clone(), &schedule, 3).unwrap();
        let b = edge_dropout_train(&ds, cfg, &schedule, 0.0, 3).unwrap();
        for (x, y) in a.params.iter().zip(&b.params) {
            assert_eq!(x.values, y.values);
        }
    }

    #[test]
    fn dropout_one_trains_on_edgeless_graphs_without_crashing() {
        let ds = corpus(16, 6);
        let cfg = small_cfg(&ds);
        let schedule = short_schedule(1);
        let model = edge_dropout_train(&ds, cfg, &schedule, 1.0, 1).unwrap();
        assert!(model.params.iter().all(|p| p.values.iter().all(|v| v.is_finite())));
    }

    #[test]
    fn finetune_zero_epochs_is_identity() {
        let ds = corpus(16, 7);
        let cfg = small_cfg(&ds);
        let schedule = short_schedule(1);
        let model = train_vanilla(&ds, cfg, &schedule, 2).unwrap();
        let before: Vec<Vec<f64>> = model.params.iter().map(|p| p.values.clone()).collect();
        let tuned = finetune_defense(model, &ds, &ds.train_idx, 0, &schedule, 2).unwrap();
        for (p, b) in tuned.params.iter().zip(&before) {
            assert_eq!(&p.values, b);
        }
    }
}
