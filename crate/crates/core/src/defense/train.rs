//! Masked training with adversarial unlearning.
//!
//! Pipeline: homophily stats over the train split -> deviant-range flags ->
//! warm-up -> loss-ranked subsets -> masked epochs over suspect ∪ clean
//! samples, unlearning suspects (adversarial loss, norm-clipped steps) and
//! fitting clean samples (cross-entropy plus the smooth anchor to the
//! unmasked branch).

use serde::{Deserialize, Serialize};

use super::losses::{loss_adv, loss_clean};
use super::masks::node_masks_from_clean_set;
use crate::data::{GraphDataset, NodeDataset};
use crate::error::{Error, Result};
use crate::gnn::{
    forward_graph_on_tape, forward_node_on_tape, register_params, GnnModel, MaskMode, ModelConfig,
};
use crate::isolation::{
    deviant_range_select, form_subsets, warmup_train_graph, warmup_train_node, HomophilyStats,
    IsolationResult,
};
use crate::rng::{rng_indexed, shuffle, Stream};
use crate::tensor::{clip_grad_norm, AdamState, Param, Tape};

/// Epoch counts and the learning-rate schedule.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TrainSchedule {
    pub epoch_warm: usize,
    pub epoch_train: usize,
    pub learning_rate: f64,
    /// Multiplicative decay applied every `decay_every` training epochs.
    pub decay: f64,
    pub decay_every: usize,
}

impl Default for TrainSchedule {
    fn default() -> Self {
        TrainSchedule {
            epoch_warm: 10,
            epoch_train: 200,
            learning_rate: 0.01,
            decay: 0.1,
            decay_every: 40,
        }
    }
}

impl TrainSchedule {
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay.powi((epoch / self.decay_every.max(1)) as i32)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 < self.decay && self.decay <= 1.0) {
            return Err(Error::invalid("schedule", "decay must be in (0, 1]"));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::invalid("schedule", "learning rate must be positive"));
        }
        Ok(())
    }
}

/// Smooth-loss weight and the norm cap on adversarial gradient steps.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda: f64,
    pub adv_clip: f64,
}

impl LossWeights {
    pub fn from_config(cfg: &ModelConfig) -> Self {
        LossWeights {
            lambda: cfg.lambda,
            adv_clip: 5.0,
        }
    }
}

/// One line of the training log.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub lr: f64,
    pub mean_clean_loss: f64,
    pub mean_adv_loss: f64,
}

pub struct MadeGraphOutcome {
    pub model: GnnModel,
    pub isolation: IsolationResult,
    pub log: Vec<EpochLog>,
    /// Set when a non-finite loss aborted training; parameters are the last
    /// finite epoch's.
    pub diverged_at: Option<usize>,
}

/// Warm-up plus isolation: the first half of the defense, also used on its
/// own by the finetune baseline and the `isolate` CLI command.
pub struct IsolationRun {
    pub isolation: IsolationResult,
    /// The warmed-up model.
    pub model: GnnModel,
    /// Optimizer state carried into the masked phase.
    pub adam: AdamState,
}

/// Homophily stats over the train split, deviant-range flags, warm-up, and
/// loss-ranked subset formation.
pub fn isolate_graph_dataset(
    ds: &GraphDataset,
    config: ModelConfig,
    schedule: &TrainSchedule,
    alpha1: f64,
    alpha2: f64,
    seed: u64,
) -> Result<IsolationRun> {
    config.validate()?;
    schedule.validate()?;
    if ds.train_idx.is_empty() {
        return Err(Error::invalid("train_made", "empty train split"));
    }
    let stats = HomophilyStats::from_graph_dataset(ds);
    let flagged = deviant_range_select(&stats);
    let mut model = GnnModel::init(config, seed)?;
    let mut adam = AdamState::with_defaults(&model.params);
    adam.learning_rate = schedule.learning_rate;
    let losses = warmup_train_graph(&mut model, ds, schedule.epoch_warm, &mut adam, seed)?;
    let isolation = form_subsets(&losses, &flagged, &stats, alpha1, alpha2)?;
    Ok(IsolationRun {
        isolation,
        model,
        adam,
    })
}

/// Full defense training for graph classification.
pub fn train_made_graph(
    ds: &GraphDataset,
    config: ModelConfig,
    schedule: &TrainSchedule,
    weights: &LossWeights,
    alpha1: f64,
    alpha2: f64,
    seed: u64,
) -> Result<MadeGraphOutcome> {
    let IsolationRun {
        isolation,
        mut model,
        mut adam,
    } = isolate_graph_dataset(ds, config, schedule, alpha1, alpha2, seed)?;

    let mut pool: Vec<usize> = isolation
        .d_bad
        .iter()
        .chain(&isolation.d_clean)
        .copied()
        .collect();
    pool.sort_unstable();

    let mut log = Vec::with_capacity(schedule.epoch_train);
    let mut diverged_at = None;
    'epochs: for epoch in 0..schedule.epoch_train {
        adam.learning_rate = schedule.lr_at(epoch);
        let snapshot: Vec<Param> = model.params.clone();
        let mut order = pool.clone();
        shuffle(
            &mut order,
            &mut rng_indexed(seed, Stream::Shuffle, 1_000_000 + epoch as u64),
        );
        let (mut clean_sum, mut clean_n) = (0.0, 0usize);
        let (mut adv_sum, mut adv_n) = (0.0, 0usize);

        for &id in &order {
            let g = &ds.graphs[id];
            let mut tape = Tape::new();
            let ids = register_params(&mut tape, &model);
            let (masked, _) =
                forward_graph_on_tape(&mut tape, &model, &ids, g, MaskMode::Adaptive, None)?;
            let suspect = isolation.is_suspect(id);
            let loss = if suspect {
                loss_adv(&mut tape, masked, 0, g.label)?
            } else {
                let (unmasked, _) =
                    forward_graph_on_tape(&mut tape, &model, &ids, g, MaskMode::Unmasked, None)?;
                loss_clean(&mut tape, masked, unmasked, &[(0, g.label)], weights.lambda)?
            };
            let value = tape.scalar(loss);
            if !value.is_finite() {
                model.params = snapshot;
                diverged_at = Some(epoch);
                break 'epochs;
            }
            if suspect {
                adv_sum += value;
                adv_n += 1;
            } else {
                clean_sum += value;
                clean_n += 1;
            }
            tape.backward(loss)?;
            tape.harvest_grads(&mut model.params);
            if suspect {
                clip_grad_norm(&mut model.params, weights.adv_clip);
            }
            adam.step(&mut model.params)?;
        }
        log.push(EpochLog {
            epoch,
            lr: adam.learning_rate,
            mean_clean_loss: if clean_n > 0 { clean_sum / clean_n as f64 } else { 0.0 },
            mean_adv_loss: if adv_n > 0 { adv_sum / adv_n as f64 } else { 0.0 },
        });
    }

    Ok(MadeGraphOutcome {
        model,
        isolation,
        log,
        diverged_at,
    })
}

pub struct MadeNodeOutcome {
    pub model: GnnModel,
    pub isolation: IsolationResult,
    /// Per-node clean flags fixed at isolation time; nodes appended later
    /// (e.g. evaluation triggers) are suspect by default.
    pub clean_nodes: Vec<bool>,
    pub log: Vec<EpochLog>,
    pub diverged_at: Option<usize>,
}

/// Full defense training for node classification: isolation flags suspect
/// train nodes, masks are hard 0/1 and identical across layers, and each
/// epoch takes one clean-loss update and one norm-clipped adversarial
/// update (full batch).
pub fn train_made_node(
    ds: &NodeDataset,
    config: ModelConfig,
    schedule: &TrainSchedule,
    weights: &LossWeights,
    alpha1: f64,
    alpha2: f64,
    seed: u64,
) -> Result<MadeNodeOutcome> {
    config.validate()?;
    schedule.validate()?;
    ds.validate()?;
    if ds.train_idx.is_empty() {
        return Err(Error::invalid("train_made", "empty train split"));
    }

    let mut model = GnnModel::init(config.clone(), seed)?;
    let mut adam = AdamState::with_defaults(&model.params);
    adam.learning_rate = schedule.learning_rate;
    let warm = warmup_train_node(&mut model, ds, schedule.epoch_warm, &mut adam)?;
    let stats = HomophilyStats::from_node_dataset(ds, &warm.pseudo_labels);
    let flagged = deviant_range_select(&stats);
    let isolation = form_subsets(&warm.losses, &flagged, &stats, alpha1, alpha2)?;

    let mut clean_nodes = vec![true; ds.graph.n];
    for &v in &isolation.d_bad {
        clean_nodes[v] = false;
    }
    let masks = node_masks_from_clean_set(&ds.graph, &clean_nodes, config.layers());

    let clean_pairs: Vec<(usize, usize)> = isolation
        .d_clean
        .iter()
        .map(|&v| (v, ds.labels[v]))
        .collect();
    if clean_pairs.is_empty() {
        return Err(Error::invalid("train_made", "empty clean subset"));
    }
    let bad_pairs: Vec<(usize, usize)> = isolation
        .d_bad
        .iter()
        .map(|&v| (v, ds.labels[v]))
        .collect();

    let mut log = Vec::with_capacity(schedule.epoch_train);
    let mut diverged_at = None;
    for epoch in 0..schedule.epoch_train {
        adam.learning_rate = schedule.lr_at(epoch);
        let snapshot: Vec<Param> = model.params.clone();

        // clean update: CE on the clean subset plus the smooth anchor
        let clean_value = {
            let mut tape = Tape::new();
            let ids = register_params(&mut tape, &model);
            let (masked, _) =
                forward_node_on_tape(&mut tape, &model, &ids, &ds.graph, MaskMode::Fixed(&masks))?;
            let ce = tape.softmax_cross_entropy(masked, &clean_pairs)?;
            let loss = if weights.lambda > 0.0 {
                let (unmasked, _) =
                    forward_node_on_tape(&mut tape, &model, &ids, &ds.graph, MaskMode::Unmasked)?;
                let diff = tape.sub(masked, unmasked)?;
                let mut acc = ce;
                // mean row-wise L2 over the clean subset
                let scale = weights.lambda / clean_pairs.len() as f64;
                for &(v, _) in &clean_pairs {
                    let row = tape.pick_row(diff, v);
                    let norm = tape.l2_norm(row);
                    let w = tape.scale(norm, scale);
                    acc = tape.add(acc, w)?;
                }
                acc
            } else {
                ce
            };
            let value = tape.scalar(loss);
            if value.is_finite() {
                tape.backward(loss)?;
                tape.harvest_grads(&mut model.params);
                adam.step(&mut model.params)?;
            }
            value
        };

        // adversarial update: mean stored-label probability on suspects
        let adv_value = if bad_pairs.is_empty() {
            0.0
        } else {
            let mut tape = Tape::new();
            let ids = register_params(&mut tape, &model);
            let (masked, _) =
                forward_node_on_tape(&mut tape, &model, &ids, &ds.graph, MaskMode::Fixed(&masks))?;
            let mut acc = None;
            for &(v, y) in &bad_pairs {
                let p = tape.softmax_prob(masked, v, y)?;
                acc = Some(match acc {
                    None => p,
                    Some(a) => tape.add(a, p)?,
                });
            }
            let total = acc.expect("non-empty suspects");
            let loss = tape.scale(total, 1.0 / bad_pairs.len() as f64);
            let value = tape.scalar(loss);
            if value.is_finite() {
                tape.backward(loss)?;
                tape.harvest_grads(&mut model.params);
                clip_grad_norm(&mut model.params, weights.adv_clip);
                adam.step(&mut model.params)?;
            }
            value
        };

        if !clean_value.is_finite() || !adv_value.is_finite() {
            model.params = snapshot;
            diverged_at = Some(epoch);
            break;
        }
        log.push(EpochLog {
            epoch,
            lr: adam.learning_rate,
            mean_clean_loss: clean_value,
            mean_adv_loss: adv_value,
        });
    }

    Ok(MadeNodeOutcome {
        model,
        isolation,
        clean_nodes,
        log,
        diverged_at,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_decays_stepwise() {
        let s = TrainSchedule::default();
        assert_eq!(s.lr_at(0), 0.01);
        assert_eq!(s.lr_at(39), 0.01);
        assert!((s.lr_at(40) - 0.001).abs() < 1e-15);
        assert!((s.lr_at(80) - 0.0001).abs() < 1e-15);
    }

    #[test]
    fn schedule_validation() {
        let mut s = TrainSchedule::default();
        s.decay = 0.0;
        assert!(s.validate().is_err());
        s.decay = 1.0;
        s.learning_rate = 0.0;
        assert!(s.validate().is_err());
    }
}
