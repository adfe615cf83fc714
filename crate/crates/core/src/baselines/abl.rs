//! Loss-isolation unlearning: sign-gated warm-up, lowest-loss isolation,
//! then whole-graph unlearning with negated cross-entropy.

use crate::data::GraphDataset;
use crate::defense::TrainSchedule;
use crate::error::{Error, Result};
use crate::gnn::{forward_graph_on_tape, register_params, GnnModel, MaskMode, ModelConfig};
use crate::rng::{rng_indexed, shuffle, Stream};
use crate::tensor::{AdamState, Tape};

pub struct AblOutcome {
    pub model: GnnModel,
    /// Train ids selected for unlearning (lowest warm-up loss), ascending.
    pub isolated: Vec<usize>,
    /// Per-sample warm-up losses after the warm-up phase.
    pub warmup_losses: Vec<(usize, f64)>,
    /// Unlearning epoch at which training went non-finite, if any; the model
    /// keeps the last finite parameters.
    pub stopped_early: Option<usize>,
}

fn sign(x: f64) -> f64 {
    if x >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Warm-up with `CE * sign(CE - gamma)` (the sign acts as a constant gate on
/// the gradient), isolate the lowest-loss fraction, then unlearn those whole
/// graphs with negated CE. No masks anywhere.
pub fn abl_defense(
    ds: &GraphDataset,
    config: ModelConfig,
    schedule: &TrainSchedule,
    gamma: f64,
    isolation_rate: f64,
    unlearn_epochs: usize,
    seed: u64,
) -> Result<AblOutcome> {
    if gamma <= 0.0 {
        return Err(Error::invalid("abl_defense", "gamma must be > 0"));
    }
    if !(0.0..=1.0).contains(&isolation_rate) {
        return Err(Error::invalid("abl_defense", "isolation_rate outside [0, 1]"));
    }
    config.validate()?;
    let mut model = GnnModel::init(config, seed)?;
    let mut adam = AdamState::with_defaults(&model.params);

    // sign-gated warm-up
    for epoch in 0..schedule.epoch_warm {
        adam.learning_rate = schedule.learning_rate;
        let mut order = ds.train_idx.clone();
        shuffle(&mut order, &mut rng_indexed(seed, Stream::Shuffle, epoch as u64));
        for &id in &order {
            let g = &ds.graphs[id];
            let mut tape = Tape::new();
            let ids = register_params(&mut tape, &model);
            let (logits, _) =
                forward_graph_on_tape(&mut tape, &model, &ids, g, MaskMode::Unmasked, None)?;
            let ce = tape.softmax_cross_entropy(logits, &[(0, g.label)])?;
            let ce_value = tape.scalar(ce);
            if !ce_value.is_finite() {
                return Err(Error::Diverged {
                    epoch,
                    reason: "non-finite warm-up loss".into(),
                });
            }
            let loss = tape.scale(ce, sign(ce_value - gamma));
            tape.backward(loss)?;
            tape.harvest_grads(&mut model.params);
            adam.step(&mut model.params)?;
        }
    }

    // frozen per-sample losses, lowest-loss isolation
    let mut losses = Vec::with_capacity(ds.train_idx.len());
    for &id in &ds.train_idx {
        let g = &ds.graphs[id];
        let mut tape = Tape::new();
        let ids = register_params(&mut tape, &model);
        let (logits, _) =
            forward_graph_on_tape(&mut tape, &model, &ids, g, MaskMode::Unmasked, None)?;
        let ce = tape.softmax_cross_entropy(logits, &[(0, g.label)])?;
        losses.push((id, tape.scalar(ce)));
    }
    let take = ((isolation_rate * ds.train_idx.len() as f64).ceil() as usize)
        .min(ds.train_idx.len());
    let mut by_loss = losses.clone();
    by_loss.sort_by(|a, b| {
        a.1.partial_cmp(&b.1)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
    });
    let mut isolated: Vec<usize> = by_loss[..take].iter().map(|&(id, _)| id).collect();
    isolated.sort_unstable();

    // train on the rest, then unlearn the isolated set
    let keep: Vec<usize> = ds
        .train_idx
        .iter()
        .copied()
        .filter(|id| isolated.binary_search(id).is_err())
        .collect();
    super::vanilla::ce_epochs_graph(
        &mut model,
        ds,
        &keep,
        schedule.epoch_train,
        schedule,
        &mut adam,
        seed ^ 0xAB1,
        0.0,
    )?;

    let stopped_early = unlearn_whole_graphs(
        &mut model,
        ds,
        &isolated,
        unlearn_epochs,
        schedule.learning_rate * 0.1,
        seed,
    )?;

    Ok(AblOutcome {
        model,
        isolated,
        warmup_losses: losses,
        stopped_early,
    })
}

/// Gradient-ascent unlearning: negated CE on the given whole graphs.
/// Returns the epoch at which a non-finite loss stopped it, if any; the
/// model keeps the parameters from just before that step.
pub fn unlearn_whole_graphs(
    model: &mut GnnModel,
    ds: &GraphDataset,
    targets: &[usize],
    epochs: usize,
    lr: f64,
    seed: u64,
) -> Result<Option<usize>> {
    let mut adam = AdamState::with_defaults(&model.params);
    adam.learning_rate = lr;
    for epoch in 0..epochs {
        let snapshot = model.params.clone();
        let mut order = targets.to_vec();
        shuffle(
            &mut order,
            &mut rng_indexed(seed, Stream::Shuffle, 0xDEAD_0000 + epoch as u64),
        );
        for &id in &order {
            let g = &ds.graphs[id];
            let mut tape = Tape::new();
            let ids = register_params(&mut tape, &model);
            let (logits, _) =
                forward_graph_on_tape(&mut tape, model, &ids, g, MaskMode::Unmasked, None)?;
            let ce = tape.softmax_cross_entropy(logits, &[(0, g.label)])?;
            if !tape.scalar(ce).is_finite() {
                model.params = snapshot;
                return Ok(Some(epoch));
            }
            let loss = tape.scale(ce, -1.0);
            tape.backward(loss)?;
            tape.harvest_grads(&mut model.params);
            crate::tensor::clip_grad_norm(&mut model.params, 5.0);
            adam.step(&mut model.params)?;
        }
    }
    Ok(None)
}
