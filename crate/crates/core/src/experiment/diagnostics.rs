//! Figure-style diagnostics emitted as data: per-node input-gradient
//! magnitudes and the unlearn-rate sweep.

use serde::{Deserialize, Serialize};

use crate::attack::{PoisonRecord, TriggerSpec};
use crate::baselines::{train_vanilla, unlearn_whole_graphs};
use crate::data::GraphDataset;
use crate::defense::{train_made_graph, LossWeights, TrainSchedule};
use crate::error::Result;
use crate::experiment::metrics::{compute_acc, compute_asr};
use crate::gnn::{
    argmax, forward_graph_with_features, graph_logits, register_params, GnnModel, MaskMode,
    ModelConfig,
};
use crate::rng::{rng_indexed, shuffle, Stream};
use crate::tensor::Tape;

/// One node's input-feature gradient magnitude, tagged by ground truth.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradRecord {
    pub graph_id: usize,
    pub node: usize,
    pub is_malicious: bool,
    pub grad_norm: f64,
}

/// L2 norm of the CE loss gradient w.r.t. each node's input features, over
/// all poisoned training graphs, tagged malicious/clean via the ledger.
pub fn gradient_magnitude_histogram(
    model: &GnnModel,
    ds: &GraphDataset,
    ledger: &PoisonRecord,
) -> Result<Vec<GradRecord>> {
    let mut records = Vec::new();
    for &(gid, ref injected) in &ledger.injected_nodes {
        let g = &ds.graphs[gid];
        let mut tape = Tape::new();
        let ids = register_params(&mut tape, model);
        let x = tape.grad_leaf(g.features.clone(), vec![g.n, g.feature_dim]);
        let (logits, _) = forward_graph_with_features(
            &mut tape,
            model,
            &ids,
            g,
            x,
            MaskMode::Unmasked,
            None,
        )?;
        let loss = tape.softmax_cross_entropy(logits, &[(0, g.label)])?;
        tape.backward(loss)?;
        let grad = tape.grad_of(x)?;
        let d = g.feature_dim;
        for v in 0..g.n {
            let norm: f64 = grad[v * d..(v + 1) * d].iter().map(|x| x * x).sum::<f64>().sqrt();
            records.push(GradRecord {
                graph_id: gid,
                node: v,
                is_malicious: injected.contains(&v),
                grad_norm: norm,
            });
        }
    }
    Ok(records)
}

/// Two-sample Kolmogorov–Smirnov distance.
pub fn ks_distance(a: &[f64], b: &[f64]) -> f64 {
    if a.is_empty() || b.is_empty() {
        return 0.0;
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(|x, y| x.partial_cmp(y).unwrap());
    b.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let (mut i, mut j) = (0usize, 0usize);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] == x {
            i += 1;
        }
        while j < b.len() && b[j] == x {
            j += 1;
        }
        let fa = i as f64 / a.len() as f64;
        let fb = j as f64 / b.len() as f64;
        d = d.max((fa - fb).abs());
    }
    let fa = i as f64 / a.len() as f64;
    let fb = j as f64 / b.len() as f64;
    d.max((fa - fb).abs())
}

/// One row of the unlearn-rate sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub method: String,
    pub rate: f64,
    pub asr: f64,
    pub acc: f64,
}

/// For each rate, unlearns that fraction of the train split (ground-truth
/// poisons first, then clean fillers) on top of a vanilla model, recording
/// ASR/ACC; rate 0 is the vanilla model itself. One masked-defense run is
/// appended as the reference row.
#[allow(clippy::too_many_arguments)]
pub fn unlearn_rate_sweep(
    poisoned: &GraphDataset,
    ledger: &PoisonRecord,
    spec: &TriggerSpec,
    rates: &[f64],
    config: &ModelConfig,
    schedule: &TrainSchedule,
    alpha1: f64,
    alpha2: f64,
    unlearn_epochs: usize,
    seed: u64,
) -> Result<Vec<SweepRow>> {
    let vanilla = train_vanilla(poisoned, config.clone(), schedule, seed)?;
    fn plain_predict(
        model: &GnnModel,
    ) -> impl FnMut(&crate::data::Graph) -> Result<usize> + '_ {
        move |g| Ok(argmax(&graph_logits(model, g, MaskMode::Unmasked)?.0))
    }

    let mut rows = Vec::new();
    for &rate in rates {
        let (asr, acc) = if rate == 0.0 {
            (
                compute_asr(plain_predict(&vanilla), poisoned, spec, seed)?,
                compute_acc(plain_predict(&vanilla), poisoned)?,
            )
        } else {
            let mut model = vanilla.clone();
            let want = ((rate * poisoned.train_idx.len() as f64).ceil() as usize)
                .min(poisoned.train_idx.len());
            let mut targets: Vec<usize> = ledger.poisoned_ids.clone();
            targets.truncate(want);
            if targets.len() < want {
                let mut fillers: Vec<usize> = poisoned
                    .train_idx
                    .iter()
                    .copied()
                    .filter(|id| !ledger.is_poisoned(*id))
                    .collect();
                shuffle(&mut fillers, &mut rng_indexed(seed, Stream::Shuffle, 0xF111));
                targets.extend(fillers.into_iter().take(want - targets.len()));
            }
            targets.sort_unstable();
            unlearn_whole_graphs(
                &mut model,
                poisoned,
                &targets,
                unlearn_epochs,
                schedule.learning_rate * 0.03,
                seed,
            )?;
            (
                compute_asr(plain_predict(&model), poisoned, spec, seed)?,
                compute_acc(plain_predict(&model), poisoned)?,
            )
        };
        rows.push(SweepRow {
            method: "unlearn".into(),
            rate,
            asr,
            acc,
        });
    }

    let weights = LossWeights::from_config(config);
    let made = train_made_graph(
        poisoned,
        config.clone(),
        schedule,
        &weights,
        alpha1,
        alpha2,
        seed,
    )?;
    let made_predict = |g: &crate::data::Graph| -> Result<usize> {
        Ok(crate::defense::infer_made(&made.model, g)?.0)
    };
    rows.push(SweepRow {
        method: "made".into(),
        rate: alpha1,
        asr: compute_asr(made_predict, poisoned, spec, seed)?,
        acc: compute_acc(made_predict, poisoned)?,
    });
    Ok(rows)
}
